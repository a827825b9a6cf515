#include "sens/config.h"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "sens/error.h"
#include "sens/io.h"

namespace sens {

void OptimizerConfig::Validate() const {
  if (kind != "sgd" && kind != "adam") throw ParameterError("optimizer kind must be sgd or adam");
  if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ParameterError("weight decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ParameterError("adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ParameterError("adam epsilon must be positive");
  if (!(grad_clip >= 0.0)) throw ParameterError("grad clip must be >= 0");
}

void TrainConfig::Validate() const {
  if (batch_size < 1) throw ParameterError("batch size must be >= 1");
  if (steps < 0) throw ParameterError("steps must be >= 0");
  if (log_every < 1) throw ParameterError("log_every must be >= 1");
  if (checkpoint_every < 0) throw ParameterError("checkpoint_every must be >= 0");
  if (threads < 1) throw ParameterError("threads must be >= 1");
}

void RunConfig::Validate() const {
  model.Validate();
  dct.Validate();
  loss.Validate();
  optimizer.Validate();
  train.Validate();
  if (model.encoder.d_model % model.encoder.num_heads != 0) {
    throw ParameterError("d_model must be divisible by num_heads");
  }
}

int ParseContextChunks(const std::string& value) {
  if (value == "unlimited" || value == "inf" || value == "-1") return kUnlimitedContext;
  int v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size() || v < 0) {
    throw ParameterError("bad chunk count '" + value + "'");
  }
  return v;
}

std::string FormatContextChunks(int chunks) {
  return chunks == kUnlimitedContext ? "unlimited" : std::to_string(chunks);
}

namespace {

struct Field {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

int ToInt(const std::string& key, const std::string& v) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ParameterError("config " + key + ": expected integer, got '" + v + "'");
  }
  return out;
}

double ToDouble(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParameterError("config " + key + ": expected number, got '" + v + "'");
  }
}

bool ToBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParameterError("config " + key + ": expected boolean, got '" + v + "'");
}

std::string Num(double d) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  return buf;
}

// Every key, bound to one config instance.
std::map<std::string, Field> Fields(RunConfig& c) {
  std::map<std::string, Field> f;
  auto int_field = [&f](const std::string& k, int& ref) {
    f[k] = {[&ref, k](const std::string& v) { ref = ToInt(k, v); },
            [&ref] { return std::to_string(ref); }};
  };
  auto dbl_field = [&f](const std::string& k, double& ref) {
    f[k] = {[&ref, k](const std::string& v) { ref = ToDouble(k, v); }, [&ref] { return Num(ref); }};
  };
  auto chunks_field = [&f](const std::string& k, int& ref) {
    f[k] = {[&ref](const std::string& v) { ref = ParseContextChunks(v); },
            [&ref] { return FormatContextChunks(ref); }};
  };
  int_field("encoder.feat_dim", c.model.encoder.feat_dim);
  int_field("encoder.num_layers", c.model.encoder.num_layers);
  int_field("encoder.d_model", c.model.encoder.d_model);
  int_field("encoder.num_heads", c.model.encoder.num_heads);
  int_field("encoder.ffn_dim", c.model.encoder.ffn_dim);
  int_field("encoder.conv_kernel", c.model.encoder.conv_kernel);
  int_field("encoder.frontend_channels", c.model.encoder.frontend_channels);
  int_field("encoder.max_positions", c.model.encoder.max_positions);
  f["context.enabled"] = {[&c](const std::string& v) { c.model.context.enabled = ToBool("context.enabled", v); },
                          [&c] { return std::string(c.model.context.enabled ? "true" : "false"); }};
  int_field("context.num_decoder_layers", c.model.context.num_decoder_layers);
  int_field("context.teacher_dim", c.model.context.teacher_dim);
  chunks_field("context.window_chunks", c.model.context.window_chunks);
  int_field("model.vocab_size", c.model.vocab_size);
  int_field("model.predictor_hidden", c.model.predictor_hidden);
  int_field("model.joint_dim", c.model.joint_dim);
  int_field("model.max_symbols_per_frame", c.model.max_symbols_per_frame);
  dbl_field("dct.chunked_batch_fraction", c.dct.chunked_batch_fraction);
  dbl_field("dct.chunk_ms_min", c.dct.chunk_ms_min);
  dbl_field("dct.chunk_ms_max", c.dct.chunk_ms_max);
  dbl_field("dct.frame_ms", c.dct.frame_ms);
  dbl_field("loss.alpha", c.loss.alpha);
  dbl_field("loss.fastemit_lambda", c.loss.fastemit_lambda);
  f["optim.kind"] = {[&c](const std::string& v) { c.optimizer.kind = v; },
                     [&c] { return c.optimizer.kind; }};
  dbl_field("optim.learning_rate", c.optimizer.learning_rate);
  dbl_field("optim.weight_decay", c.optimizer.weight_decay);
  dbl_field("optim.beta1", c.optimizer.beta1);
  dbl_field("optim.beta2", c.optimizer.beta2);
  dbl_field("optim.epsilon", c.optimizer.epsilon);
  dbl_field("optim.grad_clip", c.optimizer.grad_clip);
  int_field("train.batch_size", c.train.batch_size);
  int_field("train.steps", c.train.steps);
  int_field("train.log_every", c.train.log_every);
  int_field("train.checkpoint_every", c.train.checkpoint_every);
  int_field("train.threads", c.train.threads);
  f["train.frozen_prefixes"] = {
      [&c](const std::string& v) {
        c.train.frozen_prefixes.clear();
        std::istringstream in(v);
        std::string item;
        while (std::getline(in, item, ',')) {
          if (!item.empty()) c.train.frozen_prefixes.push_back(item);
        }
      },
      [&c] {
        std::string s;
        for (const auto& p : c.train.frozen_prefixes) s += (s.empty() ? "" : ",") + p;
        return s;
      }};
  f["seed"] = {[&c](const std::string& v) {
                 try {
                   c.seed = std::stoull(v);
                 } catch (const std::exception&) {
                   throw ParameterError("config seed: expected unsigned integer, got '" + v + "'");
                 }
               },
               [&c] { return std::to_string(c.seed); }};
  return f;
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::Set(const std::string& key, const std::string& value) {
  auto fields = Fields(*this);
  auto it = fields.find(key);
  if (it == fields.end()) throw ParameterError("unknown config key '" + key + "'");
  it->second.set(value);
}

std::string RunConfig::ToString() const {
  auto fields = Fields(const_cast<RunConfig&>(*this));
  std::string out;
  for (const auto& [k, field] : fields) out += k + " = " + field.get() + "\n";
  return out;
}

std::vector<std::string> RunConfig::Keys() const {
  std::vector<std::string> keys;
  for (const auto& [k, field] : Fields(const_cast<RunConfig&>(*this))) keys.push_back(k);
  return keys;
}

void ApplyConfigText(RunConfig& config, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(origin + ":" + std::to_string(n) + ": expected 'key = value'");
    }
    config.Set(Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
  }
}

RunConfig LoadRunConfig(const std::string& path) {
  RunConfig c;
  ApplyConfigText(c, ReadFile(path), path);
  return c;
}

}  // namespace sens
