#include "sens/distillation.h"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "sens/error.h"
#include "sens/rng.h"

namespace sens {

void LossWeights::Validate() const {
  if (!(alpha >= 0.0)) throw ParameterError("loss weights: alpha must be >= 0");
  if (!(fastemit_lambda >= 0.0)) throw ParameterError("loss weights: fastemit lambda must be >= 0");
}

HashTeacher::HashTeacher(int dim) : dim_(dim) {
  if (dim < 1) throw ParameterError("teacher dim must be >= 1");
}

std::vector<float> HashTeacher::Embed(std::string_view, std::string_view text) const {
  CounterRng rng(Fnv1a64(text), 0);
  std::vector<double> v(dim_);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.Normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  std::vector<float> out(dim_);
  for (int i = 0; i < dim_; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

namespace {

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int DecodeChar(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::vector<float> FloatsFromLe(std::span<const uint8_t> bytes) {
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    uint32_t u = 0;
    for (int b = 3; b >= 0; --b) u = (u << 8) | bytes[4 * i + b];
    out[i] = std::bit_cast<float>(u);
  }
  return out;
}

std::vector<uint8_t> FloatsToLe(std::span<const float> values) {
  std::vector<uint8_t> out;
  out.reserve(values.size() * 4);
  for (float f : values) {
    const uint32_t u = std::bit_cast<uint32_t>(f);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<uint8_t>(u >> (8 * b)));
  }
  return out;
}

}  // namespace

std::string Base64Encode(std::span<const uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const uint32_t n = bytes[i] << 16;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<uint8_t> Base64Decode(std::string_view text) {
  if (text.size() % 4 != 0) throw FormatError("base64: length not a multiple of 4");
  std::vector<uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::array<int, 4> v{};
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
        continue;
      }
      if (pad > 0) throw FormatError("base64: data after padding");
      v[k] = DecodeChar(c);
      if (v[k] < 0) throw FormatError("base64: invalid character");
    }
    const uint32_t n = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<uint8_t>(n >> 16));
    if (pad < 2) out.push_back(static_cast<uint8_t>(n >> 8));
    if (pad < 1) out.push_back(static_cast<uint8_t>(n));
  }
  return out;
}

FileTeacher::FileTeacher(int dim, std::map<std::string, std::vector<float>> table)
    : dim_(dim), table_(std::move(table)) {
  if (dim < 1) throw ParameterError("teacher dim must be >= 1");
  for (const auto& [id, v] : table_) {
    if (static_cast<int>(v.size()) != dim) {
      throw DimensionError("teacher embedding for " + id + " has dim " +
                           std::to_string(v.size()) + ", expected " + std::to_string(dim));
    }
  }
}

FileTeacher FileTeacher::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open teacher file " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("#dim=", 0) != 0) {
    throw FormatError("teacher file " + path + ": missing '#dim=' header");
  }
  int dim = 0;
  try {
    dim = std::stoi(line.substr(5));
  } catch (const std::exception&) {
    throw FormatError("teacher file " + path + ": bad dim header");
  }
  std::map<std::string, std::vector<float>> table;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError("teacher file " + path + ":" + std::to_string(line_no) + ": no tab");
    }
    const auto bytes = Base64Decode(std::string_view(line).substr(tab + 1));
    if (bytes.size() % 4 != 0) {
      throw FormatError("teacher file " + path + ":" + std::to_string(line_no) +
                        ": payload not whole floats");
    }
    table[line.substr(0, tab)] = FloatsFromLe(bytes);
  }
  return FileTeacher(dim, std::move(table));
}

void FileTeacher::Save(const std::string& path, int dim,
                       const std::map<std::string, std::vector<float>>& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write teacher file " + path);
  out << "#dim=" << dim << '\n';
  for (const auto& [id, v] : table) {
    if (static_cast<int>(v.size()) != dim) throw DimensionError("teacher embedding dim mismatch for " + id);
    out << id << '\t' << Base64Encode(FloatsToLe(v)) << '\n';
  }
}

std::vector<float> FileTeacher::Embed(std::string_view utt_id, std::string_view) const {
  auto it = table_.find(std::string(utt_id));
  if (it == table_.end()) throw IoError("no teacher embedding for utterance " + std::string(utt_id));
  return it->second;
}

template <typename T>
Var<T> MseLoss(Tape<T>& tape, const std::vector<Var<T>>& contexts, const Tensor<T>& teacher) {
  if (contexts.empty()) throw ParameterError("mse loss: need at least one chunk");
  const int d = teacher.size();
  for (const auto& c : contexts) {
    if (c.rows() != 1 || c.cols() != d) {
      throw DimensionError("mse loss: context " + ShapeString(c.shape()) +
                           " vs teacher dim " + std::to_string(d));
    }
  }
  Var<T> stacked = contexts.size() == 1 ? contexts[0] : tape.ConcatRows(contexts);
  Var<T> target = tape.BroadcastRows(tape.Constant(teacher.Reshaped({1, d})),
                                     static_cast<int>(contexts.size()));
  return tape.MeanSquaredError(stacked, target);
}

template <typename T>
Var<T> TotalLoss(Tape<T>& tape, Var<T> rnnt, Var<T> mse, const LossWeights& w) {
  w.Validate();
  return tape.Add(rnnt, tape.Scale(mse, static_cast<T>(w.alpha)));
}

template Var<float> MseLoss(Tape<float>&, const std::vector<Var<float>>&, const Tensor<float>&);
template Var<double> MseLoss(Tape<double>&, const std::vector<Var<double>>&, const Tensor<double>&);
template Var<float> TotalLoss(Tape<float>&, Var<float>, Var<float>, const LossWeights&);
template Var<double> TotalLoss(Tape<double>&, Var<double>, Var<double>, const LossWeights&);

}  // namespace sens
