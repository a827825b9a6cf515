#include "sens/trainer.h"

#include <cmath>
#include <exception>
#include <string>

#include "sens/error.h"

namespace sens {

template <typename T>
Optimizer<T>::Optimizer(const OptimizerConfig& config, const ParameterList<T>& params)
    : config_(config), params_(params) {
  config.Validate();
  if (config.kind == "adam") {
    for (const auto* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
}

template <typename T>
void Optimizer<T>::Step(const std::vector<bool>& frozen) {
  ++steps_;
  double scale = 1.0;
  if (config_.grad_clip > 0.0) {
    double sq = 0.0;
    for (std::size_t k = 0; k < params_.size(); ++k) {
      if (frozen[k]) continue;
      for (T g : params_[k]->grad.values()) sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > config_.grad_clip) scale = config_.grad_clip / norm;
  }
  const double lr = config_.learning_rate, wd = config_.weight_decay;
  const bool adam = config_.kind == "adam";
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, steps_), c2 = 1.0 - std::pow(b2, steps_);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (frozen[k]) continue;
    Parameter<T>& p = *params_[k];
    auto w = p.value.values();
    auto g = p.grad.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = scale * static_cast<double>(g[i]);
      double update = gi;
      if (adam) {
        T& m = m_[k][i];
        T& v = v_[k][i];
        m = static_cast<T>(b1 * m + (1.0 - b1) * gi);
        v = static_cast<T>(b2 * v + (1.0 - b2) * gi * gi);
        update = (m / c1) / (std::sqrt(v / c2) + config_.epsilon);
      }
      w[i] = static_cast<T>(w[i] - lr * (update + wd * w[i]));
    }
  }
}

template <typename T>
Trainer<T>::Trainer(SensAsrModel<T>& model, const RunConfig& config)
    : model_(&model),
      config_(config),
      params_(model.Parameters()),
      optimizer_(config.optimizer, params_) {
  config.Validate();
  frozen_.resize(params_.size(), false);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    for (const auto& prefix : config.train.frozen_prefixes) {
      if (params_[k]->name.rfind(prefix, 0) == 0) frozen_[k] = true;
    }
  }
}

template <typename T>
StepStats Trainer<T>::Step(const std::vector<const TrainExample*>& batch) {
  if (batch.empty()) throw ParameterError("train step: empty batch");
  const int b = static_cast<int>(batch.size());
  CounterRng rng = CounterRng(config_.seed).Fork(0x64637400ULL + static_cast<uint64_t>(step_));
  int max_frames = 1;
  for (const auto* ex : batch) max_frames = std::max(max_frames, EncoderFrames(ex->features.rows()));
  const ChunkSpec drawn = SampleDctConfig(config_.dct, max_frames, rng);

  std::vector<std::vector<Tensor<T>>> grads(b);
  std::vector<StepStats> stats(b);
  std::vector<std::exception_ptr> errors(b);
#pragma omp parallel for num_threads(config_.train.threads) schedule(static)
  for (int i = 0; i < b; ++i) {
    try {
      const TrainExample& ex = *batch[i];
      ChunkSpec spec = drawn;
      spec.total_frames = EncoderFrames(ex.features.rows());
      spec.chunk_size = std::min(spec.chunk_size, spec.total_frames);
      Tensor<T> teacher;
      if (!ex.teacher.empty()) {
        teacher = Tensor<float>({1, static_cast<int>(ex.teacher.size())}, ex.teacher).Cast<T>();
      }
      Tape<T> tape;
      LossResult<T> r = model_->Loss(tape, ex.features.Cast<T>(), ex.targets,
                                     teacher.empty() ? nullptr : &teacher, spec, config_.loss);
      stats[i].rnnt = r.rnnt.value()[0];
      stats[i].mse = r.mse ? (*r.mse).value()[0] : 0.0;
      stats[i].total = r.total.value()[0];
      if (!std::isfinite(stats[i].total)) {
        std::string where = "unknown";
        if (auto bad = tape.FirstNonFinite()) {
          where = "#" + std::to_string(bad->first) + " " + bad->second;
        }
        throw NumericError("non-finite loss at step " + std::to_string(step_) + " on " + ex.id +
                           "; first non-finite tensor " + where);
      }
      tape.Backward(r.total);
      tape.AccumulateParamGrads(params_, grads[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Fixed summation order keeps results independent of thread count.
  StepStats out;
  out.step = step_;
  const T inv = T(1) / static_cast<T>(b);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor<T>& g = params_[k]->grad;
    g.Fill(T(0));
    for (int i = 0; i < b; ++i) {
      if (grads[i][k].empty()) continue;
      auto src = grads[i][k].values();
      auto dst = g.values();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
    for (T& x : g.values()) x *= inv;
  }
  for (const auto& s : stats) {
    out.rnnt += s.rnnt / b;
    out.mse += s.mse / b;
    out.total += s.total / b;
  }
  optimizer_.Step(frozen_);
  ++step_;
  return out;
}

template <typename T>
void Trainer<T>::Train(const std::vector<TrainExample>& data,
                       const std::function<void(const StepStats&)>& on_log,
                       const std::function<void(int)>& on_checkpoint) {
  if (data.empty()) throw ParameterError("train: no examples");
  const CounterRng root = CounterRng(config_.seed).Fork(0x62617463ULL);
  for (int s = 0; s < config_.train.steps; ++s) {
    CounterRng rng = root.Fork(static_cast<uint64_t>(step_));
    std::vector<const TrainExample*> batch;
    for (int i = 0; i < config_.train.batch_size; ++i) {
      batch.push_back(&data[rng.UniformInt(data.size())]);
    }
    const StepStats st = Step(batch);
    if (on_log && (st.step % config_.train.log_every == 0 || s + 1 == config_.train.steps)) {
      on_log(st);
    }
    if (on_checkpoint && config_.train.checkpoint_every > 0 &&
        step_ % config_.train.checkpoint_every == 0) {
      on_checkpoint(step_);
    }
  }
}

TrainExample MakeExample(std::string id, std::string text, Tensor<float> features,
                         const Vocabulary& vocab, const TeacherProvider* teacher) {
  TrainExample ex;
  ex.targets = vocab.Encode(text);
  if (teacher != nullptr) ex.teacher = teacher->Embed(id, text);
  ex.id = std::move(id);
  ex.text = std::move(text);
  ex.features = std::move(features);
  return ex;
}

std::vector<TrainExample> LoadExamples(const std::vector<ManifestEntry>& manifest,
                                       const Vocabulary& vocab, const TeacherProvider* teacher,
                                       int feat_dim) {
  std::vector<TrainExample> out;
  out.reserve(manifest.size());
  for (const auto& m : manifest) {
    Tensor<float> f = ReadFeatures(m.feature_path);
    if (f.cols() != feat_dim) {
      throw DimensionError(m.feature_path + ": feature dim " + std::to_string(f.cols()) +
                           ", model expects " + std::to_string(feat_dim));
    }
    out.push_back(MakeExample(m.id, m.transcript, std::move(f), vocab, teacher));
  }
  return out;
}

template <typename T>
std::vector<std::pair<std::string, std::string>> DecodeCorpus(
    SensAsrModel<T>& model, const std::vector<TrainExample>& examples, const Vocabulary& vocab,
    int chunk, int left, int context_window) {
  std::vector<std::pair<std::string, std::string>> out(examples.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    const int frames = EncoderFrames(ex.features.rows());
    const ChunkSpec spec{chunk <= 0 ? frames : std::min(chunk, frames), left, frames};
    std::vector<int> ids;
    for (const auto& e : model.DecodeOffline(ex.features.Cast<T>(), spec, context_window)) {
      ids.push_back(e.token);
    }
    out[i] = {ex.text, vocab.Decode(ids)};
  }
  return out;
}

template std::vector<std::pair<std::string, std::string>> DecodeCorpus(
    SensAsrModel<float>&, const std::vector<TrainExample>&, const Vocabulary&, int, int, int);
template std::vector<std::pair<std::string, std::string>> DecodeCorpus(
    SensAsrModel<double>&, const std::vector<TrainExample>&, const Vocabulary&, int, int, int);

template class Optimizer<float>;
template class Optimizer<double>;
template class Trainer<float>;
template class Trainer<double>;

}  // namespace sens
