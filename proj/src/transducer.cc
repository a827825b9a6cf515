#include "sens/transducer.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sens/error.h"

namespace sens {

Vocabulary::Vocabulary(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.size() < 2) throw VocabularyError("vocabulary needs blank plus at least one symbol");
  for (int i = 0; i < size(); ++i) {
    const std::string& s = symbols_[i];
    if (s.empty() || s.find_first_of(" \t\r\n") != std::string::npos) {
      throw VocabularyError("vocabulary: bad symbol at index " + std::to_string(i));
    }
    if (!index_.emplace(s, i).second) throw VocabularyError("vocabulary: duplicate symbol '" + s + "'");
  }
}

Vocabulary Vocabulary::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path);
  std::vector<std::string> symbols;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    symbols.push_back(line);
  }
  return Vocabulary(std::move(symbols));
}

void Vocabulary::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary " + path);
  for (const auto& s : symbols_) out << s << '\n';
}

const std::string& Vocabulary::symbol(int id) const {
  if (id < 0 || id >= size()) throw VocabularyError("token id " + std::to_string(id) + " out of range");
  return symbols_[id];
}

std::vector<int> Vocabulary::Encode(std::string_view text) const {
  std::vector<int> ids;
  std::istringstream words{std::string(text)};
  std::string w;
  while (words >> w) {
    auto it = index_.find(w);
    if (it == index_.end() || it->second == kBlankId) {
      throw VocabularyError("word '" + w + "' not in vocabulary");
    }
    ids.push_back(it->second);
  }
  return ids;
}

std::string Vocabulary::Decode(std::span<const int> ids) const {
  std::string text;
  for (int id : ids) {
    if (id == kBlankId) continue;
    if (!text.empty()) text += ' ';
    text += symbol(id);
  }
  return text;
}

template <typename T>
Predictor<T>::Predictor(int vocab_size, int hidden_size, CounterRng& rng) {
  if (vocab_size < 2 || hidden_size < 1) throw ParameterError("predictor: bad dimensions");
  const int h = hidden_size;
  embedding_ = Parameter<T>("predictor.embedding", UniformInit<T>({vocab_size, h}, h, rng));
  w_ih_ = Parameter<T>("predictor.w_ih", UniformInit<T>({h, 4 * h}, h, rng));
  w_hh_ = Parameter<T>("predictor.w_hh", UniformInit<T>({h, 4 * h}, h, rng));
  bias_ = Parameter<T>("predictor.bias", Tensor<T>({1, 4 * h}));
}

template <typename T>
void Predictor<T>::CheckToken(int token) const {
  if (token < 0 || token >= vocab_size()) {
    throw VocabularyError("predictor: token id " + std::to_string(token) + " outside [0, " +
                          std::to_string(vocab_size()) + ")");
  }
}

template <typename T>
std::pair<Var<T>, Var<T>> Predictor<T>::Step(Tape<T>& tape, int token, Var<T> h, Var<T> c) {
  CheckToken(token);
  const int hs = hidden_size();
  const int ids[1] = {token};
  Var<T> x = tape.Embedding(tape.Param(embedding_), ids);
  Var<T> gates = tape.AddRowBroadcast(
      tape.Add(tape.MatMul(x, tape.Param(w_ih_)), tape.MatMul(h, tape.Param(w_hh_))),
      tape.Param(bias_));
  Var<T> i = tape.Sigmoid(tape.SliceCols(gates, 0, hs));
  Var<T> f = tape.Sigmoid(tape.SliceCols(gates, hs, 2 * hs));
  Var<T> g = tape.Tanh(tape.SliceCols(gates, 2 * hs, 3 * hs));
  Var<T> o = tape.Sigmoid(tape.SliceCols(gates, 3 * hs, 4 * hs));
  Var<T> c_next = tape.Add(tape.Mul(f, c), tape.Mul(i, g));
  Var<T> h_next = tape.Mul(o, tape.Tanh(c_next));
  return {h_next, c_next};
}

template <typename T>
Var<T> Predictor<T>::Forward(Tape<T>& tape, std::span<const int> targets) {
  const int hs = hidden_size();
  Var<T> h = tape.Constant(Tensor<T>({1, hs}));
  Var<T> c = tape.Constant(Tensor<T>({1, hs}));
  std::vector<Var<T>> outputs;
  outputs.reserve(targets.size() + 1);
  int token = kBlankId;
  for (std::size_t u = 0; u <= targets.size(); ++u) {
    std::tie(h, c) = Step(tape, token, h, c);
    outputs.push_back(h);
    if (u < targets.size()) token = targets[u];
  }
  return outputs.size() == 1 ? outputs[0] : tape.ConcatRows(outputs);
}

template <typename T>
PredictorState<T> Predictor<T>::StepState(int token, const PredictorState<T>& state) {
  Tape<T> tape(false);
  auto [h, c] = Step(tape, token, tape.Constant(state.hidden), tape.Constant(state.cell));
  return {h.value(), c.value()};
}

template <typename T>
void Predictor<T>::Collect(ParameterList<T>& out) {
  out.push_back(&embedding_);
  out.push_back(&w_ih_);
  out.push_back(&w_hh_);
  out.push_back(&bias_);
}

template <typename T>
Joint<T>::Joint(int enc_dim, int pred_dim, int joint_dim, int vocab_size, CounterRng& rng)
    : enc_proj("joint.enc_proj", enc_dim, joint_dim, rng),
      pred_proj("joint.pred_proj", pred_dim, joint_dim, rng),
      out("joint.out", joint_dim, vocab_size, rng) {}

template <typename T>
Var<T> Joint<T>::LatticeLogProbs(Tape<T>& tape, Var<T> enc, Var<T> pred) {
  return tape.LogSoftmax(out.Forward(tape, tape.Tanh(tape.OuterAddRows(enc, pred))));
}

template <typename T>
Var<T> Joint<T>::LogitsProjected(Tape<T>& tape, Var<T> enc, Var<T> pred) {
  return out.Forward(tape, tape.Tanh(tape.Add(enc, pred)));
}

template <typename T>
Var<T> Joint<T>::Logits(Tape<T>& tape, Var<T> h_ctx, Var<T> g) {
  if (h_ctx.cols() != enc_proj.in_dim() || g.cols() != pred_proj.in_dim()) {
    throw DimensionError("joint: inputs " + ShapeString(h_ctx.shape()) + ", " +
                         ShapeString(g.shape()) + " do not match projections");
  }
  return LogitsProjected(tape, ProjectEncoder(tape, h_ctx), ProjectPredictor(tape, g));
}

template <typename T>
void Joint<T>::Collect(ParameterList<T>& out_params) {
  enc_proj.Collect(out_params);
  pred_proj.Collect(out_params);
  out.Collect(out_params);
}

template <typename T>
int ArgmaxLowest(std::span<const T> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

template <typename T>
std::vector<Emission> GreedySearch(int frame_begin, int frame_end, int max_symbols_per_frame,
                                   const std::function<std::vector<T>(int)>& logits,
                                   const std::function<void(int)>& emit) {
  if (max_symbols_per_frame < 1) throw ParameterError("greedy: max_symbols_per_frame must be >= 1");
  std::vector<Emission> out;
  for (int t = frame_begin; t < frame_end; ++t) {
    for (int n = 0; n < max_symbols_per_frame; ++n) {
      const std::vector<T> z = logits(t);
      const int k = ArgmaxLowest<T>(z);
      if (k == kBlankId) break;
      out.push_back({k, t});
      emit(k);
    }
  }
  return out;
}

template <typename T>
GreedyDecoder<T>::GreedyDecoder(Predictor<T>& predictor, Joint<T>& joint,
                                int max_symbols_per_frame)
    : predictor_(&predictor), joint_(&joint), max_symbols_(max_symbols_per_frame) {
  if (max_symbols_per_frame < 1) throw ParameterError("greedy: max_symbols_per_frame must be >= 1");
  Reset();
}

template <typename T>
void GreedyDecoder<T>::Reset() {
  state_ = predictor_->StepState(kBlankId,
                                 PredictorState<T>::Zero(predictor_->hidden_size()));
  RefreshPrediction();
}

template <typename T>
void GreedyDecoder<T>::RefreshPrediction() {
  Tape<T> tape(false);
  pred_proj_ = joint_->ProjectPredictor(tape, tape.Constant(state_.hidden)).value();
}

template <typename T>
std::vector<Emission> GreedyDecoder<T>::Advance(const Tensor<T>& enc_proj, int frame_offset) {
  if (enc_proj.empty()) return {};
  auto logits = [&](int t) {
    Tape<T> tape(false);
    Var<T> z = joint_->LogitsProjected(
        tape, tape.Constant(enc_proj.RowSlice(t - frame_offset, t - frame_offset + 1)),
        tape.Constant(pred_proj_));
    return z.value().storage();
  };
  auto emit = [&](int token) {
    state_ = predictor_->StepState(token, state_);
    RefreshPrediction();
  };
  return GreedySearch<T>(frame_offset, frame_offset + enc_proj.rows(), max_symbols_,
                         logits, emit);
}

template class Predictor<float>;
template class Predictor<double>;
template class Joint<float>;
template class Joint<double>;
template class GreedyDecoder<float>;
template class GreedyDecoder<double>;
template int ArgmaxLowest<float>(std::span<const float>);
template int ArgmaxLowest<double>(std::span<const double>);
template std::vector<Emission> GreedySearch<float>(
    int, int, int, const std::function<std::vector<float>(int)>&, const std::function<void(int)>&);
template std::vector<Emission> GreedySearch<double>(
    int, int, int, const std::function<std::vector<double>(int)>&, const std::function<void(int)>&);

}  // namespace sens
