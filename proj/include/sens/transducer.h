#ifndef SENS_TRANSDUCER_H_
#define SENS_TRANSDUCER_H_

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sens/autodiff.h"
#include "sens/layers.h"

namespace sens {

inline constexpr int kBlankId = 0;

// Index = line number in the vocabulary file; symbol 0 is the blank.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> symbols);

  static Vocabulary Load(const std::string& path);
  void Save(const std::string& path) const;

  int size() const { return static_cast<int>(symbols_.size()); }
  const std::string& symbol(int id) const;
  // Whitespace-separated words -> ids; unknown words raise VocabularyError.
  std::vector<int> Encode(std::string_view text) const;
  std::string Decode(std::span<const int> ids) const;
  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

template <typename T>
struct PredictorState {
  Tensor<T> hidden;  // [1, H]
  Tensor<T> cell;    // [1, H]
  static PredictorState Zero(int hidden_size) {
    return {Tensor<T>({1, hidden_size}), Tensor<T>({1, hidden_size})};
  }
};

// Embedding + single-layer LSTM, gate order i, f, g, o. The blank
// embedding doubles as start-of-sequence.
template <typename T>
class Predictor {
 public:
  Predictor() = default;
  Predictor(int vocab_size, int hidden_size, CounterRng& rng);

  int hidden_size() const { return w_hh_.value.rows(); }
  int vocab_size() const { return embedding_.value.rows(); }

  // One LSTM step on the tape; h/c are [1, H]. Returns {h', c'}.
  std::pair<Var<T>, Var<T>> Step(Tape<T>& tape, int token, Var<T> h, Var<T> c);
  // Outputs for label history [blank, y1 .. yU]: [(U+1), H].
  Var<T> Forward(Tape<T>& tape, std::span<const int> targets);
  // Inference helper (no gradients). g is the new hidden state.
  PredictorState<T> StepState(int token, const PredictorState<T>& state);

  void Collect(ParameterList<T>& out);

  Parameter<T>& embedding() { return embedding_; }
  Parameter<T>& w_ih() { return w_ih_; }
  Parameter<T>& w_hh() { return w_hh_; }
  Parameter<T>& bias() { return bias_; }

 private:
  void CheckToken(int token) const;

  Parameter<T> embedding_;  // [V, H]
  Parameter<T> w_ih_;       // [H, 4H]
  Parameter<T> w_hh_;       // [H, 4H]
  Parameter<T> bias_;       // [1, 4H]
};

// logits = out(tanh(enc_proj(h_ctx) + pred_proj(g)))
template <typename T>
class Joint {
 public:
  Joint() = default;
  Joint(int enc_dim, int pred_dim, int joint_dim, int vocab_size, CounterRng& rng);

  Var<T> ProjectEncoder(Tape<T>& tape, Var<T> h_ctx) { return enc_proj.Forward(tape, h_ctx); }
  Var<T> ProjectPredictor(Tape<T>& tape, Var<T> g) { return pred_proj.Forward(tape, g); }
  // Projected rows [a, J] and [b, J] -> lattice log-probs [a*b, V].
  Var<T> LatticeLogProbs(Tape<T>& tape, Var<T> enc, Var<T> pred);
  // Single node: [1, enc_dim], [1, pred_dim] -> logits [1, V].
  Var<T> Logits(Tape<T>& tape, Var<T> h_ctx, Var<T> g);
  // Logits from already projected rows.
  Var<T> LogitsProjected(Tape<T>& tape, Var<T> enc, Var<T> pred);

  void Collect(ParameterList<T>& out);

  Linear<T> enc_proj;
  Linear<T> pred_proj;
  Linear<T> out;
};

struct Emission {
  int token = 0;
  int frame = 0;
  friend bool operator==(const Emission&, const Emission&) = default;
};

// Lowest index among maxima, so the blank wins ties.
template <typename T>
int ArgmaxLowest(std::span<const T> values);

// The greedy recursion itself. `logits(frame)` scores the current label
// history at that frame; `emit(token)` advances the history.
template <typename T>
std::vector<Emission> GreedySearch(int frame_begin, int frame_end, int max_symbols_per_frame,
                                   const std::function<std::vector<T>(int)>& logits,
                                   const std::function<void(int)>& emit);

// Incremental greedy decoder over projected encoder rows; the same object
// serves offline (one call) and streaming (one call per chunk).
template <typename T>
class GreedyDecoder {
 public:
  GreedyDecoder(Predictor<T>& predictor, Joint<T>& joint, int max_symbols_per_frame);

  void Reset();
  // enc_proj:[n, J] rows for frames frame_offset .. frame_offset+n-1.
  std::vector<Emission> Advance(const Tensor<T>& enc_proj, int frame_offset);

 private:
  void RefreshPrediction();

  Predictor<T>* predictor_;
  Joint<T>* joint_;
  int max_symbols_;
  PredictorState<T> state_;
  Tensor<T> pred_proj_;  // [1, J] for the current state
};

}  // namespace sens

#endif  // SENS_TRANSDUCER_H_
