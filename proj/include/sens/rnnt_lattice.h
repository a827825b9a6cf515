#ifndef SENS_RNNT_LATTICE_H_
#define SENS_RNNT_LATTICE_H_

// Transducer lattice recursions. Inputs are log-probabilities of shape
// [frames * (U+1), vocab] where row t*(U+1)+u is lattice node (t, u). All
// accumulation is done in 64-bit log space.

#include <span>
#include <vector>

namespace sens {

struct LatticeVariables {
  int frames = 0;
  int labels = 0;  // U; nodes have u in [0, U]
  std::vector<double> log_alpha;  // frames x (U+1)
  std::vector<double> log_beta;   // frames x (U+1), includes the final blank
  double log_total = 0.0;         // log P(y|x)

  double alpha(int t, int u) const { return log_alpha[t * (labels + 1) + u]; }
  double beta(int t, int u) const { return log_beta[t * (labels + 1) + u]; }
};

struct RnntLossResult {
  double loss = 0.0;          // -log P + lambda * label-only term
  double nll = 0.0;           // -log P
  double label_term = 0.0;    // -log of the label-only lattice sum
  std::vector<double> grad;   // d loss / d log_probs, same layout as input
};

// Throws on malformed input (row count, target ids, blank in targets).
template <typename T>
void ValidateRnntInputs(std::span<const T> log_probs, int frames,
                        std::span<const int> targets, int vocab, int blank);

// Forward-backward variables. With `label_only`, blank transitions (including
// the terminal one) carry weight 1, so only label emissions are scored.
template <typename T>
LatticeVariables ComputeLatticeVariables(std::span<const T> log_probs, int frames,
                                         std::span<const int> targets, int vocab,
                                         int blank, bool label_only = false);

template <typename T>
double RnntNegLogLikelihood(std::span<const T> log_probs, int frames,
                            std::span<const int> targets, int vocab, int blank = 0);

// FastEmit-regularized loss:
//   L = -log P(y|x) + lambda * (-log sum_paths prod_{label arcs} P(label))
// The second term depends only on label-transition probabilities, so its
// gradient adds lambda-weighted label posteriors and leaves blank arcs alone.
// lambda = 0 returns exactly the plain transducer loss.
template <typename T>
RnntLossResult RnntLossWithGrad(std::span<const T> log_probs, int frames,
                                std::span<const int> targets, int vocab,
                                double fastemit_lambda, int blank = 0);

}  // namespace sens

#endif  // SENS_RNNT_LATTICE_H_
