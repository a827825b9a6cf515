#ifndef SENS_ORACLES_ORACLES_H_
#define SENS_ORACLES_ORACLES_H_

// Slow, direct reference computations used to check the library. Nothing
// here shares code with the implementations it checks.

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sens::oracle {

// log_probs rows are nodes t*(U+1)+u, V columns, natural-log probabilities.
// Sums probabilities of every monotonic alignment explicitly.
double RnntPathSum(std::span<const double> log_probs, int frames, std::span<const int> targets,
                   int vocab, int blank = 0);
double RnntNll(std::span<const double> log_probs, int frames, std::span<const int> targets,
               int vocab, int blank = 0);
// Sum over alignments of the product of label-arc probabilities only.
double RnntLabelPathSum(std::span<const double> log_probs, int frames,
                        std::span<const int> targets, int vocab, int blank = 0);
// nll + lambda * (-log label-path sum).
double FastEmitLoss(std::span<const double> log_probs, int frames, std::span<const int> targets,
                    int vocab, double lambda, int blank = 0);
// Number of monotonic alignments, C(T-1+U, U).
uint64_t AlignmentCount(int frames, int labels);

// m[t,u] evaluated from the definition; left_chunks < 0 means unlimited.
bool MaskEntry(int t, int u, int chunk_size, int left_chunks);

// Input frames each output frame may depend on after `layers` blocks of
// masked attention followed by a causal convolution of width `kernel`.
std::vector<std::set<int>> ReceptiveFields(int frames, int chunk_size, int left_chunks,
                                           int kernel, int layers);

// All n^n equally likely resamples of (errors, words) pairs; returns the
// sorted micro-WER of each.
std::vector<double> ExhaustiveBootstrap(std::span<const std::pair<int, int>> utterances);

// Linear-interpolated percentile written independently of the library.
double InterpolatedPercentile(std::vector<double> values, double pct);

// Edit distance by plain recursion with memo; independent of the library's
// alignment backtrace.
int EditDistance(std::span<const std::string> a, std::span<const std::string> b);

}  // namespace sens::oracle

#endif  // SENS_ORACLES_ORACLES_H_
