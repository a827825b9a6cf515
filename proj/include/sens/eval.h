#ifndef SENS_EVAL_H_
#define SENS_EVAL_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sens {

struct EditCounts {
  int64_t insertions = 0;
  int64_t deletions = 0;
  int64_t substitutions = 0;
  int64_t reference_words = 0;

  int64_t errors() const { return insertions + deletions + substitutions; }
  // Throws ParameterError when reference_words is 0.
  double Wer() const;
  EditCounts& operator+=(const EditCounts& o);
  friend bool operator==(const EditCounts&, const EditCounts&) = default;
};

std::vector<std::string> SplitWords(std::string_view text, bool lowercase = false);

// Unit-cost Levenshtein; on ties the backtrace prefers substitution (or
// match), then insertion, then deletion.
EditCounts Align(std::span<const std::string> ref, std::span<const std::string> hyp);
EditCounts Align(std::string_view ref, std::string_view hyp, bool lowercase = false);

struct CorpusWer {
  double wer = 0.0;
  EditCounts totals;
};

// Micro-average: pools edits and reference words before dividing.
CorpusWer ComputeCorpusWer(std::span<const std::pair<std::string, std::string>> pairs,
                           bool lowercase = false);
CorpusWer ComputeCorpusWer(std::span<const EditCounts> per_utterance);

struct BootstrapCi {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  int resamples = 0;
  uint64_t seed = 0;
};

// Linear interpolation between order statistics at p/100 * (n-1).
double Percentile(std::span<const double> sorted, double p);

// Per-utterance (errors, reference words). Each resample draws utterances
// with replacement from its own forked stream, so results do not depend on
// thread count.
BootstrapCi Bootstrap(std::span<const EditCounts> per_utterance, int resamples, uint64_t seed,
                      double lower_pct = 2.5, double upper_pct = 97.5);
std::vector<double> BootstrapDistribution(std::span<const EditCounts> per_utterance,
                                          int resamples, uint64_t seed);

// "7.55 [7.24;7.87]" for a baseline, "7.21(-0.34) [6.89;7.53]" against one.
// Values are percentages with two decimals.
std::string FormatWerCell(const BootstrapCi& ci, const BootstrapCi* baseline);
// "-20.51%" style relative change; baseline 0 gives "n/a".
std::string FormatRelativeDelta(double value, double baseline);
// Edit-type comparison between a baseline and a system.
std::string FormatEditTable(const CorpusWer& baseline, const CorpusWer& system,
                            std::string_view baseline_name = "Baseline",
                            std::string_view system_name = "System");

}  // namespace sens

#endif  // SENS_EVAL_H_
