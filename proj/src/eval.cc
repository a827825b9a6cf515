#include "sens/eval.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sens/error.h"
#include "sens/rng.h"

namespace sens {

double EditCounts::Wer() const {
  if (reference_words <= 0) throw ParameterError("WER undefined: zero reference words");
  return static_cast<double>(errors()) / static_cast<double>(reference_words);
}

EditCounts& EditCounts::operator+=(const EditCounts& o) {
  insertions += o.insertions;
  deletions += o.deletions;
  substitutions += o.substitutions;
  reference_words += o.reference_words;
  return *this;
}

std::vector<std::string> SplitWords(std::string_view text, bool lowercase) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) {
    if (lowercase) {
      for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    words.push_back(std::move(w));
  }
  return words;
}

EditCounts Align(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  // d[i][j]: cost of ref[0:i] vs hyp[0:j]
  std::vector<int> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> int& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({sub, at(i, j - 1) + 1, at(i - 1, j) + 1});
    }
  }
  EditCounts c;
  c.reference_words = static_cast<int64_t>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        if (!same) ++c.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      ++c.insertions;
      --j;
    } else {
      ++c.deletions;
      --i;
    }
  }
  return c;
}

EditCounts Align(std::string_view ref, std::string_view hyp, bool lowercase) {
  const auto r = SplitWords(ref, lowercase), h = SplitWords(hyp, lowercase);
  return Align(std::span<const std::string>(r), std::span<const std::string>(h));
}

CorpusWer ComputeCorpusWer(std::span<const EditCounts> per_utterance) {
  if (per_utterance.empty()) throw ParameterError("corpus WER: no utterances");
  CorpusWer r;
  for (const auto& c : per_utterance) r.totals += c;
  r.wer = r.totals.Wer();
  return r;
}

CorpusWer ComputeCorpusWer(std::span<const std::pair<std::string, std::string>> pairs,
                           bool lowercase) {
  std::vector<EditCounts> counts;
  counts.reserve(pairs.size());
  for (const auto& [ref, hyp] : pairs) counts.push_back(Align(ref, hyp, lowercase));
  return ComputeCorpusWer(counts);
}

double Percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ParameterError("percentile of empty sample");
  if (p < 0.0 || p > 100.0) throw ParameterError("percentile outside [0, 100]");
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> BootstrapDistribution(std::span<const EditCounts> per_utterance,
                                          int resamples, uint64_t seed) {
  if (per_utterance.empty()) throw ParameterError("bootstrap: no utterances");
  if (resamples < 1) throw ParameterError("bootstrap: resamples must be >= 1");
  const CounterRng root(seed);
  const uint64_t n = per_utterance.size();
  std::vector<double> wers(resamples);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < resamples; ++r) {
    CounterRng rng = root.Fork(static_cast<uint64_t>(r));
    int64_t errors = 0, words = 0;
    for (uint64_t k = 0; k < n; ++k) {
      const EditCounts& c = per_utterance[rng.UniformInt(n)];
      errors += c.errors();
      words += c.reference_words;
    }
    // A resample of only empty references carries no information; count it
    // as error-free rather than dividing by zero.
    wers[r] = words > 0 ? static_cast<double>(errors) / static_cast<double>(words) : 0.0;
  }
  return wers;
}

BootstrapCi Bootstrap(std::span<const EditCounts> per_utterance, int resamples, uint64_t seed,
                      double lower_pct, double upper_pct) {
  if (lower_pct > upper_pct) throw ParameterError("bootstrap: lower percentile above upper");
  std::vector<double> wers = BootstrapDistribution(per_utterance, resamples, seed);
  std::sort(wers.begin(), wers.end());
  BootstrapCi ci;
  ci.point = ComputeCorpusWer(per_utterance).wer;
  ci.lower = Percentile(wers, lower_pct);
  ci.upper = Percentile(wers, upper_pct);
  ci.resamples = resamples;
  ci.seed = seed;
  return ci;
}

namespace {

std::string Fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string Signed2(double v) {
  std::string s = Fixed2(v);
  return s[0] == '-' ? s : "+" + s;
}

}  // namespace

std::string FormatWerCell(const BootstrapCi& ci, const BootstrapCi* baseline) {
  std::string cell = Fixed2(100.0 * ci.point);
  if (baseline != nullptr) cell += "(" + Signed2(100.0 * (ci.point - baseline->point)) + ")";
  cell += " [" + Fixed2(100.0 * ci.lower) + ";" + Fixed2(100.0 * ci.upper) + "]";
  return cell;
}

std::string FormatRelativeDelta(double value, double baseline) {
  if (baseline == 0.0) return "n/a";
  return Signed2(100.0 * (value - baseline) / baseline) + "%";
}

std::string FormatEditTable(const CorpusWer& baseline, const CorpusWer& system,
                            std::string_view baseline_name, std::string_view system_name) {
  char line[256];
  std::string out;
  std::snprintf(line, sizeof(line), "%-24s %12.*s %20.*s\n", "",
                static_cast<int>(baseline_name.size()), baseline_name.data(),
                static_cast<int>(system_name.size()), system_name.data());
  out += line;
  std::snprintf(line, sizeof(line), "%-24s %12s %20s\n", "WER (%)",
                Fixed2(100.0 * baseline.wer).c_str(), Fixed2(100.0 * system.wer).c_str());
  out += line;
  const struct {
    const char* name;
    int64_t base, sys;
  } rows[] = {
      {"Number of Insertions", baseline.totals.insertions, system.totals.insertions},
      {"Number of Deletions", baseline.totals.deletions, system.totals.deletions},
      {"Number of Substitutions", baseline.totals.substitutions, system.totals.substitutions},
  };
  for (const auto& r : rows) {
    const std::string cell = std::to_string(r.sys) + " (" +
                             FormatRelativeDelta(static_cast<double>(r.sys),
                                                 static_cast<double>(r.base)) + ")";
    std::snprintf(line, sizeof(line), "%-24s %12lld %20s\n", r.name,
                  static_cast<long long>(r.base), cell.c_str());
    out += line;
  }
  return out;
}

}  // namespace sens
