#include "oracles/oracles.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace sens::oracle {

namespace {

// Visits every alignment as an explicit list of (t, u, symbol) arcs.
struct Arc {
  int t, u, symbol;
};

void Enumerate(int frames, std::span<const int> targets, int blank,
               const std::function<void(const std::vector<Arc>&)>& visit) {
  const int labels = static_cast<int>(targets.size());
  std::vector<Arc> path;
  std::function<void(int, int)> walk = [&](int t, int u) {
    if (t == frames - 1 && u == labels) {
      path.push_back({t, u, blank});
      visit(path);
      path.pop_back();
      return;
    }
    if (t < frames - 1) {
      path.push_back({t, u, blank});
      walk(t + 1, u);
      path.pop_back();
    }
    if (u < labels) {
      path.push_back({t, u, targets[u]});
      walk(t, u + 1);
      path.pop_back();
    }
  };
  walk(0, 0);
}

double Prob(std::span<const double> lp, int labels, int vocab, const Arc& a) {
  return std::exp(lp[(static_cast<std::size_t>(a.t) * (labels + 1) + a.u) * vocab + a.symbol]);
}

}  // namespace

double RnntPathSum(std::span<const double> log_probs, int frames, std::span<const int> targets,
                   int vocab, int blank) {
  const int labels = static_cast<int>(targets.size());
  double total = 0.0;
  Enumerate(frames, targets, blank, [&](const std::vector<Arc>& path) {
    double p = 1.0;
    for (const Arc& a : path) p *= Prob(log_probs, labels, vocab, a);
    total += p;
  });
  return total;
}

double RnntNll(std::span<const double> log_probs, int frames, std::span<const int> targets,
               int vocab, int blank) {
  return -std::log(RnntPathSum(log_probs, frames, targets, vocab, blank));
}

double RnntLabelPathSum(std::span<const double> log_probs, int frames,
                        std::span<const int> targets, int vocab, int blank) {
  const int labels = static_cast<int>(targets.size());
  double total = 0.0;
  Enumerate(frames, targets, blank, [&](const std::vector<Arc>& path) {
    double p = 1.0;
    for (const Arc& a : path) {
      if (a.symbol != blank) p *= Prob(log_probs, labels, vocab, a);
    }
    total += p;
  });
  return total;
}

double FastEmitLoss(std::span<const double> log_probs, int frames, std::span<const int> targets,
                    int vocab, double lambda, int blank) {
  const double nll = RnntNll(log_probs, frames, targets, vocab, blank);
  if (lambda == 0.0) return nll;
  return nll - lambda * std::log(RnntLabelPathSum(log_probs, frames, targets, vocab, blank));
}

uint64_t AlignmentCount(int frames, int labels) {
  // C(frames - 1 + labels, labels)
  uint64_t c = 1;
  for (int k = 1; k <= labels; ++k) c = c * static_cast<uint64_t>(frames - 1 + k) / k;
  return c;
}

bool MaskEntry(int t, int u, int chunk_size, int left_chunks) {
  const int ct = t / chunk_size, cu = u / chunk_size;
  if (cu > ct) return false;
  return left_chunks < 0 || cu >= ct - left_chunks;
}

std::vector<std::set<int>> ReceptiveFields(int frames, int chunk_size, int left_chunks,
                                           int kernel, int layers) {
  std::vector<std::set<int>> dep(frames);
  for (int t = 0; t < frames; ++t) dep[t] = {t};
  for (int l = 0; l < layers; ++l) {
    std::vector<std::set<int>> att(frames);
    for (int t = 0; t < frames; ++t) {
      att[t] = dep[t];  // residual path
      for (int u = 0; u < frames; ++u) {
        if (MaskEntry(t, u, chunk_size, left_chunks)) att[t].insert(dep[u].begin(), dep[u].end());
      }
    }
    std::vector<std::set<int>> conv(frames);
    for (int t = 0; t < frames; ++t) {
      for (int j = std::max(0, t - kernel + 1); j <= t; ++j) {
        conv[t].insert(att[j].begin(), att[j].end());
      }
    }
    dep = std::move(conv);
  }
  return dep;
}

std::vector<double> ExhaustiveBootstrap(std::span<const std::pair<int, int>> utterances) {
  const int n = static_cast<int>(utterances.size());
  std::vector<double> out;
  std::vector<int> pick(n, 0);
  while (true) {
    long errors = 0, words = 0;
    for (int k : pick) {
      errors += utterances[k].first;
      words += utterances[k].second;
    }
    out.push_back(words > 0 ? static_cast<double>(errors) / words : 0.0);
    int i = 0;
    while (i < n && ++pick[i] == n) pick[i++] = 0;
    if (i == n) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

double InterpolatedPercentile(std::vector<double> values, double pct) {
  std::sort(values.begin(), values.end());
  const double rank = pct / 100.0 * (values.size() - 1);
  const double below = std::floor(rank);
  const double above = std::ceil(rank);
  const double lo = values[static_cast<std::size_t>(below)];
  const double hi = values[static_cast<std::size_t>(above)];
  return lo + (hi - lo) * (rank - below);
}

int EditDistance(std::span<const std::string> a, std::span<const std::string> b) {
  std::map<std::pair<std::size_t, std::size_t>, int> memo;
  std::function<int(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> int {
    if (i == a.size()) return static_cast<int>(b.size() - j);
    if (j == b.size()) return static_cast<int>(a.size() - i);
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const int r = std::min({d(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1), d(i + 1, j) + 1, d(i, j + 1) + 1});
    memo[key] = r;
    return r;
  };
  return d(0, 0);
}

}  // namespace sens::oracle
