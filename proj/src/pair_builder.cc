#include "sens/pair_builder.h"

#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_map>

#include "sens/error.h"
#include "sens/eval.h"

namespace sens {

double TokenOverlapScorer::Score(std::string_view a, std::string_view b) const {
  const auto wa = SplitWords(a), wb = SplitWords(b);
  if (wa.empty() && wb.empty()) return 1.0;
  if (wa.empty() || wb.empty()) return 0.0;
  std::unordered_map<std::string, int> counts;
  for (const auto& w : wa) ++counts[w];
  int common = 0;
  for (const auto& w : wb) {
    auto it = counts.find(w);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double p = static_cast<double>(common) / wb.size();
  const double r = static_cast<double>(common) / wa.size();
  return 2.0 * p * r / (p + r);
}

namespace {

// Code points, not bytes: continuation bytes 10xxxxxx are skipped.
std::size_t CharLength(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

}  // namespace

std::vector<ParaphraseCandidate> FilterCandidates(const Utterance& original,
                                                  const std::vector<ParaphraseCandidate>& candidates,
                                                  const SimilarityScorer& scorer) {
  std::vector<ParaphraseCandidate> kept;
  for (const auto& c : candidates) {
    if (scorer.Score(original.text, c.text) < kMinParaphraseScore) continue;
    if (static_cast<double>(CharLength(c.text)) >= kMaxLengthRatio * CharLength(original.text)) {
      continue;
    }
    kept.push_back(c);
  }
  return kept;
}

std::optional<ParaphraseCandidate> SelectParaphrase(const std::vector<ParaphraseCandidate>& filtered,
                                                    CounterRng& rng) {
  if (filtered.empty()) return std::nullopt;
  return filtered[rng.UniformInt(filtered.size())];
}

std::map<std::string, std::string> ChooseParaphrases(
    const std::vector<Utterance>& corpus,
    const std::map<std::string, std::vector<ParaphraseCandidate>>& candidates,
    const SimilarityScorer& scorer, uint64_t seed) {
  const CounterRng root(seed);
  std::map<std::string, std::string> chosen;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto it = candidates.find(corpus[i].id);
    if (it == candidates.end()) continue;
    CounterRng rng = root.Fork(Fnv1a64(corpus[i].id));
    auto pick = SelectParaphrase(FilterCandidates(corpus[i], it->second, scorer), rng);
    if (pick) chosen[corpus[i].id] = pick->text;
  }
  return chosen;
}

std::vector<Triplet> BuildTriplets(const std::vector<Utterance>& corpus,
                                   const std::map<std::string, std::string>& paraphrases,
                                   uint64_t seed) {
  std::set<std::string> speakers;
  for (const auto& u : corpus) speakers.insert(u.speaker_id);
  if (speakers.size() < 2) {
    throw ParameterError("build triplets: need at least two speakers for negative pairs");
  }
  const CounterRng root(seed);
  std::vector<Triplet> out;
  std::vector<std::size_t> anchors;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto it = paraphrases.find(corpus[i].id);
    if (it == paraphrases.end()) continue;
    CounterRng rng = root.Fork(2 * i);
    out.push_back({corpus[i].text, it->second, rng.Uniform(0.8, 1.0), true});
    anchors.push_back(i);
  }
  const std::size_t negatives = anchors.size() / 2;
  for (std::size_t k = 0; k < negatives; ++k) {
    CounterRng rng = root.Fork(2 * k + 1);
    const Utterance& a = corpus[anchors[rng.UniformInt(anchors.size())]];
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < corpus.size(); ++j) {
      if (corpus[j].speaker_id != a.speaker_id) others.push_back(j);
    }
    const Utterance& b = corpus[others[rng.UniformInt(others.size())]];
    auto para = paraphrases.find(b.id);
    const bool use_para = rng.Bernoulli(0.5) && para != paraphrases.end();
    out.push_back({a.text, use_para ? para->second : b.text, rng.Uniform(-0.2, 0.2), false});
  }
  return out;
}

namespace {

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

template <typename Fn>
void ForEachLine(const std::string& path, std::size_t fields, Fn fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = SplitTabs(line);
    if (f.size() != fields) {
      throw FormatError(path + ":" + std::to_string(n) + ": expected " + std::to_string(fields) +
                        " tab-separated fields");
    }
    fn(f);
  }
}

}  // namespace

std::vector<Utterance> LoadCorpus(const std::string& path) {
  std::vector<Utterance> corpus;
  std::set<std::string> ids;
  ForEachLine(path, 3, [&](std::vector<std::string>& f) {
    if (f[2].empty()) throw FormatError(path + ": empty text for " + f[0]);
    if (!ids.insert(f[0]).second) throw FormatError(path + ": duplicate id " + f[0]);
    corpus.push_back({f[0], f[1], f[2]});
  });
  return corpus;
}

std::map<std::string, std::vector<ParaphraseCandidate>> LoadCandidates(const std::string& path) {
  std::map<std::string, std::vector<ParaphraseCandidate>> out;
  ForEachLine(path, 2, [&](std::vector<std::string>& f) {
    if (f[1].empty()) return;
    out[f[0]].push_back({f[0], f[1]});
  });
  return out;
}

void SaveTriplets(const std::string& path, const std::vector<Triplet>& triplets) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  char label[32];
  for (const auto& t : triplets) {
    std::snprintf(label, sizeof(label), "%.6f", t.label);
    out << t.sentence_a << '\t' << t.sentence_b << '\t' << label << '\n';
  }
}

}  // namespace sens
