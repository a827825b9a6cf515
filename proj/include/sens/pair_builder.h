#ifndef SENS_PAIR_BUILDER_H_
#define SENS_PAIR_BUILDER_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sens/rng.h"

namespace sens {

struct Utterance {
  std::string id;
  std::string speaker_id;
  std::string text;
};

struct ParaphraseCandidate {
  std::string original_id;
  std::string text;
  friend bool operator==(const ParaphraseCandidate&, const ParaphraseCandidate&) = default;
};

struct Triplet {
  std::string sentence_a;
  std::string sentence_b;
  double label = 0.0;
  bool positive = false;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

class SimilarityScorer {
 public:
  virtual ~SimilarityScorer() = default;
  virtual double Score(std::string_view a, std::string_view b) const = 0;
};

// F1 of the whitespace-token multisets; 1 for identical texts.
class TokenOverlapScorer : public SimilarityScorer {
 public:
  double Score(std::string_view a, std::string_view b) const override;
};

inline constexpr double kMinParaphraseScore = 0.5;
inline constexpr double kMaxLengthRatio = 2.0;

// Keeps score >= 0.5 and length(candidate) < 2 * length(original), lengths
// in characters; order preserved.
std::vector<ParaphraseCandidate> FilterCandidates(const Utterance& original,
                                                  const std::vector<ParaphraseCandidate>& candidates,
                                                  const SimilarityScorer& scorer);

std::optional<ParaphraseCandidate> SelectParaphrase(const std::vector<ParaphraseCandidate>& filtered,
                                                    CounterRng& rng);

// Positives (utterance, paraphrase) labelled U(0.8, 1); floor(positives / 2)
// negatives pairing an utterance with the transcription or paraphrase of an
// utterance from another speaker, labelled U(-0.2, 0.2).
std::vector<Triplet> BuildTriplets(const std::vector<Utterance>& corpus,
                                   const std::map<std::string, std::string>& paraphrases,
                                   uint64_t seed);

// Filters and selects a paraphrase per utterance (per-utterance streams).
std::map<std::string, std::string> ChooseParaphrases(
    const std::vector<Utterance>& corpus,
    const std::map<std::string, std::vector<ParaphraseCandidate>>& candidates,
    const SimilarityScorer& scorer, uint64_t seed);

// File formats: "id<TAB>speaker<TAB>text", "original_id<TAB>candidate",
// "a<TAB>b<TAB>label" with six decimals.
std::vector<Utterance> LoadCorpus(const std::string& path);
std::map<std::string, std::vector<ParaphraseCandidate>> LoadCandidates(const std::string& path);
void SaveTriplets(const std::string& path, const std::vector<Triplet>& triplets);

}  // namespace sens

#endif  // SENS_PAIR_BUILDER_H_
