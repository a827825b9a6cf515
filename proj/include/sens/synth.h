#ifndef SENS_SYNTH_H_
#define SENS_SYNTH_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sens/io.h"
#include "sens/pair_builder.h"
#include "sens/tensor.h"
#include "sens/transducer.h"

namespace sens {

struct SynthSpec {
  int utterances = 200;
  int speakers = 5;
  int feat_dim = 16;
  int frames_per_word = 8;  // raw frames
  int gap_frames = 2;       // silence between words
  double noise = 0.1;       // stddev added to every feature
  int teacher_dim = 16;
  uint64_t seed = 1;

  void Validate() const;
};

struct SynthUtterance {
  std::string id;
  std::string speaker;
  std::string text;
  Tensor<float> features;
};

struct SynthDataset {
  Vocabulary vocabulary;
  std::vector<SynthUtterance> utterances;
  std::map<std::string, std::vector<ParaphraseCandidate>> candidates;
  // Bag-of-words unit vectors keyed by utterance id.
  std::map<std::string, std::vector<float>> teacher;
};

// Grammar: "the [adj] noun verb the [adj] noun"; each speaker favours one
// noun (its topic). Features are per-word templates plus seeded noise.
SynthDataset GenerateSynth(const SynthSpec& spec);

// Writes manifest.tsv, corpus.tsv, candidates.tsv, transcripts.tsv,
// vocab.txt, teacher.emb and feats/<id>.feat under `dir`.
void WriteSynth(const std::string& dir, const SynthDataset& data);

// Same bag-of-words embedding the generator uses for its teacher file.
std::vector<float> BagOfWordsEmbedding(const std::string& text, int dim, uint64_t seed);

}  // namespace sens

#endif  // SENS_SYNTH_H_
