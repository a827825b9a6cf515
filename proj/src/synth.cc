#include "sens/synth.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "sens/distillation.h"
#include "sens/error.h"
#include "sens/eval.h"
#include "sens/rng.h"

namespace sens {

namespace {

const std::vector<std::string> kAdjectives = {"big", "red", "small"};
const std::vector<std::string> kNouns = {"cat", "dog", "bird"};
const std::vector<std::string> kVerbs = {"sees", "likes", "chases"};

const std::map<std::string, std::string> kSynonyms = {
    {"big", "large"},  {"red", "crimson"}, {"small", "little"},
    {"cat", "kitty"},  {"dog", "puppy"},   {"bird", "sparrow"},
    {"sees", "watches"}, {"likes", "loves"}, {"chases", "follows"},
};

std::vector<std::string> VocabularySymbols() {
  std::vector<std::string> v = {"<blank>", "the"};
  for (const auto* group : {&kAdjectives, &kNouns, &kVerbs}) {
    v.insert(v.end(), group->begin(), group->end());
  }
  return v;
}

std::string Join(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
  return s;
}

template <typename V>
const std::string& Pick(const V& items, CounterRng& rng) {
  return items[rng.UniformInt(items.size())];
}

std::vector<std::string> Sentence(int topic, CounterRng& rng) {
  auto noun = [&] {
    return rng.Bernoulli(0.6) ? kNouns[topic % kNouns.size()] : Pick(kNouns, rng);
  };
  std::vector<std::string> w = {"the"};
  if (rng.Bernoulli(0.5)) w.push_back(Pick(kAdjectives, rng));
  w.push_back(noun());
  w.push_back(Pick(kVerbs, rng));
  w.push_back("the");
  if (rng.Bernoulli(0.5)) w.push_back(Pick(kAdjectives, rng));
  w.push_back(noun());
  return w;
}

std::vector<ParaphraseCandidate> Candidates(const std::string& id,
                                            const std::vector<std::string>& words,
                                            CounterRng& rng) {
  std::vector<ParaphraseCandidate> out;
  std::vector<std::size_t> swappable;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (kSynonyms.count(words[i])) swappable.push_back(i);
  }
  // one and two synonym swaps
  for (std::size_t swaps = 1; swaps <= 2 && swaps <= swappable.size(); ++swaps) {
    auto w = words;
    for (std::size_t s = 0; s < swaps; ++s) {
      const std::size_t i = swappable[(rng.UniformInt(swappable.size()) + s) % swappable.size()];
      if (kSynonyms.count(w[i])) w[i] = kSynonyms.at(w[i]);
    }
    out.push_back({id, Join(w)});
  }
  // too long: the sentence said twice
  out.push_back({id, Join(words) + " " + Join(words)});
  // unrelated
  std::vector<std::string> other;
  for (int i = 0; i < 4; ++i) other.push_back(kSynonyms.at(Pick(kVerbs, rng)));
  out.push_back({id, Join(other)});
  return out;
}

}  // namespace

void SynthSpec::Validate() const {
  if (utterances < 1) throw ParameterError("synth: utterances must be >= 1");
  if (speakers < 1) throw ParameterError("synth: speakers must be >= 1");
  if (feat_dim < 1) throw ParameterError("synth: feat_dim must be >= 1");
  if (frames_per_word < 1) throw ParameterError("synth: frames_per_word must be >= 1");
  if (gap_frames < 0) throw ParameterError("synth: gap_frames must be >= 0");
  if (!(noise >= 0.0)) throw ParameterError("synth: noise must be >= 0");
  if (teacher_dim < 1) throw ParameterError("synth: teacher_dim must be >= 1");
}

std::vector<float> BagOfWordsEmbedding(const std::string& text, int dim, uint64_t seed) {
  std::vector<double> acc(dim, 0.0);
  for (const auto& w : SplitWords(text)) {
    CounterRng rng(Fnv1a64(w) ^ seed);
    for (double& a : acc) a += rng.Normal();
  }
  double norm = 0.0;
  for (double a : acc) norm += a * a;
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (int i = 0; i < dim; ++i) out[i] = norm > 0.0 ? static_cast<float>(acc[i] / norm) : 0.0f;
  return out;
}

SynthDataset GenerateSynth(const SynthSpec& spec) {
  spec.Validate();
  SynthDataset data;
  data.vocabulary = Vocabulary(VocabularySymbols());
  const CounterRng root(spec.seed);

  // Per-word templates; the blank slot is unused.
  std::vector<Tensor<float>> templates(data.vocabulary.size());
  for (int v = 1; v < data.vocabulary.size(); ++v) {
    CounterRng rng = root.Fork(1000 + v);
    Tensor<float> t({spec.frames_per_word, spec.feat_dim});
    for (float& x : t.storage()) x = static_cast<float>(rng.Normal());
    templates[v] = std::move(t);
  }
  for (int i = 0; i < spec.utterances; ++i) {
    CounterRng rng = root.Fork(static_cast<uint64_t>(i) << 8);
    const int speaker = i % spec.speakers;
    char id[32];
    std::snprintf(id, sizeof(id), "utt%04d", i);
    const auto words = Sentence(speaker, rng);
    Tensor<float> feats;
    Tensor<float> gap;
    if (spec.gap_frames > 0) gap = Tensor<float>({spec.gap_frames, spec.feat_dim});
    feats.AppendRows(gap);
    for (const int token : data.vocabulary.Encode(Join(words))) {
      feats.AppendRows(templates[token]);
      feats.AppendRows(gap);
    }
    if (spec.noise > 0.0) {
      for (float& x : feats.storage()) x += static_cast<float>(spec.noise * rng.Normal());
    }
    SynthUtterance u{id, "spk" + std::to_string(speaker), Join(words), std::move(feats)};
    data.candidates[u.id] = Candidates(u.id, words, rng);
    data.teacher[u.id] = BagOfWordsEmbedding(u.text, spec.teacher_dim, spec.seed);
    data.utterances.push_back(std::move(u));
  }
  return data;
}

void WriteSynth(const std::string& dir, const SynthDataset& data) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "feats");
  std::vector<ManifestEntry> manifest;
  std::vector<std::pair<std::string, std::string>> transcripts;
  for (const auto& u : data.utterances) {
    const std::string rel = "feats/" + u.id + ".feat";
    WriteFeatures((fs::path(dir) / rel).string(), u.features);
    manifest.push_back({u.id, u.speaker, rel, u.text});
    transcripts.emplace_back(u.id, u.text);
  }
  SaveManifest((fs::path(dir) / "manifest.tsv").string(), manifest);
  SaveTranscripts((fs::path(dir) / "transcripts.tsv").string(), transcripts);
  data.vocabulary.Save((fs::path(dir) / "vocab.txt").string());

  std::string corpus_text, cand_text;
  for (const auto& u : data.utterances) {
    corpus_text += u.id + "\t" + u.speaker + "\t" + u.text + "\n";
    for (const auto& c : data.candidates.at(u.id)) cand_text += c.original_id + "\t" + c.text + "\n";
  }
  WriteFile((fs::path(dir) / "corpus.tsv").string(), corpus_text);
  WriteFile((fs::path(dir) / "candidates.tsv").string(), cand_text);
  if (!data.teacher.empty()) {
    FileTeacher::Save((fs::path(dir) / "teacher.emb").string(),
                      static_cast<int>(data.teacher.begin()->second.size()), data.teacher);
  }
}

}  // namespace sens
