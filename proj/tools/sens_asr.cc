// sens_asr: synthetic data, training, decoding and evaluation front end.
//
// Failures print one line "error<TAB>category<TAB>message" on stderr and exit
// with status 1.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "oracles/gradcheck.h"
#include "oracles/oracles.h"
#include "sens/chunk_mask.h"
#include "sens/config.h"
#include "sens/distillation.h"
#include "sens/error.h"
#include "sens/eval.h"
#include "sens/io.h"
#include "sens/pair_builder.h"
#include "sens/rnnt_lattice.h"
#include "sens/streaming.h"
#include "sens/synth.h"
#include "sens/trainer.h"

namespace sens {
namespace {

// --config file, then --set overrides, then --seed if given.
RunConfig ResolveConfig(const std::string& path, const std::vector<std::string>& sets,
                        std::optional<uint64_t> seed) {
  RunConfig c = path.empty() ? RunConfig{} : LoadRunConfig(path);
  for (const auto& kv : sets) ApplyConfigText(c, kv, "--set");
  if (seed) c.seed = *seed;
  c.Validate();
  return c;
}

std::unique_ptr<TeacherProvider> MakeTeacher(const RunConfig& c, const std::string& path) {
  if (!c.model.context.enabled) return nullptr;
  if (path.empty()) return std::make_unique<HashTeacher>(c.model.context.teacher_dim);
  auto t = std::make_unique<FileTeacher>(FileTeacher::Load(path));
  if (t->dim() != c.model.context.teacher_dim) {
    throw DimensionError("teacher file has dim " + std::to_string(t->dim()) + ", config expects " +
                         std::to_string(c.model.context.teacher_dim));
  }
  return t;
}

// ---- synth-data

struct SynthArgs {
  std::string out;
  SynthSpec spec;
};

int RunSynth(const SynthArgs& a) {
  const SynthDataset data = GenerateSynth(a.spec);
  WriteSynth(a.out, data);
  std::printf("wrote %zu utterances, %d speakers, vocabulary %d to %s\n", data.utterances.size(),
              a.spec.speakers, data.vocabulary.size(), a.out.c_str());
  return 0;
}

// ---- train

struct TrainArgs {
  std::string manifest, vocab, teacher, config, out;
  std::vector<std::string> sets;
  std::optional<uint64_t> seed;
};

int RunTrain(const TrainArgs& a) {
  RunConfig c = ResolveConfig(a.config, a.sets, a.seed);
  const Vocabulary vocab = Vocabulary::Load(a.vocab);
  if (vocab.size() != c.model.vocab_size) {
    throw DimensionError("vocabulary has " + std::to_string(vocab.size()) +
                         " symbols, config model.vocab_size is " + std::to_string(c.model.vocab_size));
  }
  const auto teacher = MakeTeacher(c, a.teacher);
  const auto examples = LoadExamples(LoadManifest(a.manifest), vocab, teacher.get(), c.model.encoder.feat_dim);
  SensAsrModel<float> model(c.model, c.seed);
  Trainer<float> trainer(model, c);
  WriteFile(a.out + ".cfg", c.ToString());
  std::printf("step\tloss_rnnt\tloss_mse\tloss_total\n");
  trainer.Train(
      examples,
      [](const StepStats& s) {
        std::printf("%d\t%.6f\t%.6f\t%.6f\n", s.step, s.rnnt, s.mse, s.total);
        std::fflush(stdout);
      },
      [&](int) { SaveCheckpoint(a.out, Snapshot(model.Parameters())); });
  SaveCheckpoint(a.out, Snapshot(model.Parameters()));
  return 0;
}

// ---- decode-offline / decode-stream

struct DecodeArgs {
  std::string checkpoint, config, manifest, vocab, out;
  int chunk = 0;
  std::string left = "unlimited";
  std::string context_window;  // empty: take the config's value
  int push_frames = 0;         // stream only; 0 draws piece sizes from --seed
  uint64_t seed = 1;
};

struct LoadedModel {
  RunConfig config;
  Vocabulary vocab;
  std::unique_ptr<SensAsrModel<float>> model;
  int context_window = kUnlimitedContext;
};

LoadedModel LoadModel(const DecodeArgs& a) {
  LoadedModel m;
  m.config = ResolveConfig(a.config.empty() ? a.checkpoint + ".cfg" : a.config, {}, std::nullopt);
  m.vocab = Vocabulary::Load(a.vocab);
  m.model = std::make_unique<SensAsrModel<float>>(m.config.model, m.config.seed);
  Restore(LoadCheckpoint(a.checkpoint), m.model->Parameters());
  m.context_window = a.context_window.empty() ? m.config.model.context.window_chunks
                                              : ParseContextChunks(a.context_window);
  return m;
}

void WriteHypotheses(const std::string& out, const std::vector<std::pair<std::string, std::string>>& lines) {
  if (!out.empty()) {
    SaveTranscripts(out, lines);
    return;
  }
  for (const auto& [id, text] : lines) std::printf("%s\t%s\n", id.c_str(), text.c_str());
}

int RunDecodeOffline(const DecodeArgs& a) {
  LoadedModel m = LoadModel(a);
  const auto examples =
      LoadExamples(LoadManifest(a.manifest), m.vocab, nullptr, m.config.model.encoder.feat_dim);
  const auto pairs =
      DecodeCorpus(*m.model, examples, m.vocab, a.chunk, ParseContextChunks(a.left), m.context_window);
  std::vector<std::pair<std::string, std::string>> lines;
  for (std::size_t i = 0; i < examples.size(); ++i) lines.emplace_back(examples[i].id, pairs[i].second);
  WriteHypotheses(a.out, lines);
  return 0;
}

int RunDecodeStream(const DecodeArgs& a) {
  LoadedModel m = LoadModel(a);
  if (a.chunk < 1) throw ParameterError("decode-stream: --chunk must be >= 1");
  const StreamOptions opts{a.chunk, ParseContextChunks(a.left), m.context_window, false};
  CounterRng rng(a.seed);
  std::vector<std::pair<std::string, std::string>> lines;
  std::size_t peak_cache = 0;
  for (const auto& entry : LoadManifest(a.manifest)) {
    const Tensor<float> raw = ReadFeatures(entry.feature_path);
    Stream<float> stream(*m.model, opts);
    for (int b = 0; b < raw.rows();) {
      const int piece = a.push_frames > 0 ? a.push_frames : 1 + static_cast<int>(rng.UniformInt(16));
      stream.Push(raw.RowSlice(b, std::min(raw.rows(), b + piece)));
      peak_cache = std::max(peak_cache, stream.CacheFloats());
      b += piece;
    }
    std::vector<int> ids;
    for (const auto& e : stream.Close().transcript) ids.push_back(e.token);
    lines.emplace_back(entry.id, m.vocab.Decode(ids));
  }
  WriteHypotheses(a.out, lines);
  std::fprintf(stderr, "peak cache %zu floats\n", peak_cache);
  return 0;
}

// ---- eval

struct EvalArgs {
  std::string ref, hyp, baseline;
  bool lowercase = false;
  int resamples = 1000;
  uint64_t seed = 1;
};

struct Scored {
  CorpusWer corpus;
  BootstrapCi ci;
};

Scored Score(const std::vector<std::pair<std::string, std::string>>& refs, const std::string& hyp_path,
             const EvalArgs& a) {
  std::map<std::string, std::string> hyp;
  for (auto& [id, text] : LoadTranscripts(hyp_path)) hyp[id] = text;
  std::vector<EditCounts> per;
  int missing = 0;
  for (const auto& [id, text] : refs) {
    auto it = hyp.find(id);
    missing += it == hyp.end();
    per.push_back(Align(text, it == hyp.end() ? "" : it->second, a.lowercase));
  }
  if (missing > 0) std::fprintf(stderr, "%s: %d utterances missing, scored as empty\n", hyp_path.c_str(), missing);
  return {ComputeCorpusWer(per), Bootstrap(per, a.resamples, a.seed)};
}

int RunEval(const EvalArgs& a) {
  const auto refs = LoadTranscripts(a.ref);
  if (refs.empty()) throw FormatError(a.ref + ": no transcripts");
  const Scored sys = Score(refs, a.hyp, a);
  std::optional<Scored> base;
  if (!a.baseline.empty()) base = Score(refs, a.baseline, a);
  std::printf("utterances %zu, resamples %d, seed %llu\n", refs.size(), a.resamples,
              static_cast<unsigned long long>(a.seed));
  if (base) std::printf("baseline WER %s\n", FormatWerCell(base->ci, nullptr).c_str());
  std::printf("WER %s\n", FormatWerCell(sys.ci, base ? &base->ci : nullptr).c_str());
  std::printf("%s", FormatEditTable(base ? base->corpus : sys.corpus, sys.corpus,
                                    base ? "Baseline" : "System", "System").c_str());
  return 0;
}

// ---- build-pairs

struct PairArgs {
  std::string corpus, candidates, out;
  uint64_t seed = 1;
};

int RunBuildPairs(const PairArgs& a) {
  const auto corpus = LoadCorpus(a.corpus);
  const TokenOverlapScorer scorer;
  const auto para = ChooseParaphrases(corpus, LoadCandidates(a.candidates), scorer, a.seed);
  const auto triplets = BuildTriplets(corpus, para, a.seed);
  SaveTriplets(a.out, triplets);
  int pos = 0;
  for (const auto& t : triplets) pos += t.positive;
  std::printf("%zu triplets (%d positive, %zu negative) from %zu utterances\n", triplets.size(), pos,
              triplets.size() - pos, corpus.size());
  return 0;
}

// ---- grad-check

struct GradArgs {
  std::string config;
  std::vector<std::string> sets;
  int instances = 3;
  std::string precision = "float";
  uint64_t seed = 1;
};

ModelConfig SmallModel() {
  ModelConfig c;
  c.encoder.feat_dim = 4;
  c.encoder.num_layers = 1;
  c.encoder.d_model = 8;
  c.encoder.num_heads = 2;
  c.encoder.ffn_dim = 8;
  c.encoder.conv_kernel = 3;
  c.encoder.frontend_channels = 6;
  c.encoder.max_positions = 64;
  c.context.num_decoder_layers = 1;
  c.context.teacher_dim = 4;
  c.vocab_size = 5;
  c.predictor_hidden = 4;
  c.joint_dim = 6;
  return c;
}

template <typename T>
double CompositeCheck(const RunConfig& c, int instances, double step) {
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    CounterRng rng = CounterRng(c.seed).Fork(static_cast<uint64_t>(i));
    SensAsrModel<T> model(c.model, c.seed + i);
    const int raw_frames = 9 + static_cast<int>(rng.UniformInt(8));
    Tensor<T> raw({raw_frames, c.model.encoder.feat_dim});
    for (auto& x : raw.storage()) x = static_cast<T>(rng.Normal());
    std::vector<int> targets(1 + rng.UniformInt(3));
    for (int& y : targets) y = 1 + static_cast<int>(rng.UniformInt(c.model.vocab_size - 1));
    Tensor<T> teacher({1, c.model.context.teacher_dim});
    for (auto& x : teacher.storage()) x = static_cast<T>(rng.Normal());
    const int frames = EncoderFrames(raw_frames);
    const ChunkSpec spec{1 + static_cast<int>(rng.UniformInt(frames)), rng.Bernoulli(0.5) ? 0 : kUnlimitedContext,
                         frames};
    auto loss = [&](Tape<T>& t) {
      return model.Loss(t, raw, targets, c.model.context.enabled ? &teacher : nullptr, spec, c.loss).total;
    };
    const auto r = oracle::CheckGradients<T>(loss, model.Parameters(), step, 3);
    std::printf("instance %d: T=%d S=%d, %d coordinates, max relative error %.3g at %s\n", i, frames,
                spec.chunk_size, r.coordinates, r.max_rel_error, r.worst.c_str());
    worst = std::max(worst, r.max_rel_error);
  }
  return worst;
}

int RunGradCheck(const GradArgs& a) {
  RunConfig c;
  c.model = SmallModel();
  if (!a.config.empty()) ApplyConfigText(c, ReadFile(a.config), a.config);
  for (const auto& kv : a.sets) ApplyConfigText(c, kv, "--set");
  c.seed = a.seed;
  c.Validate();
  const bool dbl = a.precision == "double";
  if (!dbl && a.precision != "float") throw ParameterError("--precision must be float or double");
  const double tol = dbl ? 1e-6 : 1e-3;
  const double worst = dbl ? CompositeCheck<double>(c, a.instances, 1e-5)
                           : CompositeCheck<float>(c, a.instances, 1e-3);
  std::printf("%s: worst %.3g, tolerance %.0e\n", worst < tol ? "PASS" : "FAIL", worst, tol);
  return worst < tol ? 0 : 1;
}

// ---- oracle-check

struct OracleArgs {
  int cases = 100;
  uint64_t seed = 1;
};

int RunOracleCheck(const OracleArgs& a) {
  CounterRng rng(a.seed);
  double worst = 0.0;
  for (int i = 0; i < a.cases; ++i) {
    const int T = 1 + static_cast<int>(rng.UniformInt(4)), U = static_cast<int>(rng.UniformInt(4)),
              V = 2 + static_cast<int>(rng.UniformInt(4));
    std::vector<double> lp(static_cast<std::size_t>(T) * (U + 1) * V);
    for (std::size_t n = 0; n < lp.size() / V; ++n) {
      double s = 0.0;
      for (int v = 0; v < V; ++v) s += std::exp(lp[n * V + v] = 2.0 * rng.Normal());
      for (int v = 0; v < V; ++v) lp[n * V + v] -= std::log(s);
    }
    std::vector<int> y(U);
    for (int& v : y) v = 1 + static_cast<int>(rng.UniformInt(V - 1));
    const double lambda = rng.Bernoulli(0.5) ? 0.0 : 0.006;
    const double lib = RnntLossWithGrad<double>(lp, T, y, V, lambda).loss;
    worst = std::max(worst, std::abs(lib - oracle::FastEmitLoss(lp, T, y, V, lambda)));
  }
  int masks = 0, mask_errors = 0;
  for (int T = 1; T <= 12; ++T) {
    for (int S = 1; S <= T; ++S) {
      for (int P = -1; P <= (T + S - 1) / S; ++P) {
        const MaskMatrix m = BuildMask({S, P < 0 ? kUnlimitedContext : P, T});
        for (int t = 0; t < T; ++t)
          for (int u = 0; u < T; ++u) mask_errors += m.at(t, u) != oracle::MaskEntry(t, u, S, P);
        ++masks;
      }
    }
  }
  const bool ok = worst < 1e-6 && mask_errors == 0;
  std::printf("transducer loss: %d lattices, max |library - enumeration| %.3g\n", a.cases, worst);
  std::printf("chunk mask: %d masks, %d entries differ\n", masks, mask_errors);
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace
}  // namespace sens

int main(int argc, char** argv) {
  using namespace sens;
  CLI::App app{"Streaming transducer ASR with semantic context distillation"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth-data", "Generate the synthetic grammar corpus");
  cmd_synth->add_option("--out", synth.out, "Output directory")->required();
  cmd_synth->add_option("--utterances", synth.spec.utterances)->capture_default_str();
  cmd_synth->add_option("--speakers", synth.spec.speakers)->capture_default_str();
  cmd_synth->add_option("--feat-dim", synth.spec.feat_dim)->capture_default_str();
  cmd_synth->add_option("--frames-per-word", synth.spec.frames_per_word)->capture_default_str();
  cmd_synth->add_option("--noise", synth.spec.noise, "Feature noise stddev")->capture_default_str();
  cmd_synth->add_option("--teacher-dim", synth.spec.teacher_dim)->capture_default_str();
  cmd_synth->add_option("--seed", synth.spec.seed)->capture_default_str();

  TrainArgs train;
  auto* cmd_train = app.add_subcommand("train", "Train a model; logs step, rnnt, mse, total");
  cmd_train->add_option("--manifest", train.manifest)->required();
  cmd_train->add_option("--vocab", train.vocab)->required();
  cmd_train->add_option("--teacher", train.teacher, "Teacher embedding file (default: hashed teacher)");
  cmd_train->add_option("--config", train.config, "key = value config file");
  cmd_train->add_option("--set", train.sets, "key=value override, repeatable");
  cmd_train->add_option("--out", train.out, "Checkpoint path; the config goes to <out>.cfg")->required();
  cmd_train->add_option("--seed", train.seed, "Overrides the config seed");

  DecodeArgs offline, stream;
  stream.chunk = 4;
  for (auto [name, args, help] : {std::tuple{"decode-offline", &offline, "Greedy decoding of whole utterances"},
                                  std::tuple{"decode-stream", &stream, "Chunk-by-chunk streaming decoding"}}) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--checkpoint", args->checkpoint)->required();
    cmd->add_option("--config", args->config, "Defaults to <checkpoint>.cfg");
    cmd->add_option("--manifest", args->manifest)->required();
    cmd->add_option("--vocab", args->vocab)->required();
    cmd->add_option("--chunk", args->chunk, "Chunk size in encoder frames (offline: 0 = full)")
        ->capture_default_str();
    cmd->add_option("--left", args->left, "Past chunks attended, or 'unlimited'")->capture_default_str();
    cmd->add_option("--context-window", args->context_window, "Chunks pooled for context");
    cmd->add_option("--out", args->out, "Transcript file (default stdout)");
    cmd->add_option("--seed", args->seed)->capture_default_str();
    if (args == &stream) {
      cmd->add_option("--push-frames", args->push_frames, "Raw frames per push; 0 = random sizes")
          ->capture_default_str();
    }
  }

  EvalArgs eval;
  auto* cmd_eval = app.add_subcommand("eval", "WER with bootstrap CI and edit breakdown");
  cmd_eval->add_option("--ref", eval.ref)->required();
  cmd_eval->add_option("--hyp", eval.hyp)->required();
  cmd_eval->add_option("--baseline", eval.baseline, "Baseline hypotheses for deltas");
  cmd_eval->add_flag("--lowercase", eval.lowercase);
  cmd_eval->add_option("--resamples", eval.resamples)->capture_default_str();
  cmd_eval->add_option("--seed", eval.seed)->capture_default_str();

  PairArgs pairs;
  auto* cmd_pairs = app.add_subcommand("build-pairs", "Paraphrase triplets for teacher fine-tuning");
  cmd_pairs->add_option("--corpus", pairs.corpus)->required();
  cmd_pairs->add_option("--candidates", pairs.candidates)->required();
  cmd_pairs->add_option("--out", pairs.out)->required();
  cmd_pairs->add_option("--seed", pairs.seed)->capture_default_str();

  GradArgs grad;
  auto* cmd_grad = app.add_subcommand("grad-check", "Finite-difference check of the training loss");
  cmd_grad->add_option("--config", grad.config, "Overrides on top of a small model");
  cmd_grad->add_option("--set", grad.sets);
  cmd_grad->add_option("--instances", grad.instances)->capture_default_str();
  cmd_grad->add_option("--precision", grad.precision, "float or double")->capture_default_str();
  cmd_grad->add_option("--seed", grad.seed)->capture_default_str();

  OracleArgs oracle_args;
  auto* cmd_oracle = app.add_subcommand("oracle-check", "Transducer loss and mask against brute force");
  cmd_oracle->add_option("--cases", oracle_args.cases)->capture_default_str();
  cmd_oracle->add_option("--seed", oracle_args.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    if (cmd_synth->parsed()) return RunSynth(synth);
    if (cmd_train->parsed()) return RunTrain(train);
    if (app.got_subcommand("decode-offline")) return RunDecodeOffline(offline);
    if (app.got_subcommand("decode-stream")) return RunDecodeStream(stream);
    if (cmd_eval->parsed()) return RunEval(eval);
    if (cmd_pairs->parsed()) return RunBuildPairs(pairs);
    if (cmd_grad->parsed()) return RunGradCheck(grad);
    if (cmd_oracle->parsed()) return RunOracleCheck(oracle_args);
  } catch (const Error& e) {
    std::fprintf(stderr, "error\t%s\t%s\n", e.category().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error\tinternal\t%s\n", e.what());
    return 1;
  }
  return 1;
}
