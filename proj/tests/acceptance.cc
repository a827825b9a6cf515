// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "grad_cases.h"
#include "oracles/oracles.h"
#include "scenarios.h"
#include "sens/chunk_mask.h"
#include "sens/distillation.h"
#include "sens/eval.h"
#include "sens/io.h"
#include "sens/pair_builder.h"
#include "sens/rnnt_lattice.h"
#include "sens/streaming.h"
#include "sens/synth.h"
#include "sens/trainer.h"
#include "test_util.h"

namespace sens {
namespace {

using testing::RandomTensor;

// Collects failed checks for one criterion.
class Checks {
 public:
  void Expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok && failures_.size() < 8) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  bool ok() const { return failed_ == 0; }
  int count() const { return count_; }
  int failed() const { return failed_; }
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  int count_ = 0, failed_ = 0;
  std::vector<std::string> failures_;
};

std::string Fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

// ---- 1: transducer loss against path enumeration

std::vector<double> RandomLattice(int frames, int labels, int vocab, CounterRng& rng) {
  std::vector<double> lp(static_cast<std::size_t>(frames) * (labels + 1) * vocab);
  for (std::size_t node = 0; node < lp.size() / vocab; ++node) {
    double* row = lp.data() + node * vocab;
    double mx = -1e300;
    for (int v = 0; v < vocab; ++v) mx = std::max(mx, row[v] = 2.0 * rng.Normal());
    double s = 0.0;
    for (int v = 0; v < vocab; ++v) s += std::exp(row[v] - mx);
    for (int v = 0; v < vocab; ++v) row[v] -= mx + std::log(s);
  }
  return lp;
}

std::string RnntOracle(Checks& c) {
  CounterRng rng(1001);
  double worst = 0.0;
  int lattices = 0;
  // every (T, U, V) in range, then random ones until at least 100
  std::vector<std::array<int, 3>> shapes;
  for (int T = 1; T <= 4; ++T)
    for (int U = 0; U <= 3; ++U)
      for (int V = 2; V <= 5; ++V) shapes.push_back({T, U, V});
  while (shapes.size() < 100) {
    shapes.push_back({1 + static_cast<int>(rng.UniformInt(4)), static_cast<int>(rng.UniformInt(4)),
                      2 + static_cast<int>(rng.UniformInt(4))});
  }
  for (const auto& [T, U, V] : shapes) {
    auto lp = RandomLattice(T, U, V, rng);
    std::vector<int> y(U);
    for (int& v : y) v = 1 + static_cast<int>(rng.UniformInt(V - 1));
    const double err = std::abs(RnntNegLogLikelihood<double>(lp, T, y, V) -
                                oracle::RnntNll(lp, T, y, V));
    worst = std::max(worst, err);
    c.Expect(err < 1e-6, Fmt("T=%g U=%g V=%g err=%.3g", T, U, V, err));
    ++lattices;
  }
  c.Expect(lattices >= 100, "fewer than 100 lattices");
  return Fmt("%g lattices, max |loss - enumeration| = %.3g", lattices, worst);
}

// ---- 2: gradient suite

std::string GradientSuite(Checks& c) {
  double worst = 0.0;
  std::string worst_name;
  const auto cases = testing::AllGradCases<float>();
  for (std::size_t k = 0; k < cases.size(); ++k) {
    auto r = testing::WorstGradError(cases[k], 20, 5000 + k);
    c.Expect(r.max_rel_error < 1e-3, cases[k].name + " " + Fmt("%.3g", r.max_rel_error) + " at " + r.worst);
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = cases[k].name;
    }
  }
  auto comp = testing::CompositeGradError(testing::TinyModelConfig(), 20, 6000);
  c.Expect(comp.max_rel_error < 1e-3,
           "composite " + Fmt("%.3g", comp.max_rel_error) + " at " + comp.worst);
  return Fmt("%g ops x 20 instances, worst op error %.3g (", static_cast<double>(cases.size()), worst) +
         worst_name + Fmt("); composite loss alpha=0.2 lambda=0.006 worst %.3g", comp.max_rel_error);
}

// ---- 3: mask against the per-entry definition

std::string MaskOracle(Checks& c) {
  int masks = 0;
  for (int T = 1; T <= 12; ++T) {
    for (int S = 1; S <= T; ++S) {
      const int chunks = (T + S - 1) / S;
      for (int P = 0; P <= chunks; ++P) {
        const MaskMatrix m = BuildMask({S, P, T});
        bool same = true;
        for (int t = 0; t < T; ++t)
          for (int u = 0; u < T; ++u) same = same && m.at(t, u) == oracle::MaskEntry(t, u, S, P);
        c.Expect(same, Fmt("T=%g S=%g P=%g", T, S, P));
        ++masks;
      }
      const MaskMatrix unlimited = BuildMask({S, kUnlimitedContext, T});
      bool same = true;
      for (int t = 0; t < T; ++t)
        for (int u = 0; u < T; ++u) same = same && unlimited.at(t, u) == oracle::MaskEntry(t, u, S, -1);
      c.Expect(same, Fmt("T=%g S=%g unlimited", T, S));
    }
    for (int P : {0, 1, kUnlimitedContext}) c.Expect(BuildMask({T, P, T}).AllOnes(), Fmt("S=T=%g not all ones", T));
  }
  return Fmt("%g masks equal the per-entry rule; S=T all ones", masks);
}

// ---- 4: streaming against offline

std::string StreamingEquivalence(Checks& c) {
  CounterRng rng(4004);
  double worst = 0.0;
  int nonempty = 0;
  for (int i = 0; i < 20; ++i) {
    ModelConfig cfg = testing::TinyModelConfig();
    cfg.encoder.num_layers = 1 + static_cast<int>(rng.UniformInt(2));
    cfg.encoder.conv_kernel = 3 + 2 * static_cast<int>(rng.UniformInt(2));
    cfg.context.enabled = rng.Bernoulli(0.75);
    SensAsrModel<float> model(cfg, 400 + i);
    // lean towards labels so transcripts are not trivially empty
    auto& bias = model.joint().out.bias.value;
    for (int v = 1; v < bias.cols(); ++v) bias[v] = 0.8f;

    const int raw_frames = 4 + static_cast<int>(rng.UniformInt(253));
    const int T = EncoderFrames(raw_frames);
    const int S = 1 + static_cast<int>(rng.UniformInt(std::min(T, 8)));
    const int P = rng.Bernoulli(0.2) ? kUnlimitedContext : static_cast<int>(rng.UniformInt(4));
    const int W = rng.Bernoulli(0.2) ? kUnlimitedContext : 1 + static_cast<int>(rng.UniformInt(3));
    auto raw = RandomTensor<float>({raw_frames, cfg.encoder.feat_dim}, rng);

    const ChunkSpec spec{S, P, T};
    Tensor<float> offline;
    {
      Tape<float> t(false);
      offline = model.Encode(t, raw, spec, W).encoded.value();
    }
    const auto offline_tokens = model.DecodeOffline(raw, spec, W);

    Stream<float> stream(model, {S, P, W, true});
    for (int b = 0; b < raw_frames;) {
      const int piece = 1 + static_cast<int>(rng.UniformInt(13));
      stream.Push(raw.RowSlice(b, std::min(raw_frames, b + piece)));
      b += piece;
    }
    const auto result = stream.Close();
    const Tensor<float>& streamed = stream.encoder_output();
    const std::string tag = Fmt("config %g: T=%g S=%g", i, T, S) + Fmt(" P=%g W=%g", P, W);
    if (streamed.shape() != offline.shape()) {
      c.Expect(false, tag + " shape mismatch");
      continue;
    }
    const double diff = testing::MaxAbsDiff(streamed, offline);
    worst = std::max(worst, diff);
    c.Expect(diff <= 1e-5, tag + Fmt(" encoder diff %.3g", diff));
    c.Expect(result.transcript == offline_tokens, tag + " transcript differs");
    nonempty += !offline_tokens.empty();
  }
  return Fmt("20 configurations, max encoder diff %.3g, %g with non-empty transcripts", worst, nonempty);
}

// ---- 5: information flow respects the mask

std::string MaskRespect(Checks& c) {
  CounterRng rng(5005);
  double worst_outside = 0.0;
  int probes = 0;
  for (int i = 0; i < 6; ++i) {
    EncoderConfig ec = testing::TinyModelConfig().encoder;
    ec.num_layers = 1 + i % 3;
    ec.conv_kernel = i % 2 ? 5 : 3;
    Encoder<float> enc(ec, rng);
    const int T = 6 + static_cast<int>(rng.UniformInt(7));
    const int S = 1 + static_cast<int>(rng.UniformInt(3));
    const int P = static_cast<int>(rng.UniformInt(3));
    const MaskMatrix mask = BuildMask({S, P, T});
    auto x = RandomTensor<float>({T, ec.d_model}, rng);
    Tape<float> tape(false);
    const Tensor<float> base = enc.ForwardLayers(tape, tape.Constant(x), mask).value();
    const auto fields = oracle::ReceptiveFields(T, S, P, ec.conv_kernel, ec.num_layers);
    for (int u = 0; u < T; ++u) {
      auto z = x;
      for (int col = 0; col < ec.d_model; ++col) z.at(u, col) = 0.0f;
      const Tensor<float> y = enc.ForwardLayers(tape, tape.Constant(z), mask).value();
      for (int t = 0; t < T; ++t) {
        if (fields[t].count(u)) continue;
        double d = 0.0;
        for (int col = 0; col < ec.d_model; ++col) d = std::max(d, double(std::abs(y.at(t, col) - base.at(t, col))));
        worst_outside = std::max(worst_outside, d);
        c.Expect(d <= 1e-5, Fmt("S=%g P=%g u=%g t=%g", S, P, u, t) + Fmt(" moved %.3g", d));
        ++probes;
      }
    }
  }
  return Fmt("%g (zeroed frame, outside embedding) pairs, max change %.3g", probes, worst_outside);
}

// ---- 6: desk-scale trend on the synthetic grammar

struct SystemRun {
  std::map<int, BootstrapCi> ci;  // chunk frames (0 = full) -> CI
  std::map<int, CorpusWer> wer;
  double final_loss = 0.0;
};

SystemRun TrainAndEvaluate(const std::vector<TrainExample>& train, const std::vector<TrainExample>& test,
                           const Vocabulary& vocab, double alpha, const std::vector<int>& chunks) {
  RunConfig rc;
  rc.model.vocab_size = vocab.size();
  rc.model.context.enabled = alpha > 0.0;
  rc.loss.alpha = alpha;
  rc.optimizer.kind = "adam";
  rc.optimizer.learning_rate = 0.003;
  rc.train.steps = 600;
  rc.train.log_every = 1;
  rc.seed = 61;
  SensAsrModel<float> model(rc.model, 62);
  Trainer<float> trainer(model, rc);
  SystemRun out;
  trainer.Train(train, [&](const StepStats& s) { out.final_loss = s.total; }, nullptr);
  for (int chunk : chunks) {
    const auto pairs = DecodeCorpus(model, test, vocab, chunk, kUnlimitedContext, kUnlimitedContext);
    std::vector<EditCounts> per;
    for (const auto& [ref, hyp] : pairs) per.push_back(Align(ref, hyp));
    out.wer[chunk] = ComputeCorpusWer(per);
    out.ci[chunk] = Bootstrap(per, 1000, 63);
  }
  return out;
}

std::string DeskScaleTrend(Checks& c) {
  SynthSpec spec;
  spec.utterances = 200;
  spec.noise = 1.0;
  spec.seed = 7;
  const SynthDataset data = GenerateSynth(spec);
  c.Expect(data.vocabulary.size() <= 12, "vocabulary larger than 12");
  FileTeacher teacher(spec.teacher_dim, data.teacher);
  std::vector<TrainExample> plain, taught;
  for (const auto& u : data.utterances) {
    plain.push_back(MakeExample(u.id, u.text, u.features, data.vocabulary, nullptr));
    taught.push_back(MakeExample(u.id, u.text, u.features, data.vocabulary, &teacher));
  }
  // 160 train, 40 held out
  const std::vector<TrainExample> plain_train(plain.begin(), plain.begin() + 160),
      taught_train(taught.begin(), taught.begin() + 160), test(plain.begin() + 160, plain.end());
  // 160 ms and 320 ms chunks at 40 ms per encoder frame, then full context
  const std::vector<int> chunks = {4, 8, 0};
  const std::map<int, std::string> names = {{4, "small (160 ms)"}, {8, "medium (320 ms)"}, {0, "full"}};

  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
  const SystemRun base = TrainAndEvaluate(plain_train, test, data.vocabulary, 0.0, chunks);
  const SystemRun sens = TrainAndEvaluate(taught_train, test, data.vocabulary, 0.2, chunks);
  omp_set_num_threads(threads);

  std::printf("  %-16s %-26s %-32s\n", "chunk", "Baseline", "SENS (alpha=0.2)");
  for (int chunk : chunks) {
    std::printf("  %-16s %-26s %-32s\n", names.at(chunk).c_str(),
                FormatWerCell(base.ci.at(chunk), nullptr).c_str(),
                FormatWerCell(sens.ci.at(chunk), &base.ci.at(chunk)).c_str());
  }
  std::printf("%s", FormatEditTable(base.wer.at(0), sens.wer.at(0), "Baseline", "SENS").c_str());
  c.Expect(base.wer.at(0).wer < 0.05, Fmt("baseline full-context WER %.4f", base.wer.at(0).wer));
  c.Expect(sens.wer.at(0).wer < 0.05, Fmt("SENS full-context WER %.4f", sens.wer.at(0).wer));
  for (int chunk : chunks) {
    c.Expect(sens.ci.at(chunk).lower <= sens.ci.at(chunk).upper, "CI bounds out of order");
  }
  // the report cells reproduce the published layout exactly
  const BootstrapCi ref_base{0.0755, 0.0724, 0.0787, 1000, 0}, ref_sys{0.0721, 0.0689, 0.0753, 1000, 0};
  c.Expect(FormatWerCell(ref_sys, &ref_base) == "7.21(-0.34) [6.89;7.53]", "WER cell format");
  c.Expect(FormatRelativeDelta(403, 507) == "-20.51%", "relative delta format");

  const double small_delta = sens.wer.at(4).wer - base.wer.at(4).wer;
  const char* direction = small_delta < 0 ? "improves" : small_delta > 0 ? "worsens" : "matches";
  return Fmt("full-context WER baseline %.2f%%, SENS %.2f%%; ", 100 * base.wer.at(0).wer, 100 * sens.wer.at(0).wer) +
         "at 160 ms SENS " + direction + " the baseline" + Fmt(" (%+.2f points, recorded only)", 100 * small_delta);
}

// ---- 7: pair builder contract

size_t CodePoints(const std::string& s) {
  return std::count_if(s.begin(), s.end(), [](char ch) { return (ch & 0xC0) != 0x80; });
}

std::string PairBuilderContract(Checks& c) {
  SynthSpec spec;
  spec.utterances = 50;
  spec.speakers = 5;
  spec.seed = 77;
  const SynthDataset data = GenerateSynth(spec);
  std::vector<Utterance> corpus;
  std::map<std::string, std::string> speaker_of, text_of;
  for (const auto& u : data.utterances) {
    corpus.push_back({u.id, u.speaker, u.text});
    text_of[u.id] = u.text;
  }
  const TokenOverlapScorer scorer;
  const auto para = ChooseParaphrases(corpus, data.candidates, scorer, 78);
  const auto triplets = BuildTriplets(corpus, para, 79);
  for (const auto& u : corpus) {
    speaker_of[u.text] = u.speaker_id;
    if (para.count(u.id)) speaker_of[para.at(u.id)] = u.speaker_id;
  }
  // candidates that the filter has to drop must exist in the input
  int rejectable = 0;
  for (const auto& [id, cands] : data.candidates) {
    for (const auto& cand : cands) {
      rejectable += scorer.Score(text_of.at(id), cand.text) < kMinParaphraseScore ||
                    CodePoints(cand.text) >= kMaxLengthRatio * CodePoints(text_of.at(id));
    }
  }
  c.Expect(rejectable > 0, "synthetic candidates contain nothing to reject");
  int pos = 0;
  for (const auto& t : triplets) {
    if (t.positive) {
      ++pos;
      c.Expect(t.label >= 0.8 && t.label <= 1.0, Fmt("positive label %g", t.label));
      c.Expect(scorer.Score(t.sentence_a, t.sentence_b) >= kMinParaphraseScore, "low-similarity positive: " + t.sentence_b);
      c.Expect(CodePoints(t.sentence_b) < kMaxLengthRatio * CodePoints(t.sentence_a), "too-long positive: " + t.sentence_b);
    } else {
      c.Expect(t.label >= -0.2 && t.label <= 0.2, Fmt("negative label %g", t.label));
      c.Expect(speaker_of.at(t.sentence_a) != speaker_of.at(t.sentence_b), "same-speaker negative");
    }
  }
  const double n = static_cast<double>(triplets.size());
  c.Expect(std::abs(pos - 2.0 * n / 3.0) <= 1.0, Fmt("positives %g of %g", pos, n));
  return Fmt("%g triplets, %g positive, %g rejectable candidates filtered", n, pos, rejectable);
}

// ---- 8: bootstrap CI

std::string BootstrapContract(Checks& c) {
  CounterRng rng(8008);
  std::vector<EditCounts> corpus;
  for (int i = 0; i < 60; ++i) {
    corpus.push_back({static_cast<int64_t>(rng.UniformInt(2)), static_cast<int64_t>(rng.UniformInt(2)),
                      static_cast<int64_t>(rng.UniformInt(3)), 5 + static_cast<int64_t>(rng.UniformInt(10))});
  }
  const auto a = Bootstrap(corpus, 1000, 81), b = Bootstrap(corpus, 1000, 81);
  c.Expect(a.lower == b.lower && a.upper == b.upper, "same seed, different bounds");
  c.Expect(a.lower <= a.point && a.point <= a.upper, "point outside CI");
  const std::vector<EditCounts> flat(10, EditCounts{0, 1, 1, 8});
  const auto d = Bootstrap(flat, 1000, 82);
  c.Expect(d.lower == d.point && d.upper == d.point, "degenerate corpus has width");
  const std::vector<std::pair<int, int>> two = {{0, 5}, {5, 5}};
  const auto exact = oracle::ExhaustiveBootstrap(two);
  const auto e = Bootstrap(std::vector<EditCounts>{{0, 0, 0, 5}, {0, 0, 5, 5}}, 10000, 83);
  const double lo = oracle::InterpolatedPercentile(exact, 2.5), hi = oracle::InterpolatedPercentile(exact, 97.5);
  c.Expect(std::abs(e.lower - lo) <= 0.05 && std::abs(e.upper - hi) <= 0.05,
           Fmt("bootstrap [%g;%g] vs exhaustive [%g;%g]", e.lower, e.upper, lo, hi));
  return Fmt("CI [%.4f;%.4f] stable under seed; two-utterance bounds [%g;%g]", a.lower, a.upper, e.lower, e.upper) +
         Fmt(" vs exhaustive [%.4g;%.4g]", lo, hi);
}

// ---- 9: distillation

std::string DistillationContract(Checks& c) {
  const auto curve = testing::FrozenEncoderDistillation(9009, 200, 0.2);
  const double reduction = 1.0 - curve.final / curve.initial;
  c.Expect(reduction >= 0.5, Fmt("MSE %.4g -> %.4g", curve.initial, curve.final));
  double worst = 0.0;
  for (double alpha : {0.0, 0.2, 0.7}) {
    const LossWeights w{alpha, 0.006};
    for (double mse : {0.01, 0.5, 3.0}) {
      const double h = 1e-4;
      const double numeric = (TotalLoss(2.0, mse + h, w) - TotalLoss(2.0, mse - h, w)) / (2 * h);
      worst = std::max(worst, std::abs(numeric - alpha));
      Parameter<double> r("rnnt", Tensor<double>::Scalar(2.0)), m("mse", Tensor<double>::Scalar(mse));
      Tape<double> t;
      t.Backward(TotalLoss(t, t.Param(r), t.Param(m), w));
      t.AccumulateParamGrads();
      worst = std::max(worst, std::abs(m.grad[0] - alpha));
    }
  }
  c.Expect(worst <= 1e-6, Fmt("d total / d mse off by %.3g", worst));
  return Fmt("MSE %.4g -> %.4g (%.1f%% lower) in 200 steps; |d total/d mse - alpha| <= %.2g",
             curve.initial, curve.final, 100 * reduction, worst);
}

// ---- 10: serialization

std::string Serialization(Checks& c) {
  CounterRng rng(1010);
  const auto feats = RandomTensor<float>({37, 16}, rng);
  const std::string fb = EncodeFeatures(feats);
  c.Expect(EncodeFeatures(DecodeFeatures(fb)) == fb, "feature round trip");
  SensAsrModel<float> model(ModelConfig{}, 1011);
  const std::string cb = EncodeCheckpoint(Snapshot(model.Parameters()));
  SensAsrModel<float> other(ModelConfig{}, 1012);
  Restore(DecodeCheckpoint(cb), other.Parameters());
  c.Expect(EncodeCheckpoint(Snapshot(other.Parameters())) == cb, "checkpoint save-load-save");
  auto rejects = [](auto decode, std::string bytes) {
    bytes[0] ^= 0x20;
    try {
      decode(bytes);
    } catch (const FormatError&) {
      return true;
    } catch (...) {
    }
    return false;
  };
  c.Expect(rejects([](const std::string& s) { DecodeFeatures(s); }, fb), "corrupt feature magic accepted");
  c.Expect(rejects([](const std::string& s) { DecodeCheckpoint(s); }, cb), "corrupt checkpoint magic accepted");
  return Fmt("feature file %g bytes and checkpoint %g bytes round-trip; bad magic rejected",
             static_cast<double>(fb.size()), static_cast<double>(cb.size()));
}

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;  // 0 = no limit
  std::function<std::string(Checks&)> run;
};

}  // namespace
}  // namespace sens

int main() {
  using namespace sens;
  const std::vector<Criterion> criteria = {
      {1, "transducer loss matches path enumeration", 10, RnntOracle},
      {2, "gradient suite", 60, GradientSuite},
      {3, "chunk mask matches per-entry rule", 5, MaskOracle},
      {4, "streaming equals offline", 60, StreamingEquivalence},
      {5, "masked-out frames do not leak", 0, MaskRespect},
      {6, "desk-scale baseline vs context distillation", 900, DeskScaleTrend},
      {7, "pair builder contract", 5, PairBuilderContract},
      {8, "bootstrap confidence interval", 0, BootstrapContract},
      {9, "distillation convergence and linearity", 0, DistillationContract},
      {10, "serialization round trips", 0, Serialization},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Checks checks;
    std::string summary;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      summary = cr.run(checks);
    } catch (const std::exception& e) {
      checks.Expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.limit_seconds > 0 && secs > cr.limit_seconds) {
      checks.Expect(false, Fmt("took %.1f s, limit %.0f s", secs, cr.limit_seconds));
    }
    std::printf("%s [%d] %s (%.1f s): %s\n", checks.ok() ? "PASS" : "FAIL", cr.id, cr.name.c_str(), secs,
                summary.c_str());
    for (const auto& f : checks.failures()) std::printf("    failed: %s\n", f.c_str());
    if (checks.failed() > static_cast<int>(checks.failures().size())) {
      std::printf("    ... %d failures in total\n", checks.failed());
    }
    std::fflush(stdout);
    failed += !checks.ok();
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
