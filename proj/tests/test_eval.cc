#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "oracles/oracles.h"
#include "sens/error.h"
#include "sens/eval.h"
#include "sens/rng.h"

namespace sens {
void PrintTo(const EditCounts& c, std::ostream* os) {
  *os << "(ins " << c.insertions << ", del " << c.deletions << ", sub " << c.substitutions
      << ", words " << c.reference_words << ")";
}

namespace {

EditCounts Ec(int64_t ins, int64_t del, int64_t sub, int64_t words) {
  return EditCounts{ins, del, sub, words};
}

std::vector<std::string> RandomWords(CounterRng& rng, int max_len) {
  static const char* kVocab[] = {"a", "b", "c", "d"};
  std::vector<std::string> w(rng.UniformInt(max_len + 1));
  for (auto& s : w) s = kVocab[rng.UniformInt(4)];
  return w;
}

std::string Join(const std::vector<std::string>& w) {
  std::string s;
  for (const auto& x : w) s += (s.empty() ? "" : " ") + x;
  return s;
}

TEST(Align, Identity) {
  const auto c = Align("a b c", "a b c");
  EXPECT_EQ(c, Ec(0, 0, 0, 3));
  EXPECT_EQ(c.Wer(), 0.0);
}

TEST(Align, SingleSubstitution) {
  const auto c = Align("a b c", "a x c");
  EXPECT_EQ(c, Ec(0, 0, 1, 3));
  EXPECT_DOUBLE_EQ(c.Wer(), 1.0 / 3.0);
}

TEST(Align, TwoInsertions) { EXPECT_EQ(Align("a b", "a x y b"), Ec(2, 0, 0, 2)); }

TEST(Align, EmptySequences) {
  EXPECT_EQ(Align("", ""), Ec(0, 0, 0, 0));
  EXPECT_EQ(Align("a b", ""), Ec(0, 2, 0, 2));
  EXPECT_EQ(Align("", "a b"), Ec(2, 0, 0, 0));
  EXPECT_THROW(Align("", "a").Wer(), ParameterError);
}

TEST(Align, TieBreakPrefersSubstitution) {
  // "a b" -> "b c": either 2 substitutions or 1 deletion + 1 insertion.
  EXPECT_EQ(Align("a b", "b c"), Ec(0, 0, 2, 2));
  // single word swap: substitution beats ins+del
  EXPECT_EQ(Align("a", "b"), Ec(0, 0, 1, 1));
}

TEST(Align, LowercaseFlagAndWhitespace) {
  EXPECT_EQ(Align("Hello  World", "hello world"), Ec(0, 0, 2, 2));
  EXPECT_EQ(Align("Hello  World", "hello world", true), Ec(0, 0, 0, 2));
  EXPECT_EQ(SplitWords("  a\tb\n c "), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Align, MatchesEditDistanceOracle) {
  CounterRng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const auto ref = RandomWords(rng, 8), hyp = RandomWords(rng, 8);
    const auto c = Align(ref, hyp);
    EXPECT_EQ(c.errors(), oracle::EditDistance(ref, hyp)) << Join(ref) << " | " << Join(hyp);
    EXPECT_EQ(c.reference_words, static_cast<int64_t>(ref.size()));
    // counts consistent with the lengths
    EXPECT_EQ(static_cast<int64_t>(hyp.size()),
              static_cast<int64_t>(ref.size()) - c.deletions + c.insertions);
  }
}

TEST(Align, Properties) {
  CounterRng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto x = RandomWords(rng, 9), y = RandomWords(rng, 9);
    EXPECT_EQ(Align(x, x).errors(), 0);
    const auto xy = Align(x, y), yx = Align(y, x);
    EXPECT_EQ(xy.errors(), yx.errors());
    // the tie-break is ordered, so swapping arguments keeps the total; the
    // insertion/deletion split mirrors whenever the optimum is unique in kind
    EXPECT_EQ(xy.insertions - xy.deletions, yx.deletions - yx.insertions);
  }
}

TEST(CorpusWer, IdenticalPairs) {
  const std::vector<std::pair<std::string, std::string>> p = {{"a b", "a b"}, {"c", "c"}};
  EXPECT_EQ(ComputeCorpusWer(p).wer, 0.0);
}

TEST(CorpusWer, MicroAverage) {
  const std::vector<std::pair<std::string, std::string>> p = {{"a b", "a x"}, {"c d", "c d"}};
  const auto r = ComputeCorpusWer(p);
  EXPECT_DOUBLE_EQ(r.wer, 0.25);
  EXPECT_EQ(r.totals, Ec(0, 0, 1, 4));
}

TEST(CorpusWer, Errors) {
  const std::vector<std::pair<std::string, std::string>> p = {{"", "a"}};
  EXPECT_THROW(ComputeCorpusWer(p), ParameterError);
  EXPECT_THROW(ComputeCorpusWer(std::span<const EditCounts>{}), ParameterError);
}

TEST(CorpusWer, ConcatenationIsWeightedCombination) {
  CounterRng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<EditCounts> a, b;
    for (int i = 0; i < 5; ++i) a.push_back(Ec(rng.UniformInt(3), rng.UniformInt(3), rng.UniformInt(3), 1 + rng.UniformInt(9)));
    for (int i = 0; i < 3; ++i) b.push_back(Ec(rng.UniformInt(3), rng.UniformInt(3), rng.UniformInt(3), 1 + rng.UniformInt(9)));
    std::vector<EditCounts> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    const auto ra = ComputeCorpusWer(a), rb = ComputeCorpusWer(b), rab = ComputeCorpusWer(ab);
    const double na = ra.totals.reference_words, nb = rb.totals.reference_words;
    EXPECT_NEAR(rab.wer, (ra.wer * na + rb.wer * nb) / (na + nb), 1e-12);
  }
}

TEST(Percentile, MatchesIndependentOracle) {
  CounterRng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng.UniformInt(20));
    for (double& x : v) x = rng.Uniform(-5, 5);
    std::sort(v.begin(), v.end());
    for (double p : {0.0, 2.5, 25.0, 50.0, 97.5, 100.0, rng.Uniform(0, 100)}) {
      EXPECT_NEAR(Percentile(v, p), oracle::InterpolatedPercentile(v, p), 1e-12);
    }
  }
  const std::vector<double> v = {0, 10};
  EXPECT_DOUBLE_EQ(Percentile(v, 25), 2.5);
}

TEST(Bootstrap, ZeroVarianceCollapses) {
  const std::vector<EditCounts> u(7, Ec(1, 0, 1, 8));
  const auto ci = Bootstrap(u, 1000, 9);
  EXPECT_DOUBLE_EQ(ci.point, 0.25);
  EXPECT_DOUBLE_EQ(ci.lower, 0.25);
  EXPECT_DOUBLE_EQ(ci.upper, 0.25);
}

TEST(Bootstrap, DeterministicForSeed) {
  CounterRng rng(5);
  std::vector<EditCounts> u;
  for (int i = 0; i < 40; ++i) u.push_back(Ec(rng.UniformInt(3), rng.UniformInt(2), rng.UniformInt(4), 3 + rng.UniformInt(10)));
  const auto a = Bootstrap(u, 1000, 42), b = Bootstrap(u, 1000, 42), c = Bootstrap(u, 1000, 43);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.upper, b.upper);
  EXPECT_TRUE(a.lower != c.lower || a.upper != c.upper);
  EXPECT_LE(a.lower, a.upper);
  EXPECT_EQ(a.resamples, 1000);
  // point within the resample distribution
  auto d = BootstrapDistribution(u, 1000, 42);
  EXPECT_GE(a.point, *std::min_element(d.begin(), d.end()));
  EXPECT_LE(a.point, *std::max_element(d.begin(), d.end()));
}

TEST(Bootstrap, TwoUtterancesMatchExhaustiveEnumeration) {
  const std::vector<std::pair<int, int>> utt = {{0, 4}, {4, 4}};
  const std::vector<EditCounts> u = {Ec(0, 0, 0, 4), Ec(0, 0, 4, 4)};
  const auto exact = oracle::ExhaustiveBootstrap(utt);
  ASSERT_EQ(exact.size(), 4u);
  const auto ci = Bootstrap(u, 10000, 11);
  EXPECT_NEAR(ci.lower, oracle::InterpolatedPercentile(exact, 2.5), 0.05);
  EXPECT_NEAR(ci.upper, oracle::InterpolatedPercentile(exact, 97.5), 0.05);
  // the resample mean and spread also match the enumerated distribution
  const auto d = BootstrapDistribution(u, 10000, 11);
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / d.size();
  EXPECT_NEAR(mean, 0.5, 0.02);
  const double half = std::count(d.begin(), d.end(), 0.5) / static_cast<double>(d.size());
  EXPECT_NEAR(half, 0.5, 0.02);
}

TEST(Bootstrap, BadArguments) {
  const std::vector<EditCounts> u = {Ec(0, 0, 1, 2)};
  EXPECT_THROW(Bootstrap(std::span<const EditCounts>{}, 10, 1), ParameterError);
  EXPECT_THROW(Bootstrap(u, 0, 1), ParameterError);
  EXPECT_THROW(Bootstrap(u, 10, 1, 90, 10), ParameterError);
}

TEST(Format, WerCells) {
  BootstrapCi base{0.0755, 0.0724, 0.0787, 1000, 0};
  BootstrapCi sys{0.0721, 0.0689, 0.0753, 1000, 0};
  EXPECT_EQ(FormatWerCell(base, nullptr), "7.55 [7.24;7.87]");
  EXPECT_EQ(FormatWerCell(sys, &base), "7.21(-0.34) [6.89;7.53]");
  BootstrapCi worse{0.08, 0.07, 0.09, 1000, 0};
  EXPECT_EQ(FormatWerCell(worse, &base), "8.00(+0.45) [7.00;9.00]");
}

TEST(Format, RelativeDelta) {
  EXPECT_EQ(FormatRelativeDelta(403, 507), "-20.51%");
  EXPECT_EQ(FormatRelativeDelta(5, 0), "n/a");
  CorpusWer a{0.1, Ec(507, 10, 20, 5370)}, b{0.09, Ec(403, 10, 25, 5370)};
  const std::string table = FormatEditTable(a, b);
  EXPECT_NE(table.find("Number of Insertions"), std::string::npos) << table;
  EXPECT_NE(table.find("403 (-20.51%)"), std::string::npos) << table;
  EXPECT_NE(table.find("25 (+25.00%)"), std::string::npos) << table;
}

}  // namespace
}  // namespace sens
