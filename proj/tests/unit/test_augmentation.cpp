#include <gtest/gtest.h>

#include <algorithm>

#include "sgim/augmentation.hpp"
#include "sgim/errors.hpp"

using namespace sgim;

namespace {

MelGrid ramp(std::size_t f, std::size_t t) {
  std::vector<double> v(f * t);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 + static_cast<double>(i);
  return make_mel_grid(f, t, std::move(v));
}

}  // namespace

TEST(SpecAugment, NullRatiosAreIdentity) {
  Rng rng(1);
  const MelGrid m = ramp(20, 10);
  EXPECT_EQ(spec_augment(m, 0.0, 0.0, rng), m);
}

TEST(SpecAugment, ZeroesExactBandSizes) {
  const MelGrid m = ramp(20, 10);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const MelGrid out = spec_augment(m, 0.15, 0.3, rng);
    ASSERT_EQ(out.freq_bins, 20u);
    ASSERT_EQ(out.time_frames, 10u);
    std::size_t zero_rows = 0, zero_cols = 0, zero_cells = 0;
    for (std::size_t f = 0; f < 20; ++f) {
      bool all = true;
      for (std::size_t t = 0; t < 10; ++t) all = all && out.at(f, t) == 0.0;
      zero_rows += all;
    }
    for (std::size_t t = 0; t < 10; ++t) {
      bool all = true;
      for (std::size_t f = 0; f < 20; ++f) all = all && out.at(f, t) == 0.0;
      zero_cols += all;
    }
    for (double v : out.values) zero_cells += v == 0.0;
    EXPECT_EQ(zero_rows, 3u);
    EXPECT_EQ(zero_cols, 3u);
    EXPECT_EQ(zero_cells, 3u * 10u + 3u * 20u - 9u);  // overlap counted once
  }
}

TEST(SpecAugment, RejectsRatioOfOne) {
  Rng rng(1);
  EXPECT_THROW(spec_augment(ramp(4, 4), 1.0, 0.0, rng), ParameterError);
  EXPECT_THROW(spec_augment(ramp(4, 4), 0.0, 1.5, rng), ParameterError);
}

TEST(SpecAugment, PureGivenSeed) {
  Rng a(9), b(9);
  EXPECT_EQ(spec_augment(ramp(20, 10), 0.15, 0.3, a), spec_augment(ramp(20, 10), 0.15, 0.3, b));
}

TEST(AugmentText, ZeroProbabilitiesAreIdentity) {
  const Vocabulary v({"ocean", "wave", "surf"});
  Rng rng(3);
  const TokenSeq s = tokenize(v, "ocean wave");
  EXPECT_EQ(augment_text(s, v, SynonymTable::builtin(), rng, {0, 0, 0}), s);
}

TEST(AugmentText, ForcedSynonymKeepsOriginal) {
  const Vocabulary v({"wave", "surf"});
  const SynonymTable table(std::map<std::string, std::vector<std::string>>{{"wave", {"surf"}}});
  Rng rng(5);
  const TokenSeq out = augment_text(tokenize(v, "wave"), v, table, rng, {1, 0, 0});
  const std::string text = detokenize(v, out);
  EXPECT_NE(text.find("wave"), std::string::npos);
  EXPECT_NE(text.find("surf"), std::string::npos);
}

TEST(AugmentText, ForcedPermutationIsPinned) {
  const Vocabulary v({"a", "b", "c", "d"});
  Rng rng(42);
  const TokenSeq out = augment_text(tokenize(v, "a b c"), v, SynonymTable{}, rng, {0, 1, 0});
  EXPECT_EQ(detokenize(v, out), "c a b");
}

TEST(AugmentText, OriginalTokensAlwaysSurvive) {
  const Vocabulary v({"ocean", "wave", "heavy", "rain", "surf", "sea"});
  const TokenSeq s = tokenize(v, "ocean wave heavy");
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const TokenSeq out = augment_text(s, v, SynonymTable::builtin(), rng);
    for (auto id : s.ids) {
      EXPECT_GE(std::count(out.ids.begin(), out.ids.end(), id), std::count(s.ids.begin(), s.ids.end(), id));
    }
    for (auto id : out.ids) EXPECT_LT(id, v.size());
  }
}

TEST(AugmentText, EmptySequenceIsUsageError) {
  const Vocabulary v({"a"});
  Rng rng(1);
  EXPECT_THROW(augment_text(TokenSeq{}, v, SynonymTable{}, rng), UsageError);
}

TEST(SynonymTable, ParsesAndMatchesShippedResource) {
  const auto t = SynonymTable::parse("# comment\n\nwave: surf, breaker\n");
  ASSERT_NE(t.find("wave"), nullptr);
  EXPECT_EQ(*t.find("wave"), (std::vector<std::string>{"surf", "breaker"}));
  EXPECT_EQ(SynonymTable::load(SGIM_RESOURCE_DIR "/synonyms.txt"), SynonymTable::builtin());
}
