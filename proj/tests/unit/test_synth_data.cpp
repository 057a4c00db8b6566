#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "sgim/binary_io.hpp"
#include "sgim/encoders.hpp"
#include "sgim/errors.hpp"
#include "sgim/evaluation.hpp"
#include "sgim/synth_data.hpp"

using namespace sgim;
namespace fs = std::filesystem;

namespace {

const Dataset& desk() {
  static const Dataset d = generate_dataset(DatasetManifest{});
  return d;
}

std::vector<std::size_t> everything(const Dataset& d) {
  std::vector<std::size_t> v(d.records.size());
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::string temp_dir(const std::string& tag) {
  const auto p = fs::temp_directory_path() / ("sgim_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace

TEST(Manifest, TextRoundTripAndValidation) {
  DatasetManifest m;
  EXPECT_EQ(DatasetManifest::parse(m.to_text()), m);
  EXPECT_THROW(DatasetManifest::parse("classes = 0\n"), ValidationError);
  EXPECT_THROW(DatasetManifest::parse("colours = 3\n"), ValidationError);
}

TEST(Generate, PureFunctionOfManifest) {
  const Dataset again = generate_dataset(DatasetManifest{});
  EXPECT_EQ(again.records, desk().records);
  DatasetManifest other;
  other.seed = 8;
  EXPECT_NE(generate_dataset(other).records, desk().records);
}

TEST(Generate, ShapeAndRecordInvariants) {
  const auto& d = desk();
  ASSERT_EQ(d.records.size(), 384u);
  std::map<std::uint32_t, std::uint32_t> video_class;
  for (const auto& r : d.records) {
    EXPECT_LT(r.class_id, 8u);
    EXPECT_GE(r.intensity, 0.2);
    EXPECT_LE(r.intensity, 1.0);
    EXPECT_EQ(r.audio.values.size(), 200u);
    EXPECT_EQ(r.image.size(), 64u);
    auto [it, fresh] = video_class.emplace(r.video_id, r.class_id);
    if (!fresh) EXPECT_EQ(it->second, r.class_id);
    for (auto id : r.text.ids) EXPECT_LT(id, d.vocab.size());
  }
}

TEST(Generate, AudioClassSeparationMargin) {
  const auto& d = desk();
  double within = 0, across = 0;
  std::size_t nw = 0, na = 0;
  for (std::size_t i = 0; i < d.records.size(); i += 3) {
    for (std::size_t j = i + 1; j < d.records.size(); j += 3) {
      const double c = cosine(d.records[i].audio.values, d.records[j].audio.values);
      if (d.records[i].class_id == d.records[j].class_id) within += c, ++nw;
      else across += c, ++na;
    }
  }
  EXPECT_GE(within / nw - across / na, 0.2);
}

TEST(Generate, NuisanceOnlyInBiasedClasses) {
  std::map<std::uint32_t, std::set<std::uint32_t>> flagged_videos;
  for (const auto& r : desk().records) {
    if (r.nuisance) {
      EXPECT_TRUE(desk().manifest.bias_spec.contains(r.class_id));
      flagged_videos[r.class_id].insert(r.video_id);
    }
  }
  for (auto [c, p] : desk().manifest.bias_spec) EXPECT_EQ(flagged_videos[c].size(), 3u);
}

TEST(Generate, RawImageProbeDetectsNuisance) {
  // Leave-one-video-out balanced probe on raw images of biased classes.
  const auto& d = desk();
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < d.records.size(); ++i)
    if (d.manifest.bias_spec.contains(d.records[i].class_id)) used.push_back(i);
  std::set<std::uint32_t> videos;
  for (auto i : used) videos.insert(d.records[i].video_id);
  std::size_t hit[2] = {0, 0}, total[2] = {0, 0};
  for (auto held : videos) {
    std::vector<double> trx, tex;
    std::vector<std::size_t> tr_y, te_y;
    for (auto i : used) {
      const auto& r = d.records[i];
      auto& x = r.video_id == held ? tex : trx;
      x.insert(x.end(), r.image.begin(), r.image.end());
      (r.video_id == held ? te_y : tr_y).push_back(r.nuisance ? 1 : 0);
    }
    const ad::Array a({tr_y.size(), 64}, trx), b({te_y.size(), 64}, tex);
    const auto pred = probe_predict(a, tr_y, b, 2, {200, 0.1, true});
    for (std::size_t k = 0; k < te_y.size(); ++k) {
      ++total[te_y[k]];
      hit[te_y[k]] += pred[k] == te_y[k];
    }
  }
  const double balanced = 0.5 * (double(hit[0]) / total[0] + double(hit[1]) / total[1]);
  EXPECT_GT(balanced, 0.5);
}

TEST(Split, WholeVideosHeldOut) {
  const auto s = split_by_video(desk(), 2);
  EXPECT_EQ(s.heldout.size(), 128u);
  EXPECT_EQ(s.train.size(), 256u);
  std::set<std::uint32_t> train_videos;
  for (auto i : s.train) train_videos.insert(desk().records[i].video_id);
  for (auto i : s.heldout) EXPECT_FALSE(train_videos.contains(desk().records[i].video_id));
  EXPECT_THROW(split_by_video(desk(), 6), UsageError);
}

TEST(Minibatch, PinnedDrawAndContracts) {
  const auto pool = everything(desk());
  Rng rng(42);
  const auto mb = sample_minibatch(desk(), pool, 8, rng, 0.15, 0.3);
  EXPECT_EQ(mb.indices, (std::vector<std::size_t>{342, 266, 60, 375, 185, 368, 10, 355}));

  Rng r2(1);
  const auto both = sample_minibatch(desk(), {4, 9}, 2, r2, 0.0, 0.0);
  EXPECT_EQ(std::set<std::size_t>(both.indices.begin(), both.indices.end()), (std::set<std::size_t>{4, 9}));
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(both.audio_augmented[k], both.audio[k]);

  Rng r3(1);
  EXPECT_THROW(sample_minibatch(desk(), {1, 2, 3}, 4, r3, 0, 0), UsageError);
  EXPECT_THROW(sample_minibatch(desk(), {1, 2, 3}, 1, r3, 0, 0), UsageError);
}

TEST(WeakPair, TwoVideosForceTheOther) {
  const auto& d = desk();
  std::vector<std::size_t> pool;  // class 0, videos 0 and 1 only
  for (std::size_t i = 0; i < d.records.size(); ++i)
    if (d.records[i].video_id < 2) pool.push_back(i);
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const auto j = sample_weak_pair(d, pool, pool[0], rng);
    EXPECT_EQ(d.records[j].video_id, 1u);
    EXPECT_EQ(d.records[j].class_id, d.records[pool[0]].class_id);
  }
}

TEST(WeakPair, UniformOverCandidateVideos) {
  const auto& d = desk();
  const auto pool = everything(d);
  Rng rng(2024);
  const std::size_t anchor = 17, draws = 10000;
  std::map<std::uint32_t, std::size_t> counts;
  for (std::size_t k = 0; k < draws; ++k) {
    const auto j = sample_weak_pair(d, pool, anchor, rng);
    ASSERT_EQ(d.records[j].class_id, d.records[anchor].class_id);
    ASSERT_NE(d.records[j].video_id, d.records[anchor].video_id);
    ++counts[d.records[j].video_id];
  }
  ASSERT_EQ(counts.size(), 5u);
  const double expected = static_cast<double>(draws) / counts.size();
  double chi2 = 0;
  for (auto [v, n] : counts) chi2 += (n - expected) * (n - expected) / expected;
  const double p = 1.0 - boost::math::cdf(boost::math::chi_squared(counts.size() - 1), chi2);
  EXPECT_GT(p, 0.01);
}

TEST(Persistence, DatasetRoundTripIsByteIdentical) {
  const std::string a = temp_dir("data_a"), b = temp_dir("data_b");
  save_dataset(desk(), a);
  const Dataset back = load_dataset(a);
  EXPECT_EQ(back.records, desk().records);
  EXPECT_EQ(back.manifest, desk().manifest);
  save_dataset(back, b);
  for (const char* f : {"manifest.txt", "audio.tmd", "text.tmd", "image.tmd", "meta.tmd"}) {
    EXPECT_EQ(io::read_file(a + "/" + f), io::read_file(b + "/" + f)) << f;
  }
  EXPECT_EQ(io::read_file(a + "/audio.tmd").substr(0, 4), "TMD1");
}

TEST(Persistence, CorruptFilesFailLoudly) {
  const std::string a = temp_dir("data_bad");
  save_dataset(desk(), a);
  std::string bytes = io::read_file(a + "/image.tmd");
  bytes[0] = 'X';
  io::write_file(a + "/image.tmd", bytes);
  EXPECT_THROW(load_dataset(a), IoError);
  EXPECT_THROW(load_dataset(a + "/missing"), IoError);
}
