#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "sgim/errors.hpp"
#include "sgim/losses.hpp"
#include "sgim/synth_data.hpp"
#include "sgim/training.hpp"

using namespace sgim;
using ad::Array;

namespace {

Array unit_rows(std::uint64_t seed, std::size_t n, std::size_t d) {
  Rng rng(seed);
  std::vector<double> v(n * d);
  for (double& x : v) x = rng.normal();
  return ad::l2_normalize_rows(ad::constant(Array({n, d}, std::move(v)))).value();
}

// Random orthogonal d x d matrix by Gram-Schmidt on Gaussian columns.
Array orthogonal(std::uint64_t seed, std::size_t d) {
  Rng rng(seed);
  std::vector<std::vector<double>> q;
  while (q.size() < d) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.normal();
    for (const auto& u : q) {
      const double dot = std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
      for (std::size_t i = 0; i < d; ++i) v[i] -= dot * u[i];
    }
    const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& x : v) x /= n;
    q.push_back(v);
  }
  std::vector<double> flat;
  for (const auto& r : q) flat.insert(flat.end(), r.begin(), r.end());
  return Array({d, d}, flat);
}

Array rotate(const Array& x, const Array& r) { return ad::matmul(ad::constant(x), ad::constant(r)).value(); }

Array permute_rows(const Array& x, const std::vector<std::size_t>& perm) {
  std::vector<double> v;
  for (auto p : perm) v.insert(v.end(), x.row_span(p).begin(), x.row_span(p).end());
  return Array(x.shape(), v);
}

double nce(const Array& a, const Array& b, double tau) {
  return info_nce_pair(ad::constant(a), ad::constant(b), tau).item();
}

const double kE = std::exp(1.0);

}  // namespace

TEST(Similarity, HandComputedTwoByTwo) {
  const Array id = Array::from_rows({{1, 0}, {0, 1}});
  const auto m = similarity_matrix(id, id, 1.0).values;
  const double hi = kE / (kE + 1), lo = 1 / (kE + 1);
  EXPECT_NEAR(m.at(0, 0), hi, 1e-12);
  EXPECT_NEAR(m.at(0, 1), lo, 1e-12);
  EXPECT_NEAR(m.at(1, 0), lo, 1e-12);
  EXPECT_NEAR(m.at(1, 1), hi, 1e-12);
  EXPECT_NEAR(m.at(0, 0), 0.73106, 1e-4);
  EXPECT_NEAR(m.at(0, 1), 0.26894, 1e-4);
}

TEST(Similarity, IdenticalRowsGiveUniform) {
  const Array r = Array::from_rows({{0.6, 0.8}, {0.6, 0.8}, {0.6, 0.8}});
  const auto m = similarity_matrix(r, r, 0.07);
  for (double v : m.values.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-12);
}

TEST(Similarity, AsymmetricNormalization) {
  const Array a = unit_rows(1, 3, 4), b = unit_rows(2, 3, 4);
  const auto ab = similarity_matrix(a, b, 0.5).values;
  const auto ba = similarity_matrix(b, a, 0.5).values;
  double diff = 0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) diff = std::max(diff, std::abs(ab.at(i, j) - ba.at(j, i)));
  EXPECT_GT(diff, 1e-3);
}

TEST(Similarity, RowsStochasticAndEmptyRejected) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto m = similarity_matrix(unit_rows(s, 6, 5), unit_rows(s + 100, 6, 5), 0.07).values;
    for (std::size_t i = 0; i < 6; ++i) {
      double t = 0;
      for (double v : m.row_span(i)) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
        t += v;
      }
      EXPECT_NEAR(t, 1.0, 1e-9);
    }
  }
  EXPECT_THROW(similarity_matrix(ad::constant(Array({0, 2}, {})), ad::constant(Array({0, 2}, {})), 1.0), UsageError);
}

TEST(InfoNce, HandComputedOrthogonalPairs) {
  const Array id = Array::from_rows({{1, 0}, {0, 1}});
  EXPECT_NEAR(nce(id, id, 1.0), -2.0 * std::log(kE / (kE + 1)), 1e-12);
  EXPECT_NEAR(nce(id, id, 1.0), 0.62652, 1e-4);
  EXPECT_NEAR(self_supervised_loss(ad::constant(id), ad::constant(id), 1.0).item(), 0.62652, 1e-4);
  EXPECT_LT(nce(id, id, 0.05), 1e-3);
}

TEST(InfoNce, RejectsSingleRow) {
  const Array one = Array::from_rows({{1, 0}});
  EXPECT_THROW(nce(one, one, 1.0), UsageError);
}

TEST(InfoNce, NonNegativePermutationEquivariantRotationInvariant) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Array a = unit_rows(s, 6, 5), b = unit_rows(s + 50, 6, 5);
    const double base = nce(a, b, 0.07);
    EXPECT_GE(base, 0.0);
    const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    EXPECT_NEAR(nce(permute_rows(a, perm), permute_rows(b, perm), 0.07), base, 1e-9);
    const double self = self_supervised_loss(ad::constant(a), ad::constant(b), 0.07).item();
    EXPECT_NEAR(self_supervised_loss(ad::constant(permute_rows(a, perm)), ad::constant(permute_rows(b, perm)), 0.07)
                    .item(),
                self, 1e-9);
    const Array r = orthogonal(s + 7, 5);
    EXPECT_NEAR(nce(rotate(a, r), rotate(b, r), 0.07), base, 1e-9);
  }
}

TEST(SelfSupervised, NearDuplicateNegativesCostMore) {
  const double c = 0.99, s = std::sqrt(1 - c * c);
  const Array close = Array::from_rows({{1, 0}, {c, s}});
  const Array ortho = Array::from_rows({{1, 0}, {0, 1}});
  const auto loss = [](const Array& a) { return self_supervised_loss(ad::constant(a), ad::constant(a), 1.0).item(); };
  EXPECT_GT(loss(close), loss(ortho));
}

TEST(WeakKl, HandComputedPerTerms) {
  // Sharp temperature: orthogonal teacher rows give a diagonal of 1 (to ~e^-100).
  const double tau = 0.01, h = 1 / std::sqrt(2.0);
  const Array id = Array::from_rows({{1, 0}, {0, 1}});
  const Array mid = Array::from_rows({{h, h}, {h, h}});
  // teacher diag 1, student diag 0.5
  const double l1 = weak_kl_loss(ad::constant(mid), ad::constant(id), ad::constant(id), tau).item();
  EXPECT_NEAR(l1, -std::log(0.5), 1e-12);
  EXPECT_NEAR(l1, 0.69315, 1e-4);
  // teacher diag 0.5, student diag 0.5
  const double l2 = weak_kl_loss(ad::constant(mid), ad::constant(id), ad::constant(mid), tau).item();
  EXPECT_NEAR(l2, -0.5 * std::log(0.5), 1e-12);
  EXPECT_NEAR(l2, 0.34657, 1e-4);
  // teacher = student diag 1
  EXPECT_NEAR(weak_kl_loss(ad::constant(id), ad::constant(id), ad::constant(id), tau).item(), 0.0, 1e-12);
}

TEST(WeakKl, MonotoneInStudentDiagonal) {
  const Array id = Array::from_rows({{1, 0}, {0, 1}});
  double prev = INFINITY;
  for (double angle = 0.0; angle <= 0.78; angle += 0.06) {
    // Rotate each audio row from the diagonal target toward the other image.
    const double c = std::cos(angle), s = std::sin(angle);
    const Array a = Array::from_rows({{c, s}, {s, c}});
    const double l = weak_kl_loss(ad::constant(a), ad::constant(id), ad::constant(id), 0.5).item();
    if (angle > 0) EXPECT_GT(l, prev - 1e-15);
    prev = l;
  }
}

TEST(WeakKl, TeacherReceivesNoGradient) {
  const auto a = ad::parameter(unit_rows(1, 4, 3));
  const auto t = ad::parameter(unit_rows(2, 4, 3));
  const auto v = ad::parameter(unit_rows(3, 4, 3));
  ad::backward(weak_kl_loss(a, v, t, 0.07));
  for (double g : t.grad().data()) EXPECT_EQ(g, 0.0);
  double mag = 0;
  for (double g : a.grad().data()) mag += std::abs(g);
  EXPECT_GT(mag, 0.0);
}

class LossBatch : public ::testing::Test {
 protected:
  void SetUp() override {
    data = generate_dataset(DatasetManifest{});
    pool.resize(data.records.size());
    std::iota(pool.begin(), pool.end(), 0);
    Rng tr(1);
    teacher = {EncoderParams::init(data.vocab.size(), 64, 32, tr), EncoderParams::init(64, 64, 32, tr)};
    Rng ar(2);
    audio = EncoderParams::init(data.audio_dim(), 64, 32, ar);
    Rng br(3), txr(4), wr(5);
    const auto mb = sample_minibatch(data, pool, 8, br, 0.15, 0.3);
    batch = build_training_batch(data, pool, mb, SynonymTable::builtin(), true, txr, wr);
  }
  Dataset data;
  std::vector<std::size_t> pool;
  Teacher teacher;
  EncoderParams audio;
  TrainingBatch batch;
};

TEST_F(LossBatch, BreakdownAddsUp) {
  const auto full = total_loss(batch, BoundEncoder::bind(audio, false), teacher, 0.07).breakdown;
  EXPECT_NEAR(full.nce_at + full.nce_av + full.self_aa + full.kl_weak, full.total, 1e-9);
  LossFlags no_kl;
  no_kl.kl_weak = false;
  const auto ablated = total_loss(batch, BoundEncoder::bind(audio, false), teacher, 0.07, no_kl).breakdown;
  EXPECT_NEAR(ablated.total, full.nce_at + full.nce_av + full.self_aa, 1e-9);
  EXPECT_EQ(ablated.kl_weak, 0.0);
}

TEST_F(LossBatch, PinnedAtInitialization) {
  const auto b = total_loss(batch, BoundEncoder::bind(audio, false), teacher, 0.07).breakdown;
  EXPECT_NEAR(b.total, 14.96975848891455, 1e-9);
  EXPECT_NEAR(b.nce_at, 7.035092462461928, 1e-9);
  EXPECT_NEAR(b.nce_av, 6.8583365679328132, 1e-9);
  EXPECT_NEAR(b.self_aa, 0.3344043843297162, 1e-9);
  EXPECT_NEAR(b.kl_weak, 0.74192507419009202, 1e-9);
}

TEST_F(LossBatch, AllComponentsOffIsUsageError) {
  EXPECT_THROW(total_loss(batch, BoundEncoder::bind(audio, false), teacher, 0.07, {false, false, false, false, false}),
               UsageError);
}

TEST(LossCsv, HeaderAndRow) {
  EXPECT_EQ(loss_csv_header(), "epoch,nce_at,nce_av,self_aa,kl_weak,total");
  EXPECT_EQ(loss_csv_row(3, {1, 2, 0.5, 0.25, 3.75}), "3,1,2,0.5,0.25,3.75");
}
