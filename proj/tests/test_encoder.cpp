#include "isch/encoder.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace isch;
using isch::testing::random_data;
using isch::testing::random_matrix;

namespace {

HashModel identity_model(int d) {
  HashModel m;
  m.projection = Matrix::Identity(d, d);
  m.mean = Vector::Zero(d);
  m.params = baseline_params(d);
  return m;
}

// Clustered data with enough structure for a small overcomplete dictionary.
DataMatrix clustered(Index n, Index d, int centers, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix c = gaussian_matrix(centers, d, rng, 9.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, centers - 1);
  DataMatrix x(n, d);
  for (Index i = 0; i < n; ++i) {
    const int k = pick(rng);
    for (Index j = 0; j < d; ++j) x(i, j) = c(k, j) + noise(rng);
  }
  return x;
}

}  // namespace

TEST(BinaryCodeSet, BitLayout) {
  BinaryCodeSet c(2, 130);
  EXPECT_EQ(c.words_per_code(), 3u);
  c.set_bit(1, 0, true);
  c.set_bit(1, 64, true);
  c.set_bit(1, 129, true);
  EXPECT_EQ(c.code(1)[0], 1ULL);
  EXPECT_EQ(c.code(1)[1], 1ULL);
  EXPECT_EQ(c.code(1)[2], 2ULL);
  EXPECT_EQ(c.code(0)[0], 0ULL);
  EXPECT_TRUE(c.pad_bits_clear());
  c.code(0)[2] |= 1ULL << 5;
  EXPECT_FALSE(c.pad_bits_clear());
}

TEST(BinaryCodeSet, PackUnpackRoundTrip) {
  Rng rng(12);
  std::uniform_int_distribution<int> len(1, 200);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = len(rng);
    const std::size_t n = 7;
    std::vector<std::uint8_t> bits(n * static_cast<std::size_t>(m));
    for (auto& b : bits) b = coin(rng);
    const BinaryCodeSet packed = BinaryCodeSet::pack(bits, n, m);
    EXPECT_TRUE(packed.pad_bits_clear());
    EXPECT_EQ(packed.unpack(), bits);
    const auto again = packed.unpack();
    EXPECT_EQ(BinaryCodeSet::pack(again, n, m), packed);
  }
}

TEST(EncodeBatch, IdentityProjection) {
  DataMatrix x(1, 2);
  x << 1, -1;
  const BinaryCodeSet c = encode_batch(identity_model(2), x);
  EXPECT_TRUE(c.bit(0, 0));
  EXPECT_FALSE(c.bit(0, 1));
}

TEST(EncodeBatch, MeanEncodesToAllOnes) {
  HashModel m;
  m.projection = random_matrix(70, 5, 3);
  m.mean = random_matrix(5, 1, 4).col(0);
  DataMatrix x(1, 5);
  x.row(0) = m.mean.transpose();
  const BinaryCodeSet c = encode_batch(m, x);
  for (int j = 0; j < 70; ++j) EXPECT_TRUE(c.bit(0, j));
  EXPECT_TRUE(c.pad_bits_clear());
}

TEST(EncodeBatch, NegatedProjectionFlipsNonzeroBits) {
  HashModel m;
  m.projection = random_matrix(40, 6, 5);
  m.projection.row(3).setZero();  // this bit projects to exactly zero
  m.mean = Vector::Zero(6);
  HashModel neg = m;
  neg.projection = -m.projection;
  const DataMatrix x = random_data(30, 6, 6);
  const BinaryCodeSet a = encode_batch(m, x), b = encode_batch(neg, x);
  for (std::size_t i = 0; i < 30; ++i)
    for (int j = 0; j < 40; ++j) {
      if (j == 3) {
        EXPECT_TRUE(a.bit(i, j));
        EXPECT_TRUE(b.bit(i, j));
      } else {
        EXPECT_NE(a.bit(i, j), b.bit(i, j));
      }
    }
}

TEST(EncodeBatch, DimensionMismatch) {
  EXPECT_THROW(encode_batch(identity_model(3), random_data(2, 4, 1)), Error);
}

TEST(EncodeBatch, IdempotentAcrossThreadCounts) {
  const HashModel m = train_lsh(random_data(50, 30, 1), 100, 2);
  const DataMatrix x = random_data(500, 30, 3);
  set_thread_count(1);
  const BinaryCodeSet a = encode_batch(m, x);
  set_thread_count(4);
  EXPECT_EQ(encode_batch(m, x), a);
  EXPECT_EQ(encode_batch(m, x), a);
}

TEST(Lsh, SeedsAndScaleInvariance) {
  const DataMatrix train = random_data(40, 12, 1);
  const HashModel a = train_lsh(train, 32, 1);
  const HashModel b = train_lsh(train, 32, 2);
  EXPECT_NE(a.projection, b.projection);
  EXPECT_EQ(train_lsh(train, 32, 1).projection, a.projection);
  EXPECT_EQ(a.method, Method::LSH);
  // Rows are raw Gaussians, not unit vectors.
  EXPECT_GT(std::abs(a.projection.row(0).norm() - 1.0), 1e-6);

  HashModel zero_mean = a;
  zero_mean.mean.setZero();
  const DataMatrix x = random_data(25, 12, 9);
  EXPECT_EQ(encode_batch(zero_mean, x), encode_batch(zero_mean, DataMatrix(2.0 * x)));
}

TEST(Itq, PcaRecoversAxesOfAnisotropicData) {
  Rng rng(3);
  std::normal_distribution<double> unit(0.0, 1.0);
  DataMatrix x(4000, 8);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < 8; ++j) x(i, j) = (8.0 - static_cast<double>(j)) * unit(rng);
  const Pca pca = pca_directions(zero_center(x).data, 8);
  for (Index j = 0; j < 8; ++j) {
    EXPECT_NEAR(std::abs(pca.directions(j, j)), 1.0, 1e-2) << "axis " << j;
    if (j > 0) {
      EXPECT_GT(pca.variances(j - 1), pca.variances(j));
    }
  }
}

TEST(Itq, QuantizationErrorNonIncreasingAndDeterministic) {
  const DataMatrix x = random_data(600, 10, 4);
  const TrainResult a = train_itq(x, 6, 5);
  const auto& h = a.report.block_history.front();
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1]);
  EXPECT_EQ(train_itq(x, 6, 5).model.projection, a.model.projection);
  EXPECT_EQ(a.model.bits(), 6);
  EXPECT_THROW(train_itq(x, 11, 5), Error);
}

TEST(TrainIsch, ShapesMeanCodeAndDeterminism) {
  const DataMatrix x = clustered(600, 16, 12, 7);
  const auto params = ModelParams::make(0.12, 0.05, 8, 2);
  DictConfig cfg;
  cfg.k1 = 5;
  cfg.rng_seed = 3;
  const TrainResult res = train_isch(x, params, cfg, 11);
  EXPECT_EQ(res.model.projection.rows(), 8);
  EXPECT_EQ(res.model.projection.cols(), 16);
  EXPECT_GT(res.report.dict_k, 16);
  EXPECT_LE(res.report.dict_k, 5 * 11);
  ASSERT_EQ(res.report.block_history.size(), 2u);

  DataMatrix mean_row(1, 16);
  mean_row.row(0) = x.colwise().mean();
  const BinaryCodeSet code = encode_batch(res.model, mean_row);
  for (int j = 0; j < 8; ++j) EXPECT_TRUE(code.bit(0, j));

  const TrainResult again = train_isch(x, params, cfg, 11);
  EXPECT_EQ(again.model.projection, res.model.projection);
  EXPECT_EQ(again.model.mean, res.model.mean);
  EXPECT_NE(train_isch(x, params, cfg, 12).model.projection, res.model.projection);
}

TEST(TrainIsch, RotationKeepsReducedInnerProducts) {
  const DataMatrix x = clustered(400, 12, 10, 8);
  const auto params = ModelParams::make(0.12, 0.05, 6, 3);
  DictConfig cfg;
  cfg.k1 = 4;
  const TrainResult res = train_isch(x, params, cfg, 1);
  // Rows of the projection are rotated W rows, so pairwise inner products of
  // reduced vectors are those of an exact spectral W with the same blocks.
  const Matrix& p = res.model.projection;
  const DataMatrix y = zero_center(x).data * p.transpose();
  Rng rng(2);
  const RotationModel extra = assemble_rotation({random_orthogonal(2, rng), random_orthogonal(2, rng), random_orthogonal(2, rng)});
  const DataMatrix y2 = zero_center(x).data * extra.rotate_rows(p).transpose();
  const Matrix g1 = y * y.transpose(), g2 = y2 * y2.transpose();
  EXPECT_LT((g1 - g2).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(TrainIsch, RefusesCodeLongerThanDictionary) {
  const DataMatrix x = clustered(200, 8, 4, 1);
  DictConfig cfg;
  cfg.k1 = 2;
  cfg.min_split = 1000;  // only level-1 atoms: k = 2
  try {
    train_isch(x, ModelParams::make(0.12, 0.05, 4, 1), cfg, 0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "code longer than dictionary");
  }
}

TEST(TrainIsch, WarnsWhenDictionaryNotOvercomplete) {
  const DataMatrix x = clustered(300, 20, 6, 2);
  DictConfig cfg;
  cfg.k1 = 2;
  const TrainResult res = train_isch(x, ModelParams::make(0.12, 0.05, 4, 2), cfg, 0);
  EXPECT_LE(res.report.dict_k, 20);
  ASSERT_FALSE(res.report.warnings.empty());
  EXPECT_NE(res.report.warnings.front().find("not overcomplete"), std::string::npos);
}

TEST(TrainIsch, DeterministicAcrossThreadCounts) {
  const DataMatrix x = clustered(800, 24, 16, 5);
  const auto params = ModelParams::make(0.001, 0.05, 16, 4);
  DictConfig cfg;
  cfg.k1 = 6;
  cfg.rng_seed = 4;
  set_thread_count(1);
  const TrainResult a = train_isch(x, params, cfg, 9);
  set_thread_count(4);
  const TrainResult b = train_isch(x, params, cfg, 9);
  EXPECT_EQ(a.model.projection, b.model.projection);
}
