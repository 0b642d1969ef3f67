#pragma once

// Scaled spectral projection W = diag(f(lambda)) V^T of a dictionary, either
// from a full SVD or from column-sampled rank-l subproblems.

#include "isch/core.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

namespace isch {

struct ModelParams {
  double tau = 0.12;       // Laplace scale of the sparse coefficients
  double sigma_sq = 0.006; // noise variance, always eta * tau
  double eta = 0.05;       // lasso weight
  int bits_m = 0;
  int blocks_q = 1;
  int block_len = 0;

  static ModelParams make(double tau, double eta, int bits, int blocks) {
    if (!(tau > 0.0) || !(eta > 0.0)) throw Error("tau and eta must be positive");
    if (bits <= 0 || blocks <= 0) throw Error("bits and blocks must be positive");
    if (bits % blocks != 0)
      throw Error("bits (" + std::to_string(bits) + ") not divisible by blocks (" +
                  std::to_string(blocks) + ")");
    ModelParams p;
    p.tau = tau;
    p.eta = eta;
    p.sigma_sq = eta * tau;
    p.bits_m = bits;
    p.blocks_q = blocks;
    p.block_len = bits / blocks;
    return p;
  }

  void validate() const {
    if (!(tau > 0.0) || !(eta > 0.0) || !(sigma_sq > 0.0))
      throw Error("tau, eta and sigma^2 must be positive");
    if (bits_m <= 0 || blocks_q <= 0 || block_len <= 0 || bits_m != blocks_q * block_len)
      throw Error("bits must equal blocks x block length");
    if (std::abs(sigma_sq - eta * tau) > 1e-12 * std::max(1.0, sigma_sq))
      throw Error("sigma^2 must equal eta x tau");
  }
};

struct SingularPair {
  double sigma_val = 0.0;
  Vector vec;  // unit left singular vector
  int block_id = 0;

  double lambda() const { return sigma_val * sigma_val; }
};

struct SpectralModel {
  std::vector<SingularPair> pairs;  // contiguous per block, descending within a block
  Matrix W;                         // m x d
  int resamples = 0;                // column re-draws forced by rank-deficient blocks

  Vector lambdas() const {
    Vector l(static_cast<Index>(pairs.size()));
    for (std::size_t i = 0; i < pairs.size(); ++i) l(static_cast<Index>(i)) = pairs[i].lambda();
    return l;
  }
};

/// Eigenvalue scaling of the closed-form inner-product-preserving projection,
/// sqrt(4 tau^4 l / (s^4 + 4 tau^2 s^2 l + 4 tau^4 l^2)) with s^2 = sigma^2.
inline double f_lambda(double lambda, const ModelParams& p) {
  const double t2 = p.tau * p.tau;
  const double t4 = t2 * t2;
  const double s2 = p.sigma_sq;
  const double num = 4.0 * t4 * lambda;
  const double den = s2 * s2 + 4.0 * t2 * s2 * lambda + 4.0 * t4 * lambda * lambda;
  return std::sqrt(num / den);
}

struct FPeak {
  double lambda;
  double value;
};

// f is maximal at lambda = sigma^2 / (2 tau^2) where it equals tau / (sigma sqrt 2).
inline FPeak f_lambda_peak(const ModelParams& p) {
  return {p.sigma_sq / (2.0 * p.tau * p.tau), p.tau / std::sqrt(2.0 * p.sigma_sq)};
}

inline Matrix assemble_W(const std::vector<SingularPair>& pairs, const ModelParams& p) {
  if (pairs.empty()) return {};
  const Index d = pairs.front().vec.size();
  Matrix w(static_cast<Index>(pairs.size()), d);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    w.row(static_cast<Index>(i)) = f_lambda(pairs[i].lambda(), p) * pairs[i].vec.transpose();
  return w;
}

/// Reference path: top-m singular pairs of D from a full SVD, blocks assigned
/// as consecutive chunks of block_len.
inline SpectralModel exact_spectral(const Matrix& dict, int m, const ModelParams& p) {
  p.validate();
  if (m != p.bits_m) throw Error("m must equal the configured code length");
  if (m > dict.rows()) throw Error("insufficient rank: m exceeds the dimension");
  Eigen::BDCSVD<Matrix> svd(dict, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  if (s.size() < m || !(s(0) > 0.0) || s(m - 1) / s(0) <= 1e-10) throw Error("insufficient rank");

  SpectralModel out;
  out.pairs.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    auto& pr = out.pairs[static_cast<std::size_t>(i)];
    pr.sigma_val = s(i);
    pr.vec = svd.matrixU().col(i);
    pr.block_id = i / p.block_len;
  }
  out.W = assemble_W(out.pairs, p);
  return out;
}

struct ColumnSample {
  Matrix columns;             // d x m
  std::vector<Index> indices; // distinct column indices into D
};

/// Uniform sampling of m distinct columns without replacement (partial
/// Fisher-Yates under the seeded generator).
inline ColumnSample sample_columns(const Matrix& dict, int m, std::uint64_t seed) {
  const Index k = dict.cols();
  if (m < 0 || m > k) throw Error("sample larger than dictionary");
  std::vector<Index> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  for (Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Index> pick(i, k - 1);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
  }
  ColumnSample out;
  out.indices.assign(perm.begin(), perm.begin() + m);
  out.columns.resize(dict.rows(), m);
  for (Index j = 0; j < m; ++j) out.columns.col(j) = dict.col(out.indices[static_cast<std::size_t>(j)]);
  return out;
}

inline constexpr double kRankTolerance = 1e-10;
inline constexpr int kMaxResamples = 20;

/// Singular pairs of the column projection U_C U_C^T D for one d x l block.
/// A block whose relative rank test fails is redrawn through `resample`.
inline std::vector<SingularPair> subproblem_pairs(Matrix block, const Matrix& dict,
                                                  const std::function<Matrix()>& resample,
                                                  int block_id = 0, int* resample_count = nullptr) {
  Matrix basis;
  for (int attempt = 0;; ++attempt) {
    Eigen::JacobiSVD<Matrix> svd(block, Eigen::ComputeThinU);
    const Vector& s = svd.singularValues();
    const bool full_rank = s.size() == block.cols() && s.size() > 0 && s(0) > 0.0 &&
                           s(s.size() - 1) / s(0) > kRankTolerance;
    if (full_rank) {
      basis = svd.matrixU();
      break;
    }
    if (attempt == kMaxResamples || !resample) throw Error("degenerate dictionary block");
    block = resample();
    if (resample_count) ++*resample_count;
  }

  const Matrix projected = basis.transpose() * dict;  // l x k
  Eigen::JacobiSVD<Matrix> svd(projected, Eigen::ComputeThinU);
  const Matrix vecs = basis * svd.matrixU();

  std::vector<SingularPair> pairs(static_cast<std::size_t>(svd.singularValues().size()));
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    pairs[j].sigma_val = svd.singularValues()(static_cast<Index>(j));
    pairs[j].vec = vecs.col(static_cast<Index>(j)).normalized();
    pairs[j].block_id = block_id;
  }
  return pairs;
}

/// Column-sampled spectral model: m atoms drawn from D, split into Q blocks of
/// l columns, each block solved independently and merged in block order.
inline SpectralModel approximate_spectral(const Matrix& dict, const ModelParams& p, std::uint64_t seed) {
  p.validate();
  const int m = p.bits_m;
  const int len = p.block_len;
  if (m > dict.cols()) throw Error("code longer than dictionary");
  const ColumnSample sample = sample_columns(dict, m, seed);

  std::vector<std::vector<SingularPair>> per_block(static_cast<std::size_t>(p.blocks_q));
  std::vector<int> redraws(static_cast<std::size_t>(p.blocks_q), 0);
  std::vector<std::string> failures(static_cast<std::size_t>(p.blocks_q));

#pragma omp parallel for schedule(dynamic)
  for (int q = 0; q < p.blocks_q; ++q) {
    const auto first = sample.indices.begin() + static_cast<std::ptrdiff_t>(q) * len;
    // Redraws come from atoms that no other block uses.
    std::vector<bool> taken(static_cast<std::size_t>(dict.cols()), false);
    for (std::size_t i = 0; i < sample.indices.size(); ++i)
      if (i / static_cast<std::size_t>(len) != static_cast<std::size_t>(q))
        taken[static_cast<std::size_t>(sample.indices[i])] = true;
    std::vector<Index> pool;
    for (Index a = 0; a < dict.cols(); ++a)
      if (!taken[static_cast<std::size_t>(a)]) pool.push_back(a);

    int attempt = 0;
    auto resample = [&]() -> Matrix {
      ++attempt;
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(q) + 1, static_cast<std::uint64_t>(attempt)));
      std::vector<Index> candidates = pool;
      if (candidates.size() < static_cast<std::size_t>(len)) {
        candidates.resize(static_cast<std::size_t>(dict.cols()));
        std::iota(candidates.begin(), candidates.end(), Index{0});
      }
      Matrix cols(dict.rows(), len);
      for (int j = 0; j < len; ++j) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(j), candidates.size() - 1);
        std::swap(candidates[static_cast<std::size_t>(j)], candidates[pick(rng)]);
        cols.col(j) = dict.col(candidates[static_cast<std::size_t>(j)]);
      }
      return cols;
    };

    Matrix block(dict.rows(), len);
    for (int j = 0; j < len; ++j) block.col(j) = dict.col(first[j]);
    try {
      per_block[static_cast<std::size_t>(q)] =
          subproblem_pairs(std::move(block), dict, resample, q, &redraws[static_cast<std::size_t>(q)]);
    } catch (const Error& e) {
      failures[static_cast<std::size_t>(q)] = e.what();
    }
  }

  SpectralModel out;
  for (int q = 0; q < p.blocks_q; ++q) {
    if (!failures[static_cast<std::size_t>(q)].empty()) throw Error(failures[static_cast<std::size_t>(q)]);
    auto& b = per_block[static_cast<std::size_t>(q)];
    out.pairs.insert(out.pairs.end(), b.begin(), b.end());
    out.resamples += redraws[static_cast<std::size_t>(q)];
  }
  out.W = assemble_W(out.pairs, p);
  return out;
}

/// Largest spectral norm of U_i^T U_j over distinct blocks i, j. Zero when the
/// blocks span mutually orthogonal subspaces.
inline double cross_block_overlap(const SpectralModel& model, const ModelParams& p) {
  if (model.pairs.empty()) return 0.0;
  const Index d = model.pairs.front().vec.size();
  std::vector<Matrix> bases(static_cast<std::size_t>(p.blocks_q), Matrix(d, p.block_len));
  for (std::size_t i = 0; i < model.pairs.size(); ++i)
    bases[i / static_cast<std::size_t>(p.block_len)].col(static_cast<Index>(i % static_cast<std::size_t>(p.block_len))) =
        model.pairs[i].vec;
  double worst = 0.0;
  for (std::size_t i = 0; i < bases.size(); ++i)
    for (std::size_t j = i + 1; j < bases.size(); ++j) {
      Eigen::JacobiSVD<Matrix> svd(bases[i].transpose() * bases[j]);
      worst = std::max(worst, svd.singularValues()(0));
    }
  return worst;
}

/// Rows whose scale f(lambda_i) falls below `ratio` x max_i f(lambda_i).
inline std::vector<int> weak_rows(const SpectralModel& model, const ModelParams& p, double ratio = 1e-3) {
  std::vector<double> f;
  for (const auto& pr : model.pairs) f.push_back(f_lambda(pr.lambda(), p));
  std::vector<int> out;
  if (f.empty()) return out;
  const double top = *std::max_element(f.begin(), f.end());
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] < ratio * top) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace isch
