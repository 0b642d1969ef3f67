#pragma once

// Training pipelines (ISCH, LSH, ITQ), sign-threshold encoding and the
// packed binary code container.

#include "isch/core.hpp"
#include "isch/dictionary.hpp"
#include "isch/rotation.hpp"
#include "isch/spectral.hpp"

#include <bit>
#include <span>
#include <string>
#include <vector>

namespace isch {

enum class Method : std::uint8_t { ISCH = 0, LSH = 1, ITQ = 2 };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::ISCH: return "isch";
    case Method::LSH: return "lsh";
    case Method::ITQ: return "itq";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  if (s == "isch") return Method::ISCH;
  if (s == "lsh") return Method::LSH;
  if (s == "itq") return Method::ITQ;
  throw Error("unknown method '" + s + "'");
}

// Provenance only; never needed to encode.
struct ModelMeta {
  std::uint64_t seed = 0;
  std::uint32_t dict_k = 0;
  std::uint32_t k1 = 0;
  std::uint32_t levels = 0;
  std::uint32_t proxy_dim = 0;

  bool operator==(const ModelMeta&) const = default;
};

struct HashModel {
  Method method = Method::ISCH;
  Matrix projection;  // m x d, the effective L* = R^T W
  Vector mean;        // training mean, subtracted before projecting
  ModelParams params;
  ModelMeta meta;

  Index dim() const { return projection.cols(); }
  int bits() const { return static_cast<int>(projection.rows()); }
};

/// n packed m-bit codes. Bit j of a code is bit (j % 64) of word j / 64;
/// pad bits past m are zero.
class BinaryCodeSet {
 public:
  BinaryCodeSet() = default;
  BinaryCodeSet(std::size_t n, int m)
      : n_(n), m_(m), words_per_code_(words_for(m)), words_(n * words_for(m), 0) {
    if (m <= 0) throw Error("code length must be positive");
  }

  static std::size_t words_for(int m) { return (static_cast<std::size_t>(m) + 63) / 64; }

  std::size_t size() const { return n_; }
  int bits() const { return m_; }
  std::size_t words_per_code() const { return words_per_code_; }

  std::span<const std::uint64_t> code(std::size_t i) const {
    return {words_.data() + i * words_per_code_, words_per_code_};
  }
  std::span<std::uint64_t> code(std::size_t i) { return {words_.data() + i * words_per_code_, words_per_code_}; }

  bool bit(std::size_t i, int j) const {
    return (words_[i * words_per_code_ + static_cast<std::size_t>(j) / 64] >> (j % 64)) & 1ULL;
  }
  void set_bit(std::size_t i, int j, bool value) {
    auto& w = words_[i * words_per_code_ + static_cast<std::size_t>(j) / 64];
    const std::uint64_t mask = 1ULL << (j % 64);
    w = value ? (w | mask) : (w & ~mask);
  }

  const std::vector<std::uint64_t>& words() const { return words_; }
  std::vector<std::uint64_t>& words() { return words_; }

  // One byte (0/1) per bit, row-major n x m.
  std::vector<std::uint8_t> unpack() const {
    std::vector<std::uint8_t> out(n_ * static_cast<std::size_t>(m_));
    for (std::size_t i = 0; i < n_; ++i)
      for (int j = 0; j < m_; ++j) out[i * static_cast<std::size_t>(m_) + static_cast<std::size_t>(j)] = bit(i, j);
    return out;
  }

  static BinaryCodeSet pack(std::span<const std::uint8_t> bits, std::size_t n, int m) {
    if (bits.size() != n * static_cast<std::size_t>(m)) throw Error("bit count does not match n x m");
    BinaryCodeSet out(n, m);
    for (std::size_t i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) out.set_bit(i, j, bits[i * static_cast<std::size_t>(m) + static_cast<std::size_t>(j)] != 0);
    return out;
  }

  bool pad_bits_clear() const {
    if (m_ % 64 == 0) return true;
    const std::uint64_t pad = ~((1ULL << (m_ % 64)) - 1);
    for (std::size_t i = 0; i < n_; ++i)
      if (code(i).back() & pad) return false;
    return true;
  }

  bool operator==(const BinaryCodeSet&) const = default;

 private:
  std::size_t n_ = 0;
  int m_ = 0;
  std::size_t words_per_code_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Bit i of a code is 1 iff projection_i . (x - mean) >= 0.
inline BinaryCodeSet encode_batch(const HashModel& model, const DataMatrix& x) {
  if (x.cols() != model.dim())
    throw Error("dimension mismatch: model expects " + std::to_string(model.dim()) + ", got " +
                std::to_string(x.cols()));
  const int m = model.bits();
  BinaryCodeSet codes(static_cast<std::size_t>(x.rows()), m);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < x.rows(); ++i) {
    const Vector centered = x.row(i).transpose() - model.mean;
    const Vector y = model.projection * centered;
    auto words = codes.code(static_cast<std::size_t>(i));
    for (int j = 0; j < m; ++j)
      if (y(j) >= 0.0) words[static_cast<std::size_t>(j) / 64] |= 1ULL << (j % 64);
  }
  return codes;
}

struct TrainReport {
  Index dict_k = 0;
  std::vector<int> atoms_per_level;
  Vector lambdas;                                 // per row of W, block order
  Vector f_values;
  double cross_block_overlap = 0.0;
  int resamples = 0;
  std::vector<std::vector<double>> block_history; // quantization error per sweep, per block
  std::vector<std::string> warnings;

  std::vector<double> final_block_errors() const {
    std::vector<double> out;
    for (const auto& h : block_history) out.push_back(h.back());
    return out;
  }
};

struct TrainResult {
  HashModel model;
  TrainReport report;
};

/// Per-block rotation of Z = X W^T, blocks solved independently.
inline std::vector<BlockRotation> optimize_rotations(const DataMatrix& z, const ModelParams& p, int iters,
                                                     std::uint64_t seed) {
  std::vector<BlockRotation> out(static_cast<std::size_t>(p.blocks_q));
#pragma omp parallel for schedule(dynamic)
  for (int q = 0; q < p.blocks_q; ++q) {
    const DataMatrix seg = z.middleCols(static_cast<Index>(q) * p.block_len, p.block_len);
    out[static_cast<std::size_t>(q)] =
        optimize_block_rotation(seg, iters, derive_seed(seed, 0x524f54ULL, static_cast<std::uint64_t>(q)));
  }
  return out;
}

/// Full ISCH pipeline: hierarchical dictionary, column-sampled spectral
/// projection W, block-diagonal rotation R, projection R^T W.
inline TrainResult train_isch(const DataMatrix& x, const ModelParams& params, const DictConfig& dict_cfg,
                              std::uint64_t seed, int rotation_iters = kDefaultRotationSweeps) {
  if (x.rows() < 2) throw Error("need at least two training vectors");
  params.validate();

  TrainResult res;
  TrainReport& report = res.report;
  const Dictionary dict = hierarchical_dictionary(x, dict_cfg);
  report.dict_k = dict.k();
  report.atoms_per_level = dict.atoms_per_level;
  if (dict.k() <= x.cols())
    report.warnings.push_back("dictionary is not overcomplete (k=" + std::to_string(dict.k()) +
                              ", d=" + std::to_string(x.cols()) + ")");
  if (params.bits_m > dict.k()) throw Error("code longer than dictionary");

  const SpectralModel spectral = approximate_spectral(dict.atoms, params, derive_seed(seed, 0x535045ULL));
  report.lambdas = spectral.lambdas();
  report.f_values = report.lambdas.unaryExpr([&](double l) { return f_lambda(l, params); });
  report.cross_block_overlap = cross_block_overlap(spectral, params);
  report.resamples = spectral.resamples;
  for (int row : weak_rows(spectral, params))
    report.warnings.push_back("row " + std::to_string(row) + " has f(lambda) below 1e-3 of the largest; its bit is noise-dominated");

  const Centered centered = zero_center(x);
  const DataMatrix z = centered.data * spectral.W.transpose();
  std::vector<Matrix> blocks;
  for (auto& br : optimize_rotations(z, params, rotation_iters, seed)) {
    blocks.push_back(std::move(br.rotation));
    report.block_history.push_back(std::move(br.history));
  }
  const RotationModel rotation = assemble_rotation(std::move(blocks));

  HashModel& model = res.model;
  model.method = Method::ISCH;
  model.projection = rotation.rotate_rows(spectral.W);
  model.mean = centered.mean;
  model.params = params;
  model.meta = {seed, static_cast<std::uint32_t>(dict.k()), static_cast<std::uint32_t>(dict_cfg.k1),
                static_cast<std::uint32_t>(dict_cfg.levels_h),
                static_cast<std::uint32_t>(dict_cfg.resolved_proxy_dim(x.cols()))};
  return res;
}

inline ModelParams baseline_params(int m) { return ModelParams::make(0.12, 0.05, m, 1); }

/// Random-projection LSH: i.i.d. Gaussian rows, unnormalized (the sign is
/// scale-invariant), centered on the training mean.
inline HashModel train_lsh(const DataMatrix& x, int m, std::uint64_t seed) {
  if (x.rows() < 1) throw Error("need at least one training vector");
  HashModel model;
  model.method = Method::LSH;
  Rng rng(seed);
  model.projection = gaussian_matrix(m, x.cols(), rng);
  model.mean = x.colwise().mean().transpose();
  model.params = baseline_params(m);
  model.meta.seed = seed;
  return model;
}

struct Pca {
  Matrix directions;  // d x m, largest variance first
  Vector variances;
};

// Top-m eigenpairs of the covariance of already-centered rows.
inline Pca pca_directions(const DataMatrix& centered, int m) {
  const Matrix cov = centered.transpose() * centered / static_cast<double>(centered.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  // Eigenvalues ascend; the last m columns reversed are the leading ones.
  return {eig.eigenvectors().rightCols(m).rowwise().reverse(), eig.eigenvalues().tail(m).reverse()};
}

/// ITQ baseline: top-m PCA directions followed by one m x m rotation. Builds
/// the d x d covariance, so only practical for moderate d.
inline TrainResult train_itq(const DataMatrix& x, int m, std::uint64_t seed,
                             int rotation_iters = kDefaultRotationSweeps) {
  if (m <= 0 || m > x.cols()) throw Error("ITQ needs 0 < m <= d");
  if (x.rows() < 2) throw Error("need at least two training vectors");
  const Centered centered = zero_center(x);
  const Pca pca = pca_directions(centered.data, m);
  const Matrix& pcs = pca.directions;

  const ModelParams params = baseline_params(m);
  const DataMatrix z = centered.data * pcs;
  BlockRotation rot = optimize_block_rotation(z, rotation_iters, derive_seed(seed, 0x524f54ULL, 0));

  TrainResult res;
  res.report.block_history.push_back(rot.history);
  res.report.lambdas = pca.variances;
  HashModel& model = res.model;
  model.method = Method::ITQ;
  model.projection = rot.rotation.transpose() * pcs.transpose();
  model.mean = centered.mean;
  model.params = params;
  model.meta.seed = seed;
  return res;
}

}  // namespace isch
