#pragma once

// Block-diagonal rotation learned by alternating sign quantization and
// orthogonal Procrustes, one independent l x l problem per block.

#include "isch/core.hpp"

#include <vector>

namespace isch {

/// Sum over rows of ||sign(Z R) - Z R||^2 with codes in {-1, +1}.
inline double quantization_error(const DataMatrix& z, const Matrix& r) {
  const DataMatrix v = z * r;
  double total = 0.0;
  for (Index i = 0; i < v.rows(); ++i)
    for (Index j = 0; j < v.cols(); ++j) {
      const double diff = signed_bit(v(i, j)) - v(i, j);
      total += diff * diff;
    }
  return total;
}

struct BlockRotation {
  Matrix rotation;             // l x l orthogonal
  std::vector<double> history; // error of the initial rotation, then after each accepted sweep
};

inline constexpr int kDefaultRotationSweeps = 50;
inline constexpr double kRotationTolerance = 1e-4;

/// Alternates B = sign(Z R) and R = U V^T from the SVD of Z^T B, starting at
/// `initial`. A sweep that fails to lower the error (rounding) is discarded
/// and ends the run, so the history never increases. The alternation finds a
/// local minimum; which one depends on the start.
inline BlockRotation optimize_block_rotation_from(const DataMatrix& z, Matrix initial, int iters,
                                                  double tol = kRotationTolerance) {
  const Index len = z.cols();
  if (z.rows() < 1 || len < 1) throw Error("rotation block needs at least one row and column");
  if (initial.rows() != len || initial.cols() != len) throw Error("initial rotation has the wrong shape");
  BlockRotation out;
  out.rotation = std::move(initial);
  double error = quantization_error(z, out.rotation);
  out.history.push_back(error);

  for (int it = 0; it < iters && error > 0.0; ++it) {
    const DataMatrix codes = (z * out.rotation).unaryExpr([](double v) { return signed_bit(v); });
    const Matrix cross = z.transpose() * codes;
    Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix next = svd.matrixU() * svd.matrixV().transpose();
    const double next_error = quantization_error(z, next);
    if (next_error > error) break;
    const double change = (error - next_error) / error;
    out.rotation = std::move(next);
    error = next_error;
    out.history.push_back(error);
    if (change < tol) break;
  }
  return out;
}

/// Same alternation from a seeded random rotation.
inline BlockRotation optimize_block_rotation(const DataMatrix& z, int iters, std::uint64_t seed,
                                             double tol = kRotationTolerance) {
  if (z.cols() < 1) throw Error("rotation block needs at least one row and column");
  Rng rng(seed);
  return optimize_block_rotation_from(z, random_orthogonal(z.cols(), rng), iters, tol);
}

inline constexpr double kOrthogonalityTolerance = 1e-6;

/// Block-diagonal R = diag(R_1, ..., R_Q), stored block-wise.
class RotationModel {
 public:
  RotationModel() = default;

  explicit RotationModel(std::vector<Matrix> blocks) : blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw Error("invalid rotation block: no blocks");
    const Index len = blocks_.front().rows();
    for (const auto& b : blocks_) {
      if (b.rows() != len || b.cols() != len) throw Error("invalid rotation block: shape");
      if (orthogonality_residual(b) >= kOrthogonalityTolerance) throw Error("invalid rotation block");
    }
  }

  int blocks_q() const { return static_cast<int>(blocks_.size()); }
  int block_len() const { return blocks_.empty() ? 0 : static_cast<int>(blocks_.front().rows()); }
  int bits_m() const { return blocks_q() * block_len(); }
  const std::vector<Matrix>& blocks() const { return blocks_; }

  // R^T v: segment j becomes R_j^T v_j.
  Vector apply(const Vector& v) const { return transform(v, true); }
  // R v, the inverse of apply.
  Vector apply_transpose(const Vector& v) const { return transform(v, false); }

  // R^T W for an m-row matrix, block rows at a time.
  Matrix rotate_rows(const Matrix& w) const {
    check(w.rows());
    Matrix out(w.rows(), w.cols());
    const Index len = block_len();
    for (int j = 0; j < blocks_q(); ++j)
      out.middleRows(j * len, len) = blocks_[static_cast<std::size_t>(j)].transpose() * w.middleRows(j * len, len);
    return out;
  }

 private:
  void check(Index m) const {
    if (m != bits_m()) throw Error("rotation applied to a vector of the wrong length");
  }

  Vector transform(const Vector& v, bool transpose) const {
    check(v.size());
    Vector out(v.size());
    const Index len = block_len();
    for (int j = 0; j < blocks_q(); ++j) {
      const Matrix& b = blocks_[static_cast<std::size_t>(j)];
      if (transpose)
        out.segment(j * len, len) = b.transpose() * v.segment(j * len, len);
      else
        out.segment(j * len, len) = b * v.segment(j * len, len);
    }
    return out;
  }

  std::vector<Matrix> blocks_;
};

inline RotationModel assemble_rotation(std::vector<Matrix> blocks) { return RotationModel(std::move(blocks)); }

}  // namespace isch
