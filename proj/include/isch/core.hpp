#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace isch {

// Linear-algebra operands (dictionaries, projections, rotations).
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
// Collections of vectors, one per row (n x d).
using DataMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(seed) ^ a) ^ (b * 0x2545f4914f6cdd1dULL));
}

// Matrix with i.i.d. N(0, variance) entries, filled column by column.
inline Matrix gaussian_matrix(Index rows, Index cols, Rng& rng, double variance = 1.0) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
  return g;
}

// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
// signs of R's diagonal folded into Q.
inline Matrix random_orthogonal(Index n, Rng& rng) {
  Matrix g = gaussian_matrix(n, n, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix& r = qr.matrixQR();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

// Sign into {-1, +1} with sign(0) = +1.
inline double signed_bit(double v) { return v >= 0.0 ? 1.0 : -1.0; }

// max |M^T M - I| over all entries.
inline double orthogonality_residual(const Matrix& m) {
  return (m.transpose() * m - Matrix::Identity(m.cols(), m.cols())).cwiseAbs().maxCoeff();
}

inline void set_thread_count(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

}  // namespace isch
