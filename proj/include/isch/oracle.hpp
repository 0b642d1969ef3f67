#pragma once

// Explicit sparse coding and sparse-linear-model sampling. Production hashing
// never solves the lasso; these exist so the inner-product claim can be
// measured on small instances.

#include "isch/core.hpp"

#include <vector>

namespace isch {

struct LassoSolution {
  Vector coef;
  std::vector<double> objective;  // after each sweep, starting from c = 0
  int sweeps = 0;
};

inline double lasso_objective(const Matrix& dict, const Vector& x, const Vector& c, double eta) {
  return 0.5 * (x - dict * c).squaredNorm() + eta * c.lpNorm<1>();
}

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

/// Cyclic coordinate descent on 1/2 ||x - D c||^2 + eta ||c||_1. Stops once
/// the largest coordinate change in a sweep is below tol.
inline LassoSolution lasso_cd(const Matrix& dict, const Vector& x, double eta, int max_iters = 100000,
                              double tol = 1e-13) {
  const Index k = dict.cols();
  LassoSolution sol;
  sol.coef = Vector::Zero(k);
  Vector residual = x;
  const Vector norms = dict.colwise().squaredNorm().transpose();
  sol.objective.push_back(lasso_objective(dict, x, sol.coef, eta));
  // c = 0 is optimal iff ||D^T x||_inf <= eta.
  if ((dict.transpose() * x).lpNorm<Eigen::Infinity>() <= eta) return sol;
  for (int sweep = 0; sweep < max_iters; ++sweep) {
    double largest = 0.0;
    for (Index j = 0; j < k; ++j) {
      if (norms(j) == 0.0) continue;
      const double old = sol.coef(j);
      const double next = soft_threshold(dict.col(j).dot(residual) + norms(j) * old, eta) / norms(j);
      if (next != old) {
        residual -= (next - old) * dict.col(j);
        sol.coef(j) = next;
        largest = std::max(largest, std::abs(next - old));
      }
    }
    ++sol.sweeps;
    sol.objective.push_back(lasso_objective(dict, x, sol.coef, eta));
    if (largest < tol) break;
  }
  return sol;
}

/// Largest violation of the lasso optimality conditions:
/// |d_j^T r| <= eta where c_j = 0, d_j^T r = eta sign(c_j) elsewhere.
inline double kkt_violation(const Matrix& dict, const Vector& x, const Vector& c, double eta) {
  const Vector corr = dict.transpose() * (x - dict * c);
  double worst = 0.0;
  for (Index j = 0; j < c.size(); ++j) {
    const double v = c(j) == 0.0 ? std::max(0.0, std::abs(corr(j)) - eta)
                                 : std::abs(corr(j) - eta * (c(j) > 0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

struct SparseModelSample {
  DataMatrix x;       // n x d
  DataMatrix c_true;  // n x k
  Matrix dict;        // d x k
  double tau = 0.0;
  double sigma_sq = 0.0;
  std::uint64_t seed = 0;
};

/// x = D c + e with c_j i.i.d. Laplace(0, tau) and e ~ N(0, sigma^2 I).
inline SparseModelSample generate_sparse_model_data(const Matrix& dict, Index n, double tau, double sigma_sq,
                                                    std::uint64_t seed) {
  if (!(tau > 0.0) || sigma_sq < 0.0) throw Error("tau must be positive and sigma^2 non-negative");
  SparseModelSample s;
  s.dict = dict;
  s.tau = tau;
  s.sigma_sq = sigma_sq;
  s.seed = seed;
  const Index d = dict.rows();
  const Index k = dict.cols();
  Rng rng(seed);
  std::exponential_distribution<double> magnitude(1.0 / tau);
  std::bernoulli_distribution negative(0.5);
  std::normal_distribution<double> noise(0.0, std::sqrt(sigma_sq));
  s.c_true.resize(n, k);
  s.x.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) {
      const double a = magnitude(rng);
      s.c_true(i, j) = negative(rng) ? -a : a;
    }
    Vector xi = dict * s.c_true.row(i).transpose();
    if (sigma_sq > 0.0)
      for (Index t = 0; t < d; ++t) xi(t) += noise(rng);
    s.x.row(i) = xi.transpose();
  }
  return s;
}

/// Lasso codes for every row of x, one independent solve per row.
inline DataMatrix sparse_codes(const Matrix& dict, const DataMatrix& x, double eta) {
  DataMatrix codes(x.rows(), dict.cols());
#pragma omp parallel for schedule(dynamic)
  for (Index i = 0; i < x.rows(); ++i) codes.row(i) = lasso_cd(dict, x.row(i).transpose(), eta).coef.transpose();
  return codes;
}

/// Mean over pairs i < j of (c_i . c_j - (L x_i) . (L x_j))^2.
inline double inner_product_distortion(const Matrix& projection, const DataMatrix& x, const DataMatrix& codes) {
  const Index n = x.rows();
  if (n < 2) throw Error("distortion needs at least two vectors");
  const DataMatrix y = x * projection.transpose();
  const Matrix code_gram = codes * codes.transpose();
  const Matrix proj_gram = y * y.transpose();
  double total = 0.0;
  for (Index j = 1; j < n; ++j)
    for (Index i = 0; i < j; ++i) {
      const double diff = code_gram(i, j) - proj_gram(i, j);
      total += diff * diff;
    }
  return total / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

inline double inner_product_distortion(const Matrix& projection, const SparseModelSample& sample, double eta) {
  return inner_product_distortion(projection, sample.x, sparse_codes(sample.dict, sample.x, eta));
}

}  // namespace isch
