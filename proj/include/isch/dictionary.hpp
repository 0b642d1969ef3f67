#pragma once

// Overcomplete dictionary learning by hierarchical k-means over random
// projection proxies. Atoms are cluster means in the original space,
// normalized to unit length.

#include "isch/core.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace isch {

struct Centered {
  DataMatrix data;
  Vector mean;
};

inline Centered zero_center(const DataMatrix& x) {
  if (x.rows() < 1) throw Error("cannot center an empty matrix");
  Centered out;
  out.mean = x.colwise().mean().transpose();
  out.data = x.rowwise() - out.mean.transpose();
  return out;
}

struct DictConfig {
  int k1 = 16;
  int levels_h = 2;
  int proxy_dim = 0;   // 0: min(d, 256)
  int min_split = 0;   // 0: 2 * k2
  std::uint64_t rng_seed = 0;
  int kmeans_iters = 25;
  double kmeans_tol = 1e-4;

  int k2() const { return 2 * k1; }
  int resolved_proxy_dim(Index d) const {
    return proxy_dim > 0 ? proxy_dim : static_cast<int>(std::min<Index>(d, 256));
  }
  int resolved_min_split() const { return min_split > 0 ? min_split : 2 * k2(); }
};

struct KMeansResult {
  DataMatrix centers;          // k x p
  std::vector<int> assignment; // nearest center per point
  std::vector<double> history; // objective after each accepted assignment
};

namespace detail {

inline double squared_distance(const DataMatrix& a, Index i, const DataMatrix& b, Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// Assigns every point to its nearest center; returns the objective.
inline double assign_points(const DataMatrix& x, const DataMatrix& centers, std::vector<int>& labels,
                            std::vector<double>& dist) {
  const Index n = x.rows();
  labels.resize(static_cast<std::size_t>(n));
  dist.resize(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Index c = 0; c < centers.rows(); ++c) {
      const double dd = squared_distance(x, i, centers, c);
      if (dd < best) {
        best = dd;
        arg = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = arg;
    dist[static_cast<std::size_t>(i)] = best;
  }
  double total = 0.0;
  for (double v : dist) total += v;
  return total;
}

inline DataMatrix seed_plus_plus(const DataMatrix& x, int k, Rng& rng) {
  const Index n = x.rows();
  DataMatrix centers(k, x.cols());
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  std::uniform_int_distribution<Index> first(0, n - 1);
  Index pick = first(rng);
  for (int c = 0; c < k; ++c) {
    centers.row(c) = x.row(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], squared_distance(x, i, centers, c));
      total += d2[static_cast<std::size_t>(i)];
    }
    if (c + 1 == k) break;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        r -= d2[static_cast<std::size_t>(i)];
        if (r <= 0.0 && d2[static_cast<std::size_t>(i)] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      // Every point coincides with a center: take any unchosen one.
      std::vector<Index> rest;
      for (Index i = 0; i < n; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) rest.push_back(i);
      std::uniform_int_distribution<std::size_t> any(0, rest.size() - 1);
      pick = rest[any(rng)];
    }
  }
  return centers;
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding. The objective history is
/// non-increasing: an update that would raise it is rejected and ends the run.
inline KMeansResult kmeans(const DataMatrix& x, int k, int iters, double tol, std::uint64_t seed) {
  const Index n = x.rows();
  if (k <= 0) throw Error("k must be positive");
  if (n < k) throw Error("too few points");
  Rng rng(seed);

  KMeansResult res;
  res.centers = detail::seed_plus_plus(x, k, rng);
  std::vector<double> dist;
  double objective = detail::assign_points(x, res.centers, res.assignment, dist);
  res.history.push_back(objective);

  for (int it = 0; it < iters && objective > 0.0; ++it) {
    DataMatrix next = DataMatrix::Zero(k, x.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      const int c = res.assignment[static_cast<std::size_t>(i)];
      next.row(c) += x.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    std::vector<double> spare = dist;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        next.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its center.
      const auto far = std::max_element(spare.begin(), spare.end()) - spare.begin();
      next.row(c) = x.row(far);
      spare[static_cast<std::size_t>(far)] = -1.0;
    }

    std::vector<int> labels;
    std::vector<double> next_dist;
    const double value = detail::assign_points(x, next, labels, next_dist);
    if (value > objective) break;
    res.centers = std::move(next);
    res.assignment = std::move(labels);
    dist = std::move(next_dist);
    const double change = (objective - value) / objective;
    objective = value;
    res.history.push_back(objective);
    if (change < tol) break;
  }
  return res;
}

inline KMeansResult kmeans(const DataMatrix& x, int k, const DictConfig& cfg) {
  return kmeans(x, k, cfg.kmeans_iters, cfg.kmeans_tol, cfg.rng_seed);
}

struct Dictionary {
  Matrix atoms;       // d x k, unit-norm columns
  Vector source_mean; // removed before clustering
  std::vector<int> atoms_per_level;

  Index k() const { return atoms.cols(); }
  Index dim() const { return atoms.rows(); }
};

/// Hierarchical dictionary: level 1 splits the data into k1 clusters, every
/// later level splits each sufficiently large cluster into k2 = 2 k1. Each
/// level clusters its own shared random-projection proxy; atoms are
/// original-space member means from all levels, in (level, parent, child)
/// order.
inline Dictionary hierarchical_dictionary(const DataMatrix& x, const DictConfig& cfg) {
  if (cfg.k1 <= 0 || cfg.levels_h <= 0) throw Error("k1 and levels must be positive");
  if (x.rows() < cfg.k1) throw Error("too few points");
  const Index d = x.cols();
  const int proxy = cfg.resolved_proxy_dim(d);
  if (proxy <= 0 || proxy > d) throw Error("proxy dimension must be in [1, d]");
  const Index min_split = std::max(cfg.resolved_min_split(), cfg.k2());

  Centered centered = zero_center(x);
  const DataMatrix& xc = centered.data;

  Dictionary dict;
  dict.source_mean = centered.mean;
  std::vector<Vector> atoms;

  auto member_mean = [&](const std::vector<Index>& members) {
    Vector s = Vector::Zero(d);
    for (Index i : members) s += xc.row(i).transpose();
    return Vector(s / static_cast<double>(members.size()));
  };

  // Clusters carried to the next level, each a list of member rows.
  std::vector<std::vector<Index>> clusters;
  {
    std::vector<Index> all(static_cast<std::size_t>(xc.rows()));
    for (Index i = 0; i < xc.rows(); ++i) all[static_cast<std::size_t>(i)] = i;
    clusters.push_back(std::move(all));
  }

  for (int level = 1; level <= cfg.levels_h; ++level) {
    Rng proj_rng(derive_seed(cfg.rng_seed, 0x50524f4aULL, static_cast<std::uint64_t>(level)));
    const Matrix projection = gaussian_matrix(d, proxy, proj_rng, 1.0 / proxy);
    const DataMatrix proxies = xc * projection;
    const int branch = level == 1 ? cfg.k1 : cfg.k2();

    std::vector<std::vector<std::vector<Index>>> children(clusters.size());
    std::vector<std::string> failures(clusters.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const auto& members = clusters[c];
      if (level > 1 && static_cast<Index>(members.size()) < min_split) continue;
      DataMatrix sub(static_cast<Index>(members.size()), proxy);
      for (std::size_t i = 0; i < members.size(); ++i) sub.row(static_cast<Index>(i)) = proxies.row(members[i]);
      try {
        const KMeansResult km = kmeans(sub, branch, cfg.kmeans_iters, cfg.kmeans_tol,
                                       derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(level), c));
        auto& out = children[c];
        out.resize(static_cast<std::size_t>(branch));
        for (std::size_t i = 0; i < members.size(); ++i)
          out[static_cast<std::size_t>(km.assignment[i])].push_back(members[i]);
      } catch (const Error& e) {
        failures[c] = e.what();
      }
    }

    std::vector<std::vector<Index>> next;
    int produced = 0;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (!failures[c].empty()) throw Error(failures[c]);
      for (auto& child : children[c]) {
        if (child.empty()) continue;
        atoms.push_back(member_mean(child));
        ++produced;
        next.push_back(std::move(child));
      }
    }
    dict.atoms_per_level.push_back(produced);
    clusters = std::move(next);
  }

  std::vector<Vector> kept;
  for (auto& a : atoms) {
    const double norm = a.norm();
    if (norm > 1e-12) kept.push_back(a / norm);
  }
  dict.atoms.resize(d, static_cast<Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) dict.atoms.col(static_cast<Index>(j)) = kept[j];
  return dict;
}

}  // namespace isch
