#pragma once

// Exhaustive Hamming retrieval (XOR + popcount) and label-based metrics.

#include "isch/core.hpp"
#include "isch/encoder.hpp"

#include <bit>
#include <set>
#include <span>
#include <vector>

namespace isch {

/// Differing bits among the first m. Pad bits are zero by construction and
/// contribute nothing.
inline int hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b, int m) {
  if (a.size() != b.size() || a.size() != BinaryCodeSet::words_for(m))
    throw Error("code length mismatch");
  int dist = 0;
  for (std::size_t w = 0; w < a.size(); ++w) dist += std::popcount(a[w] ^ b[w]);
  return dist;
}

struct RetrievalResult {
  std::size_t query_id = 0;
  std::vector<std::size_t> ranked_ids;
  std::vector<int> distances;  // non-decreasing; ties ordered by database index
};

/// The k nearest database codes. Distances are bucketed (they lie in [0, m]),
/// which keeps ties in ascending index order without a comparison sort.
inline RetrievalResult top_k(const BinaryCodeSet& db, std::span<const std::uint64_t> query, std::size_t k,
                             std::size_t query_id = 0) {
  if (k > db.size()) throw Error("k exceeds database size");
  const int m = db.bits();
  std::vector<int> dist(db.size());
  std::vector<std::size_t> count(static_cast<std::size_t>(m) + 2, 0);
  for (std::size_t i = 0; i < db.size(); ++i) {
    dist[i] = hamming(db.code(i), query, m);
    ++count[static_cast<std::size_t>(dist[i]) + 1];
  }
  for (std::size_t b = 1; b < count.size(); ++b) count[b] += count[b - 1];

  RetrievalResult res;
  res.query_id = query_id;
  std::vector<std::size_t> order(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) order[count[static_cast<std::size_t>(dist[i])]++] = i;
  order.resize(k);
  res.ranked_ids = std::move(order);
  res.distances.reserve(k);
  for (std::size_t id : res.ranked_ids) res.distances.push_back(dist[id]);
  return res;
}

/// top_k for every query code, queries in parallel.
inline std::vector<RetrievalResult> search_all(const BinaryCodeSet& db, const BinaryCodeSet& queries, std::size_t k) {
  if (db.bits() != queries.bits()) throw Error("code length mismatch between database and queries");
  if (k > db.size()) throw Error("k exceeds database size");
  std::vector<RetrievalResult> out(queries.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t q = 0; q < queries.size(); ++q) out[q] = top_k(db, queries.code(q), k, q);
  return out;
}

using LabelSet = std::vector<int>;

inline double precision_at_k(const RetrievalResult& result, const LabelSet& db_labels, int query_label,
                             std::size_t k) {
  if (k == 0 || k > result.ranked_ids.size()) throw Error("k exceeds the ranking length");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < k; ++r)
    if (db_labels.at(result.ranked_ids[r]) == query_label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

/// Average precision of one full ranking: mean over relevant items of the
/// precision at the rank where each is found.
inline double average_precision(const std::vector<std::size_t>& ranked_ids, const std::set<std::size_t>& relevant) {
  if (relevant.empty()) throw Error("undefined AP: query has no relevant items");
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < ranked_ids.size(); ++r)
    if (relevant.count(ranked_ids[r])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  return sum / static_cast<double>(relevant.size());
}

inline double mean_average_precision(const std::vector<RetrievalResult>& results,
                                     const std::vector<std::set<std::size_t>>& relevant) {
  if (results.size() != relevant.size()) throw Error("one relevant set per query required");
  if (results.empty()) throw Error("no queries");
  double total = 0.0;
  for (std::size_t q = 0; q < results.size(); ++q) total += average_precision(results[q].ranked_ids, relevant[q]);
  return total / static_cast<double>(results.size());
}

// Relevant sets from class labels: database items sharing the query's label.
inline std::vector<std::set<std::size_t>> relevant_by_label(const LabelSet& db_labels, const LabelSet& query_labels) {
  std::vector<std::set<std::size_t>> out(query_labels.size());
  for (std::size_t q = 0; q < query_labels.size(); ++q)
    for (std::size_t i = 0; i < db_labels.size(); ++i)
      if (db_labels[i] == query_labels[q]) out[q].insert(i);
  return out;
}

inline double mean_precision_at_k(const std::vector<RetrievalResult>& results, const LabelSet& db_labels,
                                  const LabelSet& query_labels, std::size_t k) {
  if (results.empty()) throw Error("no queries");
  double total = 0.0;
  for (const auto& r : results) total += precision_at_k(r, db_labels, query_labels.at(r.query_id), k);
  return total / static_cast<double>(results.size());
}

}  // namespace isch
