#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 data error.

#include "isch/dictionary.hpp"
#include "isch/encoder.hpp"
#include "isch/io.hpp"
#include "isch/search.hpp"
#include "isch/spectral.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

namespace isch::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::string method = "isch";
  std::string input, output, model, db, queries, results, db_labels, query_labels, codes, vectors, fvecs;
  int bits = 64;
  int blocks = 1;
  double tau = 0.12;
  double eta = 0.05;
  DictConfig dict;
  int rotation_iters = kDefaultRotationSweeps;
  std::uint64_t seed = 0;
  int threads = 0;
  std::size_t top = 0;  // 0: full ranking
  std::vector<std::size_t> precision_at{10, 500};
  bool map = false;
};

inline void validate_train(const RunConfig& cfg) {
  const Method method = [&] {
    try {
      return parse_method(cfg.method);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }();
  if (cfg.bits <= 0) throw UsageError("--bits must be positive");
  if (method == Method::ISCH) {
    if (cfg.blocks <= 0 || cfg.bits % cfg.blocks != 0)
      throw UsageError("--bits " + std::to_string(cfg.bits) + " is not divisible by --blocks " +
                       std::to_string(cfg.blocks));
    if (!(cfg.tau > 0.0) || !(cfg.eta > 0.0)) throw UsageError("--tau and --eta must be positive");
    if (cfg.dict.k1 <= 0 || cfg.dict.levels_h <= 0) throw UsageError("--k1 and --levels must be positive");
    if (cfg.dict.kmeans_iters <= 0 || !(cfg.dict.kmeans_tol > 0.0))
      throw UsageError("--kmeans-iters and --kmeans-tol must be positive");
  }
  if (cfg.rotation_iters < 0) throw UsageError("--rotation-iters must be non-negative");
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  validate_train(cfg);
  const DataMatrix x = io::read_vectors(cfg.input);
  const Method method = parse_method(cfg.method);
  out << std::setprecision(6);
  out << "method\t" << to_string(method) << "\nn\t" << x.rows() << "\nd\t" << x.cols() << "\n";

  HashModel model;
  TrainReport report;
  if (method == Method::ISCH) {
    const ModelParams params = ModelParams::make(cfg.tau, cfg.eta, cfg.bits, cfg.blocks);
    DictConfig dict = cfg.dict;
    dict.rng_seed = cfg.seed;
    TrainResult res = train_isch(x, params, dict, cfg.seed, cfg.rotation_iters);
    model = std::move(res.model);
    report = std::move(res.report);
    out << "k\t" << report.dict_k << "\n";
  } else if (method == Method::LSH) {
    model = train_lsh(x, cfg.bits, cfg.seed);
  } else {
    TrainResult res = train_itq(x, cfg.bits, cfg.seed, cfg.rotation_iters);
    model = std::move(res.model);
    report = std::move(res.report);
  }
  out << "m\t" << model.params.bits_m << "\nQ\t" << model.params.blocks_q << "\nl\t" << model.params.block_len
      << "\n";
  const auto errors = report.final_block_errors();
  for (std::size_t b = 0; b < errors.size(); ++b)
    out << "block_error[" << b << "]\t" << errors[b] << "\n";
  if (method == Method::ISCH) {
    out << "lambda_max\t" << report.lambdas.maxCoeff() << "\nlambda_min\t" << report.lambdas.minCoeff() << "\n";
    out << "f_max\t" << report.f_values.maxCoeff() << "\nf_min\t" << report.f_values.minCoeff() << "\n";
    out << "cross_block_overlap\t" << report.cross_block_overlap << "\nresamples\t" << report.resamples << "\n";
  }
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  io::write_model(cfg.output, model);
  return kExitOk;
}

inline int cmd_encode(const RunConfig& cfg, std::ostream& out) {
  const HashModel model = io::read_model(cfg.model);
  const DataMatrix x = io::read_vectors(cfg.input);
  const BinaryCodeSet codes = encode_batch(model, x);
  io::write_codes(cfg.output, codes);
  out << "encoded\t" << codes.size() << "\nbits\t" << codes.bits() << "\n";
  return kExitOk;
}

inline int cmd_search(const RunConfig& cfg, std::ostream& out) {
  const BinaryCodeSet db = io::read_codes(cfg.db);
  const BinaryCodeSet queries = io::read_codes(cfg.queries);
  if (db.bits() != queries.bits())
    throw Error("code length mismatch: database has " + std::to_string(db.bits()) + " bits, queries have " +
                std::to_string(queries.bits()));
  const std::size_t k = cfg.top == 0 ? db.size() : cfg.top;
  const auto results = search_all(db, queries, k);
  io::write_results(cfg.output, results);
  out << "queries\t" << queries.size() << "\nranked\t" << k << "\n";
  return kExitOk;
}

inline int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  const auto results = io::read_results(cfg.results);
  if (cfg.db_labels.empty() || cfg.query_labels.empty()) throw Error("missing labels");
  const LabelSet db_labels = io::read_labels(cfg.db_labels);
  const LabelSet query_labels = io::read_labels(cfg.query_labels);
  if (results.empty()) throw Error("no rankings in " + cfg.results);
  std::size_t shortest = results.front().ranked_ids.size();
  for (const auto& r : results) {
    if (r.query_id >= query_labels.size()) throw Error("query " + std::to_string(r.query_id) + " has no label");
    for (std::size_t id : r.ranked_ids)
      if (id >= db_labels.size()) throw Error("database item " + std::to_string(id) + " has no label");
    shortest = std::min(shortest, r.ranked_ids.size());
  }
  out << std::fixed << std::setprecision(6) << "queries\t" << results.size() << "\n";
  for (std::size_t k : cfg.precision_at) {
    if (k == 0) continue;
    if (k > shortest) {
      out << "precision@" << k << "\tskipped (rankings hold " << shortest << " items)\n";
      continue;
    }
    out << "precision@" << k << "\t" << mean_precision_at_k(results, db_labels, query_labels, k) << "\n";
  }
  if (cfg.map) {
    std::vector<std::set<std::size_t>> relevant;
    for (const auto& r : results) {
      if (r.ranked_ids.size() != db_labels.size())
        throw Error("mAP needs full-database rankings (query " + std::to_string(r.query_id) + " ranks " +
                    std::to_string(r.ranked_ids.size()) + " of " + std::to_string(db_labels.size()) + ")");
      std::set<std::size_t> rel;
      for (std::size_t i = 0; i < db_labels.size(); ++i)
        if (db_labels[i] == query_labels[r.query_id]) rel.insert(i);
      relevant.push_back(std::move(rel));
    }
    out << "mAP\t" << mean_average_precision(results, relevant) << "\n";
  }
  return kExitOk;
}

inline int cmd_inspect(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.model.empty()) {
    const HashModel m = io::read_model(cfg.model);
    out << "model\t" << cfg.model << "\nmethod\t" << to_string(m.method) << "\nd\t" << m.dim() << "\nm\t"
        << m.bits() << "\nQ\t" << m.params.blocks_q << "\nl\t" << m.params.block_len << "\ntau\t" << m.params.tau
        << "\nsigma_sq\t" << m.params.sigma_sq << "\neta\t" << m.params.eta << "\nseed\t" << m.meta.seed
        << "\ndictionary_k\t" << m.meta.dict_k << "\nk1\t" << m.meta.k1 << "\n";
  }
  if (!cfg.codes.empty()) {
    const BinaryCodeSet c = io::read_codes(cfg.codes);
    out << "codes\t" << cfg.codes << "\nn\t" << c.size() << "\nm\t" << c.bits() << "\n";
  }
  if (!cfg.vectors.empty()) {
    const DataMatrix x = io::read_vectors(cfg.vectors);
    out << "vectors\t" << cfg.vectors << "\nn\t" << x.rows() << "\nd\t" << x.cols() << "\n";
  }
  if (cfg.model.empty() && cfg.codes.empty() && cfg.vectors.empty())
    throw UsageError("inspect needs --model, --codes or --vectors");
  return kExitOk;
}

inline int cmd_import(const RunConfig& cfg, std::ostream& out) {
  const DataMatrix x = io::read_fvecs(cfg.fvecs);
  io::write_vectors(cfg.output, x);
  out << "imported\t" << x.rows() << "\nd\t" << x.cols() << "\n";
  return kExitOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Implicit sparse code hashing: train, encode, search and evaluate binary codes", "isch"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* train = app.add_subcommand("train", "learn a hash model from a vector file");
  train->add_option("--method", cfg.method, "isch, lsh or itq")->check(CLI::IsMember({"isch", "lsh", "itq"}));
  train->add_option("--input", cfg.input, "training vectors (ISCHVEC1)")->required();
  train->add_option("--out", cfg.output, "model file to write")->required();
  train->add_option("--bits", cfg.bits, "code length m")->required();
  train->add_option("--blocks", cfg.blocks, "number of spectral/rotation blocks Q");
  train->add_option("--tau", cfg.tau, "Laplace scale");
  train->add_option("--eta", cfg.eta, "lasso weight (sigma^2 = eta * tau)");
  train->add_option("--k1", cfg.dict.k1, "level-1 cluster count");
  train->add_option("--levels", cfg.dict.levels_h, "hierarchy depth");
  train->add_option("--proxy-dim", cfg.dict.proxy_dim, "random projection dimension (0: min(d, 256))");
  train->add_option("--min-split", cfg.dict.min_split, "smallest cluster that is split further (0: 2*k2)");
  train->add_option("--kmeans-iters", cfg.dict.kmeans_iters);
  train->add_option("--kmeans-tol", cfg.dict.kmeans_tol);
  train->add_option("--rotation-iters", cfg.rotation_iters);
  train->add_option("--seed", cfg.seed);
  train->add_option("--threads", cfg.threads, "worker cap (0: runtime default)");

  auto* encode = app.add_subcommand("encode", "encode vectors with a trained model");
  encode->add_option("--model", cfg.model)->required();
  encode->add_option("--input", cfg.input)->required();
  encode->add_option("--out", cfg.output)->required();
  encode->add_option("--threads", cfg.threads);

  auto* search = app.add_subcommand("search", "rank database codes by Hamming distance");
  search->add_option("--db", cfg.db)->required();
  search->add_option("--queries", cfg.queries)->required();
  search->add_option("--out", cfg.output, "TSV: query_id, rank, db_id, distance")->required();
  search->add_option("--k", cfg.top, "results per query (0: whole database)");
  search->add_option("--threads", cfg.threads);

  auto* eval = app.add_subcommand("eval", "precision@k and mAP from rankings and labels");
  eval->add_option("--results", cfg.results)->required();
  eval->add_option("--db-labels", cfg.db_labels)->required();
  eval->add_option("--query-labels", cfg.query_labels)->required();
  eval->add_option("--precision-at", cfg.precision_at)->delimiter(',');
  eval->add_flag("--map", cfg.map, "mean average precision (needs full rankings)");

  auto* inspect = app.add_subcommand("inspect", "print file headers");
  inspect->add_option("--model", cfg.model);
  inspect->add_option("--codes", cfg.codes);
  inspect->add_option("--vectors", cfg.vectors);

  auto* import = app.add_subcommand("import", "convert an fvecs dump to ISCHVEC1");
  import->add_option("--fvecs", cfg.fvecs)->required();
  import->add_option("--out", cfg.output)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    set_thread_count(cfg.threads);
    if (train->parsed()) return cmd_train(cfg, out, err);
    if (encode->parsed()) return cmd_encode(cfg, out);
    if (search->parsed()) return cmd_search(cfg, out);
    if (eval->parsed()) return cmd_eval(cfg, out);
    if (inspect->parsed()) return cmd_inspect(cfg, out);
    if (import->parsed()) return cmd_import(cfg, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace isch::cli
