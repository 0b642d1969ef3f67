#pragma once

// On-disk formats. All integers and floats are little-endian.
//
//   vectors  "ISCHVEC1" u32 n, u32 d, n*d f32 (row-major)
//   codes    "ISCHCOD1" u32 n, u32 m, n*ceil(m/64) u64
//   model    "ISCHMOD1" u8 version, u8 method, u32 d, m, Q, l, f64 tau, sigma^2, eta,
//            d f64 mean, m*d f64 projection (row-major),
//            u64 seed, u32 dictionary size, u32 k1, u32 levels, u32 proxy dim
//   labels   one decimal integer per line
//   results  TSV lines: query_id, rank (from 1), db_id, distance

#include "isch/core.hpp"
#include "isch/encoder.hpp"
#include "isch/search.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace isch::io {

inline constexpr std::string_view kVectorMagic = "ISCHVEC1";
inline constexpr std::string_view kCodeMagic = "ISCHCOD1";
inline constexpr std::string_view kModelMagic = "ISCHMOD1";
inline constexpr std::uint8_t kModelVersion = 1;

class ByteWriter {
 public:
  void raw(std::string_view s) { buf_.append(s); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  const std::string& bytes() const { return buf_; }

 private:
  template <typename T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string data, std::string name) : buf_(std::move(data)), name_(std::move(name)) {}

  void expect_magic(std::string_view magic) {
    if (buf_.size() < magic.size() || buf_.compare(0, magic.size(), magic) != 0)
      throw Error(name_ + ": bad magic, expected " + std::string(magic));
    pos_ = magic.size();
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }

  std::size_t remaining() const { return buf_.size() - pos_; }
  void require(std::size_t bytes) const {
    if (remaining() < bytes) throw Error(name_ + ": truncated file");
  }
  void expect_end() const {
    if (remaining() != 0) throw Error(name_ + ": unexpected trailing bytes");
  }

 private:
  const char* take(std::size_t n) {
    require(n);
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename T>
  T le() {
    const auto* p = reinterpret_cast<const unsigned char*>(take(sizeof(T)));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
    return v;
  }

  std::string buf_;
  std::string name_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path);
}

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffULL) throw Error(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

// --- vectors ---------------------------------------------------------------

inline std::string encode_vectors(const DataMatrix& x) {
  ByteWriter w;
  w.raw(kVectorMagic);
  w.u32(checked_u32(static_cast<std::size_t>(x.rows()), "n"));
  w.u32(checked_u32(static_cast<std::size_t>(x.cols()), "d"));
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) w.f32(static_cast<float>(x(i, j)));
  return w.bytes();
}

inline DataMatrix decode_vectors(std::string bytes, const std::string& name = "vector file") {
  ByteReader r(std::move(bytes), name);
  r.expect_magic(kVectorMagic);
  const std::uint32_t n = r.u32();
  const std::uint32_t d = r.u32();
  r.require(static_cast<std::size_t>(n) * d * 4);
  DataMatrix x(n, d);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = r.f32();
  r.expect_end();
  return x;
}

inline void write_vectors(const std::string& path, const DataMatrix& x) { write_file(path, encode_vectors(x)); }
inline DataMatrix read_vectors(const std::string& path) { return decode_vectors(read_file(path), path); }

/// Raw "fvecs" dumps: per row an i32 dimension followed by that many f32.
inline DataMatrix read_fvecs(const std::string& path) {
  ByteReader r(read_file(path), path);
  std::vector<std::vector<float>> rows;
  std::uint32_t dim = 0;
  while (r.remaining() > 0) {
    const std::uint32_t d = r.u32();
    if (d == 0 || (!rows.empty() && d != dim)) throw Error(path + ": inconsistent row dimension");
    dim = d;
    r.require(static_cast<std::size_t>(d) * 4);
    std::vector<float> row(d);
    for (auto& v : row) v = r.f32();
    rows.push_back(std::move(row));
  }
  DataMatrix x(static_cast<Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::uint32_t j = 0; j < dim; ++j) x(static_cast<Index>(i), j) = rows[i][j];
  return x;
}

// --- codes -----------------------------------------------------------------

inline std::string encode_codes(const BinaryCodeSet& codes) {
  ByteWriter w;
  w.raw(kCodeMagic);
  w.u32(checked_u32(codes.size(), "n"));
  w.u32(static_cast<std::uint32_t>(codes.bits()));
  for (std::uint64_t word : codes.words()) w.u64(word);
  return w.bytes();
}

inline BinaryCodeSet decode_codes(std::string bytes, const std::string& name = "code file") {
  ByteReader r(std::move(bytes), name);
  r.expect_magic(kCodeMagic);
  const std::uint32_t n = r.u32();
  const std::uint32_t m = r.u32();
  if (m == 0 || m > 0x7fffffffU) throw Error(name + ": invalid code length");
  BinaryCodeSet codes(n, static_cast<int>(m));
  r.require(codes.words().size() * 8);
  for (auto& word : codes.words()) word = r.u64();
  r.expect_end();
  if (!codes.pad_bits_clear()) throw Error(name + ": nonzero pad bits");
  return codes;
}

inline void write_codes(const std::string& path, const BinaryCodeSet& c) { write_file(path, encode_codes(c)); }
inline BinaryCodeSet read_codes(const std::string& path) { return decode_codes(read_file(path), path); }

// --- model -----------------------------------------------------------------

inline std::string encode_model(const HashModel& model) {
  ByteWriter w;
  w.raw(kModelMagic);
  w.u8(kModelVersion);
  w.u8(static_cast<std::uint8_t>(model.method));
  const Index d = model.dim();
  const Index m = model.bits();
  w.u32(checked_u32(static_cast<std::size_t>(d), "d"));
  w.u32(checked_u32(static_cast<std::size_t>(m), "m"));
  w.u32(static_cast<std::uint32_t>(model.params.blocks_q));
  w.u32(static_cast<std::uint32_t>(model.params.block_len));
  w.f64(model.params.tau);
  w.f64(model.params.sigma_sq);
  w.f64(model.params.eta);
  for (Index j = 0; j < d; ++j) w.f64(model.mean(j));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < d; ++j) w.f64(model.projection(i, j));
  w.u64(model.meta.seed);
  w.u32(model.meta.dict_k);
  w.u32(model.meta.k1);
  w.u32(model.meta.levels);
  w.u32(model.meta.proxy_dim);
  return w.bytes();
}

inline HashModel decode_model(std::string bytes, const std::string& name = "model file") {
  ByteReader r(std::move(bytes), name);
  r.expect_magic(kModelMagic);
  if (const auto v = r.u8(); v != kModelVersion) throw Error(name + ": unsupported version " + std::to_string(v));
  const std::uint8_t method = r.u8();
  if (method > 2) throw Error(name + ": unknown method byte");
  HashModel model;
  model.method = static_cast<Method>(method);
  const std::uint32_t d = r.u32();
  const std::uint32_t m = r.u32();
  model.params.blocks_q = static_cast<int>(r.u32());
  model.params.block_len = static_cast<int>(r.u32());
  model.params.bits_m = static_cast<int>(m);
  model.params.tau = r.f64();
  model.params.sigma_sq = r.f64();
  model.params.eta = r.f64();
  try {
    model.params.validate();
  } catch (const Error& e) {
    throw Error(name + ": " + e.what());
  }
  r.require((static_cast<std::size_t>(d) + static_cast<std::size_t>(m) * d) * 8);
  model.mean.resize(d);
  for (std::uint32_t j = 0; j < d; ++j) model.mean(j) = r.f64();
  model.projection.resize(m, d);
  for (std::uint32_t i = 0; i < m; ++i)
    for (std::uint32_t j = 0; j < d; ++j) model.projection(i, j) = r.f64();
  model.meta.seed = r.u64();
  model.meta.dict_k = r.u32();
  model.meta.k1 = r.u32();
  model.meta.levels = r.u32();
  model.meta.proxy_dim = r.u32();
  r.expect_end();
  return model;
}

inline void write_model(const std::string& path, const HashModel& m) { write_file(path, encode_model(m)); }
inline HashModel read_model(const std::string& path) { return decode_model(read_file(path), path); }

// --- labels ----------------------------------------------------------------

inline LabelSet read_labels(const std::string& path) {
  std::istringstream in(read_file(path));
  LabelSet labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(line, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || line.find_first_not_of(" \t", used) != std::string::npos)
      throw Error(path + ":" + std::to_string(lineno) + ": not an integer label");
    labels.push_back(v);
  }
  return labels;
}

inline void write_labels(const std::string& path, const LabelSet& labels) {
  std::string out;
  for (int l : labels) out += std::to_string(l) + "\n";
  write_file(path, out);
}

// --- rankings --------------------------------------------------------------

inline std::string format_results(const std::vector<RetrievalResult>& results) {
  std::string out;
  for (const auto& r : results)
    for (std::size_t i = 0; i < r.ranked_ids.size(); ++i) {
      out += std::to_string(r.query_id);
      out += '\t';
      out += std::to_string(i + 1);
      out += '\t';
      out += std::to_string(r.ranked_ids[i]);
      out += '\t';
      out += std::to_string(r.distances[i]);
      out += '\n';
    }
  return out;
}

inline void write_results(const std::string& path, const std::vector<RetrievalResult>& results) {
  write_file(path, format_results(results));
}

/// Parses a ranking TSV back into per-query results, ordered by query id.
/// Ranks must run 1, 2, ... within each query.
inline std::vector<RetrievalResult> read_results(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<RetrievalResult> results;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    long long q = -1, rank = -1, id = -1, dist = -1;
    if (!(fields >> q >> rank >> id >> dist) || q < 0 || rank < 1 || id < 0 || dist < 0)
      throw Error(path + ":" + std::to_string(lineno) + ": malformed result line");
    const auto qid = static_cast<std::size_t>(q);
    if (results.empty() || results.back().query_id != qid) {
      for (const auto& r : results)
        if (r.query_id == qid) throw Error(path + ": rows of query " + std::to_string(qid) + " are not contiguous");
      results.push_back({qid, {}, {}});
    }
    auto& cur = results.back();
    if (static_cast<std::size_t>(rank) != cur.ranked_ids.size() + 1)
      throw Error(path + ":" + std::to_string(lineno) + ": rank out of sequence");
    cur.ranked_ids.push_back(static_cast<std::size_t>(id));
    cur.distances.push_back(static_cast<int>(dist));
  }
  return results;
}

}  // namespace isch::io
