#include "isch/cli.hpp"
#include "isch/io.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace isch;
using isch::testing::random_data;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / ("isch_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

struct CliRun {
  int code;
  std::string out, err;
};

CliRun invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "isch");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

DataMatrix blobs(Index n, Index d, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix centers = gaussian_matrix(8, d, rng, 16.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  DataMatrix x(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) x(i, j) = centers(i % 8, j) + noise(rng);
  return x;
}

std::string with_byte_changed(std::string s, std::size_t pos) {
  s[pos] = static_cast<char>(s[pos] ^ 0x5a);
  return s;
}

}  // namespace

TEST(VectorFile, RoundTripAndLayout) {
  DataMatrix x(2, 3);
  x << 1.5, -2, 0.25, 3, 4, -0.125;
  const std::string bytes = io::encode_vectors(x);
  ASSERT_EQ(bytes.size(), 8u + 8u + 24u);
  EXPECT_EQ(bytes.substr(0, 8), "ISCHVEC1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2);   // n, little-endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 3);  // d
  EXPECT_EQ(io::decode_vectors(bytes), x);
}

TEST(VectorFile, MalformedInput) {
  const std::string bytes = io::encode_vectors(random_data(3, 4, 1));
  EXPECT_THROW(io::decode_vectors(with_byte_changed(bytes, 2)), Error);
  EXPECT_THROW(io::decode_vectors(bytes.substr(0, bytes.size() - 1)), Error);
  EXPECT_THROW(io::decode_vectors(bytes + "x"), Error);
  EXPECT_THROW(io::decode_vectors("ISCH"), Error);
}

TEST(CodeFile, RoundTripAndPadCheck) {
  BinaryCodeSet c(3, 70);
  c.set_bit(0, 0, true);
  c.set_bit(2, 69, true);
  const std::string bytes = io::encode_codes(c);
  EXPECT_EQ(bytes.size(), 8u + 8u + 3u * 2u * 8u);
  EXPECT_EQ(io::decode_codes(bytes), c);
  // Set a pad bit in the last word of item 0.
  std::string bad = bytes;
  bad[16 + 8 + 7] = static_cast<char>(0x80);
  EXPECT_THROW(io::decode_codes(bad), Error);
}

TEST(ModelFile, RoundTripIsExact) {
  HashModel m = train_lsh(random_data(20, 6, 1), 12, 3);
  m.params = ModelParams::make(0.001, 0.05, 12, 3);
  m.meta = {42, 100, 7, 2, 6};
  const std::string bytes = io::encode_model(m);
  EXPECT_EQ(bytes.size(), 8u + 2u + 16u + 24u + 6u * 8u + 72u * 8u + 8u + 16u);
  const HashModel back = io::decode_model(bytes);
  EXPECT_EQ(back.projection, m.projection);
  EXPECT_EQ(back.mean, m.mean);
  EXPECT_EQ(back.meta, m.meta);
  EXPECT_EQ(back.method, Method::LSH);
  EXPECT_EQ(back.params.blocks_q, 3);
  EXPECT_EQ(back.params.sigma_sq, m.params.sigma_sq);
  EXPECT_EQ(io::encode_model(back), bytes);
  EXPECT_THROW(io::decode_model(with_byte_changed(bytes, 8)), Error);  // version
  EXPECT_THROW(io::decode_model(bytes.substr(0, 100)), Error);
}

TEST(Fvecs, ImportMatchesValues) {
  TempDir dir;
  io::ByteWriter w;
  for (int row = 0; row < 3; ++row) {
    w.u32(2);
    w.f32(static_cast<float>(row));
    w.f32(-0.5f * static_cast<float>(row));
  }
  io::write_file(dir / "a.fvecs", w.bytes());
  const DataMatrix x = io::read_fvecs(dir / "a.fvecs");
  ASSERT_EQ(x.rows(), 3);
  EXPECT_EQ(x(2, 1), -1.0);

  const CliRun r = invoke({"import", "--fvecs", dir / "a.fvecs", "--out", dir / "a.vec"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::read_vectors(dir / "a.vec"), x);

  w.u32(3);
  io::write_file(dir / "bad.fvecs", w.bytes());
  EXPECT_EQ(invoke({"import", "--fvecs", dir / "bad.fvecs", "--out", dir / "b.vec"}).code, cli::kExitData);
}

TEST(Labels, ParseAndReject) {
  TempDir dir;
  io::write_file(dir / "l.txt", "3\n-1\r\n\n7\n");
  EXPECT_EQ(io::read_labels(dir / "l.txt"), (LabelSet{3, -1, 7}));
  io::write_file(dir / "bad.txt", "3\nx\n");
  EXPECT_THROW(io::read_labels(dir / "bad.txt"), Error);
}

TEST(Results, RoundTripAndValidation) {
  TempDir dir;
  std::vector<RetrievalResult> rs(2);
  rs[0] = {0, {4, 1}, {0, 3}};
  rs[1] = {1, {2, 0}, {1, 1}};
  io::write_results(dir / "r.tsv", rs);
  EXPECT_EQ(io::read_file(dir / "r.tsv"), "0\t1\t4\t0\n0\t2\t1\t3\n1\t1\t2\t1\n1\t2\t0\t1\n");
  const auto back = io::read_results(dir / "r.tsv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].ranked_ids, rs[1].ranked_ids);
  io::write_file(dir / "gap.tsv", "0\t1\t4\t0\n0\t3\t1\t3\n");
  EXPECT_THROW(io::read_results(dir / "gap.tsv"), Error);
  io::write_file(dir / "split.tsv", "0\t1\t4\t0\n1\t1\t1\t3\n0\t2\t1\t3\n");
  EXPECT_THROW(io::read_results(dir / "split.tsv"), Error);
}

TEST(Cli, BitsNotDivisibleByBlocksIsUsageError) {
  TempDir dir;
  io::write_vectors(dir / "x.vec", blobs(100, 8, 1));
  const CliRun r = invoke({"train", "--input", dir / "x.vec", "--bits", "63", "--blocks", "4", "--out", dir / "m.ism"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("63"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "m.ism"));
}

TEST(Cli, UnknownFlagAndMissingSubcommand) {
  EXPECT_EQ(invoke({}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"train", "--nope"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"train", "--method", "pq", "--input", "a", "--out", "b", "--bits", "8"}).code, cli::kExitUsage);
}

TEST(Cli, MissingInputIsDataError) {
  TempDir dir;
  const CliRun r = invoke({"train", "--input", dir / "none.vec", "--bits", "8", "--out", dir / "m.ism"});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, TrainIsByteIdenticalOnRerun) {
  TempDir dir;
  io::write_vectors(dir / "x.vec", blobs(400, 16, 2));
  const std::vector<std::string> base = {"train", "--method", "isch", "--input", dir / "x.vec", "--bits", "8",
                                         "--blocks", "2", "--tau", "0.001", "--eta", "0.05", "--k1", "4", "--seed",
                                         "1"};
  auto first = base, second = base;
  first.insert(first.end(), {"--out", dir / "a.ism", "--threads", "1"});
  second.insert(second.end(), {"--out", dir / "b.ism", "--threads", "3"});
  const CliRun r = invoke(first);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("block_error[1]"), std::string::npos);
  ASSERT_EQ(invoke(second).code, 0);
  EXPECT_EQ(io::read_file(dir / "a.ism"), io::read_file(dir / "b.ism"));
  ASSERT_EQ(invoke(first).code, 0);
  EXPECT_EQ(io::read_file(dir / "a.ism"), io::read_file(dir / "b.ism"));
}

TEST(Cli, EncodeSearchFindsItself) {
  TempDir dir;
  const DataMatrix x = blobs(300, 12, 3);
  io::write_vectors(dir / "db.vec", x);
  io::write_vectors(dir / "q.vec", DataMatrix(x.middleRows(17, 1)));
  for (const std::string method : {"isch", "lsh", "itq"}) {
    SCOPED_TRACE(method);
    ASSERT_EQ(invoke({"train", "--method", method, "--input", dir / "db.vec", "--bits", "8", "--blocks", "2", "--k1", "4",
                   "--out", dir / "m.ism"})
                  .code,
              0);
    ASSERT_EQ(invoke({"encode", "--model", dir / "m.ism", "--input", dir / "db.vec", "--out", dir / "db.cod"}).code, 0);
    ASSERT_EQ(invoke({"encode", "--model", dir / "m.ism", "--input", dir / "q.vec", "--out", dir / "q.cod"}).code, 0);
    ASSERT_EQ(
        invoke({"search", "--db", dir / "db.cod", "--queries", dir / "q.cod", "--k", "300", "--out", dir / "r.tsv"}).code,
        0);
    const auto rs = io::read_results(dir / "r.tsv");
    ASSERT_EQ(rs.size(), 1u);
    EXPECT_EQ(rs[0].distances[0], 0);
    // Rank 1 is the first database item sharing the query's code, which
    // includes item 17 itself.
    const BinaryCodeSet db = io::read_codes(dir / "db.cod");
    std::size_t first_equal = 0;
    while (!std::ranges::equal(db.code(first_equal), db.code(17))) ++first_equal;
    EXPECT_EQ(rs[0].ranked_ids[0], first_equal);
    EXPECT_NE(std::ranges::find(rs[0].ranked_ids, 17u), rs[0].ranked_ids.end());
  }
}

TEST(Cli, EncodeDimensionMismatchIsDataError) {
  TempDir dir;
  io::write_vectors(dir / "x.vec", blobs(100, 8, 1));
  io::write_vectors(dir / "y.vec", blobs(10, 9, 1));
  ASSERT_EQ(invoke({"train", "--method", "lsh", "--input", dir / "x.vec", "--bits", "16", "--out", dir / "m.ism"}).code, 0);
  EXPECT_EQ(invoke({"encode", "--model", dir / "m.ism", "--input", dir / "y.vec", "--out", dir / "y.cod"}).code,
            cli::kExitData);
}

TEST(Cli, SearchCodeLengthMismatchIsDataError) {
  TempDir dir;
  io::write_codes(dir / "a.cod", BinaryCodeSet(4, 16));
  io::write_codes(dir / "b.cod", BinaryCodeSet(1, 32));
  const CliRun r = invoke({"search", "--db", dir / "a.cod", "--queries", dir / "b.cod", "--out", dir / "r.tsv"});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("mismatch"), std::string::npos);
}

TEST(Cli, EvalHandcraftedFixture) {
  TempDir dir;
  // APs: query 0 -> 1, query 1 -> 1/2, query 2 -> (1/1 + 2/4) / 2 = 3/4.
  io::write_labels(dir / "db.lab", {0, 1, 1, 2});
  io::write_labels(dir / "q.lab", {0, 0, 1});
  std::vector<RetrievalResult> rs = {{0, {0, 1, 2, 3}, {0, 1, 2, 3}},
                                     {1, {1, 0, 2, 3}, {0, 1, 1, 2}},
                                     {2, {1, 0, 3, 2}, {0, 1, 2, 2}}};
  io::write_results(dir / "r.tsv", rs);
  const CliRun r = invoke({"eval", "--results", dir / "r.tsv", "--db-labels", dir / "db.lab", "--query-labels",
                        dir / "q.lab", "--precision-at", "1,2,10", "--map"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mAP\t0.750000"), std::string::npos) << r.out;
  // precision@1: hits for queries 0 and 2.
  EXPECT_NE(r.out.find("precision@1\t0.666667"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("precision@10\tskipped"), std::string::npos) << r.out;

  EXPECT_EQ(invoke({"eval", "--results", dir / "r.tsv", "--db-labels", dir / "missing.lab", "--query-labels",
                 dir / "q.lab"})
                .code,
            cli::kExitData);
  io::write_labels(dir / "short.lab", {0, 0});
  EXPECT_EQ(invoke({"eval", "--results", dir / "r.tsv", "--db-labels", dir / "db.lab", "--query-labels",
                 dir / "short.lab"})
                .code,
            cli::kExitData);
}

TEST(Cli, InspectReportsHeaders) {
  TempDir dir;
  io::write_codes(dir / "a.cod", BinaryCodeSet(5, 40));
  const CliRun r = invoke({"inspect", "--codes", dir / "a.cod"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("m\t40"), std::string::npos);
  EXPECT_EQ(invoke({"inspect"}).code, cli::kExitUsage);
}

TEST(Cli, InputsAreNotModified) {
  TempDir dir;
  io::write_vectors(dir / "x.vec", blobs(200, 8, 4));
  const std::string before = io::read_file(dir / "x.vec");
  ASSERT_EQ(invoke({"train", "--method", "itq", "--input", dir / "x.vec", "--bits", "8", "--out", dir / "m.ism"}).code, 0);
  ASSERT_EQ(invoke({"encode", "--model", dir / "m.ism", "--input", dir / "x.vec", "--out", dir / "x.cod"}).code, 0);
  EXPECT_EQ(io::read_file(dir / "x.vec"), before);
}
