#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "lsp/binary_io.hpp"
#include "lsp/gp.hpp"
#include "lsp/index.hpp"
#include "support.hpp"

using namespace lsp;
using testing_support::TempDir;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run lsp_cli(const TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.path().string() + "' && '" LSP_CLI_PATH "' " + args +
                          " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string l;
  while (std::getline(ss, l)) out.push_back(l);
  return out;
}

// The single error line follows the echoed configuration.
std::string last_line(const std::string& s) {
  const auto v = lines(s);
  return v.empty() ? "" : v.back();
}

std::size_t error_lines(const std::string& s) {
  std::size_t n = 0;
  for (const auto& l : lines(s)) n += l.rfind("error: ", 0) == 0;
  return n;
}

std::vector<std::string> fields(const std::string& row) {
  std::vector<std::string> out;
  std::stringstream ss(row);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    data = testing_support::blobs(600, 4, 6, 31);
    queries = testing_support::blobs(40, 4, 6, 31, 10.0, 1.5);
    save_points(dir / "d.fvecs", data, PointFormat::kFvecs);
    save_points(dir / "q.fvecs", queries, PointFormat::kFvecs);
  }
  TempDir dir;
  PointSet data, queries;
};

}  // namespace

TEST_F(Cli, BuildGraphMatchesLibrary) {
  const auto r = lsp_cli(dir, "build-graph --data d.fvecs --k 10 --out g.phg");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const auto bytes = io::read_file(dir / "g.phg");
  ASSERT_GE(bytes.size(), 4u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PHG1");
  EXPECT_EQ(load_graph(dir / "g.phg"), build_knn_graph(data, 10));
  EXPECT_NE(r.err.find("# build-graph"), std::string::npos);
  EXPECT_NE(r.err.find("k=10"), std::string::npos);
  EXPECT_NE(r.err.find("seed=42"), std::string::npos);
}

TEST_F(Cli, PipelineStagesAndDeterminism) {
  ASSERT_EQ(lsp_cli(dir, "build-graph --data d.fvecs --k 10 --out g.phg").code, 0);
  auto r = lsp_cli(dir, "partition --graph g.phg --bins 8 --out p.php");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto part = load_partition(dir / "p.php");
  EXPECT_EQ(part.m, 8u);
  const auto sizes = part.bin_sizes();
  EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()), balance_cap(600, 8, kDefaultEta));
  r = lsp_cli(dir,
              "train --data d.fvecs --partition p.php --graph g.phg --soft-labels 5 --blocks 1 "
              "--hidden 16 --epochs 3 --out m.phm");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_classifier(dir / "m.phm").bins(), 8u);

  const std::string build =
      "build-index --data d.fvecs --bins 4,4 --model mlp,kmeans --blocks 1 --hidden 16 "
      "--epochs 3 --soft-labels 5 --out ";
  ASSERT_EQ(lsp_cli(dir, build + "i1.phi").code, 0);
  ASSERT_EQ(lsp_cli(dir, build + "i2.phi --workers 3").code, 0);
  EXPECT_EQ(slurp(dir / "i1.phi"), slurp(dir / "i2.phi"));
  EXPECT_EQ(slurp(dir / "i1.phi").substr(0, 4), "PHI1");

  r = lsp_cli(dir, "ground-truth --data d.fvecs --queries q.fvecs --k 10 --out gt.ivecs");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto gt = load_ivecs(dir / "gt.ivecs");
  EXPECT_EQ(gt.ids, brute_force_knn(data, queries, 10).ids);

  r = lsp_cli(dir, "eval --index i1.phi --queries q.fvecs --gt gt.ivecs --k 10 --probes 1x1,2x2,4x4");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "method,probes,knn_accuracy,avg_candidates,q95_candidates,mean_query_us");
  EXPECT_EQ(fields(rows[3])[0], "neural-lsh");
  EXPECT_EQ(fields(rows[3])[1], "4x4");
  EXPECT_EQ(fields(rows[3])[2], "1.000000");
  EXPECT_EQ(fields(rows[3])[3], "600.000");
  EXPECT_EQ(lsp_cli(dir, "eval --index i1.phi --queries q.fvecs --gt gt.ivecs --probes 1x1,2x2,4x4")
                .out,
            r.out);

  r = lsp_cli(dir, "query --index i1.phi --data d.fvecs --queries q.fvecs --k 3 --probes 4x4");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto q = lines(r.out);
  ASSERT_EQ(q.size(), 1 + 40 * 3u);
  EXPECT_EQ(q[0], "query,rank,index,distance");
  for (std::size_t i = 1; i < q.size(); ++i) {
    const auto f = fields(q[i]);
    const auto qi = std::stoul(f[0]), rank = std::stoul(f[1]);
    EXPECT_EQ(std::stoul(f[2]), gt.row(qi)[rank]);
  }
}

TEST_F(Cli, Baselines) {
  ASSERT_EQ(lsp_cli(dir, "ground-truth --data d.fvecs --queries q.fvecs --out gt.ivecs").code, 0);
  const std::vector<std::pair<std::string, std::string>> cases{
      {"--method kmeans --bins 8", "1,2,8"},
      {"--method pca-tree --depth 3", "1,2,8"},
      {"--method rp-tree --depth 3 --repetitions 3", "1,2,8"},
      {"--method 2means-tree --depth 3", "1,2,8"},
      {"--method reg-tree --depth 2 --k 5", "1,2,4"},
      {"--method lsh --bits 3", "1,2,8"}};
  for (const auto& [flags, probes] : cases) {
    auto r = lsp_cli(dir, "baseline --data d.fvecs " + flags + " --out b.phi");
    ASSERT_EQ(r.code, 0) << flags << ": " << r.err;
    r = lsp_cli(dir, "eval --index b.phi --queries q.fvecs --gt gt.ivecs --probes " + probes);
    ASSERT_EQ(r.code, 0) << flags << ": " << r.err;
    const auto rows = lines(r.out);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(fields(rows.back())[2], "1.000000") << flags;
  }
  EXPECT_EQ(lsp_cli(dir, "baseline --data d.fvecs --method kd-tree --out b.phi").code, 2);
}

TEST_F(Cli, SpectralCheckRow) {
  auto r = lsp_cli(dir, "spectral-check --data d.fvecs --k 10");
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 1u);
  auto f = fields(rows[0]);
  ASSERT_EQ(f.size(), 6u);
  EXPECT_LE(std::stod(f[2]), std::stod(f[3]) + 1e-9);
  EXPECT_EQ(std::stoul(f[4]) + std::stoul(f[5]), 600u);

  save_points(dir / "four.fvecs", testing_support::line({0, 0.1f, 10, 10.1f}), PointFormat::kFvecs);
  r = lsp_cli(dir, "spectral-check --data four.fvecs --k 1");
  ASSERT_EQ(r.code, 0) << r.err;
  f = fields(lines(r.out)[0]);
  EXPECT_EQ(f[0], "0");
  EXPECT_GT(std::stod(f[1]), 0.1);
  EXPECT_LT(std::stod(f[1]), 10.0);
  EXPECT_EQ(std::stod(f[2]), 0.0);
  EXPECT_EQ(f[4], "2");
  EXPECT_EQ(f[5], "2");

  save_points(dir / "same.fvecs", PointSet(4, 2, std::vector<float>(8, 1.0f)), PointFormat::kFvecs);
  r = lsp_cli(dir, "spectral-check --data same.fvecs --k 2");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("degenerate dataset"), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
  auto r = lsp_cli(dir, "build-graph --data d.fvecs --k 10 --out g.phg --bogus 1");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_lines(r.err), 1u);
  EXPECT_EQ(last_line(r.err).rfind("error: usage: ", 0), 0u);
  EXPECT_EQ(lsp_cli(dir, "").code, 2);
  EXPECT_EQ(lsp_cli(dir, "frobnicate").code, 2);
  EXPECT_EQ(lsp_cli(dir, "build-graph --data d.fvecs --k 0 --out g.phg").code, 2);
  EXPECT_EQ(lsp_cli(dir, "build-graph --data d.fvecs --k abc --out g.phg").code, 2);
  EXPECT_EQ(lsp_cli(dir, "partition --graph g.phg --bins x --out p.php").code, 3);

  r = lsp_cli(dir, "build-graph --data nothere.fvecs --k 10 --out g.phg");
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(error_lines(r.err), 1u);
  EXPECT_EQ(last_line(r.err).rfind("error: missing-input: ", 0), 0u);

  {
    std::ofstream bad(dir / "bad.fvecs", std::ios::binary);
    const std::int32_t dim = 4;
    bad.write(reinterpret_cast<const char*>(&dim), 4);
    bad.write("abc", 3);
  }
  r = lsp_cli(dir, "build-graph --data bad.fvecs --k 2 --out g.phg");
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(last_line(r.err).rfind("error: format: ", 0), 0u);
  {
    std::ofstream bad(dir / "bad.phi", std::ios::binary);
    bad << "PHI1garbage";
  }
  ASSERT_EQ(lsp_cli(dir, "ground-truth --data d.fvecs --queries q.fvecs --out gt.ivecs").code, 0);
  EXPECT_EQ(lsp_cli(dir, "eval --index bad.phi --queries q.fvecs --gt gt.ivecs").code, 4);
  EXPECT_FALSE(std::filesystem::exists(dir / "g.phg"));
}

TEST_F(Cli, ConfigFilePrecedence) {
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "# shared settings\nk = 3\nseed=7\n\ndata=d.fvecs\n";
  }
  auto r = lsp_cli(dir, "build-graph --config run.cfg --out g3.phg");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_graph(dir / "g3.phg").k(), 3u);
  EXPECT_NE(r.err.find("k=3"), std::string::npos);
  EXPECT_NE(r.err.find("seed=7"), std::string::npos);

  r = lsp_cli(dir, "build-graph --config run.cfg --k 5 --out g5.phg");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_graph(dir / "g5.phg").k(), 5u);
  EXPECT_NE(r.err.find("k=5"), std::string::npos);

  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "just words\n";
  }
  EXPECT_EQ(lsp_cli(dir, "build-graph --config bad.cfg --data d.fvecs --out g.phg").code, 4);
  EXPECT_EQ(lsp_cli(dir, "build-graph --config none.cfg --data d.fvecs --out g.phg").code, 3);
  {
    std::ofstream cfg(dir / "unknown.cfg");
    cfg << "colour=blue\n";
  }
  EXPECT_EQ(lsp_cli(dir, "build-graph --config unknown.cfg --data d.fvecs --out g.phg").code, 2);
}

TEST_F(Cli, ArtifactsAreWrittenAtomically) {
  ASSERT_EQ(lsp_cli(dir, "build-graph --data d.fvecs --k 4 --out g.phg").code, 0);
  ASSERT_EQ(lsp_cli(dir, "partition --graph g.phg --bins 4 --out p.php").code, 0);
  ASSERT_EQ(lsp_cli(dir, "baseline --data d.fvecs --bins 4 --out b.phi").code, 0);
  // a failing stage leaves the previous artifact untouched
  const auto before = slurp(dir / "p.php");
  EXPECT_NE(lsp_cli(dir, "partition --graph g.phg --bins 601 --out p.php").code, 0);
  EXPECT_EQ(slurp(dir / "p.php"), before);
  std::set<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(dir.path()))
    names.insert(e.path().filename().string());
  EXPECT_EQ(names, (std::set<std::string>{"b.phi", "d.fvecs", "g.phg", "p.php", "q.fvecs",
                                          "stderr.txt", "stdout.txt"}));
}
