// lsp_synth: seeded Gaussian-mixture datasets and query sets.

#include <CLI11.hpp>

#include <iostream>

#include "lsp/core.hpp"
#include "lsp/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write a seeded Gaussian-mixture dataset"};
  std::size_t n = 20000, d = 32, components = 64, queries = 0;
  std::uint64_t seed = 42, query_seed = 44;
  double spread = 1.0;
  std::string out, queries_out, format = "fvecs";
  app.add_option("--n", n, "Dataset size")->capture_default_str();
  app.add_option("--d", d, "Dimension")->capture_default_str();
  app.add_option("--components", components, "Mixture components")->capture_default_str();
  app.add_option("--spread", spread, "Scale of component sigmas")->capture_default_str();
  app.add_option("--seed", seed, "Model seed; the dataset is sampled with seed+1")->capture_default_str();
  app.add_option("--format", format, "fvecs or raw")->capture_default_str();
  app.add_option("--out", out, "Dataset file")->required();
  app.add_option("--queries", queries, "Query count (0 = none)")->capture_default_str();
  app.add_option("--query-seed", query_seed, "Query sampling seed")->capture_default_str();
  app.add_option("--queries-out", queries_out, "Query file");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto fmt = lsp::parse_point_format(format);
    const auto model = lsp::make_gmm(d, components, seed, spread);
    lsp::save_points(out, lsp::sample_gmm(model, n, seed + 1), fmt);
    if (queries > 0) {
      lsp::require(!queries_out.empty(), "--queries needs --queries-out");
      if (query_seed == seed + 1) std::cerr << "warning: queries share the dataset's sampling seed\n";
      lsp::save_points(queries_out, lsp::sample_gmm(model, queries, query_seed), fmt);
    }
  } catch (const lsp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
