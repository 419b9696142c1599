#pragma once

// Exact k-NN graphs and the brute-force neighbor oracle.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lsp/core.hpp"

namespace lsp {

/// Undirected weighted graph in CSR form. Vertex weights count the points a
/// vertex stands for; edge weights count parallel directed k-NN edges.
struct WeightedGraph {
  std::vector<std::uint32_t> offsets;  // size n+1
  std::vector<std::uint32_t> targets;
  std::vector<std::int64_t> edge_weights;
  std::vector<std::int64_t> vertex_weights;

  std::size_t size() const noexcept { return vertex_weights.size(); }
  std::span<const std::uint32_t> neighbors(std::size_t v) const noexcept {
    return {targets.data() + offsets[v], offsets[v + 1] - offsets[v]};
  }
  std::span<const std::int64_t> weights(std::size_t v) const noexcept {
    return {edge_weights.data() + offsets[v], offsets[v + 1] - offsets[v]};
  }
  std::int64_t total_vertex_weight() const noexcept;
  /// Sum over unordered edges.
  std::int64_t total_edge_weight() const noexcept;

  struct Edge {
    std::uint32_t u, v;
    std::int64_t w;
  };
  /// Builds CSR from an undirected edge list; parallel edges are merged.
  static WeightedGraph from_edges(std::size_t n, std::span<const Edge> edges,
                                  std::vector<std::int64_t> vertex_weights = {});
};

class KnnGraph {
 public:
  KnnGraph() = default;
  KnnGraph(std::size_t n, std::size_t k, std::vector<std::uint32_t> neighbors);

  std::size_t size() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }
  std::span<const std::uint32_t> neighbors(std::size_t p) const noexcept {
    return {neighbors_.data() + p * k_, k_};
  }
  std::span<const std::uint32_t> all_neighbors() const noexcept { return neighbors_; }

  /// The graph restricted to each point's first `k_new` neighbors.
  KnnGraph truncated(std::size_t k_new) const;

  /// Undirected view: w(p,p') = number of directed edges between p and p'.
  WeightedGraph undirected() const;

  friend bool operator==(const KnnGraph&, const KnnGraph&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::vector<std::uint32_t> neighbors_;
};

/// Exact k-NN graph, self excluded, ties broken by ascending index.
KnnGraph build_knn_graph(const PointSet& ps, std::size_t k,
                         unsigned workers = default_workers());

/// Exact k nearest dataset points per query. With `exclude_self`, the query
/// set must be the dataset itself and query i never reports index i.
GroundTruth brute_force_knn(const PointSet& ps, const PointSet& qs, std::size_t k,
                            bool exclude_self = false,
                            unsigned workers = default_workers());

/// |N_k(p) U {p' : p in N_k(p')}|.
std::size_t degree(const KnnGraph& g, std::size_t p);

std::vector<std::uint8_t> serialize_graph(const KnnGraph& g);
KnnGraph deserialize_graph(std::span<const std::uint8_t> bytes);
void save_graph(const std::filesystem::path& path, const KnnGraph& g);
KnnGraph load_graph(const std::filesystem::path& path);

}  // namespace lsp
