#pragma once

// Balanced m-way partitioning of the undirected k-NN graph: heavy-edge
// coarsening, greedy graph growing, and FM-style local search.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lsp/knn.hpp"

namespace lsp {

/// Balance slack as an exact rational num/den.
struct Eta {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  /// Parses "0.05", "1/20" or "0".
  static Eta parse(const std::string& text);
  double value() const noexcept { return double(num) / double(den); }
  std::string str() const;
  friend bool operator==(const Eta&, const Eta&) = default;
};

inline constexpr Eta kDefaultEta{5, 100};
inline constexpr std::size_t kDefaultRefineIters = 2000;

/// floor((1+eta) * n / m), computed exactly.
std::uint64_t balance_cap(std::uint64_t n, std::uint64_t m, Eta eta);

struct Partition {
  std::vector<std::uint32_t> labels;
  std::uint32_t m = 0;
  Eta eta{};

  std::size_t size() const noexcept { return labels.size(); }
  std::uint64_t cap() const { return balance_cap(labels.size(), m, eta); }
  std::vector<std::size_t> bin_sizes() const;
  /// Labels in range and every bin within the cap.
  bool feasible() const;
  /// Point ids per bin, ascending.
  std::vector<std::vector<std::uint32_t>> bins() const;
};

struct CutStats {
  std::int64_t cut_weight = 0;
  std::uint64_t cut_edges_directed = 0;
  std::uint64_t total_edges_directed = 0;
  double cut_fraction_directed = 0.0;
  std::vector<std::size_t> bin_sizes;
};

CutStats cut_stats(const KnnGraph& g, const Partition& part);

/// Sum of edge weights whose endpoints carry different labels.
std::int64_t cut_weight(const WeightedGraph& g, std::span<const std::uint32_t> labels);

struct Coarsening {
  WeightedGraph graph;
  std::vector<std::uint32_t> fine_to_coarse;
};

/// One round of heavy-edge matching. Vertices are visited in ascending index
/// order and matched to the unmatched neighbor with the heaviest edge (ties by
/// lowest index) provided the merged weight stays within `max_vertex_weight`.
Coarsening coarsen(const WeightedGraph& g,
                   std::int64_t max_vertex_weight = INT64_MAX);

struct RefineStats {
  std::size_t moves = 0;
  std::size_t swaps = 0;
  std::int64_t initial_cut = 0;
  std::int64_t final_cut = 0;
};

/// Greedy positive-gain local search under a per-bin vertex-weight cap. A
/// step is either a single move or a swap of two vertices between bins; each
/// accepted step counts toward `max_iters`. The input must be feasible.
Partition refine_fm(const WeightedGraph& g, const Partition& part, std::int64_t cap,
                    std::size_t max_iters, RefineStats* stats = nullptr);

struct PartitionOptions {
  std::uint32_t m = 2;
  Eta eta = kDefaultEta;
  std::uint64_t seed = 42;
  std::size_t max_refine_iters = kDefaultRefineIters;
  /// Greedy-growing restarts on the coarsest graph.
  std::size_t initial_attempts = 8;
};

Partition partition_graph(const WeightedGraph& g, const PartitionOptions& opt);

Partition partition_graph(const KnnGraph& g, std::uint32_t m, Eta eta = kDefaultEta,
                          std::uint64_t seed = 42,
                          std::size_t max_refine_iters = kDefaultRefineIters);

std::vector<std::uint8_t> serialize_partition(const Partition& p);
Partition deserialize_partition(std::span<const std::uint8_t> bytes);
void save_partition(const std::filesystem::path& path, const Partition& p);
/// The stored format omits eta; the loaded eta is the tightest slack that
/// admits the stored bin sizes.
Partition load_partition(const std::filesystem::path& path);

}  // namespace lsp
