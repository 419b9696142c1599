#pragma once

// Hierarchical learned partition index with multi-probe beam queries, and
// the PHI1 container that also persists the baseline routers.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lsp/baselines.hpp"
#include "lsp/core.hpp"
#include "lsp/gp.hpp"
#include "lsp/learn.hpp"

namespace lsp {

enum class LevelModel : std::uint32_t { kMlp = 0, kRegression = 1, kKMeans = 2 };

LevelModel parse_level_model(const std::string& name);
const char* level_model_name(LevelModel m);

struct LevelSpec {
  std::uint32_t bins = 16;
  LevelModel model = LevelModel::kMlp;
};

struct IndexConfig {
  std::size_t k = 10;
  std::vector<LevelSpec> levels{LevelSpec{}};
  Eta eta = kDefaultEta;
  std::uint32_t soft_labels = 1;  // S; regression levels always use 1
  std::uint64_t seed = 42;
  std::size_t max_refine_iters = kDefaultRefineIters;
  /// Per-level network settings; missing entries take the level defaults
  /// (top level: b=3, s=512; deeper levels: b=2, s=390).
  std::vector<MlpConfig> mlp;
  std::size_t kmeans_iters = kDefaultKMeansIters;
  unsigned workers = default_workers();

  MlpConfig mlp_for_level(std::size_t level) const;
};

class PartitionTree {
 public:
  enum class NodeType : std::uint32_t { kLeaf = 0, kClassifier = 1, kKMeans = 2 };

  struct Node {
    NodeType type = NodeType::kLeaf;
    std::uint32_t level = 0;
    std::optional<Classifier> model;
    std::optional<KMeansRouter> kmeans;
    std::vector<std::uint32_t> children;  // one per bin of this node
    std::vector<std::uint32_t> points;    // leaves only, ascending
  };

  std::uint32_t dim = 0;
  std::uint32_t n = 0;
  std::vector<std::uint32_t> branching;
  std::vector<Node> nodes;  // nodes[0] is the root
  std::vector<std::string> warnings;

  std::size_t levels() const noexcept { return branching.size(); }
  std::size_t leaf_count() const;
  /// Leaf holding each dataset point under the training assignment.
  std::vector<std::uint32_t> point_leaves() const;
};

struct QueryResult {
  std::vector<std::uint32_t> candidates;
  std::size_t probes = 0;             // leaves visited
  std::size_t distances_computed = 0; // centroid distances while routing, plus re-ranking
};

PartitionTree build_index(const PointSet& ps, const IndexConfig& cfg);

/// Beam descent keeping the top probes[i] children of every frontier node.
QueryResult query(const PartitionTree& t, std::span<const float> q,
                  std::span<const std::uint32_t> probes_per_level);

struct KnnAnswer {
  std::vector<std::uint32_t> ids;
  bool short_result = false;  // fewer than k candidates
  QueryResult routing;
};

/// Exact k nearest among the candidates of `query`.
KnnAnswer answer_knn(const PartitionTree& t, const PointSet& ps, std::span<const float> q,
                     std::size_t k, std::span<const std::uint32_t> probes_per_level);

/// Any router the PHI1 container can hold. Hyperplane trees are stored as a
/// set of independently seeded repetitions whose evaluations are averaged.
struct IndexFile {
  std::variant<PartitionTree, KMeansRouter, std::vector<HyperplaneTree>, LshRouter> router;
  std::string method;  // e.g. "neural-lsh", "kmeans", "rp-tree"
};

std::vector<std::uint8_t> serialize_index(const IndexFile& f);
IndexFile deserialize_index(std::span<const std::uint8_t> bytes);
void save_index(const std::filesystem::path& path, const IndexFile& f);
IndexFile load_index(const std::filesystem::path& path);

}  // namespace lsp
