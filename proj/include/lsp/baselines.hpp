#pragma once

// Comparison partitioners: k-means routing, hyperplane trees (PCA, random
// projection, 2-means, regression) and random-hyperplane LSH.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lsp/binary_io.hpp"
#include "lsp/core.hpp"
#include "lsp/gp.hpp"
#include "lsp/learn.hpp"

namespace lsp {

struct KMeansRouter {
  std::uint32_t dim = 0;
  std::vector<float> centroids;          // m x dim, row-major
  std::vector<std::uint32_t> assignment; // dataset point -> centroid
  std::vector<double> objective_history; // after each assignment step

  std::uint32_t bins() const noexcept {
    return dim == 0 ? 0 : std::uint32_t(centroids.size() / dim);
  }
  std::span<const float> centroid(std::size_t j) const noexcept {
    return {centroids.data() + j * dim, dim};
  }
  /// Index of the nearest centroid (ties by lowest index).
  std::uint32_t nearest(std::span<const float> x) const;
};

inline constexpr std::size_t kDefaultKMeansIters = 25;

/// k-means++ seeding followed by Lloyd iterations. An emptied cluster takes
/// over the point farthest from its centroid within the largest cluster.
KMeansRouter kmeans_fit(const PointSet& ps, std::uint32_t m, std::uint64_t seed = 42,
                        std::size_t iters = kDefaultKMeansIters);

/// Bins ordered by ascending centroid distance, ties by index.
std::vector<std::uint32_t> kmeans_top_bins(const KMeansRouter& r, std::span<const float> q,
                                           std::size_t b);

void write_kmeans(io::ByteWriter& w, const KMeansRouter& r);
KMeansRouter read_kmeans(io::ByteReader& r);

enum class SplitRule : std::uint32_t {
  kPca = 0,
  kRandomProjection = 1,
  kTwoMeans = 2,
  kRegression = 3,
};

const char* split_rule_name(SplitRule rule);

/// Per-node settings for the regression rule: a 2-way balanced partition of
/// the node's k-NN graph, fitted by multiclass logistic regression.
struct RegressionSplitConfig {
  std::size_t k = 10;
  Eta eta = kDefaultEta;
  std::size_t max_refine_iters = kDefaultRefineIters;
  MlpConfig training = [] {
    MlpConfig c;
    c.blocks = 0;
    c.epochs = 50;
    c.learning_rate = 1e-2;
    return c;
  }();
};

struct HyperplaneTree {
  struct Node {
    std::vector<float> direction;  // empty for leaves
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t depth = 0;
    std::vector<std::uint32_t> points;  // leaves only

    bool is_leaf() const noexcept { return left < 0; }
  };

  std::uint32_t dim = 0;
  std::uint32_t max_depth = 0;
  SplitRule rule = SplitRule::kPca;
  std::vector<Node> nodes;  // nodes[0] is the root

  std::size_t leaf_count() const;
};

/// Recursive bisection to `depth` levels; left child iff <a, p> <= threshold.
HyperplaneTree build_hyperplane_tree(const PointSet& ps, std::uint32_t depth, SplitRule rule,
                                     std::uint64_t seed = 42,
                                     const RegressionSplitConfig& reg = {});

/// Node reached after descending at most `levels` levels.
std::size_t tree_descend(const HyperplaneTree& t, std::span<const float> q,
                         std::uint32_t levels);

/// All points stored under node `id`.
std::vector<std::uint32_t> tree_points(const HyperplaneTree& t, std::size_t id);

/// Single root-to-leaf descent; returns the leaf's points.
const std::vector<std::uint32_t>& tree_route(const HyperplaneTree& t, std::span<const float> q);

void write_tree(io::ByteWriter& w, const HyperplaneTree& t);
HyperplaneTree read_tree(io::ByteReader& r);

/// Random-hyperplane LSH through the dataset mean. Bit i of a bin id is set
/// iff the i-th projection of the centered point is positive.
struct LshRouter {
  std::uint32_t dim = 0;
  std::uint32_t bits = 0;
  std::vector<float> directions;  // bits x dim
  std::vector<float> mean;
  Partition partition;

  std::uint32_t bins() const noexcept { return 1u << bits; }
  std::uint32_t hash(std::span<const float> x) const;
  /// Bins by total |margin| of the differing bits, ties by id.
  std::vector<std::uint32_t> top_bins(std::span<const float> q, std::size_t b) const;
};

inline constexpr std::uint32_t kMaxLshBits = 20;

LshRouter fit_lsh(const PointSet& ps, std::uint32_t bits, std::uint64_t seed = 42);
Partition lsh_partition(const PointSet& ps, std::uint32_t bits, std::uint64_t seed = 42);

void write_lsh(io::ByteWriter& w, const LshRouter& r);
LshRouter read_lsh(io::ByteReader& r);

}  // namespace lsp
