#include "lsp/index.hpp"

#include <algorithm>
#include <numeric>

#include "lsp/binary_io.hpp"
#include "lsp/knn.hpp"
#include "lsp/random.hpp"

namespace lsp {

namespace {
constexpr char kIndexMagic[] = "PHI1";

enum class ContainerKind : std::uint32_t {
  kLearned = 0,
  kKMeans = 1,
  kTrees = 2,
  kLsh = 3,
};
}  // namespace

LevelModel parse_level_model(const std::string& name) {
  if (name == "mlp" || name == "neural") return LevelModel::kMlp;
  if (name == "regression" || name == "logistic") return LevelModel::kRegression;
  if (name == "kmeans") return LevelModel::kKMeans;
  fail(ErrorKind::kInvalidArgument, "unknown level model '" + name + "'");
}

const char* level_model_name(LevelModel m) {
  switch (m) {
    case LevelModel::kMlp: return "mlp";
    case LevelModel::kRegression: return "regression";
    case LevelModel::kKMeans: return "kmeans";
  }
  return "?";
}

MlpConfig IndexConfig::mlp_for_level(std::size_t level) const {
  if (level < mlp.size()) return mlp[level];
  return level == 0 ? MlpConfig::top_level() : MlpConfig::second_level();
}

std::size_t PartitionTree::leaf_count() const {
  return std::size_t(std::count_if(nodes.begin(), nodes.end(),
                                   [](const Node& x) { return x.type == NodeType::kLeaf; }));
}

std::vector<std::uint32_t> PartitionTree::point_leaves() const {
  std::vector<std::uint32_t> out(n, UINT32_MAX);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].type != NodeType::kLeaf) continue;
    for (auto p : nodes[i].points) out[p] = std::uint32_t(i);
  }
  return out;
}

namespace {

class Builder {
 public:
  Builder(const PointSet& ps, const IndexConfig& cfg, PartitionTree& t)
      : ps_(ps), cfg_(cfg), t_(t), rng_(cfg.seed) {}

  std::uint32_t build(std::vector<std::uint32_t> ids, std::uint32_t level) {
    const auto id = std::uint32_t(t_.nodes.size());
    t_.nodes.emplace_back();
    t_.nodes[id].level = level;
    Rng node_rng = rng_.fork();
    if (level == cfg_.levels.size()) {
      make_leaf(id, std::move(ids));
      return id;
    }
    const auto spec = cfg_.levels[level];
    if (ids.size() < spec.bins || ids.size() < 2) {
      t_.warnings.push_back("node at level " + std::to_string(level) + " holds " +
                            std::to_string(ids.size()) + " points (< " +
                            std::to_string(spec.bins) + " bins); kept as a leaf");
      make_leaf(id, std::move(ids));
      return id;
    }

    const PointSet sub = ps_.subset(ids);
    std::vector<std::uint32_t> labels;
    PartitionTree::Node node;
    node.level = level;
    if (spec.model == LevelModel::kKMeans) {
      auto km = kmeans_fit(sub, spec.bins, node_rng.next(), cfg_.kmeans_iters);
      labels = km.assignment;
      node.type = PartitionTree::NodeType::kKMeans;
      node.kmeans = std::move(km);
    } else {
      const bool soft = spec.model == LevelModel::kMlp && cfg_.soft_labels > 1;
      const std::size_t limit = sub.size() - 1;
      const std::size_t k_part = std::min(cfg_.k, limit);
      const std::size_t k_graph =
          std::min(std::max<std::size_t>(k_part, soft ? cfg_.soft_labels - 1 : 0), limit);
      const auto graph = build_knn_graph(sub, k_graph, cfg_.workers);
      PartitionOptions opt;
      opt.m = spec.bins;
      opt.eta = cfg_.eta;
      opt.seed = node_rng.next();
      opt.max_refine_iters = cfg_.max_refine_iters;
      const auto part = partition_graph(graph.truncated(k_part).undirected(), opt);
      if (!part.feasible()) {
        fail(ErrorKind::kInvariant, "partition at level " + std::to_string(level) +
                                        " violates its balance cap");
      }
      const auto soft_labels =
          soft ? make_soft_labels(graph, part,
                                  std::uint32_t(std::min<std::size_t>(cfg_.soft_labels,
                                                                      k_graph + 1)))
               : SoftLabelSet::one_hot(part);
      auto mlp = cfg_.mlp_for_level(level);
      mlp.seed = node_rng.next();
      const auto kind = spec.model == LevelModel::kMlp ? ClassifierKind::kMlp
                                                       : ClassifierKind::kSoftmaxRegression;
      node.model = train(sub, soft_labels, kind, mlp);
      node.type = PartitionTree::NodeType::kClassifier;
      labels = part.labels;
    }

    std::vector<std::vector<std::uint32_t>> groups(spec.bins);
    for (std::size_t i = 0; i < ids.size(); ++i) groups[labels[i]].push_back(ids[i]);
    t_.nodes[id] = std::move(node);
    for (std::uint32_t b = 0; b < spec.bins; ++b) {
      const auto child = build(std::move(groups[b]), level + 1);
      t_.nodes[id].children.push_back(child);
    }
    return id;
  }

 private:
  void make_leaf(std::uint32_t id, std::vector<std::uint32_t> ids) {
    std::sort(ids.begin(), ids.end());
    t_.nodes[id].type = PartitionTree::NodeType::kLeaf;
    t_.nodes[id].points = std::move(ids);
  }

  const PointSet& ps_;
  const IndexConfig& cfg_;
  PartitionTree& t_;
  Rng rng_;
};

}  // namespace

PartitionTree build_index(const PointSet& ps, const IndexConfig& cfg) {
  require(!cfg.levels.empty(), "index needs at least one level");
  std::uint64_t product = 1;
  for (const auto& l : cfg.levels) {
    require(l.bins >= 2, "every level needs at least 2 bins");
    product *= l.bins;
    require(product <= ps.size(), "product of branching factors exceeds n");
  }
  require(cfg.k >= 1, "k must be positive");
  require(cfg.soft_labels >= 1, "soft-label S must be positive");
  PartitionTree t;
  t.dim = std::uint32_t(ps.dim());
  t.n = std::uint32_t(ps.size());
  for (const auto& l : cfg.levels) t.branching.push_back(l.bins);
  std::vector<std::uint32_t> all(ps.size());
  std::iota(all.begin(), all.end(), 0u);
  Builder(ps, cfg, t).build(std::move(all), 0);
  return t;
}

QueryResult query(const PartitionTree& t, std::span<const float> q,
                  std::span<const std::uint32_t> probes_per_level) {
  require(q.size() == t.dim, "dimension mismatch: index expects " + std::to_string(t.dim) +
                                 ", got " + std::to_string(q.size()));
  if (probes_per_level.size() != t.levels()) {
    fail(ErrorKind::kInvalidArgument, "expected " + std::to_string(t.levels()) +
                                          " probe counts, got " +
                                          std::to_string(probes_per_level.size()));
  }
  for (std::size_t i = 0; i < t.levels(); ++i) {
    if (probes_per_level[i] < 1 || probes_per_level[i] > t.branching[i]) {
      fail(ErrorKind::kInvalidArgument,
           "probe count " + std::to_string(probes_per_level[i]) + " at level " +
               std::to_string(i + 1) + " outside [1, " + std::to_string(t.branching[i]) + "]");
    }
  }
  QueryResult res;
  std::vector<std::uint32_t> frontier{0}, next, leaves;
  while (!frontier.empty()) {
    next.clear();
    for (auto id : frontier) {
      const auto& node = t.nodes[id];
      if (node.type == PartitionTree::NodeType::kLeaf) {
        leaves.push_back(id);
        continue;
      }
      const std::size_t b = probes_per_level[node.level];
      std::vector<std::uint32_t> ranked;
      if (node.type == PartitionTree::NodeType::kKMeans) {
        ranked = kmeans_top_bins(*node.kmeans, q, b);
        res.distances_computed += node.kmeans->bins();
      } else {
        ranked = top_bins(*node.model, q, b);
      }
      for (auto bin : ranked) next.push_back(node.children[bin]);
    }
    frontier.swap(next);
  }
  res.probes = leaves.size();
  for (auto id : leaves) {
    const auto& pts = t.nodes[id].points;
    res.candidates.insert(res.candidates.end(), pts.begin(), pts.end());
  }
  return res;
}

KnnAnswer answer_knn(const PartitionTree& t, const PointSet& ps, std::span<const float> q,
                     std::size_t k, std::span<const std::uint32_t> probes_per_level) {
  require(ps.size() == t.n && ps.dim() == t.dim, "point set does not match the index");
  require(k >= 1, "k must be positive");
  KnnAnswer ans;
  ans.routing = query(t, q, probes_per_level);
  const auto& cand = ans.routing.candidates;
  std::vector<std::pair<double, std::uint32_t>> scored;
  scored.reserve(cand.size());
  for (auto id : cand) scored.push_back({distance_sq(q, ps.row(id)), id});
  ans.routing.distances_computed += cand.size();
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + std::ptrdiff_t(take), scored.end());
  for (std::size_t i = 0; i < take; ++i) ans.ids.push_back(scored[i].second);
  ans.short_result = take < k;
  return ans;
}

// ------------------------------------------------------------ persistence

namespace {

void write_learned(io::ByteWriter& w, const PartitionTree& t) {
  w.u32(std::uint32_t(t.levels()));
  w.u32s(t.branching);
  w.u32(std::uint32_t(t.nodes.size()));
  for (const auto& node : t.nodes) {
    w.u32(static_cast<std::uint32_t>(node.type));
    w.u32(node.level);
    switch (node.type) {
      case PartitionTree::NodeType::kLeaf:
        w.u32(std::uint32_t(node.points.size()));
        w.u32s(node.points);
        continue;
      case PartitionTree::NodeType::kClassifier: {
        const auto blob = serialize_classifier(*node.model);
        w.u32(std::uint32_t(blob.size()));
        w.bytes(blob);
        break;
      }
      case PartitionTree::NodeType::kKMeans:
        write_kmeans(w, *node.kmeans);
        break;
    }
    w.u32(std::uint32_t(node.children.size()));
    w.u32s(node.children);
  }
}

PartitionTree read_learned(io::ByteReader& r, std::uint32_t dim, std::uint32_t n) {
  PartitionTree t;
  t.dim = dim;
  t.n = n;
  const std::uint32_t levels = r.u32();
  if (levels == 0) r.format_error("index without levels");
  t.branching = r.u32s(levels);
  const std::uint32_t count = r.u32();
  if (count == 0) r.format_error("index without nodes");
  t.nodes.resize(count);
  std::vector<std::uint32_t> seen(n, 0);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto& node = t.nodes[i];
    const std::uint32_t type = r.u32();
    if (type > 2) r.format_error("unknown node type " + std::to_string(type));
    node.type = static_cast<PartitionTree::NodeType>(type);
    node.level = r.u32();
    if (node.level > levels) r.format_error("node level out of range");
    if (node.type == PartitionTree::NodeType::kLeaf) {
      node.points = r.u32s(r.u32());
      for (auto p : node.points) {
        if (p >= n || seen[p]++) r.format_error("leaf lists are not a partition of the points");
      }
      continue;
    }
    if (node.level >= levels) r.format_error("internal node below the last level");
    if (node.type == PartitionTree::NodeType::kClassifier) {
      const std::uint32_t len = r.u32();
      auto blob = r.bytes(len);
      io::ByteReader inner(blob, "index model blob");
      try {
        node.model = deserialize_classifier(blob);
      } catch (const Error& e) {
        r.format_error(e.what());
      }
      if (node.model->dim() != dim) r.format_error("model dimension mismatch");
    } else {
      node.kmeans = read_kmeans(r);
      if (node.kmeans->dim != dim) r.format_error("k-means dimension mismatch");
    }
    node.children = r.u32s(r.u32());
    const std::uint32_t bins = node.model ? node.model->bins() : node.kmeans->bins();
    if (node.children.size() != bins || bins != t.branching[node.level]) {
      r.format_error("child count does not match branching factor");
    }
    for (auto c : node.children) {
      if (c <= i || c >= count) r.format_error("bad child index");
    }
  }
  for (std::uint32_t p = 0; p < n; ++p) {
    if (!seen[p]) r.format_error("point " + std::to_string(p) + " missing from leaves");
  }
  return t;
}

}  // namespace

std::vector<std::uint8_t> serialize_index(const IndexFile& f) {
  io::ByteWriter w;
  w.magic(kIndexMagic);
  w.u32(std::uint32_t(f.method.size()));
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(f.method.data()), f.method.size()));
  std::visit(
      [&](const auto& router) {
        using R = std::decay_t<decltype(router)>;
        if constexpr (std::is_same_v<R, PartitionTree>) {
          w.u32(std::uint32_t(ContainerKind::kLearned));
          w.u32(router.dim);
          w.u32(router.n);
          write_learned(w, router);
        } else if constexpr (std::is_same_v<R, KMeansRouter>) {
          w.u32(std::uint32_t(ContainerKind::kKMeans));
          w.u32(router.dim);
          w.u32(std::uint32_t(router.assignment.size()));
          write_kmeans(w, router);
        } else if constexpr (std::is_same_v<R, std::vector<HyperplaneTree>>) {
          require(!router.empty(), "empty tree set");
          w.u32(std::uint32_t(ContainerKind::kTrees));
          w.u32(router.front().dim);
          w.u32(std::uint32_t(tree_points(router.front(), 0).size()));
          w.u32(std::uint32_t(router.size()));
          for (const auto& t : router) write_tree(w, t);
        } else {
          w.u32(std::uint32_t(ContainerKind::kLsh));
          w.u32(router.dim);
          w.u32(std::uint32_t(router.partition.labels.size()));
          write_lsh(w, router);
        }
      },
      f.router);
  return w.release();
}

IndexFile deserialize_index(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "index");
  r.expect_magic(kIndexMagic);
  IndexFile f;
  const std::uint32_t name_len = r.u32();
  if (name_len > 256) r.format_error("method name too long");
  auto name = r.bytes(name_len);
  f.method.assign(name.begin(), name.end());
  const std::uint32_t kind = r.u32();
  const std::uint32_t dim = r.u32(), n = r.u32();
  if (dim == 0 || n == 0) r.format_error("index header declares d=0 or n=0");
  switch (static_cast<ContainerKind>(kind)) {
    case ContainerKind::kLearned:
      f.router = read_learned(r, dim, n);
      break;
    case ContainerKind::kKMeans: {
      auto km = read_kmeans(r);
      if (km.dim != dim || km.assignment.size() != n) r.format_error("k-means header mismatch");
      f.router = std::move(km);
      break;
    }
    case ContainerKind::kTrees: {
      const std::uint32_t reps = r.u32();
      if (reps == 0) r.format_error("empty tree set");
      std::vector<HyperplaneTree> trees;
      for (std::uint32_t i = 0; i < reps; ++i) {
        trees.push_back(read_tree(r));
        if (trees.back().dim != dim) r.format_error("tree dimension mismatch");
      }
      f.router = std::move(trees);
      break;
    }
    case ContainerKind::kLsh: {
      auto l = read_lsh(r);
      if (l.dim != dim || l.partition.labels.size() != n) r.format_error("LSH header mismatch");
      f.router = std::move(l);
      break;
    }
    default:
      r.format_error("unknown router kind " + std::to_string(kind));
  }
  r.expect_end();
  return f;
}

void save_index(const std::filesystem::path& path, const IndexFile& f) {
  io::write_file_atomic(path, serialize_index(f));
}

IndexFile load_index(const std::filesystem::path& path) {
  return deserialize_index(io::read_file(path));
}

}  // namespace lsp
