#include "lsp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lsp/knn.hpp"
#include "lsp/random.hpp"

namespace lsp {

// ---------------------------------------------------------------- k-means

std::uint32_t KMeansRouter::nearest(std::span<const float> x) const {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::uint32_t j = 0; j < bins(); ++j) {
    const double d = distance_sq_unchecked(x.data(), centroids.data() + j * dim, dim);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

namespace {

double dist_to(const float* x, const std::vector<double>& c, std::size_t j, std::size_t d) {
  double s = 0.0;
  const double* cj = c.data() + j * d;
  for (std::size_t i = 0; i < d; ++i) {
    const double t = double(x[i]) - cj[i];
    s += t * t;
  }
  return s;
}

}  // namespace

KMeansRouter kmeans_fit(const PointSet& ps, std::uint32_t m, std::uint64_t seed,
                        std::size_t iters) {
  const std::size_t n = ps.size(), d = ps.dim();
  require(m >= 1, "k-means needs m >= 1");
  if (m > n) {
    fail(ErrorKind::kInvalidArgument, "k-means with m=" + std::to_string(m) + " > n=" +
                                          std::to_string(n));
  }
  Rng rng(seed);
  const float* base = ps.data().data();
  std::vector<double> cent(std::size_t(m) * d);
  auto set_centroid = [&](std::size_t j, std::size_t p) {
    for (std::size_t i = 0; i < d; ++i) cent[j * d + i] = base[p * d + i];
  };

  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  std::size_t first = rng.below(n);
  set_centroid(0, first);
  chosen[first] = true;
  for (std::uint32_t j = 1; j < m; ++j) {
    double total = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      d2[p] = std::min(d2[p], dist_to(base + p * d, cent, j - 1, d));
      if (!chosen[p]) total += d2[p];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (std::size_t p = 0; p < n; ++p) {
        if (chosen[p] || d2[p] <= 0.0) continue;
        pick = p;
        r -= d2[p];
        if (r < 0.0) break;
      }
    }
    if (pick == n) {
      for (std::size_t p = 0; p < n; ++p) {
        if (!chosen[p]) {
          pick = p;
          break;
        }
      }
    }
    set_centroid(j, pick);
    chosen[pick] = true;
  }

  KMeansRouter out;
  out.dim = std::uint32_t(d);
  std::vector<std::uint32_t> assign(n, 0);
  std::vector<std::size_t> counts(m);
  auto assign_all = [&] {
    double obj = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      std::uint32_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::uint32_t j = 0; j < m; ++j) {
        const double dd = dist_to(base + p * d, cent, j, d);
        if (dd < best_d) {
          best_d = dd;
          best = j;
        }
      }
      assign[p] = best;
      obj += best_d;
    }
    return obj;
  };

  for (std::size_t it = 0; it < std::max<std::size_t>(1, iters); ++it) {
    const double obj = assign_all();
    if (!out.objective_history.empty()) {
      const double prev = out.objective_history.back();
      if (obj > prev + 1e-9 * std::max(1.0, prev)) {
        fail(ErrorKind::kInvariant, "k-means objective increased at iteration " +
                                        std::to_string(it));
      }
    }
    out.objective_history.push_back(obj);
    if (it + 1 == std::max<std::size_t>(1, iters)) break;

    // Update step.
    std::fill(cent.begin(), cent.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t p = 0; p < n; ++p) {
      ++counts[assign[p]];
      for (std::size_t i = 0; i < d; ++i) cent[assign[p] * d + i] += base[p * d + i];
    }
    for (std::uint32_t j = 0; j < m; ++j) {
      if (counts[j] == 0) continue;
      for (std::size_t i = 0; i < d; ++i) cent[j * d + i] /= double(counts[j]);
    }
    // Empty-cluster repair.
    for (std::uint32_t j = 0; j < m; ++j) {
      if (counts[j] != 0) continue;
      const auto largest = static_cast<std::uint32_t>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t p = 0; p < n; ++p) {
        if (assign[p] != largest) continue;
        const double dd = dist_to(base + p * d, cent, largest, d);
        if (dd > far_d) {
          far_d = dd;
          far = p;
        }
      }
      set_centroid(j, far);
      assign[far] = j;
      --counts[largest];
      counts[j] = 1;
    }
  }

  out.centroids.resize(cent.size());
  for (std::size_t i = 0; i < cent.size(); ++i) out.centroids[i] = float(cent[i]);
  out.assignment.resize(n);
  for (std::size_t p = 0; p < n; ++p) out.assignment[p] = out.nearest(ps.row(p));
  return out;
}

std::vector<std::uint32_t> kmeans_top_bins(const KMeansRouter& r, std::span<const float> q,
                                           std::size_t b) {
  require(q.size() == r.dim, "dimension mismatch: router expects " + std::to_string(r.dim));
  const std::uint32_t m = r.bins();
  if (b < 1 || b > m) {
    fail(ErrorKind::kInvalidArgument, "probe count " + std::to_string(b) +
                                          " outside [1, " + std::to_string(m) + "]");
  }
  std::vector<std::pair<double, std::uint32_t>> dist(m);
  for (std::uint32_t j = 0; j < m; ++j) {
    dist[j] = {distance_sq_unchecked(q.data(), r.centroids.data() + j * r.dim, r.dim), j};
  }
  std::partial_sort(dist.begin(), dist.begin() + std::ptrdiff_t(b), dist.end());
  std::vector<std::uint32_t> out(b);
  for (std::size_t i = 0; i < b; ++i) out[i] = dist[i].second;
  return out;
}

void write_kmeans(io::ByteWriter& w, const KMeansRouter& r) {
  w.u32(r.bins());
  w.u32(r.dim);
  w.f32s(r.centroids);
  w.u32(std::uint32_t(r.assignment.size()));
  w.u32s(r.assignment);
}

KMeansRouter read_kmeans(io::ByteReader& r) {
  KMeansRouter k;
  const std::uint32_t m = r.u32();
  k.dim = r.u32();
  if (m == 0 || k.dim == 0) r.format_error("k-means router needs m, d > 0");
  k.centroids = r.f32s(std::size_t(m) * k.dim);
  for (float f : k.centroids) {
    if (!std::isfinite(f)) r.format_error("non-finite centroid");
  }
  const std::uint32_t n = r.u32();
  k.assignment = r.u32s(n);
  for (auto a : k.assignment) {
    if (a >= m) r.format_error("k-means assignment out of range");
  }
  return k;
}

// -------------------------------------------------------- hyperplane trees

const char* split_rule_name(SplitRule rule) {
  switch (rule) {
    case SplitRule::kPca: return "pca-tree";
    case SplitRule::kRandomProjection: return "rp-tree";
    case SplitRule::kTwoMeans: return "2means-tree";
    case SplitRule::kRegression: return "reg-tree";
  }
  return "?";
}

std::size_t HyperplaneTree::leaf_count() const {
  return std::size_t(std::count_if(nodes.begin(), nodes.end(),
                                   [](const Node& n) { return n.is_leaf(); }));
}

namespace {

double project(std::span<const float> a, const float* x) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * x[i];
  return s;
}

std::vector<double> node_mean(const PointSet& ps, std::span<const std::uint32_t> ids) {
  const std::size_t d = ps.dim();
  std::vector<double> mu(d, 0.0);
  for (auto p : ids) {
    auto r = ps.row(p);
    for (std::size_t i = 0; i < d; ++i) mu[i] += r[i];
  }
  for (auto& v : mu) v /= double(ids.size());
  return mu;
}

// Top principal direction by power iteration on the node covariance.
std::vector<float> top_component(const PointSet& ps, std::span<const std::uint32_t> ids,
                                 Rng& rng) {
  const std::size_t d = ps.dim();
  const auto mu = node_mean(ps, ids);
  std::vector<double> v(d), next(d);
  for (auto& x : v) x = rng.normal();
  auto normalize = [](std::vector<double>& x) {
    double s = 0.0;
    for (double t : x) s += t * t;
    s = std::sqrt(s);
    if (s > 0) {
      for (auto& t : x) t /= s;
    }
    return s;
  };
  normalize(v);
  double eig = 0.0;
  std::vector<double> centered(d);
  for (int it = 0; it < 50; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (auto p : ids) {
      auto r = ps.row(p);
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        centered[i] = double(r[i]) - mu[i];
        dot += centered[i] * v[i];
      }
      for (std::size_t i = 0; i < d; ++i) next[i] += dot * centered[i];
    }
    for (auto& t : next) t /= double(ids.size());
    const double lambda = normalize(next);
    v.swap(next);
    if (lambda == 0.0) break;
    const bool converged = it > 0 && std::abs(lambda - eig) <= 1e-8 * lambda;
    eig = lambda;
    if (converged) break;
  }
  return {v.begin(), v.end()};
}

struct Split {
  std::vector<float> direction;
  double threshold = 0.0;
  bool ok = false;
};

// Threshold between the two sorted projection values closest to the median
// rank that differ; fails when every projection coincides.
Split median_split(const PointSet& ps, std::span<const std::uint32_t> ids,
                   std::vector<float> dir) {
  std::vector<double> proj(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) proj[i] = project(dir, ps.row(ids[i]).data());
  std::sort(proj.begin(), proj.end());
  const std::size_t half = ids.size() / 2;
  for (std::size_t off = 0; off < ids.size(); ++off) {
    for (std::size_t h : {half - std::min(off, half), half + off}) {
      if (h == 0 || h >= ids.size()) continue;
      if (proj[h - 1] < proj[h]) {
        double t = 0.5 * (proj[h - 1] + proj[h]);
        if (!(t < proj[h])) t = proj[h - 1];
        return {std::move(dir), t, true};
      }
    }
  }
  return {};
}

Split choose_split(const PointSet& ps, std::span<const std::uint32_t> ids, SplitRule rule,
                   Rng& rng, const RegressionSplitConfig& reg) {
  const std::size_t d = ps.dim();
  switch (rule) {
    case SplitRule::kPca: {
      auto dir = top_component(ps, ids, rng);
      return median_split(ps, ids, std::move(dir));
    }
    case SplitRule::kRandomProjection: {
      std::vector<double> a(d);
      double s = 0.0;
      for (auto& x : a) {
        x = rng.normal();
        s += x * x;
      }
      s = std::sqrt(s);
      std::vector<float> dir(d);
      for (std::size_t i = 0; i < d; ++i) dir[i] = float(a[i] / s);
      const auto mu = node_mean(ps, ids);
      double t = 0.0;
      for (std::size_t i = 0; i < d; ++i) t += double(dir[i]) * mu[i];
      return {std::move(dir), t, true};
    }
    case SplitRule::kTwoMeans: {
      const auto sub = ps.subset(ids);
      const auto km = kmeans_fit(sub, 2, rng.next(), kDefaultKMeansIters);
      std::vector<float> dir(d);
      double t = 0.0;
      bool nonzero = false;
      for (std::size_t i = 0; i < d; ++i) {
        const float c1 = km.centroids[i], c2 = km.centroids[d + i];
        dir[i] = c2 - c1;
        nonzero |= dir[i] != 0.0f;
        t += double(dir[i]) * 0.5 * (double(c1) + double(c2));
      }
      return {std::move(dir), t, nonzero};
    }
    case SplitRule::kRegression: {
      const auto sub = ps.subset(ids);
      const std::size_t k = std::min(reg.k, ids.size() - 1);
      const auto g = build_knn_graph(sub, k, 1);
      PartitionOptions opt;
      opt.m = 2;
      opt.eta = reg.eta;
      opt.seed = rng.next();
      opt.max_refine_iters = reg.max_refine_iters;
      const auto part = partition_graph(g.undirected(), opt);
      auto cfg = reg.training;
      cfg.seed = rng.next();
      const auto clf = train(sub, SoftLabelSet::one_hot(part),
                             ClassifierKind::kSoftmaxRegression, cfg);
      // Class 0 wins iff (w1 - w0).x <= c0 - c1.
      const auto& head = clf.network().head();
      std::vector<float> dir(d);
      for (std::size_t i = 0; i < d; ++i) {
        dir[i] = head.weight(Eigen::Index(i), 1) - head.weight(Eigen::Index(i), 0);
      }
      const double t = double(head.bias(0)) - double(head.bias(1));
      return {std::move(dir), t, true};
    }
  }
  return {};
}

}  // namespace

HyperplaneTree build_hyperplane_tree(const PointSet& ps, std::uint32_t depth, SplitRule rule,
                                     std::uint64_t seed, const RegressionSplitConfig& reg) {
  HyperplaneTree t;
  t.dim = std::uint32_t(ps.dim());
  t.max_depth = depth;
  t.rule = rule;
  Rng rng(seed);

  struct Work {
    std::size_t node;
    std::vector<std::uint32_t> ids;
  };
  std::vector<std::uint32_t> all(ps.size());
  std::iota(all.begin(), all.end(), 0u);
  t.nodes.emplace_back();
  std::vector<Work> stack;
  stack.push_back({0, std::move(all)});
  // Depth-first, left before right, so node numbering is deterministic.
  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    const std::uint32_t node_depth = t.nodes[w.node].depth;
    Split split;
    if (node_depth < depth && w.ids.size() > 1) {
      Rng node_rng = rng.fork();
      split = choose_split(ps, w.ids, rule, node_rng, reg);
    }
    if (!split.ok) {
      t.nodes[w.node].points = std::move(w.ids);
      continue;
    }
    std::vector<std::uint32_t> left, right;
    for (auto p : w.ids) {
      (project(split.direction, ps.row(p).data()) <= split.threshold ? left : right)
          .push_back(p);
    }
    const auto li = std::int32_t(t.nodes.size());
    const auto ri = li + 1;
    t.nodes.emplace_back();
    t.nodes.emplace_back();
    t.nodes[std::size_t(li)].depth = node_depth + 1;
    t.nodes[std::size_t(ri)].depth = node_depth + 1;
    auto& node = t.nodes[w.node];
    node.direction = std::move(split.direction);
    node.threshold = split.threshold;
    node.left = li;
    node.right = ri;
    stack.push_back({std::size_t(ri), std::move(right)});
    stack.push_back({std::size_t(li), std::move(left)});
  }
  return t;
}

std::size_t tree_descend(const HyperplaneTree& t, std::span<const float> q,
                         std::uint32_t levels) {
  require(q.size() == t.dim, "dimension mismatch: tree expects " + std::to_string(t.dim) +
                                 ", got " + std::to_string(q.size()));
  std::size_t id = 0;
  for (std::uint32_t l = 0; l < levels && !t.nodes[id].is_leaf(); ++l) {
    const auto& n = t.nodes[id];
    id = std::size_t(project(n.direction, q.data()) <= n.threshold ? n.left : n.right);
  }
  return id;
}

std::vector<std::uint32_t> tree_points(const HyperplaneTree& t, std::size_t id) {
  std::vector<std::uint32_t> out;
  std::vector<std::size_t> stack{id};
  while (!stack.empty()) {
    const auto& n = t.nodes[stack.back()];
    stack.pop_back();
    if (n.is_leaf()) {
      out.insert(out.end(), n.points.begin(), n.points.end());
    } else {
      stack.push_back(std::size_t(n.right));
      stack.push_back(std::size_t(n.left));
    }
  }
  return out;
}

const std::vector<std::uint32_t>& tree_route(const HyperplaneTree& t,
                                             std::span<const float> q) {
  return t.nodes[tree_descend(t, q, UINT32_MAX)].points;
}

void write_tree(io::ByteWriter& w, const HyperplaneTree& t) {
  w.u32(static_cast<std::uint32_t>(t.rule));
  w.u32(t.dim);
  w.u32(t.max_depth);
  w.u32(std::uint32_t(t.nodes.size()));
  for (const auto& n : t.nodes) {
    w.u32(n.is_leaf() ? 0 : 1);
    w.u32(n.depth);
    if (n.is_leaf()) {
      w.u32(std::uint32_t(n.points.size()));
      w.u32s(n.points);
    } else {
      w.u32(std::uint32_t(n.left));
      w.u32(std::uint32_t(n.right));
      w.f64(n.threshold);
      w.f32s(n.direction);
    }
  }
}

HyperplaneTree read_tree(io::ByteReader& r) {
  HyperplaneTree t;
  const std::uint32_t rule = r.u32();
  if (rule > 3) r.format_error("unknown split rule tag " + std::to_string(rule));
  t.rule = static_cast<SplitRule>(rule);
  t.dim = r.u32();
  t.max_depth = r.u32();
  const std::uint32_t count = r.u32();
  if (count == 0) r.format_error("tree without nodes");
  t.nodes.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto& n = t.nodes[i];
    const std::uint32_t internal = r.u32();
    n.depth = r.u32();
    if (internal == 0) {
      n.points = r.u32s(r.u32());
    } else {
      n.left = std::int32_t(r.u32());
      n.right = std::int32_t(r.u32());
      if (std::uint32_t(n.left) >= count || std::uint32_t(n.right) >= count ||
          std::uint32_t(n.left) <= i || std::uint32_t(n.right) <= i) {
        r.format_error("bad child index in tree node " + std::to_string(i));
      }
      n.threshold = r.f64();
      n.direction = r.f32s(t.dim);
    }
  }
  return t;
}

// ---------------------------------------------------------------------- LSH

std::uint32_t LshRouter::hash(std::span<const float> x) const {
  require(x.size() == dim, "dimension mismatch: LSH expects " + std::to_string(dim));
  std::uint32_t id = 0;
  for (std::uint32_t b = 0; b < bits; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      s += double(directions[b * dim + i]) * (double(x[i]) - mean[i]);
    }
    if (s > 0.0) id |= 1u << b;
  }
  return id;
}

std::vector<std::uint32_t> LshRouter::top_bins(std::span<const float> q, std::size_t b) const {
  require(q.size() == dim, "dimension mismatch: LSH expects " + std::to_string(dim));
  require(bits <= 16, "multi-probe ranking supports at most 16 bits");
  const std::uint32_t m = bins();
  if (b < 1 || b > m) {
    fail(ErrorKind::kInvalidArgument, "probe count " + std::to_string(b) +
                                          " outside [1, " + std::to_string(m) + "]");
  }
  std::vector<double> margin(bits);
  std::uint32_t home = 0;
  for (std::uint32_t k = 0; k < bits; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      s += double(directions[k * dim + i]) * (double(q[i]) - mean[i]);
    }
    margin[k] = std::abs(s);
    if (s > 0.0) home |= 1u << k;
  }
  std::vector<std::pair<double, std::uint32_t>> score(m);
  for (std::uint32_t id = 0; id < m; ++id) {
    double s = 0.0;
    const std::uint32_t diff = id ^ home;
    for (std::uint32_t k = 0; k < bits; ++k) {
      if (diff & (1u << k)) s += margin[k];
    }
    score[id] = {s, id};
  }
  std::partial_sort(score.begin(), score.begin() + std::ptrdiff_t(b), score.end());
  std::vector<std::uint32_t> out(b);
  for (std::size_t i = 0; i < b; ++i) out[i] = score[i].second;
  return out;
}

LshRouter fit_lsh(const PointSet& ps, std::uint32_t bits, std::uint64_t seed) {
  require(bits >= 1 && bits <= kMaxLshBits,
          "LSH bits must lie in [1, " + std::to_string(kMaxLshBits) + "]");
  const std::size_t n = ps.size(), d = ps.dim();
  LshRouter r;
  r.dim = std::uint32_t(d);
  r.bits = bits;
  Rng rng(seed);
  r.directions.resize(std::size_t(bits) * d);
  for (auto& x : r.directions) x = float(rng.normal());
  std::vector<std::uint32_t> all(n);
  std::iota(all.begin(), all.end(), 0u);
  const auto mu = node_mean(ps, all);
  r.mean.assign(mu.begin(), mu.end());
  r.partition.m = r.bins();
  r.partition.eta = Eta{std::uint64_t(r.bins()), 1};  // no balance guarantee
  r.partition.labels.resize(n);
  for (std::size_t p = 0; p < n; ++p) r.partition.labels[p] = r.hash(ps.row(p));
  return r;
}

Partition lsh_partition(const PointSet& ps, std::uint32_t bits, std::uint64_t seed) {
  return fit_lsh(ps, bits, seed).partition;
}

void write_lsh(io::ByteWriter& w, const LshRouter& r) {
  w.u32(r.bits);
  w.u32(r.dim);
  w.f32s(r.directions);
  w.f32s(r.mean);
  w.u32(std::uint32_t(r.partition.labels.size()));
  w.u32s(r.partition.labels);
}

LshRouter read_lsh(io::ByteReader& r) {
  LshRouter l;
  l.bits = r.u32();
  l.dim = r.u32();
  if (l.bits < 1 || l.bits > kMaxLshBits || l.dim == 0) r.format_error("bad LSH header");
  l.directions = r.f32s(std::size_t(l.bits) * l.dim);
  l.mean = r.f32s(l.dim);
  const std::uint32_t n = r.u32();
  l.partition.m = l.bins();
  l.partition.eta = Eta{std::uint64_t(l.bins()), 1};
  l.partition.labels = r.u32s(n);
  for (auto b : l.partition.labels) {
    if (b >= l.bins()) r.format_error("LSH label out of range");
  }
  return l;
}

}  // namespace lsp
