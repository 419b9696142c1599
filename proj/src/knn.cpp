#include "lsp/knn.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <utility>

#include "lsp/binary_io.hpp"

namespace lsp {

namespace {

constexpr char kGraphMagic[] = "PHG1";
constexpr std::size_t kBlock = 64;

struct Candidate {
  double dist;
  std::uint32_t id;
  bool operator<(const Candidate& o) const {
    return dist < o.dist || (dist == o.dist && id < o.id);
  }
};

}  // namespace

std::int64_t WeightedGraph::total_vertex_weight() const noexcept {
  return std::accumulate(vertex_weights.begin(), vertex_weights.end(), std::int64_t{0});
}

std::int64_t WeightedGraph::total_edge_weight() const noexcept {
  return std::accumulate(edge_weights.begin(), edge_weights.end(), std::int64_t{0}) / 2;
}

WeightedGraph WeightedGraph::from_edges(std::size_t n, std::span<const Edge> edges,
                                        std::vector<std::int64_t> vertex_weights) {
  WeightedGraph g;
  g.vertex_weights = vertex_weights.empty() ? std::vector<std::int64_t>(n, 1)
                                            : std::move(vertex_weights);
  require(g.vertex_weights.size() == n, "vertex weight count mismatch");
  // Both directions, sorted by (source, target), then merged.
  std::vector<Edge> dir;
  dir.reserve(edges.size() * 2);
  for (const auto& e : edges) {
    require(e.u < n && e.v < n, "edge endpoint out of range");
    if (e.u == e.v) continue;
    dir.push_back({e.u, e.v, e.w});
    dir.push_back({e.v, e.u, e.w});
  }
  std::sort(dir.begin(), dir.end(), [](const Edge& a, const Edge& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  g.offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < dir.size();) {
    std::size_t j = i;
    std::int64_t w = 0;
    while (j < dir.size() && dir[j].u == dir[i].u && dir[j].v == dir[i].v) w += dir[j++].w;
    g.targets.push_back(dir[i].v);
    g.edge_weights.push_back(w);
    ++g.offsets[dir[i].u + 1];
    i = j;
  }
  for (std::size_t v = 0; v < n; ++v) g.offsets[v + 1] += g.offsets[v];
  return g;
}

KnnGraph::KnnGraph(std::size_t n, std::size_t k, std::vector<std::uint32_t> neighbors)
    : n_(n), k_(k), neighbors_(std::move(neighbors)) {
  require(k_ >= 1 && k_ < n_, "k-NN graph needs 1 <= k < n (k=" + std::to_string(k_) +
                                  ", n=" + std::to_string(n_) + ")");
  require(neighbors_.size() == n_ * k_, "neighbor table has wrong length");
  std::vector<std::uint32_t> seen(n_, UINT32_MAX);
  for (std::size_t p = 0; p < n_; ++p) {
    for (auto q : this->neighbors(p)) {
      require(q < n_, "neighbor index out of range at point " + std::to_string(p));
      require(q != p, "self loop at point " + std::to_string(p));
      require(seen[q] != p, "duplicate neighbor at point " + std::to_string(p));
      seen[q] = static_cast<std::uint32_t>(p);
    }
  }
}

KnnGraph KnnGraph::truncated(std::size_t k_new) const {
  require(k_new >= 1 && k_new <= k_, "cannot truncate graph to k=" +
                                         std::to_string(k_new));
  if (k_new == k_) return *this;
  std::vector<std::uint32_t> out;
  out.reserve(n_ * k_new);
  for (std::size_t p = 0; p < n_; ++p) {
    auto r = neighbors(p);
    out.insert(out.end(), r.begin(), r.begin() + k_new);
  }
  return KnnGraph(n_, k_new, std::move(out));
}

WeightedGraph KnnGraph::undirected() const {
  std::vector<WeightedGraph::Edge> edges;
  edges.reserve(n_ * k_);
  for (std::size_t p = 0; p < n_; ++p) {
    for (auto q : neighbors(p)) edges.push_back({static_cast<std::uint32_t>(p), q, 1});
  }
  return WeightedGraph::from_edges(n_, edges);
}

KnnGraph build_knn_graph(const PointSet& ps, std::size_t k, unsigned workers) {
  const std::size_t n = ps.size(), d = ps.dim();
  if (k < 1 || k >= n) {
    fail(ErrorKind::kInvalidArgument, "k must satisfy 1 <= k < n (k=" +
                                          std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  std::vector<std::uint32_t> out(n * k);
  const float* base = ps.data().data();
  const std::size_t blocks = (n + kBlock - 1) / kBlock;

  parallel_for(blocks, workers, [&](std::size_t b) {
    const std::size_t lo = b * kBlock, hi = std::min(n, lo + kBlock);
    // Max-heaps under the (distance, index) order; the top is the worst kept.
    std::vector<std::priority_queue<Candidate>> heaps(hi - lo);
    for (std::size_t jlo = 0; jlo < n; jlo += kBlock) {
      const std::size_t jhi = std::min(n, jlo + kBlock);
      for (std::size_t i = lo; i < hi; ++i) {
        auto& heap = heaps[i - lo];
        const float* a = base + i * d;
        for (std::size_t j = jlo; j < jhi; ++j) {
          if (j == i) continue;
          const Candidate c{distance_sq_unchecked(a, base + j * d, d),
                            static_cast<std::uint32_t>(j)};
          if (heap.size() < k) {
            heap.push(c);
          } else if (c < heap.top()) {
            heap.pop();
            heap.push(c);
          }
        }
      }
    }
    for (std::size_t i = lo; i < hi; ++i) {
      auto& heap = heaps[i - lo];
      for (std::size_t r = k; r-- > 0;) {
        out[i * k + r] = heap.top().id;
        heap.pop();
      }
    }
  });
  return KnnGraph(n, k, std::move(out));
}

GroundTruth brute_force_knn(const PointSet& ps, const PointSet& qs, std::size_t k,
                            bool exclude_self, unsigned workers) {
  const std::size_t n = ps.size();
  require(qs.dim() == ps.dim(), "query dimension " + std::to_string(qs.dim()) +
                                    " != dataset dimension " + std::to_string(ps.dim()));
  if (exclude_self) {
    require(qs.size() == n, "exclude_self requires the dataset as query set");
  }
  const std::size_t pool = exclude_self ? n - 1 : n;
  if (k < 1 || k > pool) {
    fail(ErrorKind::kInvalidArgument, "k must satisfy 1 <= k <= " + std::to_string(pool) +
                                          " (k=" + std::to_string(k) + ")");
  }
  GroundTruth gt;
  gt.k = k;
  gt.ids.resize(qs.size() * k);
  parallel_for(qs.size(), workers, [&](std::size_t q) {
    std::vector<Candidate> all;
    all.reserve(n);
    auto qr = qs.row(q);
    for (std::size_t j = 0; j < n; ++j) {
      if (exclude_self && j == q) continue;
      all.push_back({distance_sq_unchecked(qr.data(), ps.row(j).data(), ps.dim()),
                     static_cast<std::uint32_t>(j)});
    }
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
    for (std::size_t r = 0; r < k; ++r) gt.ids[q * k + r] = all[r].id;
  });
  return gt;
}

std::size_t degree(const KnnGraph& g, std::size_t p) {
  require(p < g.size(), "point index " + std::to_string(p) + " out of range");
  std::vector<std::uint32_t> adj(g.neighbors(p).begin(), g.neighbors(p).end());
  for (std::size_t q = 0; q < g.size(); ++q) {
    if (q == p) continue;
    for (auto r : g.neighbors(q)) {
      if (r == p) adj.push_back(static_cast<std::uint32_t>(q));
    }
  }
  std::sort(adj.begin(), adj.end());
  return static_cast<std::size_t>(std::unique(adj.begin(), adj.end()) - adj.begin());
}

std::vector<std::uint8_t> serialize_graph(const KnnGraph& g) {
  io::ByteWriter w;
  w.magic(kGraphMagic);
  w.u32(static_cast<std::uint32_t>(g.size()));
  w.u32(static_cast<std::uint32_t>(g.k()));
  w.u32s(g.all_neighbors());
  return w.release();
}

KnnGraph deserialize_graph(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "graph");
  r.expect_magic(kGraphMagic);
  const std::size_t n = r.u32(), k = r.u32();
  if (r.remaining() != n * k * 4) r.format_error("payload does not hold n*k indices");
  auto nb = r.u32s(n * k);
  try {
    return KnnGraph(n, k, std::move(nb));
  } catch (const Error& e) {
    r.format_error(e.what());
  }
}

void save_graph(const std::filesystem::path& path, const KnnGraph& g) {
  io::write_file_atomic(path, serialize_graph(g));
}

KnnGraph load_graph(const std::filesystem::path& path) {
  return deserialize_graph(io::read_file(path));
}

}  // namespace lsp
