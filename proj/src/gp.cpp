#include "lsp/gp.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>
#include <queue>
#include <unordered_map>

#include "lsp/binary_io.hpp"
#include "lsp/random.hpp"

namespace lsp {

namespace {

constexpr char kPartitionMagic[] = "PHP1";

std::uint64_t parse_u64(std::string_view s, const std::string& full) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    fail(ErrorKind::kInvalidArgument, "cannot parse eta '" + full + "'");
  }
  return v;
}

}  // namespace

Eta Eta::parse(const std::string& text) {
  Eta e;
  if (auto slash = text.find('/'); slash != std::string::npos) {
    e.num = parse_u64(std::string_view(text).substr(0, slash), text);
    e.den = parse_u64(std::string_view(text).substr(slash + 1), text);
  } else if (auto dot = text.find('.'); dot != std::string::npos) {
    const std::string_view whole = std::string_view(text).substr(0, dot);
    const std::string_view frac = std::string_view(text).substr(dot + 1);
    if (frac.size() > 18) fail(ErrorKind::kInvalidArgument, "eta has too many digits");
    e.den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) e.den *= 10;
    const std::uint64_t w = whole.empty() ? 0 : parse_u64(whole, text);
    const std::uint64_t f = frac.empty() ? 0 : parse_u64(frac, text);
    e.num = w * e.den + f;
  } else {
    e.num = parse_u64(text, text);
  }
  require(e.den > 0, "eta denominator must be positive");
  const std::uint64_t g = std::gcd(e.num, e.den);
  if (g > 1) {
    e.num /= g;
    e.den /= g;
  }
  return e;
}

std::string Eta::str() const {
  return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
}

std::uint64_t balance_cap(std::uint64_t n, std::uint64_t m, Eta eta) {
  require(m > 0 && eta.den > 0, "balance cap needs m > 0");
  using u128 = unsigned __int128;
  return static_cast<std::uint64_t>((u128(eta.den) + eta.num) * n / (u128(eta.den) * m));
}

std::vector<std::size_t> Partition::bin_sizes() const {
  std::vector<std::size_t> sizes(m, 0);
  for (auto l : labels) {
    if (l < m) ++sizes[l];
  }
  return sizes;
}

bool Partition::feasible() const {
  if (m == 0) return false;
  for (auto l : labels) {
    if (l >= m) return false;
  }
  const auto c = cap();
  for (auto s : bin_sizes()) {
    if (s > c) return false;
  }
  return true;
}

std::vector<std::vector<std::uint32_t>> Partition::bins() const {
  std::vector<std::vector<std::uint32_t>> out(m);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    out[labels[p]].push_back(static_cast<std::uint32_t>(p));
  }
  return out;
}

CutStats cut_stats(const KnnGraph& g, const Partition& part) {
  require(part.labels.size() == g.size(), "partition size does not match graph");
  CutStats s;
  s.total_edges_directed = g.size() * g.k();
  for (std::size_t p = 0; p < g.size(); ++p) {
    for (auto q : g.neighbors(p)) {
      if (part.labels[p] != part.labels[q]) ++s.cut_edges_directed;
    }
  }
  s.cut_weight = static_cast<std::int64_t>(s.cut_edges_directed);
  s.cut_fraction_directed =
      double(s.cut_edges_directed) / double(std::max<std::uint64_t>(1, s.total_edges_directed));
  s.bin_sizes = part.bin_sizes();
  return s;
}

std::int64_t cut_weight(const WeightedGraph& g, std::span<const std::uint32_t> labels) {
  require(labels.size() == g.size(), "label count does not match graph");
  std::int64_t cut = 0;
  for (std::size_t v = 0; v < g.size(); ++v) {
    auto nb = g.neighbors(v);
    auto w = g.weights(v);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      if (nb[i] > v && labels[v] != labels[nb[i]]) cut += w[i];
    }
  }
  return cut;
}

Coarsening coarsen(const WeightedGraph& g, std::int64_t max_vertex_weight) {
  require(g.size() >= 2, "coarsening needs at least two vertices");
  const std::size_t n = g.size();
  constexpr std::uint32_t kUnmatched = UINT32_MAX;
  std::vector<std::uint32_t> mate(n, kUnmatched);
  for (std::size_t v = 0; v < n; ++v) {
    if (mate[v] != kUnmatched) continue;
    auto nb = g.neighbors(v);
    auto w = g.weights(v);
    std::uint32_t best = kUnmatched;
    std::int64_t best_w = 0;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      const auto u = nb[i];
      if (mate[u] != kUnmatched || u == v) continue;
      if (g.vertex_weights[v] + g.vertex_weights[u] > max_vertex_weight) continue;
      if (w[i] > best_w || (w[i] == best_w && u < best)) {
        best = u;
        best_w = w[i];
      }
    }
    if (best != kUnmatched) {
      mate[v] = best;
      mate[best] = static_cast<std::uint32_t>(v);
    }
  }

  Coarsening c;
  c.fine_to_coarse.assign(n, kUnmatched);
  std::vector<std::int64_t> cw;
  for (std::size_t v = 0; v < n; ++v) {
    if (c.fine_to_coarse[v] != kUnmatched) continue;
    const auto id = static_cast<std::uint32_t>(cw.size());
    c.fine_to_coarse[v] = id;
    std::int64_t weight = g.vertex_weights[v];
    if (mate[v] != kUnmatched) {
      c.fine_to_coarse[mate[v]] = id;
      weight += g.vertex_weights[mate[v]];
    }
    cw.push_back(weight);
  }
  std::vector<WeightedGraph::Edge> edges;
  edges.reserve(g.targets.size() / 2);
  for (std::size_t v = 0; v < n; ++v) {
    auto nb = g.neighbors(v);
    auto w = g.weights(v);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      if (nb[i] <= v) continue;
      const auto a = c.fine_to_coarse[v], b = c.fine_to_coarse[nb[i]];
      if (a != b) edges.push_back({a, b, w[i]});
    }
  }
  const std::size_t coarse_n = cw.size();
  c.graph = WeightedGraph::from_edges(coarse_n, edges, std::move(cw));
  return c;
}

namespace {

// Mutable refinement state over one graph level. The cap bounds the weight a
// move may bring into its target bin; source bins may start over the cap
// (coarse levels), in which case moves only ever reduce the excess.
class Refiner {
 public:
  Refiner(const WeightedGraph& g, std::vector<std::uint32_t> labels, std::uint32_t m,
          std::int64_t cap)
      : g_(g), labels_(std::move(labels)), m_(m), cap_(cap), bin_w_(m, 0), conn_(m, 0) {
    for (std::size_t v = 0; v < g_.size(); ++v) bin_w_[labels_[v]] += g_.vertex_weights[v];
  }

  const std::vector<std::uint32_t>& labels() const { return labels_; }
  std::vector<std::uint32_t> take_labels() { return std::move(labels_); }
  const std::vector<std::int64_t>& bin_weights() const { return bin_w_; }

  bool fits(std::uint32_t bin, std::int64_t w) const { return bin_w_[bin] + w <= cap_; }

  // Connection weights of v to every adjacent bin, left in conn_/touched_.
  void gather(std::size_t v) {
    for (auto b : touched_) conn_[b] = 0;
    touched_.clear();
    auto nb = g_.neighbors(v);
    auto w = g_.weights(v);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      const auto b = labels_[nb[i]];
      if (conn_[b] == 0) touched_.push_back(b);
      conn_[b] += w[i];
    }
  }

  struct Move {
    std::int64_t gain;
    std::uint32_t v;
    std::uint32_t to;
  };

  // Best feasible move of v; gain relative to staying. Ties by lowest bin.
  bool best_move(std::size_t v, Move& out) {
    gather(v);
    const auto from = labels_[v];
    const std::int64_t own = conn_[from];
    const std::int64_t vw = g_.vertex_weights[v];
    bool found = false;
    for (auto b : touched_) {
      if (b == from || !fits(b, vw)) continue;
      const std::int64_t gain = conn_[b] - own;
      if (!found || gain > out.gain || (gain == out.gain && b < out.to)) {
        out = {gain, static_cast<std::uint32_t>(v), b};
        found = true;
      }
    }
    return found;
  }

  std::int64_t edge_weight(std::uint32_t u, std::uint32_t v) const {
    auto nb = g_.neighbors(u);
    auto w = g_.weights(u);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      if (nb[i] == v) return w[i];
    }
    return 0;
  }

  void apply(std::uint32_t v, std::uint32_t to) {
    const auto from = labels_[v];
    bin_w_[from] -= g_.vertex_weights[v];
    bin_w_[to] += g_.vertex_weights[v];
    labels_[v] = to;
  }

  void check_move_feasible(std::uint32_t to) const {
    if (bin_w_[to] > cap_) {
      fail(ErrorKind::kInvariant, "refinement produced an over-capacity bin");
    }
  }

  // Greedy positive-gain search; returns the number of accepted steps.
  std::size_t run(std::size_t max_iters, RefineStats* stats) {
    std::size_t iters = 0;
    auto worse = [](const Move& a, const Move& b) {
      return a.gain < b.gain || (a.gain == b.gain && a.v > b.v);
    };
    while (iters < max_iters) {
      std::priority_queue<Move, std::vector<Move>, decltype(worse)> heap(worse);
      Move mv{};
      for (std::size_t v = 0; v < g_.size(); ++v) {
        if (best_move(v, mv) && mv.gain > 0) heap.push(mv);
      }
      std::size_t round_moves = 0;
      while (!heap.empty() && iters < max_iters) {
        const Move top = heap.top();
        heap.pop();
        Move cur{};
        if (!best_move(top.v, cur) || cur.gain <= 0) continue;
        if (cur.gain != top.gain || cur.to != top.to) {
          heap.push(cur);
          continue;
        }
        apply(cur.v, cur.to);
        check_move_feasible(cur.to);
        ++iters;
        ++round_moves;
        if (stats) ++stats->moves;
        for (auto u : g_.neighbors(cur.v)) {
          if (best_move(u, mv) && mv.gain > 0) heap.push(mv);
        }
      }
      if (iters >= max_iters) break;
      if (try_swap()) {
        ++iters;
        if (stats) ++stats->swaps;
        continue;
      }
      if (round_moves == 0) break;
    }
    return iters;
  }

  // Best positive-gain exchange of two vertices between a pair of bins.
  bool try_swap() {
    constexpr std::size_t kPerDirection = 8;
    // (from, to) -> best candidates by unconstrained single-move gain.
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<Move>> lists;
    for (std::size_t v = 0; v < g_.size(); ++v) {
      gather(v);
      const auto from = labels_[v];
      if (touched_.size() == 1 && touched_[0] == from) continue;
      for (auto b : touched_) {
        if (b == from) continue;
        auto& list = lists[{from, b}];
        list.push_back({conn_[b] - conn_[from], static_cast<std::uint32_t>(v), b});
        std::sort(list.begin(), list.end(), [](const Move& a, const Move& c) {
          return a.gain > c.gain || (a.gain == c.gain && a.v < c.v);
        });
        if (list.size() > kPerDirection) list.pop_back();
      }
    }
    bool found = false;
    std::int64_t best_gain = 0;
    std::uint32_t best_u = 0, best_v = 0;
    for (const auto& [key, forward] : lists) {
      if (key.first > key.second) continue;
      auto it = lists.find({key.second, key.first});
      if (it == lists.end()) continue;
      for (const auto& a : forward) {
        for (const auto& b : it->second) {
          const std::int64_t gain = a.gain + b.gain - 2 * edge_weight(a.v, b.v);
          if (gain <= 0) continue;
          const auto wa = g_.vertex_weights[a.v], wb = g_.vertex_weights[b.v];
          if (bin_w_[key.first] - wa + wb > std::max(cap_, bin_w_[key.first])) continue;
          if (bin_w_[key.second] - wb + wa > std::max(cap_, bin_w_[key.second])) continue;
          const auto lo = std::min(a.v, b.v);
          if (!found || gain > best_gain ||
              (gain == best_gain && lo < std::min(best_u, best_v))) {
            found = true;
            best_gain = gain;
            best_u = a.v;
            best_v = b.v;
          }
        }
      }
    }
    if (!found) return false;
    const auto lu = labels_[best_u], lv = labels_[best_v];
    apply(best_u, lv);
    apply(best_v, lu);
    return true;
  }

  // Moves vertices out of over-capacity bins, best gain first. Returns true
  // when every bin ends within the cap.
  bool rebalance() {
    for (;;) {
      bool over = false, progress = false;
      for (std::uint32_t a = 0; a < m_; ++a) {
        if (bin_w_[a] <= cap_) continue;
        over = true;
        std::vector<Move> cands;
        for (std::size_t v = 0; v < g_.size(); ++v) {
          if (labels_[v] != a) continue;
          gather(v);
          const std::int64_t own = conn_[a];
          const std::int64_t vw = g_.vertex_weights[v];
          bool have = false;
          Move best{};
          for (std::uint32_t b = 0; b < m_; ++b) {
            if (b == a || !fits(b, vw)) continue;
            const std::int64_t gain = conn_[b] - own;
            if (!have || gain > best.gain) {
              best = {gain, static_cast<std::uint32_t>(v), b};
              have = true;
            }
          }
          if (have) cands.push_back(best);
        }
        std::sort(cands.begin(), cands.end(), [](const Move& x, const Move& y) {
          return x.gain > y.gain || (x.gain == y.gain && x.v < y.v);
        });
        for (const auto& c : cands) {
          if (bin_w_[a] <= cap_) break;
          Move cur{};
          // Re-evaluate against the current bin weights.
          gather(c.v);
          const std::int64_t own = conn_[a];
          const std::int64_t vw = g_.vertex_weights[c.v];
          bool have = false;
          for (std::uint32_t b = 0; b < m_; ++b) {
            if (b == a || !fits(b, vw)) continue;
            const std::int64_t gain = conn_[b] - own;
            if (!have || gain > cur.gain) {
              cur = {gain, c.v, b};
              have = true;
            }
          }
          if (!have) continue;
          apply(c.v, cur.to);
          progress = true;
        }
      }
      if (!over) return true;
      if (!progress) return false;
    }
  }

 private:
  const WeightedGraph& g_;
  std::vector<std::uint32_t> labels_;
  std::uint32_t m_;
  std::int64_t cap_;
  std::vector<std::int64_t> bin_w_;
  std::vector<std::int64_t> conn_;
  std::vector<std::uint32_t> touched_;
};

// Greedy balanced graph growing from m random seed vertices.
std::vector<std::uint32_t> grow_initial(const WeightedGraph& g, std::uint32_t m,
                                        std::int64_t cap, Rng& rng) {
  const std::size_t n = g.size();
  constexpr std::uint32_t kFree = UINT32_MAX;
  std::vector<std::uint32_t> labels(n, kFree);
  std::vector<std::int64_t> bin_w(m, 0);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  rng.shuffle(std::span<std::uint32_t>(order));

  using Entry = std::pair<std::int64_t, std::int64_t>;  // (conn, -vertex)
  std::vector<std::priority_queue<Entry>> frontier(m);
  std::vector<std::unordered_map<std::uint32_t, std::int64_t>> conn(m);
  std::size_t assigned = 0;

  auto assign = [&](std::uint32_t v, std::uint32_t b) {
    labels[v] = b;
    bin_w[b] += g.vertex_weights[v];
    ++assigned;
    auto nb = g.neighbors(v);
    auto w = g.weights(v);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      if (labels[nb[i]] != kFree) continue;
      auto& c = conn[b][nb[i]];
      c += w[i];
      frontier[b].push({c, -std::int64_t(nb[i])});
    }
  };

  std::size_t cursor = 0;
  for (std::uint32_t b = 0; b < m && cursor < n; ++b) assign(order[cursor++], b);

  std::vector<bool> closed(m, false);
  while (assigned < n) {
    // Lightest open bin grows next; ties by lowest id.
    std::uint32_t b = m;
    for (std::uint32_t c = 0; c < m; ++c) {
      if (!closed[c] && (b == m || bin_w[c] < bin_w[b])) b = c;
    }
    if (b == m) break;
    std::uint32_t pick = kFree;
    auto& fr = frontier[b];
    std::vector<Entry> skipped;
    while (!fr.empty()) {
      auto [c, negv] = fr.top();
      fr.pop();
      const auto v = static_cast<std::uint32_t>(-negv);
      if (labels[v] != kFree || conn[b][v] != c) continue;
      if (bin_w[b] + g.vertex_weights[v] > cap) {
        skipped.push_back({c, negv});
        continue;
      }
      pick = v;
      break;
    }
    for (auto& e : skipped) fr.push(e);
    if (pick == kFree) {
      for (std::size_t i = cursor; i < n; ++i) {
        const auto v = order[i];
        if (labels[v] == kFree && bin_w[b] + g.vertex_weights[v] <= cap) {
          pick = v;
          break;
        }
      }
      while (cursor < n && labels[order[cursor]] != kFree) ++cursor;
    }
    if (pick == kFree) {
      closed[b] = true;
      continue;
    }
    assign(pick, b);
  }
  // Vertices that fit nowhere go to the lightest bin; rebalancing follows.
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = order[i];
    if (labels[v] != kFree) continue;
    const auto b = static_cast<std::uint32_t>(
        std::min_element(bin_w.begin(), bin_w.end()) - bin_w.begin());
    labels[v] = b;
    bin_w[b] += g.vertex_weights[v];
  }
  return labels;
}

std::vector<std::uint32_t> refine_level(const WeightedGraph& g,
                                        std::vector<std::uint32_t> labels, std::uint32_t m,
                                        std::int64_t cap, std::size_t max_iters) {
  Refiner r(g, std::move(labels), m, cap);
  r.rebalance();
  r.run(max_iters, nullptr);
  return r.take_labels();
}

bool within_cap(const WeightedGraph& g, std::span<const std::uint32_t> labels,
                std::uint32_t m, std::int64_t cap) {
  std::vector<std::int64_t> w(m, 0);
  for (std::size_t v = 0; v < g.size(); ++v) w[labels[v]] += g.vertex_weights[v];
  return std::all_of(w.begin(), w.end(), [&](std::int64_t x) { return x <= cap; });
}

}  // namespace

Partition refine_fm(const WeightedGraph& g, const Partition& part, std::int64_t cap,
                    std::size_t max_iters, RefineStats* stats) {
  require(part.labels.size() == g.size(), "partition size does not match graph");
  for (auto l : part.labels) require(l < part.m, "label out of range");
  if (!within_cap(g, part.labels, part.m, cap)) {
    fail(ErrorKind::kInvalidArgument, "refine_fm: input partition violates the cap " +
                                          std::to_string(cap));
  }
  Refiner r(g, part.labels, part.m, cap);
  if (stats) stats->initial_cut = cut_weight(g, part.labels);
  r.run(max_iters, stats);
  Partition out{r.take_labels(), part.m, part.eta};
  if (stats) stats->final_cut = cut_weight(g, out.labels);
  return out;
}

Partition partition_graph(const WeightedGraph& g0, const PartitionOptions& opt) {
  const std::size_t n = g0.size();
  const std::uint32_t m = opt.m;
  require(m >= 1, "number of bins must be positive");
  if (m > n) {
    fail(ErrorKind::kInvalidArgument, "cannot split " + std::to_string(n) +
                                          " points into " + std::to_string(m) + " bins");
  }
  const std::int64_t total = g0.total_vertex_weight();
  const auto cap = static_cast<std::int64_t>(balance_cap(total, m, opt.eta));
  if (cap * std::int64_t(m) < total) {
    fail(ErrorKind::kInvalidArgument,
         "infeasible balance: cap " + std::to_string(cap) + " x " + std::to_string(m) +
             " bins < " + std::to_string(total) + " points (raise eta)");
  }
  Partition out{std::vector<std::uint32_t>(n, 0), m, opt.eta};
  if (m == 1) return out;

  Rng rng(opt.seed);

  // Reference: random balanced assignment, refined on the finest graph.
  std::vector<std::uint32_t> random_labels(n);
  {
    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    Rng r = rng.fork();
    r.shuffle(std::span<std::uint32_t>(perm));
    for (std::size_t i = 0; i < n; ++i) random_labels[perm[i]] = std::uint32_t(i % m);
  }
  const bool unit_weights = std::all_of(g0.vertex_weights.begin(), g0.vertex_weights.end(),
                                        [](std::int64_t w) { return w == 1; });

  // Coarsening hierarchy.
  const std::size_t target = std::max<std::size_t>(4 * m, 64);
  const std::int64_t max_vw = std::max<std::int64_t>(1, cap / 2);
  std::vector<WeightedGraph> graphs;
  std::vector<std::vector<std::uint32_t>> maps;
  const WeightedGraph* cur = &g0;
  while (cur->size() > target) {
    auto c = coarsen(*cur, max_vw);
    if (c.graph.size() * 20 > cur->size() * 19) break;  // < 5% shrink: stalled
    maps.push_back(std::move(c.fine_to_coarse));
    graphs.push_back(std::move(c.graph));
    cur = &graphs.back();
  }

  // Initial partitions on the coarsest level; keep the lowest cut.
  std::vector<std::uint32_t> best;
  std::int64_t best_cut = 0;
  bool best_ok = false;
  for (std::size_t a = 0; a < std::max<std::size_t>(1, opt.initial_attempts); ++a) {
    Rng r = rng.fork();
    auto labels = refine_level(*cur, grow_initial(*cur, m, cap, r), m, cap,
                               opt.max_refine_iters);
    const bool ok = within_cap(*cur, labels, m, cap);
    const auto c = cut_weight(*cur, labels);
    if (best.empty() || (ok && !best_ok) || (ok == best_ok && c < best_cut)) {
      best = std::move(labels);
      best_cut = c;
      best_ok = ok;
    }
  }

  // Uncoarsen with refinement at each level.
  for (std::size_t level = graphs.size(); level-- > 0;) {
    const WeightedGraph& fine = level == 0 ? g0 : graphs[level - 1];
    std::vector<std::uint32_t> proj(fine.size());
    for (std::size_t v = 0; v < fine.size(); ++v) proj[v] = best[maps[level][v]];
    best = refine_level(fine, std::move(proj), m, cap, opt.max_refine_iters);
  }
  if (!within_cap(g0, best, m, cap)) {
    if (!unit_weights) {
      fail(ErrorKind::kRuntime, "could not reach a feasible partition for weighted graph");
    }
    best = random_labels;  // always feasible with unit weights
  }

  Partition init{random_labels, m, opt.eta};
  auto reference = refine_fm(g0, init, cap, opt.max_refine_iters);
  const auto cut_ml = cut_weight(g0, best);
  const auto cut_ref = cut_weight(g0, reference.labels);
  out.labels = cut_ml <= cut_ref ? std::move(best) : std::move(reference.labels);

  if (cut_weight(g0, out.labels) > cut_weight(g0, random_labels)) {
    fail(ErrorKind::kInvariant, "partition cut exceeds its random initialization");
  }
  if (!within_cap(g0, out.labels, m, cap)) {
    fail(ErrorKind::kInvariant, "partition violates the balance cap");
  }
  return out;
}

Partition partition_graph(const KnnGraph& g, std::uint32_t m, Eta eta, std::uint64_t seed,
                          std::size_t max_refine_iters) {
  PartitionOptions opt;
  opt.m = m;
  opt.eta = eta;
  opt.seed = seed;
  opt.max_refine_iters = max_refine_iters;
  return partition_graph(g.undirected(), opt);
}

std::vector<std::uint8_t> serialize_partition(const Partition& p) {
  io::ByteWriter w;
  w.magic(kPartitionMagic);
  w.u32(static_cast<std::uint32_t>(p.labels.size()));
  w.u32(p.m);
  w.u32s(p.labels);
  return w.release();
}

Partition deserialize_partition(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "partition");
  r.expect_magic(kPartitionMagic);
  const std::size_t n = r.u32();
  const std::uint32_t m = r.u32();
  if (n == 0 || m == 0) r.format_error("n and m must be positive");
  if (r.remaining() != n * 4) r.format_error("payload does not hold n labels");
  Partition p{r.u32s(n), m, {}};
  for (auto l : p.labels) {
    if (l >= m) r.format_error("label " + std::to_string(l) + " out of range");
  }
  const auto sizes = p.bin_sizes();
  const std::uint64_t largest = *std::max_element(sizes.begin(), sizes.end());
  const std::uint64_t excess = largest * m > n ? largest * m - n : 0;
  p.eta = Eta{excess, n};
  if (const auto g = std::gcd(p.eta.num, p.eta.den); g > 1) {
    p.eta.num /= g;
    p.eta.den /= g;
  }
  return p;
}

void save_partition(const std::filesystem::path& path, const Partition& p) {
  io::write_file_atomic(path, serialize_partition(p));
}

Partition load_partition(const std::filesystem::path& path) {
  return deserialize_partition(io::read_file(path));
}

}  // namespace lsp
