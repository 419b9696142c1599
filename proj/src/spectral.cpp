#include "lsp/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lsp {

double SpectralContext::total_mass() const {
  double s = 0.0;
  for (const auto& e : pairs) s += 2.0 * e.a;
  return s;
}

double beta_exact(const PointSet& ps, const std::vector<double>& rho) {
  require(rho.size() == ps.size(), "rho length does not match the point set");
  const std::size_t n = ps.size(), d = ps.dim();
  double total = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    double row = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      if (q == p) continue;
      row += rho[q] * distance_sq_unchecked(ps.row(p).data(), ps.row(q).data(), d);
    }
    total += rho[p] * row;
  }
  return total;
}

double beta_fast(const PointSet& ps, const std::vector<double>& rho) {
  require(rho.size() == ps.size(), "rho length does not match the point set");
  const std::size_t n = ps.size(), d = ps.dim();
  const double mass = std::accumulate(rho.begin(), rho.end(), 0.0);
  std::vector<double> mu(d, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const auto x = ps.row(p);
    for (std::size_t i = 0; i < d; ++i) mu[i] += rho[p] * x[i];
  }
  for (auto& v : mu) v /= mass;
  // drift keeps the identity exact when rho does not sum to exactly 1
  double spread = 0.0;
  std::vector<double> drift(d, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const auto x = ps.row(p);
    for (std::size_t i = 0; i < d; ++i) {
      const double c = double(x[i]) - mu[i];
      spread += rho[p] * c * c;
      drift[i] += rho[p] * c;
    }
  }
  double drift_sq = 0.0;
  for (double v : drift) drift_sq += v * v;
  return 2.0 * mass * spread - 2.0 * drift_sq;
}

SpectralContext build_context(const PointSet& ps, const KnnGraph& g) {
  require(g.size() == ps.size(), "graph has " + std::to_string(g.size()) +
                                     " vertices but the point set has " +
                                     std::to_string(ps.size()));
  SpectralContext ctx;
  ctx.n = ps.size();
  ctx.k = g.k();
  const auto ug = g.undirected();
  const double norm = 2.0 * double(ctx.k) * double(ctx.n);
  ctx.rho.assign(ctx.n, 0.0);
  const std::size_t d = ps.dim();
  for (std::uint32_t u = 0; u < ctx.n; ++u) {
    const auto nb = ug.neighbors(u);
    const auto w = ug.weights(u);
    for (std::size_t j = 0; j < nb.size(); ++j) {
      const double a = double(w[j]) / norm;
      ctx.rho[u] += a;
      if (nb[j] <= u) continue;
      ctx.pairs.push_back({u, nb[j], a});
      ctx.alpha +=
          2.0 * a * distance_sq_unchecked(ps.row(u).data(), ps.row(nb[j]).data(), d);
    }
  }
  ctx.beta = ctx.n <= kExactBetaLimit ? beta_exact(ps, ctx.rho) : beta_fast(ps, ctx.rho);
  return ctx;
}

double coordinate_numerator(const PointSet& ps, const SpectralContext& ctx, std::size_t i) {
  double s = 0.0;
  for (const auto& e : ctx.pairs) {
    const double diff = double(ps.row(e.u)[i]) - double(ps.row(e.v)[i]);
    s += 2.0 * e.a * diff * diff;
  }
  return s;
}

double coordinate_denominator(const PointSet& ps, const SpectralContext& ctx, std::size_t i) {
  const std::size_t n = ps.size();
  double mass = 0.0, mean = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    mass += ctx.rho[p];
    mean += ctx.rho[p] * ps.row(p)[i];
  }
  mean /= mass;
  double spread = 0.0, drift = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double c = double(ps.row(p)[i]) - mean;
    spread += ctx.rho[p] * c * c;
    drift += ctx.rho[p] * c;
  }
  return 2.0 * mass * spread - 2.0 * drift * drift;
}

CoordinateChoice best_coordinate(const PointSet& ps, const SpectralContext& ctx) {
  require(ctx.n == ps.size(), "context does not match the point set");
  require(ctx.beta > 0.0, "degenerate dataset: beta = 0");
  CoordinateChoice best;
  bool found = false;
  for (std::size_t i = 0; i < ps.dim(); ++i) {
    float lo = ps.row(0)[i], hi = lo;
    for (std::size_t p = 1; p < ps.size(); ++p) {
      lo = std::min(lo, ps.row(p)[i]);
      hi = std::max(hi, ps.row(p)[i]);
    }
    if (lo == hi) continue;
    const double den = coordinate_denominator(ps, ctx, i);
    if (!(den > 0.0)) continue;
    const double q = coordinate_numerator(ps, ctx, i) / den;
    if (!found || q < best.quotient) {
      best = {i, q};
      found = true;
    }
  }
  if (!found) fail(ErrorKind::kInvalidArgument, "every coordinate is constant");
  const double ratio = ctx.alpha / ctx.beta;
  if (best.quotient > ratio * (1.0 + 1e-9) + kSpectralTolerance) {
    fail(ErrorKind::kInvariant, "best coordinate quotient " + std::to_string(best.quotient) +
                                    " exceeds alpha/beta " + std::to_string(ratio));
  }
  return best;
}

double cut_conductance(const SpectralContext& ctx, const std::vector<std::uint8_t>& in_part1) {
  require(in_part1.size() == ctx.n, "side vector length mismatch");
  double cut = 0.0, m1 = 0.0, m2 = 0.0;
  for (const auto& e : ctx.pairs) {
    if (in_part1[e.u] != in_part1[e.v]) cut += e.a;
  }
  for (std::size_t p = 0; p < ctx.n; ++p) (in_part1[p] ? m1 : m2) += ctx.rho[p];
  const double small = std::min(m1, m2);
  require(small > 0.0 || cut == 0.0, "cut side without degree mass");
  return small > 0.0 ? cut / small : 0.0;
}

SweepCutResult sweep_cut(const PointSet& ps, const SpectralContext& ctx, std::size_t axis) {
  require(ctx.n == ps.size(), "context does not match the point set");
  require(axis < ps.dim(), "axis " + std::to_string(axis) + " out of range");
  if (!(ctx.beta > 0.0)) fail(ErrorKind::kInvalidArgument, "degenerate dataset: beta = 0");
  const std::size_t n = ps.size();

  double mass = 0.0, weighted = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    mass += ctx.rho[p];
    weighted += ctx.rho[p] * ps.row(p)[axis];
  }
  const double c = weighted / mass;
  std::vector<double> y(n);
  for (std::size_t p = 0; p < n; ++p) y[p] = double(ps.row(p)[axis]) - c;

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return y[a] < y[b] || (y[a] == y[b] && a < b);
  });
  if (y[order.front()] == y[order.back()]) {
    fail(ErrorKind::kInvalidArgument, "all centered values are equal; no threshold exists");
  }

  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(n);
  for (const auto& e : ctx.pairs) {
    adj[e.u].push_back({e.v, e.a});
    adj[e.v].push_back({e.u, e.a});
  }

  std::vector<std::uint8_t> side(n, 0);
  double cut = 0.0, m1 = 0.0;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_pos = 0;
  for (std::size_t pos = 0; pos + 1 < n; ++pos) {
    const auto v = order[pos];
    side[v] = 1;
    m1 += ctx.rho[v];
    for (const auto& [u, a] : adj[v]) cut += side[u] ? -a : a;
    if (y[order[pos + 1]] == y[v]) continue;
    const double small = std::min(m1, mass - m1);
    const double lhs = small > 0.0 ? std::max(cut, 0.0) / small
                                   : std::numeric_limits<double>::infinity();
    if (lhs < best) {
      best = lhs;
      best_pos = pos;
    }
  }

  SweepCutResult res;
  res.coordinate = axis;
  res.offset = c;
  res.threshold = 0.5 * (y[order[best_pos]] + y[order[best_pos + 1]]);
  res.bound = std::sqrt(2.0 * ctx.alpha / ctx.beta);
  std::vector<std::uint8_t> in1(n, 0);
  for (std::size_t pos = 0; pos <= best_pos; ++pos) in1[order[pos]] = 1;
  for (std::uint32_t p = 0; p < n; ++p) (in1[p] ? res.part1 : res.part2).push_back(p);
  // recompute from scratch so the reported value carries no running-sum drift
  res.lhs = cut_conductance(ctx, in1);
  return res;
}

SweepCutResult verify_theorem(const PointSet& ps, const KnnGraph& g) {
  const auto ctx = build_context(ps, g);
  if (!(ctx.beta > 0.0)) fail(ErrorKind::kInvalidArgument, "degenerate dataset");
  const auto choice = best_coordinate(ps, ctx);
  auto res = sweep_cut(ps, ctx, choice.coordinate);
  if (!(res.lhs <= res.bound + kSpectralTolerance)) {
    fail(ErrorKind::kInvariant, "sweep cut " + std::to_string(res.lhs) +
                                    " exceeds the bound " + std::to_string(res.bound));
  }
  return res;
}

}  // namespace lsp
