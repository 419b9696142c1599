#include <gtest/gtest.h>

#include "lsp/spectral.hpp"
#include "support.hpp"

using namespace lsp;
using testing_support::line;

namespace {

// Dense matrices assembled straight from the directed edge lists.
struct Dense {
  std::size_t n = 0;
  std::vector<double> a;  // n x n
  std::vector<double> rho;
  double alpha = 0, beta = 0;

  double at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

Dense assemble(const PointSet& ps, const KnnGraph& g) {
  Dense m;
  m.n = ps.size();
  m.a.assign(m.n * m.n, 0.0);
  const double unit = 1.0 / (2.0 * double(g.k()) * double(m.n));
  for (std::size_t p = 0; p < m.n; ++p) {
    for (auto q : g.neighbors(p)) {
      m.a[p * m.n + q] += unit;
      m.a[q * m.n + p] += unit;
    }
  }
  m.rho.assign(m.n, 0.0);
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = 0; j < m.n; ++j) {
      m.rho[i] += m.at(i, j);
      const double d2 = distance_sq(ps.row(i), ps.row(j));
      m.alpha += m.at(i, j) * d2;
    }
  }
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t j = 0; j < m.n; ++j)
      m.beta += m.rho[i] * m.rho[j] * distance_sq(ps.row(i), ps.row(j));
  return m;
}

double dense_conductance(const Dense& m, const std::vector<std::uint8_t>& in1) {
  double cut = 0, m1 = 0, m2 = 0;
  for (std::size_t i = 0; i < m.n; ++i) {
    (in1[i] ? m1 : m2) += m.rho[i];
    if (!in1[i]) continue;
    for (std::size_t j = 0; j < m.n; ++j)
      if (!in1[j]) cut += m.at(i, j);
  }
  return cut / std::min(m1, m2);
}

// Minimum conductance over every threshold cut along `axis`.
double brute_sweep(const PointSet& ps, const Dense& m, std::size_t axis) {
  std::vector<float> vals;
  for (std::size_t p = 0; p < ps.size(); ++p) vals.push_back(ps.row(p)[axis]);
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  double best = 1e300;
  for (std::size_t t = 0; t + 1 < vals.size(); ++t) {
    std::vector<std::uint8_t> in1(ps.size());
    for (std::size_t p = 0; p < ps.size(); ++p) in1[p] = ps.row(p)[axis] <= vals[t];
    best = std::min(best, dense_conductance(m, in1));
  }
  return best;
}

PointSet mixture(Rng& rng, std::size_t n, std::size_t d, std::size_t clusters) {
  return testing_support::blobs(n, d, clusters, rng.next(), rng.uniform(0.5, 20.0),
                                rng.uniform(0.2, 2.0));
}

}  // namespace

TEST(Spectral, FourPointExample) {
  const auto ps = line({0, 0.1f, 10, 10.1f});
  const auto g = build_knn_graph(ps, 1);
  const auto ctx = build_context(ps, g);
  // float storage of 0.1 and 10.1 shifts the exact values slightly
  EXPECT_NEAR(ctx.alpha, 0.01, 1e-7);
  EXPECT_NEAR(ctx.beta, 50.005, 1e-5);
  const auto r = verify_theorem(ps, g);
  EXPECT_EQ(r.coordinate, 0u);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_NEAR(r.bound, std::sqrt(2 * 0.01 / 50.005), 1e-6);
  EXPECT_NEAR(r.bound, 0.0200, 1e-4);
  EXPECT_GT(r.hyperplane_offset(), 0.1);
  EXPECT_LT(r.hyperplane_offset(), 10.0);
  EXPECT_EQ(r.part1, (std::vector<std::uint32_t>{0, 1}));
  EXPECT_EQ(r.part2, (std::vector<std::uint32_t>{2, 3}));
}

TEST(Spectral, CoincidentPoints) {
  const PointSet ps(5, 2, std::vector<float>(10, 3.0f));
  const auto g = build_knn_graph(ps, 2);
  const auto ctx = build_context(ps, g);
  EXPECT_EQ(ctx.alpha, 0.0);
  EXPECT_EQ(ctx.beta, 0.0);
  try {
    verify_theorem(ps, g);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate dataset"), std::string::npos);
  }
  EXPECT_THROW(best_coordinate(ps, ctx), Error);
  EXPECT_THROW(sweep_cut(ps, ctx, 0), Error);
}

TEST(Spectral, ContextMatchesDenseAssembly) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 10 + rng.below(60), d = 1 + rng.below(5);
    const auto ps = mixture(rng, n, d, 1 + rng.below(4));
    const auto g = build_knn_graph(ps, 1 + rng.below(std::min<std::size_t>(n - 1, 10)));
    const auto ctx = build_context(ps, g);
    const auto m = assemble(ps, g);
    EXPECT_NEAR(ctx.total_mass(), 1.0, 1e-12);
    EXPECT_NEAR(std::accumulate(ctx.rho.begin(), ctx.rho.end(), 0.0), 1.0, 1e-12);
    for (std::size_t p = 0; p < n; ++p) EXPECT_NEAR(ctx.rho[p], m.rho[p], 1e-15);
    EXPECT_NEAR(ctx.alpha, m.alpha, 1e-9 * std::max(1.0, m.alpha));
    EXPECT_NEAR(ctx.beta, m.beta, 1e-9 * std::max(1.0, m.beta));
    for (const auto& e : ctx.pairs) {
      EXPECT_LT(e.u, e.v);
      EXPECT_EQ(e.a, m.at(e.u, e.v));
      EXPECT_EQ(m.at(e.u, e.v), m.at(e.v, e.u));
    }
    EXPECT_GE(ctx.alpha, 0.0);
    EXPECT_GT(ctx.beta, 0.0);
  }
}

TEST(Spectral, BestCoordinateExamples) {
  const auto one = line({0, 0.1f, 10, 10.1f});
  const auto g1 = build_knn_graph(one, 1);
  EXPECT_EQ(best_coordinate(one, build_context(one, g1)).coordinate, 0u);

  const PointSet flat(4, 2, {0, 0, 0.1f, 0, 10, 0, 10.1f, 0});
  const auto g2 = build_knn_graph(flat, 1);
  const auto c2 = best_coordinate(flat, build_context(flat, g2));
  EXPECT_EQ(c2.coordinate, 0u);

  const PointSet ys(4, 2, {0, 0, 0, 0.1f, 0, 10, 0, 10.1f});
  const auto g3 = build_knn_graph(ys, 1);
  EXPECT_EQ(best_coordinate(ys, build_context(ys, g3)).coordinate, 1u);
}

TEST(Spectral, BestCoordinateSeparatedAlongSecondAxis) {
  // 20 points: two tight groups at y = 0 and y = 8, x spread over [0, 4].
  std::vector<float> v;
  Rng rng(2024);
  for (int i = 0; i < 20; ++i) {
    v.push_back(float(rng.uniform(0.0, 4.0)));
    v.push_back(float((i < 10 ? 0.0 : 8.0) + rng.uniform(-0.3, 0.3)));
  }
  const PointSet ps(20, 2, v);
  const auto g = build_knn_graph(ps, 3);
  const auto ctx = build_context(ps, g);
  const auto m = assemble(ps, g);
  double q[2];
  for (std::size_t i = 0; i < 2; ++i) {
    double num = 0, den = 0;
    for (std::size_t p = 0; p < 20; ++p) {
      for (std::size_t r = 0; r < 20; ++r) {
        const double diff = double(ps.row(p)[i]) - ps.row(r)[i];
        num += m.at(p, r) * diff * diff;
        den += m.rho[p] * m.rho[r] * diff * diff;
      }
    }
    q[i] = num / den;
    EXPECT_NEAR(coordinate_numerator(ps, ctx, i), num, 1e-12);
    EXPECT_NEAR(coordinate_denominator(ps, ctx, i), den, 1e-9 * den);
  }
  EXPECT_LT(q[1], q[0]);
  const auto c = best_coordinate(ps, ctx);
  EXPECT_EQ(c.coordinate, 1u);
  EXPECT_NEAR(c.quotient, q[1], 1e-9 * q[1]);
  EXPECT_LE(c.quotient, ctx.alpha / ctx.beta);
  const auto r = verify_theorem(ps, g);
  EXPECT_EQ(r.part1.size(), 10u);
  EXPECT_EQ(r.lhs, 0.0);
}

TEST(Spectral, TwoGaussianClusters) {
  std::vector<float> v;
  Rng rng(77);
  for (int i = 0; i < 40; ++i) v.push_back(float((i < 20 ? 0.0 : 100.0) + rng.normal()));
  const PointSet ps(40, 1, v);
  const auto r = verify_theorem(ps, build_knn_graph(ps, 3));
  EXPECT_LE(r.lhs, r.bound + kSpectralTolerance);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.part1.size(), 20u);
}

TEST(Spectral, GridSweepMatchesBruteForce) {
  const auto ps = line({0, 1, 2, 3, 4, 5, 6, 7});
  const auto g = build_knn_graph(ps, 1);
  const auto ctx = build_context(ps, g);
  const auto r = sweep_cut(ps, ctx, 0);
  EXPECT_NEAR(r.lhs, brute_sweep(ps, assemble(ps, g), 0), 1e-15);
}

TEST(Spectral, SweepMatchesBruteForceOnRandomInstances) {
  Rng rng(8);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 5 + rng.below(80), d = 1 + rng.below(4);
    const auto ps = mixture(rng, n, d, 1 + rng.below(5));
    const auto g = build_knn_graph(ps, 1 + rng.below(std::min<std::size_t>(n - 1, 8)));
    const auto ctx = build_context(ps, g);
    const auto m = assemble(ps, g);
    for (std::size_t axis = 0; axis < d; ++axis) {
      const auto r = sweep_cut(ps, ctx, axis);
      EXPECT_NEAR(r.lhs, brute_sweep(ps, m, axis), 1e-12);
      std::vector<std::uint8_t> in1(n, 0);
      for (auto p : r.part1) in1[p] = 1;
      EXPECT_NEAR(r.lhs, dense_conductance(m, in1), 1e-12);
      EXPECT_EQ(r.part1.size() + r.part2.size(), n);
      EXPECT_FALSE(r.part1.empty());
      EXPECT_FALSE(r.part2.empty());
      // the returned hyperplane induces exactly the reported sides
      for (auto p : r.part1) EXPECT_LE(ps.row(p)[axis], r.hyperplane_offset());
      for (auto p : r.part2) EXPECT_GT(ps.row(p)[axis], r.hyperplane_offset());
    }
  }
}

TEST(Spectral, SingleGaussianBoundHolds) {
  const auto ps = testing_support::gaussian(300, 4, 3);
  const auto r = verify_theorem(ps, build_knn_graph(ps, 10));
  EXPECT_LE(r.lhs, r.bound + kSpectralTolerance);
  EXPECT_GT(r.bound, 0.0);
}

TEST(Spectral, CenteringIsOrthogonalToRho) {
  Rng rng(31);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 20 + rng.below(300), d = 1 + rng.below(6);
    const auto ps = mixture(rng, n, d, 1 + rng.below(5));
    const auto ctx = build_context(ps, build_knn_graph(ps, 1 + rng.below(10)));
    for (std::size_t axis = 0; axis < d; ++axis) {
      const auto r = sweep_cut(ps, ctx, axis);
      double dot = 0;
      for (std::size_t p = 0; p < n; ++p) dot += (double(ps.row(p)[axis]) - r.offset) * ctx.rho[p];
      EXPECT_NEAR(dot, 0.0, 1e-9);
    }
  }
}

TEST(Spectral, LaplacianQuadraticForm) {
  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 5 + rng.below(40), d = 1 + rng.below(3);
    const auto ps = mixture(rng, n, d, 1 + rng.below(3));
    const auto g = build_knn_graph(ps, 1 + rng.below(std::min<std::size_t>(n - 1, 6)));
    const auto ctx = build_context(ps, g);
    const auto m = assemble(ps, g);
    for (std::size_t axis = 0; axis < d; ++axis) {
      std::vector<double> x(n);
      for (std::size_t p = 0; p < n; ++p) x[p] = ps.row(p)[axis];
      // x^T (D - A) x and x^T (D - rho rho^T) x from dense matrices
      double lap = 0, lh = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double l = (i == j ? m.rho[i] : 0.0) - m.at(i, j);
          const double h = (i == j ? m.rho[i] : 0.0) - m.rho[i] * m.rho[j];
          lap += x[i] * l * x[j];
          lh += x[i] * h * x[j];
        }
      }
      double pairs = 0;
      for (const auto& e : ctx.pairs) {
        const double diff = x[e.u] - x[e.v];
        pairs += e.a * diff * diff;
      }
      double direct_den = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          direct_den += m.rho[i] * m.rho[j] * (x[i] - x[j]) * (x[i] - x[j]);
      const double scale = std::max(1.0, std::abs(lh));
      EXPECT_NEAR(pairs, lap, 1e-9 * std::max(1.0, std::abs(lap)));
      EXPECT_NEAR(coordinate_numerator(ps, ctx, axis), 2 * lap, 1e-9 * std::max(1.0, lap));
      EXPECT_NEAR(lh, direct_den / 2, 1e-9 * scale);
      EXPECT_NEAR(coordinate_denominator(ps, ctx, axis), direct_den, 2e-9 * scale);
    }
  }
}

TEST(Spectral, FastBetaMatchesExact) {
  Rng rng(99);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 20 + rng.below(600), d = 1 + rng.below(32);
    const auto ps = mixture(rng, n, d, 1 + rng.below(5));
    const auto ctx = build_context(ps, build_knn_graph(ps, 1 + rng.below(10)));
    const double exact = beta_exact(ps, ctx.rho), fast = beta_fast(ps, ctx.rho);
    EXPECT_LE(std::abs(fast - exact), 1e-6 * exact);
  }
}

TEST(Spectral, LargeInstanceUsesFastBeta) {
  const auto ps = testing_support::blobs(2500, 3, 3, 4);
  const auto ctx = build_context(ps, build_knn_graph(ps, 5));
  EXPECT_EQ(ctx.beta, beta_fast(ps, ctx.rho));
  EXPECT_LE(std::abs(ctx.beta - beta_exact(ps, ctx.rho)), 1e-6 * ctx.beta);
  const auto r = verify_theorem(ps, build_knn_graph(ps, 5));
  EXPECT_LE(r.lhs, r.bound + kSpectralTolerance);
}

TEST(Spectral, Errors) {
  const auto ps = line({0, 1, 2});
  const auto g = build_knn_graph(ps, 1);
  const auto ctx = build_context(ps, g);
  EXPECT_EQ(testing_support::error_kind([&] { sweep_cut(ps, ctx, 1); }),
            ErrorKind::kInvalidArgument);
  const auto other = line({0, 1});
  EXPECT_THROW(build_context(other, g), Error);
  EXPECT_THROW(cut_conductance(ctx, {1, 0}), Error);
}
