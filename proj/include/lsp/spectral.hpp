#pragma once

// Constructive check of the sparse-cut guarantee: normalized k-NN multigraph,
// best coordinate, centering, and a full threshold sweep.

#include <cstdint>
#include <vector>

#include "lsp/core.hpp"
#include "lsp/knn.hpp"

namespace lsp {

struct SpectralContext {
  struct PairWeight {
    std::uint32_t u, v;  // u < v
    double a;            // A entry in each direction, w(u,v) / (2kn)
  };

  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<PairWeight> pairs;
  std::vector<double> rho;  // row sums of A
  double alpha = 0.0;       // E over close pairs of |p - p'|^2
  double beta = 0.0;        // E over independent rho-pairs of |p1 - p2|^2

  /// Sum of all A entries (both directions of every pair).
  double total_mass() const;
};

inline constexpr std::size_t kExactBetaLimit = 2000;
inline constexpr double kSpectralTolerance = 1e-9;

/// O(n^2 d) double sum over all ordered pairs.
double beta_exact(const PointSet& ps, const std::vector<double>& rho);
/// 2 sum rho |p - mu|^2 - 2 |sum rho (p - mu)|^2 with mu the rho-weighted mean.
double beta_fast(const PointSet& ps, const std::vector<double>& rho);

SpectralContext build_context(const PointSet& ps, const KnnGraph& g);

struct CoordinateChoice {
  std::size_t coordinate = 0;
  double quotient = 0.0;
};

/// Per-coordinate numerator sum A (x_p - x_p')^2 over ordered pairs.
double coordinate_numerator(const PointSet& ps, const SpectralContext& ctx, std::size_t i);
/// Per-coordinate denominator sum rho rho (x_p - x_p')^2 over ordered pairs.
double coordinate_denominator(const PointSet& ps, const SpectralContext& ctx, std::size_t i);

CoordinateChoice best_coordinate(const PointSet& ps, const SpectralContext& ctx);

struct SweepCutResult {
  std::size_t coordinate = 0;
  double threshold = 0.0;  // in centered coordinates
  double offset = 0.0;     // centering scalar c
  double lhs = 0.0;
  double bound = 0.0;
  std::vector<std::uint32_t> part1;  // centered value <= threshold
  std::vector<std::uint32_t> part2;

  /// b of the axis-aligned hyperplane x_i = b.
  double hyperplane_offset() const noexcept { return threshold + offset; }
};

/// Conductance of the cut (part1, rest): one-sided A mass over the smaller rho mass.
double cut_conductance(const SpectralContext& ctx, const std::vector<std::uint8_t>& in_part1);

SweepCutResult sweep_cut(const PointSet& ps, const SpectralContext& ctx, std::size_t axis);

SweepCutResult verify_theorem(const PointSet& ps, const KnnGraph& g);

}  // namespace lsp
