#pragma once

// Seeded Gaussian-mixture point clouds standing in for real descriptor data.

#include <cstdint>
#include <vector>

#include "lsp/core.hpp"

namespace lsp {

struct GmmModel {
  std::size_t dim = 0;
  std::vector<double> weights;  // sums to 1
  std::vector<double> means;    // components x dim
  std::vector<double> scales;   // per-component isotropic sigma
};

/// Component weights fall off as 1/sqrt(j+1); means are N(0, I); sigmas
/// are uniform in [0.25, 0.75] times `spread`.
GmmModel make_gmm(std::size_t dim, std::size_t components, std::uint64_t seed,
                  double spread = 1.0);

PointSet sample_gmm(const GmmModel& model, std::size_t count, std::uint64_t seed);

}  // namespace lsp
