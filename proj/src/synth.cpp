#include "lsp/synth.hpp"

#include <algorithm>
#include <cmath>

#include "lsp/random.hpp"

namespace lsp {

GmmModel make_gmm(std::size_t dim, std::size_t components, std::uint64_t seed,
                  double spread) {
  require(dim >= 1 && components >= 1, "mixture needs d >= 1 and at least one component");
  require(spread > 0.0, "spread must be positive");
  Rng rng(seed);
  GmmModel g;
  g.dim = dim;
  double total = 0.0;
  for (std::size_t j = 0; j < components; ++j) {
    g.weights.push_back(1.0 / std::sqrt(double(j + 1)));
    total += g.weights.back();
  }
  for (auto& w : g.weights) w /= total;
  g.means.resize(components * dim);
  for (auto& m : g.means) m = rng.normal();
  for (std::size_t j = 0; j < components; ++j) g.scales.push_back(spread * rng.uniform(0.25, 0.75));
  return g;
}

PointSet sample_gmm(const GmmModel& model, std::size_t count, std::uint64_t seed) {
  require(count >= 1, "sample count must be positive");
  Rng rng(seed);
  std::vector<double> cdf(model.weights.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < cdf.size(); ++j) cdf[j] = acc += model.weights[j];
  std::vector<float> data(count * model.dim);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = rng.uniform() * acc;
    const auto j = std::min<std::size_t>(
        std::size_t(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()), cdf.size() - 1);
    for (std::size_t c = 0; c < model.dim; ++c) {
      data[i * model.dim + c] =
          float(model.means[j * model.dim + c] + model.scales[j] * rng.normal());
    }
  }
  return PointSet(count, model.dim, std::move(data));
}

}  // namespace lsp
