#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <numeric>
#include <string>
#include <unistd.h>
#include <vector>

#include "lsp/core.hpp"
#include "lsp/knn.hpp"
#include "lsp/random.hpp"

namespace testing_support {

inline lsp::PointSet make_points(std::size_t n, std::size_t d, std::vector<float> v) {
  return lsp::PointSet(n, d, std::move(v));
}

inline lsp::PointSet line(std::initializer_list<float> xs) {
  return lsp::PointSet(xs.size(), 1, std::vector<float>(xs));
}

inline lsp::PointSet gaussian(std::size_t n, std::size_t d, std::uint64_t seed,
                              double scale = 1.0) {
  lsp::Rng rng(seed);
  std::vector<float> v(n * d);
  for (auto& x : v) x = float(scale * rng.normal());
  return lsp::PointSet(n, d, std::move(v));
}

/// `clusters` isotropic blobs with means drawn in [-spread, spread]^d.
inline lsp::PointSet blobs(std::size_t n, std::size_t d, std::size_t clusters,
                           std::uint64_t seed, double spread = 10.0, double sigma = 1.0,
                           std::vector<std::uint32_t>* labels = nullptr) {
  lsp::Rng rng(seed);
  std::vector<double> means(clusters * d);
  for (auto& m : means) m = rng.uniform(-spread, spread);
  std::vector<float> v(n * d);
  if (labels) labels->assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = rng.below(clusters);
    if (labels) (*labels)[i] = std::uint32_t(c);
    for (std::size_t j = 0; j < d; ++j) v[i * d + j] = float(means[c * d + j] + sigma * rng.normal());
  }
  return lsp::PointSet(n, d, std::move(v));
}

/// Full distance-sorted order of every dataset point from `q`, by sorting.
inline std::vector<std::uint32_t> sorted_order(const lsp::PointSet& ps,
                                               std::span<const float> q) {
  std::vector<std::pair<double, std::uint32_t>> all;
  for (std::uint32_t i = 0; i < ps.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < ps.dim(); ++j) {
      const double diff = double(q[j]) - double(ps.row(i)[j]);
      s += diff * diff;
    }
    all.push_back({s, i});
  }
  std::sort(all.begin(), all.end());
  std::vector<std::uint32_t> out;
  for (auto& [d, i] : all) out.push_back(i);
  return out;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("lsp_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline lsp::ErrorKind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const lsp::Error& e) {
    return e.kind();
  }
  throw std::runtime_error("expected an lsp::Error");
}

}  // namespace testing_support
