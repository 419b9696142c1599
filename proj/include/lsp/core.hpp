#pragma once

// Shared domain types: point sets, ground truth, distances and dataset I/O.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsp {

/// Error categories; the CLI maps them to exit codes.
enum class ErrorKind {
  kInvalidArgument,  // bad parameter or precondition
  kMissingInput,     // file not found / unreadable
  kFormat,           // file content violates its declared format
  kInvariant,        // internal consistency check failed
  kRuntime,          // numerical failure (e.g. divergence)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::kInvalidArgument, what);
}

enum class Metric : std::uint32_t { kEuclidean = 0, kCosine = 1 };

const char* metric_name(Metric m);

/// Dense row-major n x d matrix of finite 32-bit coordinates.
class PointSet {
 public:
  PointSet() = default;
  PointSet(std::size_t n, std::size_t d, std::vector<float> data,
           Metric metric = Metric::kEuclidean);

  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }
  Metric metric() const noexcept { return metric_; }
  bool empty() const noexcept { return n_ == 0; }

  std::span<const float> row(std::size_t i) const noexcept {
    return {data_.data() + i * d_, d_};
  }
  std::span<const float> data() const noexcept { return data_; }

  /// Rows `ids` copied into a new set with the same metric.
  PointSet subset(std::span<const std::uint32_t> ids) const;

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<float> data_;
  Metric metric_ = Metric::kEuclidean;
};

/// Query points targeting a PointSet of the same dimension.
class QuerySet : public PointSet {
 public:
  using PointSet::PointSet;
  QuerySet() = default;
  explicit QuerySet(PointSet ps) : PointSet(std::move(ps)) {}
};

/// Reference answers: per query, k dataset indices ordered nearest first.
struct GroundTruth {
  std::size_t k = 0;
  std::vector<std::uint32_t> ids;  // queries() * k entries

  std::size_t queries() const noexcept { return k == 0 ? 0 : ids.size() / k; }
  std::span<const std::uint32_t> row(std::size_t q) const noexcept {
    return {ids.data() + q * k, k};
  }
  /// Keeps only the first `k_new` entries of each list.
  GroundTruth truncated(std::size_t k_new) const;
};

/// Squared Euclidean distance accumulated in double precision.
double distance_sq(std::span<const float> a, std::span<const float> b);

/// Unchecked variant for hot loops; caller guarantees equal lengths.
double distance_sq_unchecked(const float* a, const float* b, std::size_t d) noexcept;

PointSet normalize_rows(const PointSet& ps);

enum class PointFormat { kFvecs, kRawF32 };

PointFormat parse_point_format(const std::string& name);

PointSet load_points(const std::filesystem::path& path, PointFormat format);
void save_points(const std::filesystem::path& path, const PointSet& ps,
                 PointFormat format);

GroundTruth load_ivecs(const std::filesystem::path& path);
void save_ivecs(const std::filesystem::path& path, const GroundTruth& gt);

/// Runs body(i) for i in [0, n) across at most `workers` threads.
void parallel_for(std::size_t n, unsigned workers,
                  const std::function<void(std::size_t)>& body);

unsigned default_workers();

}  // namespace lsp
