#include "lsp/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <mutex>
#include <thread>

#include "lsp/binary_io.hpp"

namespace lsp {

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

const char* metric_name(Metric m) {
  return m == Metric::kCosine ? "cosine" : "euclidean";
}

PointSet::PointSet(std::size_t n, std::size_t d, std::vector<float> data, Metric metric)
    : n_(n), d_(d), data_(std::move(data)), metric_(metric) {
  require(n >= 1 && d >= 1, "point set needs n >= 1 and d >= 1");
  require(data_.size() == n * d, "point data length " + std::to_string(data_.size()) +
                                     " != n*d = " + std::to_string(n * d));
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      fail(ErrorKind::kInvalidArgument,
           "non-finite coordinate at row " + std::to_string(i / d) + ", column " +
               std::to_string(i % d));
    }
  }
  if (metric_ == Metric::kCosine) {
    for (std::size_t i = 0; i < n_; ++i) {
      auto r = row(i);
      double s = 0.0;
      for (float x : r) s += double(x) * x;
      if (std::abs(std::sqrt(s) - 1.0) > 1e-4) {
        fail(ErrorKind::kInvalidArgument,
             "cosine point set requires unit rows; row " + std::to_string(i) +
                 " has norm " + std::to_string(std::sqrt(s)));
      }
    }
  }
}

PointSet PointSet::subset(std::span<const std::uint32_t> ids) const {
  std::vector<float> out;
  out.reserve(ids.size() * d_);
  for (auto id : ids) {
    require(id < n_, "subset index out of range");
    auto r = row(id);
    out.insert(out.end(), r.begin(), r.end());
  }
  return PointSet(ids.size(), d_, std::move(out), metric_);
}

GroundTruth GroundTruth::truncated(std::size_t k_new) const {
  require(k_new >= 1 && k_new <= k, "cannot truncate ground truth to k=" +
                                        std::to_string(k_new) + " from k=" +
                                        std::to_string(k));
  GroundTruth out;
  out.k = k_new;
  out.ids.reserve(queries() * k_new);
  for (std::size_t q = 0; q < queries(); ++q) {
    auto r = row(q);
    out.ids.insert(out.ids.end(), r.begin(), r.begin() + k_new);
  }
  return out;
}

double distance_sq_unchecked(const float* a, const float* b, std::size_t d) noexcept {
  // Four fixed lanes keep the summation order stable and vectorizable.
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= d; i += 4) {
    const double t0 = double(a[i]) - b[i];
    const double t1 = double(a[i + 1]) - b[i + 1];
    const double t2 = double(a[i + 2]) - b[i + 2];
    const double t3 = double(a[i + 3]) - b[i + 3];
    s0 += t0 * t0;
    s1 += t1 * t1;
    s2 += t2 * t2;
    s3 += t3 * t3;
  }
  for (; i < d; ++i) {
    const double t = double(a[i]) - b[i];
    s0 += t * t;
  }
  return (s0 + s1) + (s2 + s3);
}

double distance_sq(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size(), "dimension mismatch: " + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()));
  return distance_sq_unchecked(a.data(), b.data(), a.size());
}

PointSet normalize_rows(const PointSet& ps) {
  const std::size_t n = ps.size(), d = ps.dim();
  std::vector<float> out(ps.data().begin(), ps.data().end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += double(out[i * d + j]) * out[i * d + j];
    if (s == 0.0) {
      fail(ErrorKind::kInvalidArgument, "zero norm at row " + std::to_string(i));
    }
    const double inv = 1.0 / std::sqrt(s);
    for (std::size_t j = 0; j < d; ++j) {
      out[i * d + j] = static_cast<float>(out[i * d + j] * inv);
    }
  }
  return PointSet(n, d, std::move(out), Metric::kCosine);
}

PointFormat parse_point_format(const std::string& name) {
  if (name == "fvecs") return PointFormat::kFvecs;
  if (name == "raw" || name == "raw_f32") return PointFormat::kRawF32;
  fail(ErrorKind::kInvalidArgument, "unknown point format '" + name + "'");
}

namespace {

constexpr char kRawMagic[] = "PHV1";

void check_finite(const std::vector<float>& data, std::size_t d,
                  const std::filesystem::path& path) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      fail(ErrorKind::kFormat, path.string() + ": non-finite value in record " +
                                   std::to_string(i / d));
    }
  }
}

// Shared fvecs/ivecs record walker: each record is i32 d, then d 4-byte values.
template <typename T>
std::vector<T> read_vecs(const std::filesystem::path& path, std::size_t& n,
                         std::size_t& d) {
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes, path.string());
  std::vector<T> out;
  n = 0;
  d = 0;
  while (!r.at_end()) {
    if (r.remaining() < 4) r.format_error("truncated record header");
    const std::int32_t rd = r.i32();
    if (rd <= 0) r.format_error("record " + std::to_string(n) + " declares d=" +
                                std::to_string(rd));
    if (n == 0) {
      d = static_cast<std::size_t>(rd);
    } else if (static_cast<std::size_t>(rd) != d) {
      r.format_error("inconsistent dimension: record " + std::to_string(n) +
                     " declares d=" + std::to_string(rd) + " after d=" + std::to_string(d));
    }
    if (r.remaining() < d * 4) {
      r.format_error("truncated record " + std::to_string(n));
    }
    auto payload = r.bytes(d * 4);
    const std::size_t off = out.size();
    out.resize(off + d);
    std::memcpy(out.data() + off, payload.data(), d * 4);
    ++n;
  }
  if (n == 0) r.format_error("empty file");
  return out;
}

}  // namespace

PointSet load_points(const std::filesystem::path& path, PointFormat format) {
  if (format == PointFormat::kFvecs) {
    std::size_t n = 0, d = 0;
    auto data = read_vecs<float>(path, n, d);
    check_finite(data, d, path);
    return PointSet(n, d, std::move(data));
  }
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes, path.string());
  r.expect_magic(kRawMagic);
  const std::size_t n = r.u32(), d = r.u32();
  const std::uint32_t metric = r.u32();
  if (n == 0 || d == 0) r.format_error("header declares n=0 or d=0");
  if (metric > 1) r.format_error("unknown metric tag " + std::to_string(metric));
  if (r.remaining() != n * d * 4) {
    r.format_error(r.remaining() < n * d * 4 ? "truncated payload" : "trailing bytes");
  }
  auto data = r.f32s(n * d);
  check_finite(data, d, path);
  try {
    return PointSet(n, d, std::move(data), static_cast<Metric>(metric));
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
}

void save_points(const std::filesystem::path& path, const PointSet& ps,
                 PointFormat format) {
  io::ByteWriter w;
  if (format == PointFormat::kFvecs) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      w.i32(static_cast<std::int32_t>(ps.dim()));
      w.f32s(ps.row(i));
    }
  } else {
    w.magic(kRawMagic);
    w.u32(static_cast<std::uint32_t>(ps.size()));
    w.u32(static_cast<std::uint32_t>(ps.dim()));
    w.u32(static_cast<std::uint32_t>(ps.metric()));
    w.f32s(ps.data());
  }
  io::write_file_atomic(path, w.buffer());
}

GroundTruth load_ivecs(const std::filesystem::path& path) {
  std::size_t n = 0, d = 0;
  auto raw = read_vecs<std::int32_t>(path, n, d);
  GroundTruth gt;
  gt.k = d;
  gt.ids.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] < 0) {
      fail(ErrorKind::kFormat, path.string() + ": negative index in record " +
                                   std::to_string(i / d));
    }
    gt.ids.push_back(static_cast<std::uint32_t>(raw[i]));
  }
  return gt;
}

void save_ivecs(const std::filesystem::path& path, const GroundTruth& gt) {
  io::ByteWriter w;
  for (std::size_t q = 0; q < gt.queries(); ++q) {
    w.i32(static_cast<std::int32_t>(gt.k));
    for (auto id : gt.row(q)) w.i32(static_cast<std::int32_t>(id));
  }
  io::write_file_atomic(path, w.buffer());
}

unsigned default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t n, unsigned workers,
                  const std::function<void(std::size_t)>& body) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  std::vector<std::thread> pool;
  pool.reserve(count - 1);
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace lsp
