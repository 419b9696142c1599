#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "lsp/binary_io.hpp"
#include "lsp/core.hpp"
#include "support.hpp"

using namespace lsp;
using testing_support::TempDir;
using testing_support::error_kind;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()),
                                           std::streamsize(b.size()));
}

void put_i32(std::vector<std::uint8_t>& b, std::int32_t v) {
  std::uint8_t t[4];
  std::memcpy(t, &v, 4);
  b.insert(b.end(), t, t + 4);
}
void put_f32(std::vector<std::uint8_t>& b, float v) {
  std::uint8_t t[4];
  std::memcpy(t, &v, 4);
  b.insert(b.end(), t, t + 4);
}

}  // namespace

TEST(Distance, Examples) {
  const std::vector<float> z{0, 0}, t{3, 4}, a{1, 2, 3}, b{4, 6, 3};
  EXPECT_EQ(distance_sq(z, z), 0.0);
  EXPECT_EQ(distance_sq(z, t), 25.0);
  EXPECT_EQ(distance_sq(a, b), 25.0);
}

TEST(Distance, DimensionMismatchThrows) {
  const std::vector<float> a{1, 2}, b{1, 2, 3};
  EXPECT_EQ(error_kind([&] { distance_sq(a, b); }), ErrorKind::kInvalidArgument);
}

TEST(Distance, SymmetricAndZeroOnlyForIdentical) {
  Rng rng(7);
  for (int t = 0; t < 500; ++t) {
    const std::size_t d = 1 + rng.below(20);
    std::vector<float> a(d), b(d);
    for (auto& x : a) x = float(rng.normal());
    for (auto& x : b) x = float(rng.normal());
    if (t % 5 == 0) b = a;
    const double ab = distance_sq(a, b), ba = distance_sq(b, a);
    EXPECT_EQ(ab, ba);
    EXPECT_GE(ab, 0.0);
    EXPECT_EQ(ab == 0.0, a == b);
  }
}

TEST(PointSet, RejectsNonFinite) {
  EXPECT_THROW(PointSet(1, 2, {1.0f, std::nanf("")}), Error);
  EXPECT_THROW(PointSet(1, 1, {INFINITY}), Error);
  EXPECT_THROW(PointSet(0, 1, {}), Error);
  EXPECT_THROW(PointSet(1, 0, {}), Error);
}

TEST(PointSet, CosineNeedsUnitRows) {
  EXPECT_THROW(PointSet(1, 2, {3, 4}, Metric::kCosine), Error);
  EXPECT_NO_THROW(PointSet(1, 2, {0.6f, 0.8f}, Metric::kCosine));
}

TEST(LoadPoints, FvecsTwoRecords) {
  TempDir dir;
  std::vector<std::uint8_t> b;
  put_i32(b, 2);
  put_f32(b, 1);
  put_f32(b, 2);
  put_i32(b, 2);
  put_f32(b, 3);
  put_f32(b, 4);
  write_bytes(dir / "a.fvecs", b);
  const auto ps = load_points(dir / "a.fvecs", PointFormat::kFvecs);
  EXPECT_EQ(ps.size(), 2u);
  EXPECT_EQ(ps.dim(), 2u);
  EXPECT_EQ(ps.row(1)[0], 3.0f);
  EXPECT_EQ(ps.row(1)[1], 4.0f);
}

TEST(LoadPoints, FvecsInconsistentDimension) {
  TempDir dir;
  std::vector<std::uint8_t> b;
  put_i32(b, 2);
  put_f32(b, 1);
  put_f32(b, 2);
  put_i32(b, 3);
  for (int i = 0; i < 3; ++i) put_f32(b, 1);
  write_bytes(dir / "a.fvecs", b);
  try {
    load_points(dir / "a.fvecs", PointFormat::kFvecs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    EXPECT_NE(std::string(e.what()).find("inconsistent dimension"), std::string::npos);
  }
}

TEST(LoadPoints, FvecsTruncatedAndNonFiniteAreDistinct) {
  TempDir dir;
  std::vector<std::uint8_t> b;
  put_i32(b, 2);
  put_f32(b, 1);
  write_bytes(dir / "t.fvecs", b);
  std::vector<std::uint8_t> c;
  put_i32(c, 1);
  put_f32(c, std::nanf(""));
  write_bytes(dir / "n.fvecs", c);
  std::string trunc, nonfinite;
  try {
    load_points(dir / "t.fvecs", PointFormat::kFvecs);
  } catch (const Error& e) {
    trunc = e.what();
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
  }
  try {
    load_points(dir / "n.fvecs", PointFormat::kFvecs);
  } catch (const Error& e) {
    nonfinite = e.what();
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
  }
  EXPECT_NE(trunc.find("truncated"), std::string::npos);
  EXPECT_NE(nonfinite.find("non-finite"), std::string::npos);
}

TEST(LoadPoints, MissingFile) {
  EXPECT_EQ(error_kind([] { load_points("/nonexistent/x.fvecs", PointFormat::kFvecs); }),
            ErrorKind::kMissingInput);
}

TEST(LoadPoints, RawHeader) {
  TempDir dir;
  std::vector<std::uint8_t> b{'P', 'H', 'V', '1'};
  for (std::uint32_t v : {3u, 4u, 0u}) {
    std::uint8_t t[4];
    std::memcpy(t, &v, 4);
    b.insert(b.end(), t, t + 4);
  }
  for (int i = 0; i < 12; ++i) put_f32(b, float(i));
  write_bytes(dir / "a.phv", b);
  const auto ps = load_points(dir / "a.phv", PointFormat::kRawF32);
  EXPECT_EQ(ps.size(), 3u);
  EXPECT_EQ(ps.dim(), 4u);
  EXPECT_EQ(ps.row(2)[3], 11.0f);
  b.resize(b.size() - 4);
  write_bytes(dir / "b.phv", b);
  EXPECT_EQ(error_kind([&] { load_points(dir / "b.phv", PointFormat::kRawF32); }),
            ErrorKind::kFormat);
}

TEST(LoadPoints, RoundTripBitExact) {
  TempDir dir;
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 1 + rng.below(50), d = 1 + rng.below(9);
    std::vector<float> v(n * d);
    for (auto& x : v) x = float(rng.normal() * 1e3);
    v[0] = -0.0f;
    v.back() = std::numeric_limits<float>::denorm_min();
    const PointSet ps(n, d, v);
    for (auto fmt : {PointFormat::kFvecs, PointFormat::kRawF32}) {
      save_points(dir / "p", ps, fmt);
      const auto back = load_points(dir / "p", fmt);
      ASSERT_EQ(back.size(), n);
      ASSERT_EQ(back.dim(), d);
      EXPECT_EQ(std::memcmp(back.data().data(), ps.data().data(), n * d * 4), 0);
    }
  }
  const auto unit = normalize_rows(testing_support::gaussian(5, 3, 1));
  save_points(dir / "c", unit, PointFormat::kRawF32);
  EXPECT_EQ(load_points(dir / "c", PointFormat::kRawF32).metric(), Metric::kCosine);
}

TEST(Normalize, Examples) {
  const auto a = normalize_rows(PointSet(1, 2, {3, 4}));
  EXPECT_FLOAT_EQ(a.row(0)[0], 0.6f);
  EXPECT_FLOAT_EQ(a.row(0)[1], 0.8f);
  EXPECT_EQ(a.metric(), Metric::kCosine);
  const auto b = normalize_rows(PointSet(1, 3, {1, 0, 0}));
  EXPECT_EQ(b.row(0)[0], 1.0f);
  try {
    normalize_rows(PointSet(2, 2, {1, 1, 0, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(Normalize, UnitNormWithinTolerance) {
  const auto ps = normalize_rows(testing_support::gaussian(300, 17, 5, 100.0));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    double s = 0;
    for (float x : ps.row(i)) s += double(x) * x;
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-6);
  }
}

TEST(Ivecs, RoundTrip) {
  TempDir dir;
  GroundTruth gt{3, {0, 1, 2, 5, 4, 3}};
  save_ivecs(dir / "g.ivecs", gt);
  const auto back = load_ivecs(dir / "g.ivecs");
  EXPECT_EQ(back.k, 3u);
  EXPECT_EQ(back.ids, gt.ids);
  EXPECT_EQ(back.truncated(2).ids, (std::vector<std::uint32_t>{0, 1, 5, 4}));
}

TEST(BinaryIo, AtomicWriteLeavesNoTemp) {
  TempDir dir;
  io::write_file_atomic(dir / "x.bin", std::vector<std::uint8_t>{1, 2, 3});
  std::size_t files = 0;
  for (auto& e : std::filesystem::directory_iterator(dir.path())) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 1u);
  EXPECT_EQ(io::read_file(dir / "x.bin"), (std::vector<std::uint8_t>{1, 2, 3}));
}

TEST(BinaryIo, ReaderOverrunIsFormatError) {
  const std::vector<std::uint8_t> b{1, 2};
  io::ByteReader r(b, "test");
  EXPECT_EQ(error_kind([&] { r.u32(); }), ErrorKind::kFormat);
}

TEST(ParallelFor, CoversRangeAndPropagates) {
  std::vector<int> hit(1000, 0);
  parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i]++; });
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(Rng, DeterministicStreams) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  Rng c(1);
  for (int i = 0; i < 1000; ++i) {
    const auto v = c.below(7);
    EXPECT_LT(v, 7u);
    const double u = c.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}
