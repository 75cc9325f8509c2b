#include <gtest/gtest.h>

#include <cstring>

#include "gepc/gtf.hpp"
#include "gepc/kvfile.hpp"
#include "gepc/rng.hpp"
#include "gepc/tensor.hpp"
#include "test_util.hpp"

namespace gepc {
namespace {

using testing::field_of;
using testing::TempDir;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kIo;
}

TEST(Tensor, SqNorm) {
  EXPECT_EQ(sq_norm(Field(Shape{1, 2, 2})), 0.0);
  EXPECT_EQ(sq_norm(field_of({1, 1, 2}, {3, 4})), 25.0);
  EXPECT_EQ(sq_norm(Field::constant({2, 2, 2}, 1.0)), 8.0);
}

TEST(Tensor, Dot) {
  const Field ones = Field::constant({1, 1, 3}, 1.0);
  EXPECT_EQ(dot(ones, ones), 3.0);
  EXPECT_EQ(dot(field_of({1, 1, 2}, {1, 0}), field_of({1, 1, 2}, {0, 1})), 0.0);
  EXPECT_EQ(dot(field_of({1, 1, 2}, {1, 2}), field_of({1, 1, 2}, {3, -1})), 1.0);
}

TEST(Tensor, ShapeChecks) {
  EXPECT_EQ(code_of([] { Field f(Shape{0, 2, 2}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { Field f(Shape{1, 2, 2}, Field::Storage::Zero(3)); }),
            ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([] { dot(Field(Shape{1, 1, 2}), Field(Shape{1, 2, 1})); }),
            ErrorCode::kShapeMismatch);
}

TEST(Tensor, ChannelMeanEnergy) {
  Field f(Shape{2, 1, 2});
  f(0, 0, 0) = 1;
  f(1, 0, 0) = 3;
  f(0, 0, 1) = 2;
  const SpatialMap m = channel_mean_energy(f);
  EXPECT_DOUBLE_EQ(m(0, 0), 5.0);
  EXPECT_DOUBLE_EQ(m(0, 1), 2.0);
}

TEST(Gtf, RoundtripIsByteExact) {
  TempDir dir;
  const Field f = testing::random_field({3, 8, 8}, 11).cast<float>().cast<double>();
  write_gtf(f, dir / "a.gtf");
  const Field g = read_gtf(dir / "a.gtf");
  write_gtf(g, dir / "b.gtf");
  EXPECT_EQ(testing::slurp(dir / "a.gtf"), testing::slurp(dir / "b.gtf"));
  EXPECT_EQ(g.shape(), f.shape());
  EXPECT_TRUE((g.array() == f.array()).all());
  EXPECT_EQ(testing::slurp(dir / "a.gtf").size(), 4u + 16u + 4u * 192u);
}

TEST(Gtf, BadMagic) {
  TempDir dir;
  testing::spit(dir / "x.gtf", "XXXX and then some more bytes");
  EXPECT_EQ(code_of([&] { read_gtf(dir / "x.gtf"); }), ErrorCode::kBadMagic);
}

TEST(Gtf, TruncatedPayload) {
  TempDir dir;
  std::string bytes = "GTF1";
  auto put = [&](std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    bytes.append(b, 4);
  };
  put(3);
  put(2);
  put(2);
  put(2);
  bytes.append(7 * 4, '\0');
  testing::spit(dir / "t.gtf", bytes);
  EXPECT_EQ(code_of([&] { read_gtf(dir / "t.gtf"); }), ErrorCode::kTruncatedPayload);
}

TEST(Gtf, MissingFile) {
  EXPECT_EQ(code_of([] { read_gtf("/nonexistent/dir/none.gtf"); }), ErrorCode::kIo);
}

TEST(KvFile, SectionsCommentsAndTypes) {
  const auto kv = KvFile::parse(
      "# comment\n"
      "a = 1\n"
      "[s]\n"
      "b = 2.5   # trailing\n"
      "c = x, y\n"
      "flag = true\n");
  EXPECT_EQ(kv.get_int("a", 0), 1);
  EXPECT_DOUBLE_EQ(kv.get_double("b", 0), 2.5);
  EXPECT_EQ(kv.require("c"), "x, y");
  EXPECT_TRUE(kv.get_bool("flag", false));
  EXPECT_EQ(kv.get_int("missing", 9), 9);
  EXPECT_EQ(kv.entries()[1].section, "s");
}

TEST(KvFile, Errors) {
  EXPECT_EQ(code_of([] { KvFile::parse("a = 1\na = 2\n").get("a"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { KvFile::parse("no equals sign\n"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { KvFile::parse("a = x\n").get_int("a", 0); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { KvFile::parse("").require("a"); }), ErrorCode::kConfig);
}

TEST(KvFile, DoubleFormatRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) {
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_EQ(parse_int_list("5, 15,136"), (std::vector<int>{5, 15, 136}));
}

TEST(CounterRng, StreamsAreReproducibleAndDistinct) {
  CounterRng a(1, 2, 3), b(1, 2, 3), c(1, 2, 4), d(1, 3, 3);
  const auto x = a.next_u64();
  EXPECT_EQ(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
  EXPECT_NE(x, d.next_u64());
}

TEST(CounterRng, NormalMoments) {
  CounterRng rng(42, 0);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(CounterRng, UniformInOpenInterval) {
  CounterRng rng(0, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

}  // namespace
}  // namespace gepc
