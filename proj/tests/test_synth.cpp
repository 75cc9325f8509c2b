#include <gtest/gtest.h>

#include "gepc/gtf.hpp"
#include "gepc/synth.hpp"
#include "test_util.hpp"

namespace gepc {
namespace {

using testing::TempDir;

DatasetSpec small_spec(DatasetSpec::Kind kind, std::size_t n) {
  DatasetSpec s;
  s.kind = kind;
  s.shape = {2, 4, 4};
  s.n = n;
  s.seed = 5;
  s.mixture_seed = 6;
  s.shift_seed = 7;
  return s;
}

TEST(Synth, SameSpecSameBytes) {
  TempDir dir;
  const DatasetSpec spec = small_spec(DatasetSpec::Kind::kInvariantGmm, 6);
  write_dataset(generate(spec), spec, dir / "a");
  write_dataset(generate(spec), spec, dir / "b");
  for (std::size_t i = 0; i < 6; ++i) {
    const std::string name = sample_file_name(i);
    EXPECT_EQ(testing::slurp(dir / ("a/" + name)), testing::slurp(dir / ("b/" + name)));
  }
  EXPECT_EQ(testing::slurp(dir / "a/manifest.txt"), testing::slurp(dir / "b/manifest.txt"));
}

TEST(Synth, InvariantLawUnderDefaultGroup) {
  const DatasetSpec spec = small_spec(DatasetSpec::Kind::kInvariantGmm, 10000);
  const Dataset data = generate(spec);
  const double tol = 4.0 / std::sqrt(static_cast<double>(spec.n));
  Field mean(spec.shape);
  for (const auto& x : data.samples) mean += x;
  mean *= 1.0 / static_cast<double>(spec.n);
  for (const auto& g : default_group(4, 4).elements) {
    Field gm(spec.shape);
    for (const auto& x : data.samples) gm += apply(g, x);
    gm *= 1.0 / static_cast<double>(spec.n);
    EXPECT_LE(testing::max_abs_diff(gm, mean), tol) << to_string(g);
  }
}

TEST(Synth, ZeroShiftMatchesInvariantBytes) {
  DatasetSpec inv = small_spec(DatasetSpec::Kind::kInvariantGmm, 5);
  DatasetSpec shifted = inv;
  shifted.kind = DatasetSpec::Kind::kShifted;
  shifted.shift_norm = 0.0;
  const Dataset a = generate(inv);
  const Dataset b = generate(shifted);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_TRUE((a.samples[i].array() == b.samples[i].array()).all());
  }
}

TEST(Synth, ShiftVectorNormAndEffect) {
  DatasetSpec spec = small_spec(DatasetSpec::Kind::kShifted, 3);
  spec.shift_norm = 1.0;
  const Field shift = shift_vector(spec);
  EXPECT_NEAR(std::sqrt(sq_norm(shift)), 1.0, 1e-12);
  DatasetSpec inv = spec;
  inv.kind = DatasetSpec::Kind::kInvariantGmm;
  const Dataset a = generate(inv);
  const Dataset b = generate(spec);
  EXPECT_LT(testing::max_abs_diff(b.samples[1] - a.samples[1], shift), 1e-12);
}

TEST(Synth, SymmetrisedMixtureIsInvariant) {
  const DatasetSpec spec = small_spec(DatasetSpec::Kind::kInvariantGmm, 1);
  const GmmSpec mix = invariant_mixture(spec);
  const auto sched = default_schedule();
  GmmScore f(mix, sched);
  const Field x = testing::random_field(spec.shape, 8);
  for (const auto& g : default_group(4, 4).elements) {
    EXPECT_NEAR(f.log_density(apply(g, x), 30), f.log_density(x, 30), 1e-9);
  }
  EXPECT_EQ(generating_mixture(spec).components.size(), mix.components.size());
}

TEST(Synth, AnisotropicRamp) {
  DatasetSpec spec = small_spec(DatasetSpec::Kind::kAnisotropic, 1);
  spec.aniso_left = 0.5;
  spec.aniso_right = 2.0;
  const GmmSpec mix = generating_mixture(spec);
  const GmmSpec inv = invariant_mixture(spec);
  const auto& c = mix.components[0];
  const auto& base = inv.components[0];
  EXPECT_DOUBLE_EQ(c.variance(0, 0, 0), 0.5 * base.variance(0, 0, 0));
  EXPECT_DOUBLE_EQ(c.variance(0, 0, 3), 2.0 * base.variance(0, 0, 3));
  EXPECT_DOUBLE_EQ(c.variance(1, 2, 1), 1.0 * base.variance(1, 2, 1));
}

TEST(Synth, HashTracksSpec) {
  const DatasetSpec a = small_spec(DatasetSpec::Kind::kInvariantGmm, 5);
  DatasetSpec b = a;
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 99;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
}

TEST(Synth, DatasetRoundtrip) {
  TempDir dir;
  const DatasetSpec spec = small_spec(DatasetSpec::Kind::kShifted, 4);
  const Dataset d = generate(spec);
  write_dataset(d, spec, dir.path());
  const Dataset back = load_dataset(dir.path());
  ASSERT_EQ(back.samples.size(), 4u);
  EXPECT_EQ(back.names, d.names);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_LT(testing::max_abs_diff(back.samples[i], d.samples[i]), 1e-6);
  }
  EXPECT_NE(testing::slurp(dir / "manifest.txt").find(spec.hash()), std::string::npos);
}

TEST(Synth, CustomDirectory) {
  TempDir dir;
  for (int i = 2; i >= 0; --i) {
    write_gtf(Field::constant({1, 2, 2}, i), dir / ("img_" + std::to_string(i) + ".gtf"));
  }
  DatasetSpec spec;
  spec.kind = DatasetSpec::Kind::kCustomGtfDir;
  spec.source_dir = dir.path();
  spec.n = 3;
  const Dataset d = generate(spec);
  ASSERT_EQ(d.samples.size(), 3u);
  EXPECT_EQ(d.samples[2](0, 1, 1), 2.0);
  spec.n = 4;
  EXPECT_THROW(generate(spec), Error);
}

TEST(Synth, Validation) {
  DatasetSpec s = small_spec(DatasetSpec::Kind::kInvariantGmm, 0);
  EXPECT_THROW(s.validate(), Error);
  s.n = 1;
  s.component_std = 0.0;
  EXPECT_THROW(s.validate(), Error);
  EXPECT_THROW(parse_dataset_kind("spiral"), Error);
}

}  // namespace
}  // namespace gepc
