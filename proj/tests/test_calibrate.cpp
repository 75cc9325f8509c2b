#include <gtest/gtest.h>

#include <numbers>

#include "gepc/calibrate.hpp"
#include "test_util.hpp"

namespace gepc {
namespace {

using testing::TempDir;

FeatureMatrix features_of(const std::vector<int>& ts, const std::vector<FeatureKind>& fs,
                          std::initializer_list<double> values) {
  FeatureMatrix m;
  m.timesteps = ts;
  m.features = fs;
  m.values.resize(static_cast<Eigen::Index>(ts.size()), static_cast<Eigen::Index>(fs.size()));
  Eigen::Index k = 0;
  for (double v : values) {
    m.values(k / m.values.cols(), k % m.values.cols()) = v;
    ++k;
  }
  return m;
}

TimestepSelection single_step(int t) {
  TimestepSelection sel;
  sel.candidates = {t};
  sel.cv = {0.0};
  sel.kept = {t};
  sel.weights = {1.0};
  return sel;
}

TEST(Select, CvDefinitionAndOrdering) {
  const auto sel = select_timesteps({5, 15, 136}, {{1, 3}, {2, 2, 2}, {0.9, 1.1}}, 3, WeightMode::kNone);
  EXPECT_NEAR(sel.cv[0], 0.5, 1e-11);
  EXPECT_EQ(sel.cv[1], 0.0);
  EXPECT_NEAR(sel.cv[2], 0.1, 1e-12);
  EXPECT_EQ(sel.kept, (std::vector<int>{15, 136, 5}));
  for (double w : sel.weights) EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
}

TEST(Select, InverseCvWeights) {
  const auto sel = select_timesteps({5, 15, 136}, {{0.7, 1.3}, {0.9, 1.1}, {0, 2}}, 2, WeightMode::kInvCv);
  EXPECT_EQ(sel.kept, (std::vector<int>{15, 5}));
  EXPECT_NEAR(sel.weights[0], 0.75, 1e-10);
  EXPECT_NEAR(sel.weights[1], 0.25, 1e-10);
}

TEST(Select, TiesGoToSmallerStep) {
  const auto sel = select_timesteps({172, 15, 136}, {{1, 2}, {1, 2}, {1, 2}}, 2, WeightMode::kNone);
  EXPECT_EQ(sel.kept, (std::vector<int>{15, 136}));
}

TEST(Select, Errors) {
  auto code = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIo;
  };
  EXPECT_EQ(code([] { select_timesteps({5, 15}, {{1, 2}, {1, 2}}, 3, WeightMode::kNone); }), ErrorCode::kOutOfRange);
  EXPECT_EQ(code([] { select_timesteps({5, 15}, {{1, 2}, {1, 2}}, 0, WeightMode::kNone); }), ErrorCode::kOutOfRange);
  EXPECT_EQ(code([] { select_timesteps({5}, {{1}}, 1, WeightMode::kNone); }), ErrorCode::kInsufficientData);
}

TEST(Select, FileRoundtrip) {
  TempDir dir;
  const auto sel = select_timesteps({5, 15, 136}, {{0.7, 1.3}, {0.9, 1.1}, {0, 2}}, 2, WeightMode::kInvCv);
  sel.write(dir / "selection.txt");
  const auto back = TimestepSelection::read(dir / "selection.txt");
  EXPECT_EQ(back.kept, sel.kept);
  EXPECT_EQ(back.cv, sel.cv);
  EXPECT_EQ(back.weights, sel.weights);
  EXPECT_EQ(back.mode, sel.mode);
}

TEST(Silverman, MatchesFormula) {
  std::vector<double> v;
  CounterRng rng(1, 0);
  for (int i = 0; i < 301; ++i) v.push_back(rng.normal() * 2.0 + 1.0);
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  // n = 301: quartile ranks 75 and 225 are exact order statistics.
  const double iqr = sorted[225] - sorted[75];
  double m = 0, s2 = 0;
  for (double x : v) m += x;
  m /= v.size();
  for (double x : v) s2 += (x - m) * (x - m);
  const double sd = std::sqrt(s2 / v.size());
  EXPECT_NEAR(silverman_bandwidth(v), 0.9 * std::min(sd, iqr / 1.34) * std::pow(301.0, -0.2), 1e-12);
}

TEST(Kde, DegenerateSampleHitsFloor) {
  const std::vector<double> same(50, 3.0);
  const double h = silverman_bandwidth(same);
  EXPECT_DOUBLE_EQ(h, 1e-9 * 4.0);
  const KdeCell cell{same, h};
  EXPECT_TRUE(std::isfinite(cell.log_density(3.0)));
  EXPECT_TRUE(std::isfinite(cell.log_density(1e6)));
  EXPECT_EQ(cell.log_density(1e6), kKdeLogFloor);
}

TEST(Kde, LogDensityMatchesDirectSum) {
  const KdeCell cell{{0.0, 0.5, 2.0}, 0.4};
  for (double z : {-1.0, 0.2, 1.0, 3.0}) {
    double p = 0;
    for (double c : cell.centers) p += std::exp(-0.5 * std::pow((z - c) / 0.4, 2)) / (0.4 * std::sqrt(2 * std::numbers::pi));
    EXPECT_NEAR(cell.log_density(z), std::log(p / 3.0), 1e-12);
  }
}

TEST(Calibrator, ZScorePopulationConvention) {
  const std::vector<FeatureMatrix> id{features_of({5}, {FeatureKind::kS}, {0.0}),
                                      features_of({5}, {FeatureKind::kS}, {2.0})};
  const auto cal = fit_calibrator(id, single_step(5), {FeatureKind::kS}, CalibrationMode::kZScore);
  ASSERT_EQ(cal.zscore.size(), 1u);
  EXPECT_DOUBLE_EQ(cal.zscore[0].mean, 1.0);
  EXPECT_DOUBLE_EQ(cal.zscore[0].stddev, 1.0);

  const auto sel = single_step(5);
  auto score = [&](double z) {
    return anomaly_score(features_of({5}, {FeatureKind::kS}, {z}), cal, sel, FeatureAggregation::kMean,
                         TimeAggregation::kWeightedMean);
  };
  EXPECT_DOUBLE_EQ(score(1.0), 0.0);
  EXPECT_DOUBLE_EQ(score(3.0), 2.0);
  EXPECT_GT(score(5.0), score(3.0));
}

TEST(Calibrator, RawAggregation) {
  TimestepSelection sel;
  sel.candidates = sel.kept = {5, 15};
  sel.cv = {1, 1};
  sel.weights = {0.5, 0.5};
  const auto f = features_of({5, 15}, {FeatureKind::kS}, {0.2, 0.4});
  const std::vector<FeatureMatrix> id{f, f};
  const auto cal = fit_calibrator(id, sel, {FeatureKind::kS}, CalibrationMode::kRaw);
  EXPECT_NEAR(anomaly_score(f, cal, sel, FeatureAggregation::kMean, TimeAggregation::kWeightedMean), 0.3, 1e-15);
  EXPECT_NEAR(anomaly_score(f, cal, sel, FeatureAggregation::kMean, TimeAggregation::kMean), 0.3, 1e-15);

  sel.weights = {0.25, 0.75};
  EXPECT_NEAR(anomaly_score(f, cal, sel, FeatureAggregation::kMean, TimeAggregation::kWeightedMean), 0.35, 1e-15);
  EXPECT_NEAR(anomaly_score(f, cal, sel, FeatureAggregation::kMean, TimeAggregation::kMean), 0.3, 1e-15);

  const auto two = features_of({5, 15}, {FeatureKind::kS, FeatureKind::kCos}, {0.2, 1.0, 0.4, 3.0});
  const std::vector<FeatureMatrix> id2{two, two};
  const auto cal2 = fit_calibrator(id2, sel, {FeatureKind::kS, FeatureKind::kCos}, CalibrationMode::kRaw);
  EXPECT_NEAR(anomaly_score(two, cal2, sel, FeatureAggregation::kSum, TimeAggregation::kMean),
              0.5 * (1.2 + 3.4), 1e-15);
}

TEST(Calibrator, MvnMahalanobis) {
  TimestepSelection sel;
  sel.candidates = sel.kept = {5};
  sel.cv = {1};
  sel.weights = {1};
  std::vector<FeatureMatrix> id;
  CounterRng rng(3, 0);
  for (int i = 0; i < 10000; ++i) {
    id.push_back(features_of({5}, {FeatureKind::kS, FeatureKind::kCos}, {rng.normal(), rng.normal()}));
  }
  const auto cal = fit_calibrator(id, sel, {FeatureKind::kS, FeatureKind::kCos}, CalibrationMode::kMvn);
  auto score = [&](double a, double b) {
    return anomaly_score(features_of({5}, {FeatureKind::kS, FeatureKind::kCos}, {a, b}), cal, sel,
                         FeatureAggregation::kMean, TimeAggregation::kMean);
  };
  EXPECT_LT(score(0, 0), 0.01);
  EXPECT_NEAR(score(3, 3), 18.0, 1.8);
}

TEST(Calibrator, MvnErrors) {
  TimestepSelection sel = single_step(5);
  std::vector<FeatureMatrix> few(2, features_of({5}, {FeatureKind::kS}, {1.0}));
  EXPECT_THROW(fit_calibrator(few, sel, {FeatureKind::kS}, CalibrationMode::kMvn), Error);
  std::vector<FeatureMatrix> flat(10, features_of({5}, {FeatureKind::kS}, {0.0}));
  try {
    fit_calibrator(flat, sel, {FeatureKind::kS}, CalibrationMode::kMvn);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularCovariance);
  }
}

TEST(Calibrator, MissingCellIsAnError) {
  const std::vector<FeatureMatrix> id{features_of({5}, {FeatureKind::kS}, {0.0}),
                                      features_of({5}, {FeatureKind::kS}, {2.0})};
  const auto cal = fit_calibrator(id, single_step(5), {FeatureKind::kS}, CalibrationMode::kKde);
  EXPECT_THROW(anomaly_score(features_of({15}, {FeatureKind::kS}, {1.0}), cal, single_step(5),
                             FeatureAggregation::kMean, TimeAggregation::kMean),
               Error);
}

TEST(Calibrator, FileRoundtripPreservesScores) {
  TempDir dir;
  TimestepSelection sel;
  sel.candidates = sel.kept = {5, 15};
  sel.cv = {1, 2};
  sel.weights = {2.0 / 3.0, 1.0 / 3.0};
  std::vector<FeatureMatrix> id;
  CounterRng rng(4, 0);
  for (int i = 0; i < 40; ++i) {
    id.push_back(features_of({5, 15}, {FeatureKind::kS}, {rng.normal(), 2 + rng.normal()}));
  }
  const auto probe = features_of({5, 15}, {FeatureKind::kS}, {0.3, 1.1});
  for (auto mode : {CalibrationMode::kKde, CalibrationMode::kZScore, CalibrationMode::kMvn, CalibrationMode::kRaw}) {
    const auto cal = fit_calibrator(id, sel, {FeatureKind::kS}, mode);
    cal.write(dir / "cal.txt");
    const auto back = Calibrator::read(dir / "cal.txt");
    EXPECT_EQ(back.mode, mode);
    EXPECT_EQ(anomaly_score(probe, back, sel, FeatureAggregation::kMean, TimeAggregation::kWeightedMean),
              anomaly_score(probe, cal, sel, FeatureAggregation::kMean, TimeAggregation::kWeightedMean))
        << to_string(mode);
  }
}

TEST(Calibrator, ModeParsing) {
  EXPECT_EQ(parse_calibration_mode("kde", "none"), CalibrationMode::kKde);
  EXPECT_EQ(parse_calibration_mode("zscore", "none"), CalibrationMode::kZScore);
  EXPECT_EQ(parse_calibration_mode("none", "none"), CalibrationMode::kRaw);
  EXPECT_EQ(parse_calibration_mode("none", "mvn"), CalibrationMode::kMvn);
  EXPECT_THROW(parse_calibration_mode("gmm", "none"), Error);
  EXPECT_THROW(parse_weight_mode("cv"), Error);
}

}  // namespace
}  // namespace gepc
