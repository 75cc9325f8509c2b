#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gepc/gepc.hpp"

namespace gepc {

enum class WeightMode { kNone, kInvCv };
enum class CalibrationMode { kKde, kZScore, kRaw, kMvn };
enum class FeatureAggregation { kSum, kMean };
enum class TimeAggregation { kMean, kWeightedMean };

WeightMode parse_weight_mode(std::string_view s);
CalibrationMode parse_calibration_mode(std::string_view density_mode, std::string_view vector_mode);
FeatureAggregation parse_feature_aggregation(std::string_view s);
TimeAggregation parse_time_aggregation(std::string_view s);
std::string to_string(CalibrationMode m);

// Population (1/n) conventions throughout.
double mean_of(std::span<const double> v);
double population_std(std::span<const double> v);

struct TimestepSelection {
  std::vector<int> candidates;
  std::vector<double> cv;  // one per candidate
  std::vector<int> kept;
  std::vector<double> weights;  // one per kept step, sum 1
  WeightMode mode = WeightMode::kInvCv;

  void write(const std::filesystem::path& path) const;
  static TimestepSelection read(const std::filesystem::path& path);
};

inline constexpr double kCvEpsilon = 1e-12;

/// CV(t) = std / (|mean| + eps). Keeps the K lowest-CV candidates (ties to the
/// smaller t) in ascending-CV order; weights uniform or proportional to
/// 1 / (CV + eps).
TimestepSelection select_timesteps(const std::vector<int>& candidates,
                                   const std::vector<std::vector<double>>& id_values, int keep_k,
                                   WeightMode mode);

struct KdeCell {
  std::vector<double> centers;
  double bandwidth = 0.0;

  double log_density(double z) const;
};

struct ZScoreCell {
  double mean = 0.0;
  double stddev = 1.0;
};

/// Fitted ID-only model over the kept (t, f) cells.
struct Calibrator {
  CalibrationMode mode = CalibrationMode::kKde;
  std::vector<int> timesteps;
  std::vector<FeatureKind> features;
  // Row-major over (timestep, feature).
  std::vector<KdeCell> kde;
  std::vector<ZScoreCell> zscore;
  Eigen::VectorXd mvn_mean;
  Eigen::MatrixXd mvn_precision;

  std::size_t cells() const { return timesteps.size() * features.size(); }

  void write(const std::filesystem::path& path) const;
  static Calibrator read(const std::filesystem::path& path);
};

inline constexpr double kKdeLogFloor = -690.7755278982137;  // log(1e-300)

/// h = 0.9 min(sigma, IQR / 1.34) n^{-1/5}, floored at 1e-9 (1 + |median|).
double silverman_bandwidth(std::span<const double> values);

/// Concatenated (t, f) vector of one sample in calibrator order.
Eigen::VectorXd feature_vector(const FeatureMatrix& m, const std::vector<int>& timesteps,
                               const std::vector<FeatureKind>& features);

Calibrator fit_calibrator(std::span<const FeatureMatrix> id_features, const TimestepSelection& sel,
                          const std::vector<FeatureKind>& features, CalibrationMode mode);

/// OOD-high anomaly score: -L for kde/zscore, squared Mahalanobis for mvn,
/// aggregated raw values for raw.
double anomaly_score(const FeatureMatrix& feat, const Calibrator& cal, const TimestepSelection& sel,
                     FeatureAggregation agg_feat, TimeAggregation agg_t);

}  // namespace gepc
