#include "gepc/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "gepc/kvfile.hpp"

namespace gepc {
namespace {

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t n = 0; n < v.size(); ++n) {
    if (n) out += ',';
    out += format_double(v[n]);
  }
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t n = 0; n < v.size(); ++n) {
    if (n) out += ',';
    out += std::to_string(v[n]);
  }
  return out;
}

std::string join(const std::vector<FeatureKind>& v) {
  std::string out;
  for (std::size_t n = 0; n < v.size(); ++n) {
    if (n) out += ',';
    out += to_string(v[n]);
  }
  return out;
}

std::string to_string(WeightMode m) { return m == WeightMode::kNone ? "none" : "inv_cv"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

CalibrationMode mode_from_name(const std::string& s) {
  if (s == "kde") return CalibrationMode::kKde;
  if (s == "zscore") return CalibrationMode::kZScore;
  if (s == "raw") return CalibrationMode::kRaw;
  if (s == "mvn") return CalibrationMode::kMvn;
  throw Error(ErrorCode::kConfig, "unknown calibration mode '" + s + "'");
}

}  // namespace

WeightMode parse_weight_mode(std::string_view s) {
  if (s == "none") return WeightMode::kNone;
  if (s == "inv_cv") return WeightMode::kInvCv;
  throw Error(ErrorCode::kConfig, "weight_t must be none|inv_cv, got '" + std::string(s) + "'");
}

CalibrationMode parse_calibration_mode(std::string_view density_mode, std::string_view vector_mode) {
  if (vector_mode == "mvn") return CalibrationMode::kMvn;
  if (vector_mode != "none") {
    throw Error(ErrorCode::kConfig, "vector_mode must be none|mvn, got '" + std::string(vector_mode) + "'");
  }
  if (density_mode == "kde") return CalibrationMode::kKde;
  if (density_mode == "zscore") return CalibrationMode::kZScore;
  if (density_mode == "none") return CalibrationMode::kRaw;
  throw Error(ErrorCode::kConfig,
              "density_mode must be kde|zscore|none, got '" + std::string(density_mode) + "'");
}

FeatureAggregation parse_feature_aggregation(std::string_view s) {
  if (s == "sum") return FeatureAggregation::kSum;
  if (s == "mean") return FeatureAggregation::kMean;
  throw Error(ErrorCode::kConfig, "agg_feat must be sum|mean, got '" + std::string(s) + "'");
}

TimeAggregation parse_time_aggregation(std::string_view s) {
  if (s == "mean") return TimeAggregation::kMean;
  if (s == "wmean") return TimeAggregation::kWeightedMean;
  throw Error(ErrorCode::kConfig, "agg_t must be mean|wmean, got '" + std::string(s) + "'");
}

std::string to_string(CalibrationMode m) {
  switch (m) {
    case CalibrationMode::kKde: return "kde";
    case CalibrationMode::kZScore: return "zscore";
    case CalibrationMode::kRaw: return "raw";
    case CalibrationMode::kMvn: return "mvn";
  }
  return "?";
}

double mean_of(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::kInsufficientData, "mean of an empty set");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(std::span<const double> v) {
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

void TimestepSelection::write(const std::filesystem::path& path) const {
  write_text(path, "format = gepc-selection-1\nweight_t = " + to_string(mode) +
                       "\ncandidates = " + join(candidates) + "\ncv = " + join(cv) +
                       "\nkept = " + join(kept) + "\nweights = " + join(weights) + "\n");
}

TimestepSelection TimestepSelection::read(const std::filesystem::path& path) {
  const KvFile kv = KvFile::load(path);
  if (kv.get_or("format", "") != "gepc-selection-1") {
    throw Error(ErrorCode::kConfig, path.string() + ": expected format = gepc-selection-1");
  }
  TimestepSelection sel;
  sel.mode = parse_weight_mode(kv.require("weight_t"));
  sel.candidates = parse_int_list(kv.require("candidates"));
  sel.cv = parse_double_list(kv.require("cv"));
  sel.kept = parse_int_list(kv.require("kept"));
  sel.weights = parse_double_list(kv.require("weights"));
  if (sel.kept.empty() || sel.kept.size() != sel.weights.size() ||
      sel.cv.size() != sel.candidates.size()) {
    throw Error(ErrorCode::kConfig, path.string() + ": inconsistent selection lists");
  }
  return sel;
}

TimestepSelection select_timesteps(const std::vector<int>& candidates,
                                   const std::vector<std::vector<double>>& id_values, int keep_k,
                                   WeightMode mode) {
  if (candidates.size() != id_values.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one value list per candidate required");
  }
  if (keep_k < 1 || static_cast<std::size_t>(keep_k) > candidates.size()) {
    throw Error(ErrorCode::kOutOfRange, "keep_k=" + std::to_string(keep_k) + " outside [1, " +
                                            std::to_string(candidates.size()) + "]");
  }
  TimestepSelection sel;
  sel.candidates = candidates;
  sel.mode = mode;
  for (const auto& values : id_values) {
    if (values.size() < 2) throw Error(ErrorCode::kInsufficientData, "need >= 2 ID values per candidate");
    sel.cv.push_back(population_std(values) / (std::abs(mean_of(values)) + kCvEpsilon));
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sel.cv[a] != sel.cv[b]) return sel.cv[a] < sel.cv[b];
    return candidates[a] < candidates[b];
  });
  double total = 0.0;
  for (int k = 0; k < keep_k; ++k) {
    const std::size_t c = order[static_cast<std::size_t>(k)];
    sel.kept.push_back(candidates[c]);
    const double w = mode == WeightMode::kNone ? 1.0 : 1.0 / (sel.cv[c] + kCvEpsilon);
    sel.weights.push_back(w);
    total += w;
  }
  for (auto& w : sel.weights) w /= total;
  return sel;
}

double KdeCell::log_density(double z) const {
  double peak = -std::numeric_limits<double>::infinity();
  std::vector<double> e(centers.size());
  for (std::size_t n = 0; n < centers.size(); ++n) {
    const double u = (z - centers[n]) / bandwidth;
    e[n] = -0.5 * u * u;
    peak = std::max(peak, e[n]);
  }
  double acc = 0.0;
  for (double v : e) acc += std::exp(v - peak);
  const double log_norm = std::log(static_cast<double>(centers.size()) * bandwidth) +
                          0.5 * std::log(2.0 * std::numbers::pi);
  const double ld = peak + std::log(acc) - log_norm;
  return std::max(ld, kKdeLogFloor);
}

double silverman_bandwidth(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  if (v.size() < 2) throw Error(ErrorCode::kInsufficientData, "bandwidth needs >= 2 values");
  const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
  const double spread = std::min(population_std(v), iqr / 1.34);
  const double h = 0.9 * spread * std::pow(static_cast<double>(v.size()), -0.2);
  return std::max(h, 1e-9 * (1.0 + std::abs(quantile(v, 0.5))));
}

Eigen::VectorXd feature_vector(const FeatureMatrix& m, const std::vector<int>& timesteps,
                               const std::vector<FeatureKind>& features) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(timesteps.size() * features.size()));
  Eigen::Index n = 0;
  for (int t : timesteps)
    for (auto f : features) out[n++] = m.at(t, f);
  return out;
}

Calibrator fit_calibrator(std::span<const FeatureMatrix> id_features, const TimestepSelection& sel,
                          const std::vector<FeatureKind>& features, CalibrationMode mode) {
  if (id_features.size() < 2) throw Error(ErrorCode::kInsufficientData, "calibration needs >= 2 ID samples");
  Calibrator cal;
  cal.mode = mode;
  cal.timesteps = sel.kept;
  cal.features = features;
  const auto d = static_cast<Eigen::Index>(cal.cells());
  const auto n = static_cast<Eigen::Index>(id_features.size());
  Eigen::MatrixXd z(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    z.row(i) = feature_vector(id_features[static_cast<std::size_t>(i)], cal.timesteps, features);
  }
  switch (mode) {
    case CalibrationMode::kRaw:
      break;
    case CalibrationMode::kKde:
      for (Eigen::Index c = 0; c < d; ++c) {
        std::vector<double> col(z.col(c).data(), z.col(c).data() + n);
        cal.kde.push_back(KdeCell{col, silverman_bandwidth(col)});
      }
      break;
    case CalibrationMode::kZScore:
      for (Eigen::Index c = 0; c < d; ++c) {
        std::vector<double> col(z.col(c).data(), z.col(c).data() + n);
        const double mu = mean_of(col);
        cal.zscore.push_back(ZScoreCell{mu, std::max(population_std(col), 1e-12 * (1.0 + std::abs(mu)))});
      }
      break;
    case CalibrationMode::kMvn: {
      if (n < d + 2) {
        throw Error(ErrorCode::kInsufficientData, "mvn needs >= d + 2 = " + std::to_string(d + 2) +
                                                      " ID samples");
      }
      cal.mvn_mean = z.colwise().mean().transpose();
      const Eigen::MatrixXd centered = z.rowwise() - cal.mvn_mean.transpose();
      Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
      const double ridge = 1e-6 * cov.trace() / static_cast<double>(d);
      cov.diagonal().array() += ridge;
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (!(ridge > 0.0) || llt.info() != Eigen::Success) {
        throw Error(ErrorCode::kSingularCovariance, "feature covariance is singular after ridge");
      }
      cal.mvn_precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
      break;
    }
  }
  return cal;
}

double anomaly_score(const FeatureMatrix& feat, const Calibrator& cal, const TimestepSelection& sel,
                     FeatureAggregation agg_feat, TimeAggregation agg_t) {
  const Eigen::VectorXd z = feature_vector(feat, cal.timesteps, cal.features);
  if (cal.mode == CalibrationMode::kMvn) {
    const Eigen::VectorXd dz = z - cal.mvn_mean;
    return dz.dot(cal.mvn_precision * dz);
  }
  if (sel.kept != cal.timesteps || sel.weights.size() != cal.timesteps.size()) {
    throw Error(ErrorCode::kInvalidArgument, "selection does not match calibrator timesteps");
  }
  const std::size_t nf = cal.features.size();
  double total = 0.0;
  for (std::size_t ti = 0; ti < cal.timesteps.size(); ++ti) {
    double acc = 0.0;
    for (std::size_t fi = 0; fi < nf; ++fi) {
      const std::size_t c = ti * nf + fi;
      const double v = z[static_cast<Eigen::Index>(c)];
      switch (cal.mode) {
        case CalibrationMode::kKde: acc += cal.kde[c].log_density(v); break;
        case CalibrationMode::kZScore: {
          const double u = (v - cal.zscore[c].mean) / cal.zscore[c].stddev;
          acc += -0.5 * u * u;
          break;
        }
        default: acc += v; break;
      }
    }
    if (agg_feat == FeatureAggregation::kMean) acc /= static_cast<double>(nf);
    const double w = agg_t == TimeAggregation::kWeightedMean
                         ? sel.weights[ti]
                         : 1.0 / static_cast<double>(cal.timesteps.size());
    total += w * acc;
  }
  return cal.mode == CalibrationMode::kRaw ? total : -total;
}

void Calibrator::write(const std::filesystem::path& path) const {
  std::string text = "format = gepc-calibrator-1\nmode = " + to_string(mode) +
                     "\ntimesteps = " + join(timesteps) + "\nfeatures = " + join(features) + "\n";
  for (const auto& c : kde) {
    text += "[kde]\nbandwidth = " + format_double(c.bandwidth) + "\ncenters = " + join(c.centers) + "\n";
  }
  for (const auto& c : zscore) {
    text += "[zscore]\nmean = " + format_double(c.mean) + "\nstddev = " + format_double(c.stddev) + "\n";
  }
  if (mode == CalibrationMode::kMvn) {
    std::vector<double> m(mvn_mean.data(), mvn_mean.data() + mvn_mean.size());
    std::vector<double> p;
    for (Eigen::Index r = 0; r < mvn_precision.rows(); ++r)
      for (Eigen::Index c = 0; c < mvn_precision.cols(); ++c) p.push_back(mvn_precision(r, c));
    text += "[mvn]\nmvn_mean = " + join(m) + "\nmvn_precision = " + join(p) + "\n";
  }
  write_text(path, text);
}

Calibrator Calibrator::read(const std::filesystem::path& path) {
  const KvFile kv = KvFile::load(path);
  if (kv.get_or("format", "") != "gepc-calibrator-1") {
    throw Error(ErrorCode::kConfig, path.string() + ": expected format = gepc-calibrator-1");
  }
  Calibrator cal;
  std::vector<double> mean_list;
  std::vector<double> precision_list;
  for (const auto& e : kv.entries()) {
    if (e.section.empty()) {
      if (e.key == "format") continue;
      if (e.key == "mode") cal.mode = mode_from_name(e.value);
      else if (e.key == "timesteps") cal.timesteps = parse_int_list(e.value);
      else if (e.key == "features") cal.features = parse_features(e.value);
      else kv.fail(e, "unknown key '" + e.key + "'");
    } else if (e.section == "kde") {
      if (e.key == "bandwidth") cal.kde.push_back(KdeCell{{}, parse_double(e.value)});
      else if (e.key == "centers" && !cal.kde.empty()) cal.kde.back().centers = parse_double_list(e.value);
      else kv.fail(e, "unexpected kde key '" + e.key + "'");
    } else if (e.section == "zscore") {
      if (e.key == "mean") cal.zscore.push_back(ZScoreCell{parse_double(e.value), 1.0});
      else if (e.key == "stddev" && !cal.zscore.empty()) cal.zscore.back().stddev = parse_double(e.value);
      else kv.fail(e, "unexpected zscore key '" + e.key + "'");
    } else if (e.section == "mvn") {
      if (e.key == "mvn_mean") mean_list = parse_double_list(e.value);
      else if (e.key == "mvn_precision") precision_list = parse_double_list(e.value);
      else kv.fail(e, "unexpected mvn key '" + e.key + "'");
    } else {
      kv.fail(e, "unknown section [" + e.section + "]");
    }
  }
  const std::size_t d = cal.cells();
  const bool ok = (cal.mode == CalibrationMode::kKde && cal.kde.size() == d) ||
                  (cal.mode == CalibrationMode::kZScore && cal.zscore.size() == d) ||
                  (cal.mode == CalibrationMode::kMvn && mean_list.size() == d &&
                   precision_list.size() == d * d) ||
                  cal.mode == CalibrationMode::kRaw;
  if (!ok || d == 0) throw Error(ErrorCode::kConfig, path.string() + ": incomplete calibrator");
  for (const auto& c : cal.kde) {
    if (!(c.bandwidth > 0.0) || c.centers.empty()) {
      throw Error(ErrorCode::kConfig, path.string() + ": bad kde cell");
    }
  }
  if (cal.mode == CalibrationMode::kMvn) {
    const auto di = static_cast<Eigen::Index>(d);
    cal.mvn_mean = Eigen::Map<const Eigen::VectorXd>(mean_list.data(), di);
    cal.mvn_precision = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                       Eigen::RowMajor>>(precision_list.data(), di, di);
  }
  return cal;
}

}  // namespace gepc
