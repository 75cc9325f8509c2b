#include "gepc/gepc.hpp"

#include <algorithm>
#include <cmath>

#include "gepc/kvfile.hpp"
#include "gepc/rng.hpp"

namespace gepc {

double pool(const SpatialMap& energy, const PoolSpec& spec) {
  const auto& a = energy.array();
  switch (spec.mode) {
    case PoolSpec::Mode::kMean:
      return a.mean();
    case PoolSpec::Mode::kSum:
      return a.sum();
    case PoolSpec::Mode::kTopK: {
      if (spec.k < 1 || spec.k > a.size()) {
        throw Error(ErrorCode::kOutOfRange, "topk k=" + std::to_string(spec.k) + " outside [1, " +
                                                std::to_string(a.size()) + "]");
      }
      std::vector<double> v(a.data(), a.data() + a.size());
      std::nth_element(v.begin(), v.begin() + (spec.k - 1), v.end(), std::greater<>());
      std::sort(v.begin(), v.begin() + spec.k, std::greater<>());
      double acc = 0.0;
      for (int n = 0; n < spec.k; ++n) acc += v[static_cast<std::size_t>(n)];
      return acc / spec.k;
    }
  }
  return 0.0;
}

std::string to_string(FeatureKind f) {
  switch (f) {
    case FeatureKind::kS: return "s";
    case FeatureKind::kCos: return "cos";
    case FeatureKind::kPair: return "pair";
    case FeatureKind::kNorm: return "norm";
  }
  return "?";
}

FeatureKind parse_feature(std::string_view token) {
  if (token == "s") return FeatureKind::kS;
  if (token == "cos") return FeatureKind::kCos;
  if (token == "pair") return FeatureKind::kPair;
  if (token == "norm") return FeatureKind::kNorm;
  throw Error(ErrorCode::kConfig, "unknown feature '" + std::string(token) + "'");
}

std::vector<FeatureKind> parse_features(std::string_view spec) {
  std::vector<FeatureKind> out;
  for (const auto& tok : split(spec, ',')) {
    if (tok.empty()) continue;
    const auto f = parse_feature(tok);
    if (std::find(out.begin(), out.end(), f) != out.end()) {
      throw Error(ErrorCode::kConfig, "feature listed twice: " + tok);
    }
    out.push_back(f);
  }
  if (out.empty()) throw Error(ErrorCode::kConfig, "empty feature list");
  return out;
}

void GepcConfig::validate(const NoiseSchedule& schedule) const {
  if (group.elements.empty()) throw Error(ErrorCode::kInvalidArgument, "empty group");
  if (timesteps.empty()) throw Error(ErrorCode::kInvalidArgument, "no timesteps");
  if (weights.size() != timesteps.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one weight per timestep required");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < timesteps.size(); ++k) {
    schedule.require_step(timesteps[k]);
    for (std::size_t j = 0; j < k; ++j) {
      if (timesteps[j] == timesteps[k]) {
        throw Error(ErrorCode::kInvalidArgument, "duplicate timestep " + std::to_string(timesteps[k]));
      }
    }
    if (!(weights[k] >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative timestep weight");
    total += weights[k];
  }
  if (std::abs(total - 1.0) > 1e-12 * static_cast<double>(weights.size())) {
    throw Error(ErrorCode::kInvalidArgument, "timestep weights must sum to 1");
  }
  if (mc_samples < 1) throw Error(ErrorCode::kInvalidArgument, "mc_samples must be >= 1");
  if (features.empty()) throw Error(ErrorCode::kInvalidArgument, "no features enabled");
  if (!(eps_b >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "eps_b must be >= 0");
  if (pool.mode == PoolSpec::Mode::kTopK && pool.k < 1) {
    throw Error(ErrorCode::kOutOfRange, "topk k must be >= 1");
  }
}

std::vector<double> GepcConfig::uniform_weights(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

std::optional<double> FeatureMatrix::find(int t, FeatureKind f) const {
  const auto ti = std::find(timesteps.begin(), timesteps.end(), t);
  const auto fi = std::find(features.begin(), features.end(), f);
  if (ti == timesteps.end() || fi == features.end()) return std::nullopt;
  return values(ti - timesteps.begin(), fi - features.begin());
}

double FeatureMatrix::at(int t, FeatureKind f) const {
  auto v = find(t, f);
  if (!v) {
    throw Error(ErrorCode::kLookupMiss,
                "no feature " + to_string(f) + " at t=" + std::to_string(t));
  }
  return *v;
}

TransportedScores transport_all(const ScoreField& field, const GroupSet& group, const Field& x_t,
                                int t, std::size_t sample) {
  std::vector<Field> inputs;
  std::vector<EvalKey> keys;
  inputs.reserve(group.size() + 1);
  inputs.push_back(x_t);
  keys.push_back({sample, 0});
  for (std::size_t k = 0; k < group.size(); ++k) {
    inputs.push_back(apply(group.elements[k], x_t));
    keys.push_back({sample, static_cast<int>(k + 1)});
  }
  auto scores = field.eval_batch(inputs, t, keys);
  TransportedScores out;
  out.reference = std::move(scores[0]);
  out.transported.reserve(group.size());
  for (std::size_t k = 0; k < group.size(); ++k) {
    out.transported.push_back(inverse_apply(group.elements[k], scores[k + 1]));
  }
  return out;
}

Field transported_score(const ScoreField& field, const GroupElement& g, const Field& x_t, int t) {
  return inverse_apply(g, eval_score(field, apply(g, x_t), t));
}

Field residual_field(const ScoreField& field, const GroupElement& g, const Field& x_t, int t) {
  return transported_score(field, g, x_t, t) - eval_score(field, x_t, t);
}

double base_normalizer(const ScoreField& field, const Field& x_t, int t, const PoolSpec& spec) {
  return pool(channel_mean_energy(eval_score(field, x_t, t)), spec);
}

double feature_s_from(const TransportedScores& ts, const PoolSpec& spec, double normalizer) {
  double acc = 0.0;
  for (const auto& st : ts.transported) acc += pool(channel_mean_energy(st - ts.reference), spec);
  return acc / static_cast<double>(ts.transported.size()) / normalizer;
}

double feature_cos_from(const TransportedScores& ts, int* degenerate) {
  const double ref_norm = std::sqrt(sq_norm(ts.reference));
  double acc = 0.0;
  for (const auto& st : ts.transported) {
    const double norm = std::sqrt(sq_norm(st));
    if (ref_norm == 0.0 || norm == 0.0) {
      if (degenerate) ++*degenerate;
      continue;
    }
    const double c = std::clamp(dot(st, ts.reference) / (norm * ref_norm), -1.0, 1.0);
    acc += 1.0 - c;
  }
  return acc / static_cast<double>(ts.transported.size());
}

double feature_pair_from(const TransportedScores& ts, const PoolSpec& spec, double normalizer,
                         bool* degenerate) {
  const std::size_t n = ts.transported.size();
  if (n < 2) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  double acc = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      acc += pool(channel_mean_energy(ts.transported[a] - ts.transported[b]), spec);
  return acc / static_cast<double>(n * (n - 1) / 2) / normalizer;
}

Field NoiseSource::eps(const Shape& shape, int mc_index) const {
  CounterRng rng(seed ^ seed_domain::kForwardNoise, sample, static_cast<std::uint64_t>(mc_index));
  return rng.normal_field(shape);
}

namespace {

double normalizer_of(const TransportedScores& ts, const GepcConfig& cfg) {
  if (!cfg.normalize) return 1.0;
  return pool(channel_mean_energy(ts.reference), cfg.pool) + cfg.eps_b;
}

template <typename Fn>
double mc_average(const ScoreField& field, const NoiseSchedule& schedule, const Field& x0, int t,
                  const GepcConfig& cfg, const NoiseSource& noise, Fn&& fn) {
  double acc = 0.0;
  for (int k = 0; k < cfg.mc_samples; ++k) {
    const Field x_t = forward_sample(schedule, x0, t, noise.eps(x0.shape(), k));
    acc += fn(transport_all(field, cfg.group, x_t, t, noise.sample));
  }
  return acc / cfg.mc_samples;
}

}  // namespace

double feature_s(const ScoreField& field, const NoiseSchedule& schedule, const Field& x0, int t,
                 const GepcConfig& cfg, const NoiseSource& noise) {
  return mc_average(field, schedule, x0, t, cfg, noise, [&](const TransportedScores& ts) {
    return feature_s_from(ts, cfg.pool, normalizer_of(ts, cfg));
  });
}

double feature_cos(const ScoreField& field, const NoiseSchedule& schedule, const Field& x0, int t,
                   const GepcConfig& cfg, const NoiseSource& noise) {
  return mc_average(field, schedule, x0, t, cfg, noise,
                    [&](const TransportedScores& ts) { return feature_cos_from(ts); });
}

double feature_pair(const ScoreField& field, const NoiseSchedule& schedule, const Field& x0, int t,
                    const GepcConfig& cfg, const NoiseSource& noise) {
  return mc_average(field, schedule, x0, t, cfg, noise, [&](const TransportedScores& ts) {
    return feature_pair_from(ts, cfg.pool, normalizer_of(ts, cfg));
  });
}

GepcResult gepc_score(const ScoreField& field, const NoiseSchedule& schedule, const Field& x0,
                      const GepcConfig& cfg, const NoiseSource& noise) {
  cfg.validate(schedule);
  const auto nt = static_cast<Eigen::Index>(cfg.timesteps.size());
  GepcResult res;
  res.features.timesteps = cfg.timesteps;
  res.features.features = cfg.features;
  res.features.values = Eigen::MatrixXd::Zero(nt, static_cast<Eigen::Index>(cfg.features.size()));
  Eigen::VectorXd zs = Eigen::VectorXd::Zero(nt);

  for (int k = 0; k < cfg.mc_samples; ++k) {
    const Field eps = noise.eps(x0.shape(), k);
    for (Eigen::Index ti = 0; ti < nt; ++ti) {
      const int t = cfg.timesteps[static_cast<std::size_t>(ti)];
      const Field x_t = forward_sample(schedule, x0, t, eps);
      const auto ts = transport_all(field, cfg.group, x_t, t, noise.sample);
      res.ledger.forward += static_cast<std::int64_t>(cfg.group.size() + 1);
      const double b = normalizer_of(ts, cfg);
      const double s = feature_s_from(ts, cfg.pool, b);
      zs[ti] += s;
      for (std::size_t fi = 0; fi < cfg.features.size(); ++fi) {
        double v = 0.0;
        switch (cfg.features[fi]) {
          case FeatureKind::kS: v = s; break;
          case FeatureKind::kCos: v = feature_cos_from(ts, &res.features.degenerate_cos); break;
          case FeatureKind::kPair:
            v = feature_pair_from(ts, cfg.pool, b, &res.features.degenerate_pair);
            break;
          case FeatureKind::kNorm: v = pool(channel_mean_energy(ts.reference), cfg.pool); break;
        }
        res.features.values(ti, static_cast<Eigen::Index>(fi)) += v;
      }
    }
  }
  res.features.values /= cfg.mc_samples;
  zs /= cfg.mc_samples;
  for (Eigen::Index ti = 0; ti < nt; ++ti) res.score += cfg.weights[static_cast<std::size_t>(ti)] * zs[ti];
  if (!res.features.values.allFinite() || !std::isfinite(res.score)) {
    throw Error(ErrorCode::kDegenerate, "non-finite GEPC feature");
  }
  return res;
}

SpatialMap residual_map(const ScoreField& field, const NoiseSchedule& schedule, const Field& x0,
                        const GepcConfig& cfg, const NoiseSource& noise) {
  cfg.validate(schedule);
  SpatialMap out(x0.height(), x0.width());
  const double g_count = static_cast<double>(cfg.group.size());
  for (int k = 0; k < cfg.mc_samples; ++k) {
    const Field eps = noise.eps(x0.shape(), k);
    for (std::size_t ti = 0; ti < cfg.timesteps.size(); ++ti) {
      const int t = cfg.timesteps[ti];
      const auto ts = transport_all(field, cfg.group, forward_sample(schedule, x0, t, eps), t,
                                    noise.sample);
      const double w = cfg.weights[ti] / g_count / cfg.mc_samples;
      for (const auto& st : ts.transported) {
        out.array() += w * channel_mean_magnitude(st - ts.reference).array();
      }
    }
  }
  return out;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::kInsufficientData, "quantile of an empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::kOutOfRange, "quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double rank = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

MapNormalizer global_map_normalizer(const std::vector<SpatialMap>& id_maps) {
  if (id_maps.empty()) throw Error(ErrorCode::kInsufficientData, "empty map pool");
  std::vector<double> q;
  q.reserve(id_maps.size());
  for (const auto& m : id_maps) {
    const auto& a = m.array();
    q.push_back(quantile(std::vector<double>(a.data(), a.data() + a.size()), 0.99));
  }
  MapNormalizer out;
  out.v_global = quantile(std::move(q), 0.5);
  out.degenerate = !(out.v_global > 0.0);
  return out;
}

}  // namespace gepc
