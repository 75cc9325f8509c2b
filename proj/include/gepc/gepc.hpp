#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gepc/group.hpp"
#include "gepc/schedule.hpp"
#include "gepc/scorefield.hpp"
#include "gepc/tensor.hpp"

namespace gepc {

// Spatial pooling of a channel-averaged energy map. kSum is the unnormalised
// total used by the closed-form checks; detection runs use mean or topk.
struct PoolSpec {
  enum class Mode { kMean, kTopK, kSum };
  Mode mode = Mode::kMean;
  int k = 1;
};

double pool(const SpatialMap& energy, const PoolSpec& spec);

enum class FeatureKind { kS, kCos, kPair, kNorm };

std::string to_string(FeatureKind f);
FeatureKind parse_feature(std::string_view token);
std::vector<FeatureKind> parse_features(std::string_view spec);

struct GepcConfig {
  GroupSet group;
  std::vector<int> timesteps;
  std::vector<double> weights;  // one per timestep, sum 1
  int mc_samples = 1;
  PoolSpec pool;
  std::vector<FeatureKind> features{FeatureKind::kS};
  double eps_b = 1e-12;
  // false: b_t is replaced by 1 (unnormalised residual energy).
  bool normalize = true;

  void validate(const NoiseSchedule& schedule) const;
  static std::vector<double> uniform_weights(std::size_t n);
};

struct ComputeLedger {
  std::int64_t forward = 0;   // F
  std::int64_t jvp = 0;       // J

  ComputeLedger& operator+=(const ComputeLedger& o) {
    forward += o.forward;
    jvp += o.jvp;
    return *this;
  }
};

/// Per-sample feature values z_{t,f}: rows follow `timesteps`, columns
/// follow `features`.
struct FeatureMatrix {
  std::vector<int> timesteps;
  std::vector<FeatureKind> features;
  Eigen::MatrixXd values;
  // Degenerate-case counts (cosine with a zero norm, pair set with |G| < 2).
  int degenerate_cos = 0;
  bool degenerate_pair = false;

  double at(int t, FeatureKind f) const;
  std::optional<double> find(int t, FeatureKind f) const;
};

/// The (1 + |G|) score evaluations at one (x_t, t) and their transport into
/// the canonical frame.
struct TransportedScores {
  Field reference;                 // s(x_t, t)
  std::vector<Field> transported;  // P_g^{-1} s(P_g x_t, t), canonical order
};

TransportedScores transport_all(const ScoreField& field, const GroupSet& group,
                                const Field& x_t, int t, std::size_t sample = 0);

Field transported_score(const ScoreField& field, const GroupElement& g, const Field& x_t, int t);

/// r = P_g^{-1} s(P_g x_t) - s(x_t); sq_norm(r) = R_t(x_t, g).
Field residual_field(const ScoreField& field, const GroupElement& g, const Field& x_t, int t);

double base_normalizer(const ScoreField& field, const Field& x_t, int t, const PoolSpec& pool);

// Per-draw feature values from one set of transported scores.
double feature_s_from(const TransportedScores& ts, const PoolSpec& pool, double normalizer);
double feature_cos_from(const TransportedScores& ts, int* degenerate = nullptr);
double feature_pair_from(const TransportedScores& ts, const PoolSpec& pool, double normalizer,
                         bool* degenerate = nullptr);

/// Noise draws for one sample: eps for Monte-Carlo index k comes from the
/// counter stream (seed ^ forward-noise domain, sample, k) and is shared by
/// every t and g at that index.
struct NoiseSource {
  std::uint64_t seed = 0;
  std::size_t sample = 0;

  Field eps(const Shape& shape, int mc_index) const;
};

// Single-timestep features averaged over the configured Monte-Carlo draws.
double feature_s(const ScoreField& field, const NoiseSchedule& schedule, const Field& x0, int t,
                 const GepcConfig& cfg, const NoiseSource& noise);
double feature_cos(const ScoreField& field, const NoiseSchedule& schedule, const Field& x0, int t,
                   const GepcConfig& cfg, const NoiseSource& noise);
double feature_pair(const ScoreField& field, const NoiseSchedule& schedule, const Field& x0, int t,
                    const GepcConfig& cfg, const NoiseSource& noise);

struct GepcResult {
  double score = 0.0;  // sum_t w_t z_t^(s)
  FeatureMatrix features;
  ComputeLedger ledger;
};

/// Full per-sample sweep over (mc, t, g). All enabled features reuse the
/// same (1 + |G|) evaluations per (t, draw), so F = (1 + |G|) |T| m, J = 0.
GepcResult gepc_score(const ScoreField& field, const NoiseSchedule& schedule, const Field& x0,
                      const GepcConfig& cfg, const NoiseSource& noise);

/// Channel-averaged |r| averaged over g, t (w_t-weighted) and draws.
SpatialMap residual_map(const ScoreField& field, const NoiseSchedule& schedule, const Field& x0,
                        const GepcConfig& cfg, const NoiseSource& noise);

/// q_p by linear interpolation between order statistics at rank p (n - 1).
double quantile(std::vector<double> values, double p);

struct MapNormalizer {
  double v_global = 0.0;
  bool degenerate = false;
};

/// median over the pool of each map's 0.99-quantile.
MapNormalizer global_map_normalizer(const std::vector<SpatialMap>& id_maps);

}  // namespace gepc
