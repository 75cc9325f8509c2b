#include "gepc/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gepc/kvfile.hpp"

namespace gepc {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) {
  if (betas.empty()) throw Error(ErrorCode::kInvalidArgument, "schedule needs T >= 1");
  beta_.reserve(betas.size() + 1);
  beta_.push_back(0.0);
  alpha_bar_.push_back(1.0);
  sigma_sq_.push_back(0.0);
  double prod = 1.0;
  for (double b : betas) {
    if (!(b > 0.0 && b < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "beta must lie in (0, 1)");
    }
    prod *= 1.0 - b;
    beta_.push_back(b);
    alpha_bar_.push_back(prod);
    sigma_sq_.push_back(1.0 - prod);
  }
}

std::size_t NoiseSchedule::checked(int t) const {
  if (t < 0 || t > steps()) {
    throw Error(ErrorCode::kOutOfRange,
                "timestep " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + "]");
  }
  return static_cast<std::size_t>(t);
}

void NoiseSchedule::require_step(int t) const {
  if (t < 1 || t > steps()) {
    throw Error(ErrorCode::kOutOfRange,
                "timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
  }
}

NoiseSchedule linear_schedule(int steps, double beta1, double beta_final) {
  if (steps < 1) throw Error(ErrorCode::kInvalidArgument, "schedule needs T >= 1");
  if (!(beta1 > 0.0 && beta1 <= beta_final && beta_final < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "need 0 < beta1 <= betaT < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(k) / (steps - 1);
    betas[static_cast<std::size_t>(k)] = beta1 + (beta_final - beta1) * frac;
  }
  return NoiseSchedule(std::move(betas));
}

NoiseSchedule default_schedule() { return linear_schedule(1000, 1e-4, 0.02); }

const std::vector<int>& default_candidate_timesteps() {
  static const std::vector<int> kCandidates{5, 15, 136, 172};
  return kCandidates;
}

double snr(const NoiseSchedule& schedule, int t) {
  schedule.require_step(t);
  return schedule.alpha_bar(t) / schedule.sigma_sq(t);
}

std::vector<int> map_levels_to_timesteps(const NoiseSchedule& schedule,
                                         const std::vector<double>& levels) {
  if (levels.empty()) throw Error(ErrorCode::kInvalidArgument, "no schedule levels given");
  std::vector<int> out;
  for (double level : levels) {
    if (!(level > 0.0 && level < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "levels must lie in (0, 1)");
    }
    int best = 1;
    double best_gap = std::numeric_limits<double>::infinity();
    for (int t = 1; t <= schedule.steps(); ++t) {
      const double gap = std::abs(schedule.sqrt_alpha_bar(t) - level);
      if (gap < best_gap) {  // strict: ties keep the smaller t
        best_gap = gap;
        best = t;
      }
    }
    if (std::find(out.begin(), out.end(), best) == out.end()) out.push_back(best);
  }
  return out;
}

std::vector<double> parse_levels(std::string_view spec) {
  std::string s = trim(spec);
  const bool is_snr = s.rfind("snr:", 0) == 0;
  if (is_snr) s = s.substr(4);
  std::vector<double> levels = parse_double_list(s);
  if (is_snr) {
    for (double& v : levels) {
      if (!(v > 0.0)) throw Error(ErrorCode::kConfig, "SNR targets must be positive");
      v = std::sqrt(v / (1.0 + v));
    }
  }
  return levels;
}

Field forward_sample(const NoiseSchedule& schedule, const Field& x0, int t, const Field& eps) {
  schedule.require_step(t);
  x0.require_same_shape(eps);
  Field out(x0.shape());
  out.array() = schedule.sqrt_alpha_bar(t) * x0.array() + schedule.sigma(t) * eps.array();
  return out;
}

}  // namespace gepc
