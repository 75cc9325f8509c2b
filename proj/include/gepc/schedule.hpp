#pragma once

#include <string_view>
#include <vector>

#include "gepc/tensor.hpp"

namespace gepc {

/// Discrete DDPM schedule for t = 1..T.
///
/// Index 0 is the clean-data convention (alpha_bar = 1, sigma = 0); it is
/// accepted by the accessors below and by the analytic score fields, but not
/// by snr() or forward_sample().
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> betas);

  int steps() const { return static_cast<int>(beta_.size()) - 1; }

  double beta(int t) const { return beta_.at(checked(t)); }
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const { return alpha_bar_.at(checked(t)); }
  double sqrt_alpha_bar(int t) const { return std::sqrt(alpha_bar(t)); }
  /// sigma_t^2 = 1 - alpha_bar_t.
  double sigma_sq(int t) const { return sigma_sq_.at(checked(t)); }
  double sigma(int t) const { return std::sqrt(sigma_sq(t)); }

  void require_step(int t) const;

 private:
  std::size_t checked(int t) const;

  std::vector<double> beta_;       // beta_[0] = 0
  std::vector<double> alpha_bar_;  // alpha_bar_[0] = 1
  std::vector<double> sigma_sq_;
};

NoiseSchedule linear_schedule(int steps, double beta1, double beta_final);
/// Linear, T = 1000, beta in [1e-4, 0.02].
NoiseSchedule default_schedule();

/// Candidate probe steps of the 32x32 runs for the default schedule.
const std::vector<int>& default_candidate_timesteps();

/// alpha_bar_t / (1 - alpha_bar_t), for 1 <= t <= T.
double snr(const NoiseSchedule& schedule, int t);

/// Nearest t on sqrt(alpha_bar_t) for each level; ties go to the smaller t;
/// duplicates are dropped keeping the first occurrence.
std::vector<int> map_levels_to_timesteps(const NoiseSchedule& schedule,
                                         const std::vector<double>& levels);

/// Parses "0.99,0.9" as sqrt(alpha_bar) levels or "snr:99,9" as SNR targets
/// (converted through alpha_bar = SNR / (1 + SNR)).
std::vector<double> parse_levels(std::string_view spec);

/// sqrt(alpha_bar_t) x0 + sigma_t eps.
Field forward_sample(const NoiseSchedule& schedule, const Field& x0, int t, const Field& eps);

}  // namespace gepc
