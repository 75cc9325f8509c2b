#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gepc/gepc.hpp"
#include "gepc/scorefield.hpp"

namespace gepc {

/// Sample mean and its standard error.
struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

Estimate estimate(const std::vector<double>& samples);

/// 2 |mu|^2 / sigma^4: group-averaged residual of N(mu, sigma^2 I) under {Id, -Id}.
double mean_shift_oracle(const Field& mu, double sigma);
double mean_shift_oracle(double mu_sq_norm, double sigma);

/// 1/2 (sigma2^-2 - sigma1^-2)^2 (sigma1^2 + sigma2^2): group-averaged residual
/// of N(0, diag(sigma1^2, sigma2^2)) under planar C4.
double c4_oracle(double sigma1, double sigma2);

/// Monte-Carlo E_{x ~ sampler, g ~ U(G)} R_t(x, g).
Estimate residual_energy_mc(const ScoreField& field, const GroupSet& group, int t,
                            const std::function<Field(CounterRng&)>& sampler, std::size_t n,
                            std::uint64_t seed);

/// Monte-Carlo E ||s(x)||^2.
Estimate score_energy_mc(const ScoreField& field, int t,
                         const std::function<Field(CounterRng&)>& sampler, std::size_t n,
                         std::uint64_t seed);

struct BoundReport {
  Estimate breaking;        // B^(G)
  Estimate delta_e;         // Delta_E
  Estimate err_energy;      // E ||e(x)||^2
  Estimate err_energy_g;    // E_g ||e(P_g x)||^2
  Estimate measured;        // E R_t
  double upper = 0.0;       // u_b
  double lower = 0.0;       // l_b
  double upper_slack = 0.0; // 3 sigma allowance
  double lower_slack = 0.0;
  bool upper_pass = false;
  bool lower_pass = false;

  bool pass() const { return upper_pass && lower_pass; }
};

/// Expected residual sandwich l_b <= E R <= u_b, with the error field
/// e = perturbed - base computed exactly per point.
BoundReport verify_residual_bounds(const ScoreField& base_true, const ScoreField& perturbed,
                         const std::function<Field(CounterRng&)>& sampler, const GroupSet& group,
                         int t, std::size_t n, std::uint64_t seed);

struct CrossPoint {
  double distance = 0.0;       // d_t(x)
  double residual_x = 0.0;     // E_g R(x)
  double residual_proj = 0.0;  // E_g R(pi(x))
  double rho = 0.0;            // sqrt(residual_proj)
  double directional = 0.0;    // -<s(x) - s(pi x), n>
  bool upper_ok = false;
  std::optional<bool> lower_ok;
};

struct CrossBackboneReport {
  std::vector<CrossPoint> points;
  double lipschitz_estimate = 0.0;  // max observed ratio (a lower bound on L)
  double lipschitz_used = 0.0;      // analytic L when supplied, else the estimate
  double m_hat = 0.0;
  double d0 = 0.0;
  double upper_pass_rate = 0.0;
  std::optional<double> lower_pass_rate;  // empty when m_hat <= L (not applicable)
  bool commutes = false;
};

/// Orthogonal projection onto the coordinates where `keep` is nonzero.
struct CoordinateProjection {
  Field keep;  // entries 0 or 1
  Field operator()(const Field& x) const;
};

/// Cross-backbone pointwise bounds on `points`. Fails with kInvalidArgument
/// when the projection does not commute with every element (tolerance 1e-10
/// at 20 random probes). d0 < 0 selects 0.5 * median(d).
CrossBackboneReport verify_cross_backbone(const ScoreField& field, const CoordinateProjection& projection,
                                 const GroupSet& group, int t, const std::vector<Field>& points,
                                 double d0 = -1.0, std::optional<double> analytic_lipschitz = {});

struct EquivarianceReport {
  double max_deviation = 0.0;
  bool pass = false;
};

/// max over probes, t and g of ||s(P_g x) - P_g s(x)||.
EquivarianceReport equivariance_check(const ScoreField& field, const GroupSet& group,
                                      const std::vector<Field>& probes, const std::vector<int>& t_list,
                                      double tol);

struct IdentityReport {
  double tweedie_max_error = 0.0;     // vs Gaussian conditioning
  double covariance_max_rel_error = 0.0;
  bool tweedie_pass = false;
  bool covariance_pass = false;
};

/// Posterior mean via Gaussian conditioning (independent of the score route).
Field gaussian_posterior_mean(const GaussianSpec& spec, const NoiseSchedule& schedule,
                              const Field& x_t, int t);

/// Tweedie vs conditioning (1e-8) and sigma_tilde^2 x finite-difference Jacobian
/// diagonal of the rescaled denoiser vs the posterior covariance (1e-4 rel).
/// `field` is the score route under test; `spec` the Gaussian it should match.
IdentityReport identity_checks(const ScoreField& field, const GaussianSpec& spec,
                               const NoiseSchedule& schedule, const std::vector<Field>& probes,
                               const std::vector<int>& t_list);

struct SanityRow {
  std::string name;
  double expected = 0.0;
  double measured = 0.0;
  double stderr_ = 0.0;
  bool pass = false;
  std::string note;
};

struct SanityOptions {
  std::string only;          // empty: all; else a check-group name
  double score_scale = 1.0;  // fault injection for the identity checks
  std::uint64_t seed = 20240601;
  std::size_t mc_draws = 100000;
};

/// Names accepted by SanityOptions::only.
const std::vector<std::string>& sanity_check_names();

std::vector<SanityRow> run_sanity(const SanityOptions& options);

}  // namespace gepc
