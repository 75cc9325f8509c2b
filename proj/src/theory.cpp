#include "gepc/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gepc/rng.hpp"

namespace gepc {
namespace {

std::string fmt(const char* pattern, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

double mean_over_g(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

// Scores at x and at every P_g x, the latter transported back.
struct Sweep {
  Field at_x;
  std::vector<Field> transported;  // P_g^{-1} s(P_g x)
  std::vector<Field> at_gx;        // s(P_g x), untransported
};

Sweep sweep(const ScoreField& field, const GroupSet& group, const Field& x, int t) {
  std::vector<Field> inputs{x};
  for (const auto& g : group.elements) inputs.push_back(apply(g, x));
  auto out = field.eval_batch(inputs, t, {});
  Sweep s;
  s.at_x = std::move(out[0]);
  for (std::size_t k = 0; k < group.size(); ++k) {
    s.transported.push_back(inverse_apply(group.elements[k], out[k + 1]));
    s.at_gx.push_back(std::move(out[k + 1]));
  }
  return s;
}

}  // namespace

Estimate estimate(const std::vector<double>& samples) {
  if (samples.empty()) throw Error(ErrorCode::kInsufficientData, "estimate of an empty sample");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= n;
  if (samples.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

double mean_shift_oracle(double mu_sq_norm, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be > 0");
  return 2.0 * mu_sq_norm / std::pow(sigma, 4);
}

double mean_shift_oracle(const Field& mu, double sigma) { return mean_shift_oracle(sq_norm(mu), sigma); }

double c4_oracle(double sigma1, double sigma2) {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigmas must be > 0");
  const double gap = 1.0 / (sigma2 * sigma2) - 1.0 / (sigma1 * sigma1);
  return 0.5 * gap * gap * (sigma1 * sigma1 + sigma2 * sigma2);
}

Estimate residual_energy_mc(const ScoreField& field, const GroupSet& group, int t,
                            const std::function<Field(CounterRng&)>& sampler, std::size_t n,
                            std::uint64_t seed) {
  std::vector<double> per_x(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed ^ seed_domain::kTheory, i);
    const Sweep s = sweep(field, group, sampler(rng), t);
    std::vector<double> r;
    for (const auto& st : s.transported) r.push_back(sq_norm(st - s.at_x));
    per_x[i] = mean_over_g(r);
  }
  return estimate(per_x);
}

Estimate score_energy_mc(const ScoreField& field, int t,
                         const std::function<Field(CounterRng&)>& sampler, std::size_t n,
                         std::uint64_t seed) {
  std::vector<double> per_x(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed ^ seed_domain::kTheory, i);
    per_x[i] = sq_norm(eval_score(field, sampler(rng), t));
  }
  return estimate(per_x);
}

BoundReport verify_residual_bounds(const ScoreField& base_true, const ScoreField& perturbed,
                         const std::function<Field(CounterRng&)>& sampler, const GroupSet& group,
                         int t, std::size_t n, std::uint64_t seed) {
  std::vector<double> b(n), d(n), ee(n), eg(n), r(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed ^ seed_domain::kTheory, i);
    const Field x = sampler(rng);
    const Sweep tru = sweep(base_true, group, x, t);
    const Sweep per = sweep(perturbed, group, x, t);
    const Field e_x = per.at_x - tru.at_x;
    std::vector<double> bg, dg, egg, rg;
    for (std::size_t k = 0; k < group.size(); ++k) {
      const Field ds = tru.transported[k] - tru.at_x;
      const Field de = (per.transported[k] - tru.transported[k]) - e_x;
      bg.push_back(sq_norm(ds));
      dg.push_back(sq_norm(de));
      egg.push_back(sq_norm(per.at_gx[k] - tru.at_gx[k]));
      rg.push_back(sq_norm(per.transported[k] - per.at_x));
    }
    b[i] = mean_over_g(bg);
    d[i] = mean_over_g(dg);
    ee[i] = sq_norm(e_x);
    eg[i] = mean_over_g(egg);
    r[i] = mean_over_g(rg);
    u[i] = 2.0 * b[i] + 4.0 * ee[i] + 4.0 * eg[i];
  }
  BoundReport rep;
  rep.breaking = estimate(b);
  rep.delta_e = estimate(d);
  rep.err_energy = estimate(ee);
  rep.err_energy_g = estimate(eg);
  rep.measured = estimate(r);
  const Estimate ub = estimate(u);
  rep.upper = ub.mean;
  const double bb = rep.breaking.mean;
  const double dd = rep.delta_e.mean;
  rep.lower = std::max(0.0, bb + dd - 2.0 * std::sqrt(bb * dd));
  const double se_r = rep.measured.stderr_;
  rep.upper_slack = 3.0 * std::hypot(se_r, ub.stderr_);
  rep.lower_slack = 3.0 * std::sqrt(se_r * se_r + rep.breaking.stderr_ * rep.breaking.stderr_ +
                                    rep.delta_e.stderr_ * rep.delta_e.stderr_);
  const double tiny = 1e-12 * (1.0 + rep.upper);
  rep.upper_pass = rep.measured.mean <= rep.upper + rep.upper_slack + tiny;
  rep.lower_pass = rep.measured.mean >= rep.lower - rep.lower_slack - tiny;
  return rep;
}

Field CoordinateProjection::operator()(const Field& x) const {
  x.require_same_shape(keep);
  Field out(x.shape());
  out.array() = x.array() * keep.array();
  return out;
}

CrossBackboneReport verify_cross_backbone(const ScoreField& field, const CoordinateProjection& projection,
                                 const GroupSet& group, int t, const std::vector<Field>& points,
                                 double d0, std::optional<double> analytic_lipschitz) {
  if (points.empty()) throw Error(ErrorCode::kInsufficientData, "no points");
  CrossBackboneReport rep;
  for (int probe = 0; probe < 20; ++probe) {
    CounterRng rng(seed_domain::kTheory, 0xC0FFEE, static_cast<std::uint64_t>(probe));
    const Field x = rng.normal_field(points.front().shape());
    for (const auto& g : group.elements) {
      if (std::sqrt(sq_norm(projection(apply(g, x)) - apply(g, projection(x)))) > 1e-10) {
        throw Error(ErrorCode::kInvalidArgument, "projection does not commute with " + to_string(g));
      }
    }
  }
  rep.commutes = true;

  std::vector<double> dist;
  std::vector<double> ratios;
  for (const auto& x : points) {
    const Field px = projection(x);
    const Field off = x - px;
    CrossPoint cp;
    cp.distance = std::sqrt(sq_norm(off));
    const Sweep at_x = sweep(field, group, x, t);
    const Sweep at_p = sweep(field, group, px, t);
    std::vector<double> rx, rp;
    for (std::size_t k = 0; k < group.size(); ++k) {
      rx.push_back(sq_norm(at_x.transported[k] - at_x.at_x));
      rp.push_back(sq_norm(at_p.transported[k] - at_p.at_x));
    }
    cp.residual_x = mean_over_g(rx);
    cp.residual_proj = mean_over_g(rp);
    cp.rho = std::sqrt(cp.residual_proj);
    if (cp.distance > 0.0) {
      const Field ds = at_x.at_x - at_p.at_x;
      cp.directional = -dot(ds, off) / cp.distance;
      ratios.push_back(std::sqrt(sq_norm(ds)) / cp.distance);
    }
    dist.push_back(cp.distance);
    rep.points.push_back(cp);
  }
  rep.lipschitz_estimate = ratios.empty() ? 0.0 : *std::max_element(ratios.begin(), ratios.end());
  rep.lipschitz_used = analytic_lipschitz.value_or(rep.lipschitz_estimate);
  rep.d0 = d0 >= 0.0 ? d0 : 0.5 * quantile(dist, 0.5);

  double num = 0.0;
  double den = 0.0;
  for (const auto& cp : rep.points) {
    if (cp.distance >= rep.d0 && cp.distance > 0.0) {
      num += cp.directional * cp.distance;
      den += cp.distance * cp.distance;
    }
  }
  rep.m_hat = den > 0.0 ? num / den : 0.0;
  const double L = rep.lipschitz_used;
  // Slopes equal up to rounding count as m = L: the lower bound is vacuous there.
  const bool lower_applies = rep.m_hat > L * (1.0 + 1e-9);

  std::size_t upper_ok = 0;
  std::size_t lower_total = 0;
  std::size_t lower_ok = 0;
  for (auto& cp : rep.points) {
    const double bound = 2.0 * cp.residual_proj + 8.0 * L * L * cp.distance * cp.distance;
    cp.upper_ok = cp.residual_x <= bound + 1e-12 * (1.0 + bound);
    upper_ok += cp.upper_ok ? 1 : 0;
    if (lower_applies && cp.distance >= rep.d0) {
      const double gap = std::max(0.0, (rep.m_hat - L) * cp.distance - cp.rho);
      cp.lower_ok = cp.residual_x + 1e-12 >= gap * gap;
      ++lower_total;
      lower_ok += *cp.lower_ok ? 1 : 0;
    }
  }
  rep.upper_pass_rate = static_cast<double>(upper_ok) / static_cast<double>(rep.points.size());
  if (lower_total > 0) rep.lower_pass_rate = static_cast<double>(lower_ok) / static_cast<double>(lower_total);
  return rep;
}

EquivarianceReport equivariance_check(const ScoreField& field, const GroupSet& group,
                                      const std::vector<Field>& probes, const std::vector<int>& t_list,
                                      double tol) {
  EquivarianceReport rep;
  for (int t : t_list)
    for (const auto& x : probes) {
      const Sweep s = sweep(field, group, x, t);
      for (std::size_t k = 0; k < group.size(); ++k) {
        const double dev = std::sqrt(sq_norm(s.at_gx[k] - apply(group.elements[k], s.at_x)));
        rep.max_deviation = std::max(rep.max_deviation, dev);
      }
    }
  rep.pass = rep.max_deviation <= tol;
  return rep;
}

Field gaussian_posterior_mean(const GaussianSpec& spec, const NoiseSchedule& schedule,
                              const Field& x_t, int t) {
  const double a = schedule.sqrt_alpha_bar(t);
  const double s2 = schedule.sigma_sq(t);
  Field out(x_t.shape());
  out.array() = (s2 * spec.mean.array() + a * spec.variance.array() * x_t.array()) /
                (s2 + a * a * spec.variance.array());
  return out;
}

IdentityReport identity_checks(const ScoreField& field, const GaussianSpec& spec,
                               const NoiseSchedule& schedule, const std::vector<Field>& probes,
                               const std::vector<int>& t_list) {
  IdentityReport rep;
  constexpr double kStep = 1e-4;
  for (int t : t_list) {
    const double a = schedule.sqrt_alpha_bar(t);
    const double tilde_sq = schedule.sigma_sq(t) / schedule.alpha_bar(t);
    const Field cov = posterior_cov_gaussian(spec, schedule, t);
    for (const auto& x : probes) {
      const Field tw = tweedie_denoise(field, schedule, x, t);
      const Field ref = gaussian_posterior_mean(spec, schedule, x, t);
      rep.tweedie_max_error = std::max(rep.tweedie_max_error, (tw - ref).array().abs().maxCoeff());

      // Denoiser as a function of y = x / sqrt(alpha_bar); its Jacobian times
      // sigma_tilde^2 is the posterior covariance.
      Field y = x;
      y *= 1.0 / a;
      for (Eigen::Index n = 0; n < y.size(); ++n) {
        Field up = y;
        Field down = y;
        up.array()[n] += kStep;
        down.array()[n] -= kStep;
        up *= a;
        down *= a;
        const double deriv = (tweedie_denoise(field, schedule, up, t).array()[n] -
                              tweedie_denoise(field, schedule, down, t).array()[n]) /
                             (2.0 * kStep);
        const double exact = cov.array()[n];
        rep.covariance_max_rel_error =
            std::max(rep.covariance_max_rel_error, std::abs(tilde_sq * deriv - exact) / std::abs(exact));
      }
    }
  }
  rep.tweedie_pass = rep.tweedie_max_error <= 1e-8;
  rep.covariance_pass = rep.covariance_max_rel_error <= 1e-4;
  return rep;
}

const std::vector<std::string>& sanity_check_names() {
  static const std::vector<std::string> names{"mean_shift",     "c4",      "magnitude",     "sandwich",
                                              "cross_backbone", "tweedie", "posterior_cov", "equivariance"};
  return names;
}

namespace {

using Sampler = std::function<Field(CounterRng&)>;

Sampler gaussian_sampler(const GaussianSpec& spec) {
  return [spec](CounterRng& rng) {
    Field x(spec.shape());
    for (Eigen::Index n = 0; n < x.size(); ++n) {
      x.array()[n] = spec.mean.array()[n] + std::sqrt(spec.variance.array()[n]) * rng.normal();
    }
    return x;
  };
}

bool within_rel(double measured, double expected, double rel) {
  return std::abs(measured - expected) <= rel * std::abs(expected);
}

void add_mean_shift(std::vector<SanityRow>& rows, const SanityOptions& opt, const NoiseSchedule& sch) {
  const GroupSet g{{GroupElement::identity(), GroupElement::negate()}, {}};
  for (double mu_sq : {0.0, 1.0, 4.0}) {
    // Mean along the all-ones direction of a 1x1x8 field, sigma = 1.
    const Shape shape{1, 1, 8};
    const GaussianSpec spec = GaussianSpec::isotropic(Field::constant(shape, std::sqrt(mu_sq / 8.0)), 1.0);
    GaussianScore field(spec, sch);
    const Estimate e = residual_energy_mc(field, g, 0, gaussian_sampler(spec), opt.mc_draws, opt.seed);
    const double expected = mean_shift_oracle(spec.mean, 1.0);
    const bool pass = mu_sq == 0.0 ? e.mean == 0.0 : within_rel(e.mean, expected, 0.02);
    rows.push_back({"mean_shift[mu_sq=" + fmt("%g", mu_sq) + "]", expected, e.mean, e.stderr_, pass, ""});
  }
}

void add_c4(std::vector<SanityRow>& rows, const SanityOptions& opt, const NoiseSchedule& sch) {
  GroupSet g;
  g.elements = {GroupElement::identity(), GroupElement::planar_rot90(1), GroupElement::planar_rot90(2),
                GroupElement::planar_rot90(3)};
  const Shape shape{1, 1, 2};
  for (double s2 : {2.0, 1.0}) {
    GaussianSpec spec{Field(shape), Field(shape)};
    spec.variance.array() << 1.0, s2 * s2;
    GaussianScore field(spec, sch);
    const Estimate e = residual_energy_mc(field, g, 0, gaussian_sampler(spec), opt.mc_draws, opt.seed);
    const double expected = c4_oracle(1.0, s2);
    const bool pass = s2 == 1.0 ? std::abs(e.mean) < 1e-3 : within_rel(e.mean, expected, 0.02);
    rows.push_back({"c4[sigma2=" + fmt("%g", s2) + "]", expected, e.mean, e.stderr_, pass, ""});
  }
}

void add_magnitude(std::vector<SanityRow>& rows, const SanityOptions& opt, const NoiseSchedule& sch) {
  const GroupSet g{{GroupElement::identity(), GroupElement::negate()}, {}};
  const Shape shape{1, 1, 8};
  const GaussianSpec centered = GaussianSpec::isotropic(Field(shape), 1.0);
  const GaussianSpec shifted = GaussianSpec::isotropic(Field::constant(shape, 2.0 / std::sqrt(8.0)), 1.0);
  GaussianScore f0(centered, sch);
  GaussianScore f1(shifted, sch);
  const Estimate n0 = score_energy_mc(f0, 0, gaussian_sampler(centered), opt.mc_draws, opt.seed);
  const Estimate n1 = score_energy_mc(f1, 0, gaussian_sampler(shifted), opt.mc_draws, opt.seed + 1);
  const double se = std::hypot(n0.stderr_, n1.stderr_);
  rows.push_back({"magnitude[score_energy]", n0.mean, n1.mean, se, std::abs(n1.mean - n0.mean) <= 3.0 * se,
                  "E|s|^2 at |mu|=0 (expected) vs |mu|=2 (measured)"});
  const Estimate r0 = residual_energy_mc(f0, g, 0, gaussian_sampler(centered), opt.mc_draws, opt.seed);
  const Estimate r1 = residual_energy_mc(f1, g, 0, gaussian_sampler(shifted), opt.mc_draws, opt.seed + 1);
  rows.push_back({"magnitude[residual]", r0.mean, r1.mean, std::hypot(r0.stderr_, r1.stderr_),
                  r1.mean > 10.0 * r0.mean, "residual at |mu|=0 (expected) vs |mu|=2 (measured), factor > 10"});
}

void add_sandwich(std::vector<SanityRow>& rows, const SanityOptions& opt, const NoiseSchedule& sch) {
  const Shape shape{1, 4, 4};
  const GroupSet full = default_group(4, 4);
  const int t_choices[] = {5, 15, 136, 172, 500};
  const std::size_t n = std::max<std::size_t>(50, std::min<std::size_t>(400, opt.mc_draws / 250));
  for (int inst = 0; inst < 50; ++inst) {
    CounterRng rng(opt.seed ^ seed_domain::kTheory, 1000 + static_cast<std::uint64_t>(inst));
    GmmSpec gmm;
    const int k = 1 + static_cast<int>(rng.below(3));
    double wsum = 0.0;
    for (int c = 0; c < k; ++c) {
      Field mean = rng.normal_field(shape);
      mean *= 0.3 + rng.uniform();
      Field var(shape);
      for (auto& v : var.array()) v = 0.2 + 0.8 * rng.uniform();
      gmm.components.push_back({std::move(mean), std::move(var)});
      gmm.weights.push_back(0.5 + rng.uniform());
      wsum += gmm.weights.back();
    }
    for (auto& w : gmm.weights) w /= wsum;

    GroupSet group;
    group.elements.push_back(GroupElement::identity());
    for (std::size_t e = 1; e < full.size(); ++e)
      if (rng.uniform() < 0.5) group.elements.push_back(full.elements[e]);
    if (group.size() == 1) group.elements.push_back(full.elements[1 + rng.below(full.size() - 1)]);
    if (inst % 5 == 0) gmm = symmetrize(gmm, group);
    const int t = t_choices[rng.below(5)];

    auto base = std::make_shared<GmmScore>(gmm, sch);
    std::shared_ptr<const ErrorField> err;
    const double amp = 0.1 + 1.9 * rng.uniform();
    const auto err_seed = opt.seed + static_cast<std::uint64_t>(inst);
    const int kind = inst % 4;
    std::string kind_name = "zero";
    if (kind == 1) {
      Field c = rng.normal_field(shape);
      c *= amp;
      err = std::make_shared<ConstantError>(std::move(c));
      kind_name = "constant";
    } else if (kind == 2) {
      err = std::make_shared<SmoothError>(shape, amp, 3, err_seed);
      kind_name = "smooth";
    } else if (kind == 3) {
      err = std::make_shared<NoiseError>(shape, amp, 1, err_seed);
      kind_name = "noise";
    }
    std::shared_ptr<const ScoreField> perturbed = base;
    if (err) perturbed = std::make_shared<PerturbedScore>(base, err);
    const Sampler sampler = [&gmm, &sch, t](CounterRng& r) { return sample_marginal(gmm, sch, t, r); };
    const BoundReport rep = verify_residual_bounds(*base, *perturbed, sampler, group, t, n, err_seed);
    char note[160];
    std::snprintf(note, sizeof note, "%s |G|=%zu t=%d l_b=%.6g u_b=%.6g", kind_name.c_str(), group.size(), t,
                  rep.lower, rep.upper);
    rows.push_back({"sandwich[" + std::to_string(inst) + "]", rep.upper, rep.measured.mean,
                    rep.measured.stderr_, rep.pass(), note});
    if (kind == 0) {
      const double se = std::hypot(rep.measured.stderr_, rep.breaking.stderr_);
      rows.push_back({"sandwich_zero[" + std::to_string(inst) + "]", rep.breaking.mean, rep.measured.mean, se,
                      std::abs(rep.measured.mean - rep.breaking.mean) <= 3.0 * se + 1e-12, "measured vs B"});
    }
  }
}

void add_cross_backbone(std::vector<SanityRow>& rows, const SanityOptions& opt, const NoiseSchedule& sch) {
  const Shape shape{1, 3, 3};
  const double eps = 0.1;
  GaussianSpec spec = GaussianSpec::isotropic(Field(shape), 1.0);
  spec.variance(0, 1, 1) = eps * eps;
  GaussianScore field(spec, sch);
  CoordinateProjection proj{Field::constant(shape, 1.0)};
  proj.keep(0, 1, 1) = 0.0;
  const GroupSet group{{GroupElement::identity(), GroupElement::flip_x(), GroupElement::flip_y(),
                        GroupElement::rot180()},
                       {}};
  for (int t : {15, 136}) {
    const Field var = field.diffused_variance(t);
    std::vector<Field> points;
    for (std::size_t i = 0; i < 1000; ++i) {
      CounterRng rng(opt.seed ^ seed_domain::kTheory, 5000 + i, static_cast<std::uint64_t>(t));
      Field x(shape);
      for (Eigen::Index n = 0; n < x.size(); ++n) x.array()[n] = std::sqrt(var.array()[n]) * rng.normal();
      points.push_back(std::move(x));
    }
    const double L = 1.0 / (sch.alpha_bar(t) * eps * eps + sch.sigma_sq(t));
    const auto rep = verify_cross_backbone(field, proj, group, t, points, -1.0, L);
    char note[160];
    std::snprintf(note, sizeof note, "L=%.6g m_hat=%.6g lower=%s", L, rep.m_hat,
                  rep.lower_pass_rate ? "applicable" : "not-applicable");
    rows.push_back({"cross_backbone[t=" + std::to_string(t) + "]", 1.0, rep.upper_pass_rate, 0.0,
                    rep.upper_pass_rate == 1.0, note});
  }
}

GaussianSpec identity_spec() {
  const Shape shape{2, 3, 3};
  GaussianSpec spec{Field(shape), Field(shape)};
  CounterRng rng(seed_domain::kTheory, 77);
  for (Eigen::Index n = 0; n < spec.mean.size(); ++n) {
    spec.mean.array()[n] = rng.normal();
    spec.variance.array()[n] = 0.25 + rng.uniform();
  }
  return spec;
}

std::vector<Field> identity_probes(const Shape& shape, std::uint64_t seed) {
  std::vector<Field> probes;
  for (std::uint64_t i = 0; i < 8; ++i) {
    CounterRng rng(seed ^ seed_domain::kTheory, 9000 + i);
    probes.push_back(rng.normal_field(shape));
  }
  return probes;
}

void add_identities(std::vector<SanityRow>& rows, const SanityOptions& opt, const NoiseSchedule& sch,
                    bool tweedie, bool cov) {
  const GaussianSpec spec = identity_spec();
  std::shared_ptr<const ScoreField> field = std::make_shared<GaussianScore>(spec, sch);
  if (opt.score_scale != 1.0) field = std::make_shared<ScaledScore>(field, opt.score_scale);
  const auto probes = identity_probes(spec.shape(), opt.seed);
  const std::vector<int> ts{1, 5, 15, 136, 172, 500, 999};
  const IdentityReport rep = identity_checks(*field, spec, sch, probes, ts);
  if (tweedie) rows.push_back({"tweedie", 0.0, rep.tweedie_max_error, 0.0, rep.tweedie_pass, "max abs error, tol 1e-8"});
  if (cov) {
    rows.push_back({"posterior_cov", 0.0, rep.covariance_max_rel_error, 0.0, rep.covariance_pass,
                    "max relative error, tol 1e-4"});
  }
}

void add_equivariance(std::vector<SanityRow>& rows, const SanityOptions& opt, const NoiseSchedule& sch) {
  const Shape shape{3, 8, 8};
  GmmSpec base;
  for (std::uint64_t k = 0; k < 3; ++k) {
    CounterRng rng(opt.seed ^ seed_domain::kTheory, 7000 + k);
    Field mean = rng.normal_field(shape);
    mean *= 0.5;
    base.components.push_back(GaussianSpec::isotropic(std::move(mean), 0.09));
    base.weights.push_back(1.0 / 3.0);
  }
  const GroupSet group = default_group(8, 8);
  GmmScore field(symmetrize(base, group), sch);
  const auto probes = identity_probes(shape, opt.seed);
  const auto rep = equivariance_check(field, group, probes, {1, 5, 15, 136, 172, 500, 999}, 1e-10);
  rows.push_back({"equivariance", 0.0, rep.max_deviation, 0.0, rep.pass, "max |s(Px) - P s(x)|, tol 1e-10"});
}

}  // namespace

std::vector<SanityRow> run_sanity(const SanityOptions& opt) {
  const auto& names = sanity_check_names();
  if (!opt.only.empty() && std::find(names.begin(), names.end(), opt.only) == names.end()) {
    throw Error(ErrorCode::kConfig, "unknown sanity check '" + opt.only + "'");
  }
  const auto want = [&](const char* name) { return opt.only.empty() || opt.only == name; };
  const NoiseSchedule sch = default_schedule();
  std::vector<SanityRow> rows;
  if (want("mean_shift")) add_mean_shift(rows, opt, sch);
  if (want("c4")) add_c4(rows, opt, sch);
  if (want("magnitude")) add_magnitude(rows, opt, sch);
  if (want("sandwich")) add_sandwich(rows, opt, sch);
  if (want("cross_backbone")) add_cross_backbone(rows, opt, sch);
  if (want("tweedie") || want("posterior_cov")) {
    add_identities(rows, opt, sch, want("tweedie"), want("posterior_cov"));
  }
  if (want("equivariance")) add_equivariance(rows, opt, sch);
  return rows;
}

}  // namespace gepc
