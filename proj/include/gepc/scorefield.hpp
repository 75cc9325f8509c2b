#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include "gepc/group.hpp"
#include "gepc/rng.hpp"
#include "gepc/schedule.hpp"
#include "gepc/tensor.hpp"

namespace gepc {

/// Diagonal Gaussian N(mean, diag(variance)) over Field-shaped vectors.
struct GaussianSpec {
  Field mean;
  Field variance;

  static GaussianSpec isotropic(Field mean, double variance);
  const Shape& shape() const { return mean.shape(); }
  void validate() const;
};

struct GmmSpec {
  std::vector<double> weights;
  std::vector<GaussianSpec> components;

  const Shape& shape() const { return components.at(0).shape(); }
  void validate() const;
};

/// Weighted union of mixtures; `mixing` is normalised internally.
GmmSpec combine(const std::vector<GmmSpec>& parts, const std::vector<double>& mixing);

/// Orbit expansion under the group generated by `group`: every component is
/// replaced by its images under each element, weights divided by the group
/// order, and exact duplicates merged. The resulting marginal is invariant
/// under every generated element at every t.
GmmSpec symmetrize(const GmmSpec& spec, const GroupSet& group);

/// Identifies one evaluation inside a GEPC sweep: g = 0 is the reference
/// evaluation at x_t, g = k >= 1 the evaluation at P_{g_k} x_t for the k-th
/// element of the group in canonical order.
struct EvalKey {
  std::size_t sample = 0;
  int g = 0;
};

/// Evaluable score field s(x, t).
class ScoreField {
 public:
  virtual ~ScoreField() = default;

  /// Scores of every input at step t. `keys` is either empty or one per input.
  virtual std::vector<Field> eval_batch(std::span<const Field> xs, int t,
                                        std::span<const EvalKey> keys) const = 0;

  /// False when evaluations must be serialised (bridge-backed fields).
  virtual bool concurrent() const { return true; }
};

Field eval_score(const ScoreField& field, const Field& x, int t, EvalKey key = {});

/// Exact score of the DDPM-diffused diagonal Gaussian:
/// s(x) = -(alpha_bar Sigma0 + sigma^2 I)^{-1} (x - sqrt(alpha_bar) mu0).
class GaussianScore final : public ScoreField {
 public:
  GaussianScore(GaussianSpec spec, NoiseSchedule schedule);

  std::vector<Field> eval_batch(std::span<const Field> xs, int t,
                                std::span<const EvalKey> keys) const override;

  const GaussianSpec& spec() const { return spec_; }
  const NoiseSchedule& schedule() const { return schedule_; }

  /// Diagonal of the time-t marginal covariance.
  Field diffused_variance(int t) const;

 private:
  GaussianSpec spec_;
  NoiseSchedule schedule_;
};

/// Exact score of a DDPM-diffused diagonal GMM, evaluated in batches as
/// dense matrix products over the (component x entry) tables of step t.
class GmmScore final : public ScoreField {
 public:
  GmmScore(GmmSpec spec, NoiseSchedule schedule);

  std::vector<Field> eval_batch(std::span<const Field> xs, int t,
                                std::span<const EvalKey> keys) const override;

  /// log p_t(x) of the diffused mixture.
  double log_density(const Field& x, int t) const;

  const GmmSpec& spec() const { return spec_; }
  const NoiseSchedule& schedule() const { return schedule_; }

 private:
  struct Tables {
    Eigen::MatrixXd precision;  // K x d, 1 / (a^2 v + sigma^2)
    Eigen::MatrixXd linear;     // K x d, precision * a * mu
    Eigen::VectorXd offset;     // K, log w - 1/2 sum log(2 pi V) - 1/2 sum P (a mu)^2
  };

  std::shared_ptr<const Tables> tables(int t) const;
  Eigen::MatrixXd log_joint(const Tables& tab, const Eigen::MatrixXd& x) const;

  GmmSpec spec_;
  NoiseSchedule schedule_;
  Eigen::MatrixXd means_;      // K x d
  Eigen::MatrixXd variances_;  // K x d
  mutable std::mutex mutex_;
  mutable std::map<int, std::shared_ptr<const Tables>> cache_;
};

/// Replays stored evaluations keyed by (sample, g, t); inputs are ignored.
class TabulatedScore final : public ScoreField {
 public:
  TabulatedScore() = default;
  /// Loads every `score_<sample>_<g>_<t>.gtf` in `dir`.
  static TabulatedScore load(const std::filesystem::path& dir);

  void insert(std::size_t sample, int g, int t, Field score);
  std::size_t size() const { return table_.size(); }

  std::vector<Field> eval_batch(std::span<const Field> xs, int t,
                                std::span<const EvalKey> keys) const override;

  static std::string file_name(std::size_t sample, int g, int t);

 private:
  std::map<std::tuple<std::size_t, int, int>, Field> table_;
};

/// Additive error generator e(x, t) for perturbed fields.
class ErrorField {
 public:
  virtual ~ErrorField() = default;
  virtual Field operator()(const Field& x, int t) const = 0;
};

/// e(x) = c for a fixed field c.
class ConstantError final : public ErrorField {
 public:
  explicit ConstantError(Field value) : value_(std::move(value)) {}
  Field operator()(const Field& x, int t) const override;

 private:
  Field value_;
};

/// Low-frequency sinusoids with seeded phases and a mild dependence on x:
/// e(x)[c,i,j] = amp/n sum_k sin(2 pi (fy_k i/H + fx_k j/W) + phi_k + kappa_k x[c,i,j]),
/// fx_k, fy_k in {0, 1, 2}, kappa_k in [0, 1).
class SmoothError final : public ErrorField {
 public:
  SmoothError(const Shape& shape, double amplitude, int waves, std::uint64_t seed);
  Field operator()(const Field& x, int t) const override;

 private:
  struct Wave {
    int fx = 0;
    int fy = 0;
    double phase = 0.0;
    double coupling = 0.0;
  };
  Shape shape_;
  double amplitude_;
  std::vector<Wave> waves_;
};

/// Seeded iid Gaussian field, box-blurred with radius `bandwidth` within each
/// channel (circular boundary), scaled to amplitude. Independent of x.
class NoiseError final : public ErrorField {
 public:
  NoiseError(const Shape& shape, double amplitude, int bandwidth, std::uint64_t seed);
  Field operator()(const Field& x, int t) const override;

 private:
  Field value_;
};

/// s(x) = base(x) + e(x).
class PerturbedScore final : public ScoreField {
 public:
  PerturbedScore(std::shared_ptr<const ScoreField> base, std::shared_ptr<const ErrorField> error)
      : base_(std::move(base)), error_(std::move(error)) {}

  std::vector<Field> eval_batch(std::span<const Field> xs, int t,
                                std::span<const EvalKey> keys) const override;
  bool concurrent() const override { return base_->concurrent(); }

 private:
  std::shared_ptr<const ScoreField> base_;
  std::shared_ptr<const ErrorField> error_;
};

/// lambda * base(x); used for scale-invariance checks and fault injection.
class ScaledScore final : public ScoreField {
 public:
  ScaledScore(std::shared_ptr<const ScoreField> base, double scale)
      : base_(std::move(base)), scale_(scale) {}

  std::vector<Field> eval_batch(std::span<const Field> xs, int t,
                                std::span<const EvalKey> keys) const override;
  bool concurrent() const override { return base_->concurrent(); }

 private:
  std::shared_ptr<const ScoreField> base_;
  double scale_;
};

/// E[x0 | x_t] = (x_t + sigma_t^2 s(x_t)) / sqrt(alpha_bar_t).
Field tweedie_denoise(const ScoreField& field, const NoiseSchedule& schedule, const Field& x, int t);

/// Cov(x0 | x_t) = (Sigma0^{-1} + sigma_tilde^{-2} I)^{-1} with
/// sigma_tilde^2 = sigma_t^2 / alpha_bar_t; returned as its diagonal.
Field posterior_cov_gaussian(const GaussianSpec& spec, const NoiseSchedule& schedule, int t);

/// One draw from the time-t marginal of the mixture.
Field sample_marginal(const GmmSpec& spec, const NoiseSchedule& schedule, int t, CounterRng& rng);

}  // namespace gepc
