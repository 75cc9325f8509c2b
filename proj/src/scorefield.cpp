#include "gepc/scorefield.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <regex>

#include "gepc/gtf.hpp"

namespace gepc {
namespace {

void require_keys(std::span<const Field> xs, std::span<const EvalKey> keys) {
  if (!keys.empty() && keys.size() != xs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "eval_batch: one key per input required");
  }
}

void require_finite(const Field& f, const char* what) {
  if (!f.all_finite()) throw Error(ErrorCode::kDegenerate, std::string(what) + ": non-finite score");
}

Eigen::RowVectorXd as_row(const Field& f) {
  return Eigen::Map<const Eigen::RowVectorXd>(f.array().data(), f.size());
}

}  // namespace

GaussianSpec GaussianSpec::isotropic(Field mean, double variance) {
  Field var = Field::constant(mean.shape(), variance);
  return GaussianSpec{std::move(mean), std::move(var)};
}

void GaussianSpec::validate() const {
  mean.require_same_shape(variance);
  if (!(variance.array() > 0.0).all() || !variance.all_finite() || !mean.all_finite()) {
    throw Error(ErrorCode::kInvalidArgument, "Gaussian variances must be positive and finite");
  }
}

void GmmSpec::validate() const {
  if (components.empty() || components.size() != weights.size()) {
    throw Error(ErrorCode::kInvalidArgument, "GMM needs >= 1 component and one weight each");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < components.size(); ++k) {
    if (!(weights[k] > 0.0)) throw Error(ErrorCode::kInvalidArgument, "GMM weights must be positive");
    total += weights[k];
    components[k].validate();
    components[k].mean.require_same_shape(components[0].mean);
  }
  if (std::abs(total - 1.0) > 1e-12 * static_cast<double>(components.size())) {
    throw Error(ErrorCode::kInvalidArgument, "GMM weights must sum to 1");
  }
}

GmmSpec combine(const std::vector<GmmSpec>& parts, const std::vector<double>& mixing) {
  if (parts.empty() || parts.size() != mixing.size()) {
    throw Error(ErrorCode::kInvalidArgument, "combine: one mixing weight per part");
  }
  double total = 0.0;
  for (double m : mixing) total += m;
  GmmSpec out;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (std::size_t k = 0; k < parts[p].components.size(); ++k) {
      out.weights.push_back(parts[p].weights[k] * mixing[p] / total);
      out.components.push_back(parts[p].components[k]);
    }
  }
  out.validate();
  return out;
}

GmmSpec symmetrize(const GmmSpec& spec, const GroupSet& group) {
  spec.validate();
  const auto maps = generated_group(group, spec.shape());
  const double order = static_cast<double>(maps.size());
  GmmSpec out;
  std::map<std::vector<double>, std::size_t> index;
  for (std::size_t k = 0; k < spec.components.size(); ++k) {
    const auto& comp = spec.components[k];
    for (const auto& m : maps) {
      Field mean = apply(m, comp.mean);
      Field var(comp.variance.shape());
      for (std::size_t n = 0; n < m.source.size(); ++n) {
        var.array()[static_cast<Eigen::Index>(n)] =
            comp.variance.array()[static_cast<Eigen::Index>(m.source[n])];
      }
      std::vector<double> key(mean.array().begin(), mean.array().end());
      key.insert(key.end(), var.array().begin(), var.array().end());
      const double w = spec.weights[k] / order;
      auto [it, inserted] = index.emplace(std::move(key), out.components.size());
      if (inserted) {
        out.components.push_back(GaussianSpec{std::move(mean), std::move(var)});
        out.weights.push_back(w);
      } else {
        out.weights[it->second] += w;
      }
    }
  }
  return out;
}

Field eval_score(const ScoreField& field, const Field& x, int t, EvalKey key) {
  auto out = field.eval_batch(std::span<const Field>(&x, 1), t, std::span<const EvalKey>(&key, 1));
  return std::move(out.at(0));
}

GaussianScore::GaussianScore(GaussianSpec spec, NoiseSchedule schedule)
    : spec_(std::move(spec)), schedule_(std::move(schedule)) {
  spec_.validate();
}

Field GaussianScore::diffused_variance(int t) const {
  Field v(spec_.shape());
  v.array() = schedule_.alpha_bar(t) * spec_.variance.array() + schedule_.sigma_sq(t);
  return v;
}

std::vector<Field> GaussianScore::eval_batch(std::span<const Field> xs, int t,
                                             std::span<const EvalKey> keys) const {
  require_keys(xs, keys);
  const Field var = diffused_variance(t);
  const double a = schedule_.sqrt_alpha_bar(t);
  std::vector<Field> out;
  out.reserve(xs.size());
  for (const auto& x : xs) {
    x.require_same_shape(spec_.mean);
    Field s(x.shape());
    s.array() = -(x.array() - a * spec_.mean.array()) / var.array();
    require_finite(s, "gaussian score");
    out.push_back(std::move(s));
  }
  return out;
}

GmmScore::GmmScore(GmmSpec spec, NoiseSchedule schedule)
    : spec_(std::move(spec)), schedule_(std::move(schedule)) {
  spec_.validate();
  const auto k = static_cast<Eigen::Index>(spec_.components.size());
  const auto d = static_cast<Eigen::Index>(spec_.shape().size());
  means_.resize(k, d);
  variances_.resize(k, d);
  for (Eigen::Index c = 0; c < k; ++c) {
    means_.row(c) = as_row(spec_.components[static_cast<std::size_t>(c)].mean);
    variances_.row(c) = as_row(spec_.components[static_cast<std::size_t>(c)].variance);
  }
}

std::shared_ptr<const GmmScore::Tables> GmmScore::tables(int t) const {
  std::lock_guard lock(mutex_);
  if (auto it = cache_.find(t); it != cache_.end()) return it->second;
  const double a = schedule_.sqrt_alpha_bar(t);
  const double s2 = schedule_.sigma_sq(t);
  auto tab = std::make_shared<Tables>();
  const Eigen::ArrayXXd var = a * a * variances_.array() + s2;
  const Eigen::ArrayXXd scaled_mean = a * means_.array();
  tab->precision = var.inverse().matrix();
  tab->linear = (tab->precision.array() * scaled_mean).matrix();
  tab->offset.resize(means_.rows());
  for (Eigen::Index c = 0; c < means_.rows(); ++c) {
    tab->offset[c] = std::log(spec_.weights[static_cast<std::size_t>(c)]) -
                     0.5 * (2.0 * std::numbers::pi * var.row(c)).log().sum() -
                     0.5 * (tab->precision.array().row(c) * scaled_mean.row(c).square()).sum();
  }
  cache_.emplace(t, tab);
  return tab;
}

Eigen::MatrixXd GmmScore::log_joint(const Tables& tab, const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd logits = tab.linear * x;
  logits.noalias() -= 0.5 * tab.precision * x.array().square().matrix();
  logits.colwise() += tab.offset;
  return logits;
}

std::vector<Field> GmmScore::eval_batch(std::span<const Field> xs, int t,
                                        std::span<const EvalKey> keys) const {
  require_keys(xs, keys);
  if (xs.empty()) return {};
  const auto tab = tables(t);
  const auto d = static_cast<Eigen::Index>(spec_.shape().size());
  Eigen::MatrixXd x(d, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t b = 0; b < xs.size(); ++b) {
    xs[b].require_same_shape(spec_.components[0].mean);
    x.col(static_cast<Eigen::Index>(b)) = xs[b].array().matrix();
  }
  Eigen::MatrixXd resp = log_joint(*tab, x);
  for (Eigen::Index b = 0; b < resp.cols(); ++b) {
    const double peak = resp.col(b).maxCoeff();
    resp.col(b) = (resp.col(b).array() - peak).exp().matrix();
    resp.col(b) /= resp.col(b).sum();
  }
  const Eigen::MatrixXd pull = tab->linear.transpose() * resp;
  const Eigen::MatrixXd prec = tab->precision.transpose() * resp;
  std::vector<Field> out;
  out.reserve(xs.size());
  for (std::size_t b = 0; b < xs.size(); ++b) {
    const auto col = static_cast<Eigen::Index>(b);
    Field s(xs[b].shape());
    s.array() = pull.col(col).array() - x.col(col).array() * prec.col(col).array();
    require_finite(s, "gmm score");
    out.push_back(std::move(s));
  }
  return out;
}

double GmmScore::log_density(const Field& x, int t) const {
  const auto tab = tables(t);
  const Eigen::MatrixXd col = x.array().matrix();
  const Eigen::VectorXd lj = log_joint(*tab, col).col(0);
  const double peak = lj.maxCoeff();
  return peak + std::log((lj.array() - peak).exp().sum());
}

TabulatedScore TabulatedScore::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "tabulated store not found: " + dir.string());
  }
  static const std::regex kName(R"(score_(\d+)_(\d+)_(\d+)\.gtf)");
  TabulatedScore store;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, kName)) continue;
    store.insert(std::stoull(m[1]), std::stoi(m[2]), std::stoi(m[3]), read_gtf(entry.path()));
  }
  return store;
}

std::string TabulatedScore::file_name(std::size_t sample, int g, int t) {
  return "score_" + std::to_string(sample) + "_" + std::to_string(g) + "_" + std::to_string(t) +
         ".gtf";
}

void TabulatedScore::insert(std::size_t sample, int g, int t, Field score) {
  table_.insert_or_assign({sample, g, t}, std::move(score));
}

std::vector<Field> TabulatedScore::eval_batch(std::span<const Field> xs, int t,
                                              std::span<const EvalKey> keys) const {
  if (keys.size() != xs.size()) {
    throw Error(ErrorCode::kLookupMiss, "tabulated scores need a (sample, g) key per input");
  }
  std::vector<Field> out;
  out.reserve(xs.size());
  for (const auto& key : keys) {
    auto it = table_.find({key.sample, key.g, t});
    if (it == table_.end()) {
      throw Error(ErrorCode::kLookupMiss, "no tabulated score for " +
                                              file_name(key.sample, key.g, t));
    }
    out.push_back(it->second);
  }
  return out;
}

Field ConstantError::operator()(const Field& x, int) const {
  x.require_same_shape(value_);
  return value_;
}

SmoothError::SmoothError(const Shape& shape, double amplitude, int waves, std::uint64_t seed)
    : shape_(shape), amplitude_(amplitude) {
  if (waves < 1) throw Error(ErrorCode::kInvalidArgument, "smooth error needs >= 1 wave");
  CounterRng rng(seed ^ seed_domain::kErrorField, 0);
  for (int k = 0; k < waves; ++k) {
    Wave w;
    w.fx = static_cast<int>(rng.below(3));
    w.fy = static_cast<int>(rng.below(3));
    w.phase = 2.0 * std::numbers::pi * rng.uniform();
    w.coupling = rng.uniform();
    waves_.push_back(w);
  }
}

Field SmoothError::operator()(const Field& x, int) const {
  if (!(x.shape() == shape_)) throw Error(ErrorCode::kShapeMismatch, "smooth error: shape mismatch");
  Field e(shape_);
  const double scale = amplitude_ / static_cast<double>(waves_.size());
  for (int c = 0; c < shape_.channels; ++c)
    for (int i = 0; i < shape_.height; ++i)
      for (int j = 0; j < shape_.width; ++j) {
        double v = 0.0;
        for (const auto& w : waves_) {
          v += std::sin(2.0 * std::numbers::pi *
                            (w.fy * static_cast<double>(i) / shape_.height +
                             w.fx * static_cast<double>(j) / shape_.width) +
                        w.phase + w.coupling * x(c, i, j));
        }
        e(c, i, j) = scale * v;
      }
  return e;
}

NoiseError::NoiseError(const Shape& shape, double amplitude, int bandwidth, std::uint64_t seed) {
  if (bandwidth < 0) throw Error(ErrorCode::kInvalidArgument, "bandwidth must be >= 0");
  CounterRng rng(seed ^ seed_domain::kErrorField, 1);
  const Field raw = rng.normal_field(shape);
  value_ = Field(shape);
  const int r = bandwidth;
  const double norm = 1.0 / ((2.0 * r + 1.0) * (2.0 * r + 1.0));
  for (int c = 0; c < shape.channels; ++c)
    for (int i = 0; i < shape.height; ++i)
      for (int j = 0; j < shape.width; ++j) {
        double acc = 0.0;
        for (int di = -r; di <= r; ++di)
          for (int dj = -r; dj <= r; ++dj)
            acc += raw(c, detail::wrap(i + di, shape.height), detail::wrap(j + dj, shape.width));
        value_(c, i, j) = amplitude * acc * norm;
      }
}

Field NoiseError::operator()(const Field& x, int) const {
  x.require_same_shape(value_);
  return value_;
}

std::vector<Field> PerturbedScore::eval_batch(std::span<const Field> xs, int t,
                                              std::span<const EvalKey> keys) const {
  auto out = base_->eval_batch(xs, t, keys);
  for (std::size_t b = 0; b < xs.size(); ++b) out[b] += (*error_)(xs[b], t);
  return out;
}

std::vector<Field> ScaledScore::eval_batch(std::span<const Field> xs, int t,
                                           std::span<const EvalKey> keys) const {
  auto out = base_->eval_batch(xs, t, keys);
  for (auto& f : out) f *= scale_;
  return out;
}

Field tweedie_denoise(const ScoreField& field, const NoiseSchedule& schedule, const Field& x, int t) {
  const Field s = eval_score(field, x, t);
  Field out(x.shape());
  out.array() = (x.array() + schedule.sigma_sq(t) * s.array()) / schedule.sqrt_alpha_bar(t);
  return out;
}

Field posterior_cov_gaussian(const GaussianSpec& spec, const NoiseSchedule& schedule, int t) {
  spec.validate();
  const double tilde_sq = schedule.sigma_sq(t) / schedule.alpha_bar(t);
  Field c(spec.shape());
  // (1/v + 1/s)^{-1} written to stay finite at s = 0.
  c.array() = spec.variance.array() * tilde_sq / (spec.variance.array() + tilde_sq);
  return c;
}

Field sample_marginal(const GmmSpec& spec, const NoiseSchedule& schedule, int t, CounterRng& rng) {
  double u = rng.uniform();
  std::size_t k = 0;
  for (; k + 1 < spec.weights.size(); ++k) {
    if (u < spec.weights[k]) break;
    u -= spec.weights[k];
  }
  const auto& comp = spec.components[k];
  const double a = schedule.sqrt_alpha_bar(t);
  Field x(comp.shape());
  for (Eigen::Index n = 0; n < x.size(); ++n) {
    const double var = a * a * comp.variance.array()[n] + schedule.sigma_sq(t);
    x.array()[n] = a * comp.mean.array()[n] + std::sqrt(var) * rng.normal();
  }
  return x;
}

}  // namespace gepc
