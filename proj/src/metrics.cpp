#include "gepc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "gepc/error.hpp"

namespace gepc {
namespace {

void require_scores(std::span<const double> id_scores, std::span<const double> ood_scores) {
  if (id_scores.empty() || ood_scores.empty()) {
    throw Error(ErrorCode::kInsufficientData, "metrics need non-empty ID and OOD score lists");
  }
  for (auto list : {id_scores, ood_scores})
    for (double v : list)
      if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite score");
}

}  // namespace

double auroc_pairs(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_scores(id_scores, ood_scores);
  std::vector<double> id(id_scores.begin(), id_scores.end());
  std::sort(id.begin(), id.end());
  // Twice the Mann-Whitney count, so ties stay integral.
  std::uint64_t twice = 0;
  for (double v : ood_scores) {
    const auto lo = std::lower_bound(id.begin(), id.end(), v);
    const auto hi = std::upper_bound(lo, id.end(), v);
    twice += 2 * static_cast<std::uint64_t>(lo - id.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  return static_cast<double>(twice) /
         (2.0 * static_cast<double>(id.size()) * static_cast<double>(ood_scores.size()));
}

double auroc_ranksum(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_scores(id_scores, ood_scores);
  std::vector<std::pair<double, bool>> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double v : id_scores) all.emplace_back(v, false);
  for (double v : ood_scores) all.emplace_back(v, true);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second) rank_sum += avg_rank;
    i = j;
  }
  const double n_ood = static_cast<double>(ood_scores.size());
  const double u = rank_sum - n_ood * (n_ood + 1.0) / 2.0;
  return u / (n_ood * static_cast<double>(id_scores.size()));
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  if (id_scores.size() <= 10000 && ood_scores.size() <= 10000) {
    return auroc_pairs(id_scores, ood_scores);
  }
  return auroc_ranksum(id_scores, ood_scores);
}

double auroc_sign_invariant(std::span<const double> id_scores, std::span<const double> ood_scores) {
  const double a = auroc(id_scores, ood_scores);
  return std::max(a, 1.0 - a);
}

double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                  double tpr_target) {
  require_scores(id_scores, ood_scores);
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "TPR target outside (0, 1]");
  }
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(ood.begin(), ood.end(), std::greater<>());
  const auto k = static_cast<std::size_t>(
      std::ceil(tpr_target * static_cast<double>(ood.size()) - 1e-9));
  const double tau = ood[std::clamp<std::size_t>(k, 1, ood.size()) - 1];
  const auto hits = std::count_if(id_scores.begin(), id_scores.end(),
                                  [tau](double v) { return v >= tau; });
  return static_cast<double>(hits) / static_cast<double>(id_scores.size());
}

double aupr(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_scores(id_scores, ood_scores);
  std::vector<std::pair<double, bool>> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double v : id_scores) all.emplace_back(v, false);
  for (double v : ood_scores) all.emplace_back(v, true);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  const double n_pos = static_cast<double>(ood_scores.size());
  double tp = 0.0;
  double fp = 0.0;
  double area = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    double pos = 0.0;
    std::size_t j = i;
    for (; j < all.size() && all[j].first == all[i].first; ++j) {
      if (all[j].second) pos += 1.0;
      else fp += 1.0;
    }
    tp += pos;
    if (pos > 0.0) area += (tp / (tp + fp)) * (pos / n_pos);
    i = j;
  }
  return area;
}

}  // namespace gepc
