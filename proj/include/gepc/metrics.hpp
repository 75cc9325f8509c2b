#pragma once

#include <span>

namespace gepc {

// Detection metrics under the OOD-high convention (OOD is the positive class).

/// Mann-Whitney statistic; exact pair counting up to 1e4 per side, rank-sum
/// with average ranks above.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);
double auroc_pairs(std::span<const double> id_scores, std::span<const double> ood_scores);
double auroc_ranksum(std::span<const double> id_scores, std::span<const double> ood_scores);

/// max(A, 1 - A).
double auroc_sign_invariant(std::span<const double> id_scores, std::span<const double> ood_scores);

/// Fraction of ID scores >= tau, where tau is the largest OOD score value
/// with TPR(tau) = #{ood >= tau} / n_ood >= target.
double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                  double tpr_target = 0.95);

/// Step-wise area under the precision-recall curve (average precision), tied
/// scores entering as one threshold.
double aupr(std::span<const double> id_scores, std::span<const double> ood_scores);

}  // namespace gepc
