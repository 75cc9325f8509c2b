#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gepc/error.hpp"
#include "gepc/metrics.hpp"
#include "gepc/rng.hpp"

namespace gepc {
namespace {

using V = std::vector<double>;

double brute_auroc(const V& id, const V& ood) {
  double wins = 0;
  for (double o : ood)
    for (double i : id) wins += o > i ? 1.0 : (o == i ? 0.5 : 0.0);
  return wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

// Coarse integer grid so ties are common.
V tied_scores(CounterRng& rng, std::size_t n, double shift) {
  V v(n);
  for (auto& x : v) x = std::round(rng.normal() * 3.0 + shift);
  return v;
}

TEST(Auroc, SmallExamples) {
  EXPECT_EQ(auroc(V{0, 0}, V{1, 1}), 1.0);
  EXPECT_EQ(auroc(V{1, 1}, V{0, 0}), 0.0);
  EXPECT_EQ(auroc(V{2, 2, 2}, V{2, 2}), 0.5);
  EXPECT_EQ(auroc(V{0.1, 0.4}, V{0.3, 0.5}), 0.75);
  EXPECT_EQ(auroc_ranksum(V{0.1, 0.4}, V{0.3, 0.5}), 0.75);
  EXPECT_EQ(auroc_sign_invariant(V{1, 1}, V{0, 0}), 1.0);
}

TEST(Auroc, PairCountAndRankSumAgreeWithBruteForce) {
  CounterRng rng(77, 0);
  for (int set = 0; set < 100; ++set) {
    const std::size_t n_id = 1 + rng.below(200);
    const std::size_t n_ood = 1 + rng.below(200);
    const V id = tied_scores(rng, n_id, 0.0);
    const V ood = tied_scores(rng, n_ood, 1.0);
    const double ref = brute_auroc(id, ood);
    EXPECT_NEAR(auroc_pairs(id, ood), ref, 1e-12) << set;
    EXPECT_NEAR(auroc_ranksum(id, ood), ref, 1e-12) << set;
    EXPECT_NEAR(auroc(id, ood), ref, 1e-12) << set;
  }
}

TEST(Auroc, LargeInputsUseRankSum) {
  CounterRng rng(78, 0);
  const V id = tied_scores(rng, 20000, 0.0);
  const V ood = tied_scores(rng, 20000, 0.5);
  EXPECT_NEAR(auroc(id, ood), auroc_pairs(id, ood), 1e-12);
}

TEST(Metrics, RejectEmptyAndNonFinite) {
  EXPECT_THROW(auroc(V{}, V{1}), Error);
  EXPECT_THROW(fpr_at_tpr(V{1}, V{}), Error);
  EXPECT_THROW(aupr(V{}, V{}), Error);
  EXPECT_THROW(auroc(V{NAN}, V{1}), Error);
  EXPECT_THROW(aupr(V{1}, V{INFINITY}), Error);
}

TEST(FprAtTpr, Examples) {
  EXPECT_EQ(fpr_at_tpr(V{0, 1}, V{5, 6}), 0.0);
  EXPECT_EQ(fpr_at_tpr(V{3, 3, 3}, V{3, 3, 3}), 1.0);
  V id, ood;
  for (int k = 1; k <= 100; ++k) {
    id.push_back(k);
    ood.push_back(100 + k);
  }
  EXPECT_EQ(fpr_at_tpr(id, ood), 0.0);
  // Roles swapped: tau = 6 and every ID value clears it.
  EXPECT_EQ(fpr_at_tpr(ood, id), 1.0);
}

TEST(FprAtTpr, ThresholdScan) {
  // OOD = 1..20; TPR >= 0.95 needs 19 values, so tau = 2.
  V ood;
  for (int k = 1; k <= 20; ++k) ood.push_back(k);
  const V id{0.5, 1.5, 2.0, 2.5, 10};
  EXPECT_DOUBLE_EQ(fpr_at_tpr(id, ood), 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(fpr_at_tpr(id, ood, 1.0), 4.0 / 5.0);
}

TEST(Aupr, Examples) {
  EXPECT_DOUBLE_EQ(aupr(V{0, 1}, V{2, 3}), 1.0);
  EXPECT_DOUBLE_EQ(aupr(V{0, 1, 2}, V{5}), 1.0);
  // Ranking O I O: AP = (1/1 + 2/3) / 2.
  EXPECT_NEAR(aupr(V{2}, V{3, 1}), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  // One tied block: precision is the prevalence.
  EXPECT_DOUBLE_EQ(aupr(V{1, 1, 1}, V{1}), 0.25);
}

TEST(Aupr, RandomScoresGivePrevalence) {
  CounterRng rng(79, 0);
  V id(5000), ood(5000);
  for (auto& v : id) v = rng.uniform();
  for (auto& v : ood) v = rng.uniform();
  EXPECT_NEAR(aupr(id, ood), 0.5, 0.02);
}

}  // namespace
}  // namespace gepc
