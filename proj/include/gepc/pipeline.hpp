#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "gepc/calibrate.hpp"
#include "gepc/gepc.hpp"
#include "gepc/kvfile.hpp"
#include "gepc/synth.hpp"

namespace gepc {

/// Everything a CLI run needs, resolved from a config file. Relative paths
/// are resolved against the config file's directory.
struct ExperimentConfig {
  std::uint64_t seed = 7;
  int threads = 1;

  int steps = 1000;
  double beta1 = 1e-4;
  double beta_final = 0.02;
  std::vector<int> candidates;  // explicit `timesteps` or mapped `snr_levels`

  std::string group_spec = "default";
  int mc_samples = 1;
  PoolSpec pool;
  std::vector<FeatureKind> features{FeatureKind::kS};
  double eps_b = 1e-12;

  int keep_k = 2;
  WeightMode weight_t = WeightMode::kInvCv;
  CalibrationMode calibration = CalibrationMode::kKde;
  FeatureAggregation agg_feat = FeatureAggregation::kMean;
  TimeAggregation agg_t = TimeAggregation::kWeightedMean;

  std::filesystem::path id_train;
  std::filesystem::path id_test;
  std::filesystem::path ood_test;
  std::filesystem::path out_dir;
  std::string pair_id = "id_vs_ood";

  // field = world | gmm:<file>[,<file>...] | tabulated:<dir> | bridge:<dir>
  //   world: exact score of the equal-weight union of the ID and OOD
  //   generating mixtures (synthetic runs only).
  //   tabulated: <dir>/<split>/score_<sample>_<g>_<t>.gtf, mc_samples = 1.
  std::string field = "world";
  std::string bridge_cmd;
  int bridge_timeout_ms = 60000;

  // Synthetic data: generated into <out_dir>/data when enabled.
  bool synth = false;
  DatasetSpec id_spec;
  DatasetSpec ood_spec;
  std::size_t n_train = 500;
  std::size_t n_test = 500;

  NoiseSchedule schedule() const;
  GroupSet group(const Shape& shape) const;
  GepcConfig gepc_config(const Shape& shape, const std::vector<int>& timesteps,
                         const std::vector<double>& weights) const;
};

ExperimentConfig load_experiment(const KvFile& kv, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment(const std::filesystem::path& config_path);

/// Writes <out_dir>/data/{id_train,id_test,ood_test} and points the config
/// at them.
void prepare_synthetic(ExperimentConfig& cfg);

/// Score field used for one data split ("id_train", "id_test", "ood_test").
std::shared_ptr<const ScoreField> make_field(const ExperimentConfig& cfg,
                                             const NoiseSchedule& schedule,
                                             const std::string& split);

/// Features for every sample (parallel over samples, canonical order).
std::vector<FeatureMatrix> score_dataset(const ScoreField& field, const NoiseSchedule& schedule,
                                         const Dataset& data, const GepcConfig& cfg,
                                         std::uint64_t seed, int threads,
                                         std::vector<ComputeLedger>* ledgers = nullptr);

/// ID-only stability selection over the candidates; writes selection.txt.
TimestepSelection run_select(const ExperimentConfig& cfg);
/// ID-only calibration on the selection; writes calibrator.txt.
Calibrator run_calibrate(const ExperimentConfig& cfg);

struct ScoreSummary {
  std::vector<double> id_scores;
  std::vector<double> ood_scores;
  double auroc = 0.0;
  double fpr95 = 0.0;
  double aupr = 0.0;
  double auroc_sign_invariant = 0.0;
  std::vector<ComputeLedger> ledgers;  // id samples then ood samples
};

/// Scores id_test / ood_test with the stored selection and calibrator; writes
/// scores_id.csv, scores_ood.csv, metrics.csv and ledger.txt.
ScoreSummary run_score(const ExperimentConfig& cfg);

/// select -> calibrate -> score (after generating synthetic data if enabled).
ScoreSummary run_experiment(ExperimentConfig cfg);

struct MapsSummary {
  MapNormalizer normalizer;
  std::size_t exported = 0;
};

/// Residual maps: raw GTF, per-image and globally normalised PGM per test
/// sample, with v_global computed over the ID-train pool.
MapsSummary run_maps(const ExperimentConfig& cfg);

/// select -> calibrate -> score with every split evaluated through the bridge
/// (`field = bridge:<dir>`). Each evaluation is also recorded under
/// <out_dir>/tabulated/<split>, so `field = tabulated:<out_dir>/tabulated`
/// replays the run without the bridge.
ScoreSummary run_bridge_score(const ExperimentConfig& cfg);

void write_pgm(const SpatialMap& map, double scale, const std::filesystem::path& path);

}  // namespace gepc
