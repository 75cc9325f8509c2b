#include "gepc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>

#include "gepc/bridge.hpp"
#include "gepc/gmm_io.hpp"
#include "gepc/gtf.hpp"
#include "gepc/metrics.hpp"
#include "gepc/parallel.hpp"

namespace gepc {
namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "seed", "threads", "out_dir", "pair_id",
      "schedule", "T", "beta1", "betaT",
      "group", "timesteps", "snr_levels", "mc_samples", "pool", "topk_k", "features", "eps_b",
      "keep_k", "weight_t", "density_mode", "vector_mode", "agg_feat", "agg_t",
      "id_train", "id_test", "ood_test", "field", "bridge_cmd", "bridge_timeout_ms",
      "synth", "n_train", "n_test", "shape", "id_kind", "ood_kind", "components",
      "component_std", "mean_scale", "mixture_seed", "shift_norm", "shift_seed",
      "aniso_left", "aniso_right", "id_source_dir", "ood_source_dir"};
  return keys;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string csv_double(double v) { return format_double(v); }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

// Records every evaluation of a field into a tabulated store directory.
class RecordingScore final : public ScoreField {
 public:
  RecordingScore(std::shared_ptr<const ScoreField> base, std::filesystem::path dir)
      : base_(std::move(base)), dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::vector<Field> eval_batch(std::span<const Field> xs, int t,
                                std::span<const EvalKey> keys) const override {
    auto out = base_->eval_batch(xs, t, keys);
    if (keys.size() == xs.size()) {
      for (std::size_t k = 0; k < xs.size(); ++k) {
        write_gtf(out[k], dir_ / TabulatedScore::file_name(keys[k].sample, keys[k].g, t));
      }
    }
    return out;
  }
  bool concurrent() const override { return base_->concurrent(); }

 private:
  std::shared_ptr<const ScoreField> base_;
  std::filesystem::path dir_;
};

std::filesystem::path split_path(const ExperimentConfig& cfg, const std::string& split) {
  if (split == "id_train") return cfg.id_train;
  if (split == "id_test") return cfg.id_test;
  if (split == "ood_test") return cfg.ood_test;
  throw Error(ErrorCode::kInvalidArgument, "unknown split '" + split + "'");
}

Dataset load_split(const ExperimentConfig& cfg, const std::string& split) {
  const auto dir = split_path(cfg, split);
  if (dir.empty()) throw Error(ErrorCode::kConfig, "no path configured for " + split);
  return load_dataset(dir);
}

// Features at `timesteps` for a whole split.
std::vector<FeatureMatrix> split_features(const ExperimentConfig& cfg, const NoiseSchedule& schedule,
                                          const ScoreField& field, const Dataset& data,
                                          const std::vector<int>& timesteps,
                                          const std::vector<double>& weights,
                                          std::vector<ComputeLedger>* ledgers) {
  const GepcConfig gc = cfg.gepc_config(data.samples.front().shape(), timesteps, weights);
  return score_dataset(field, schedule, data, gc, cfg.seed, cfg.threads, ledgers);
}

std::vector<std::vector<double>> selection_values(const std::vector<FeatureMatrix>& feats,
                                                  const std::vector<int>& candidates,
                                                  FeatureKind kind) {
  std::vector<std::vector<double>> values(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c)
    for (const auto& f : feats) values[c].push_back(f.at(candidates[c], kind));
  return values;
}

// Restriction of candidate-step features to the kept steps. Every step is
// computed independently from the same draws, so this equals recomputation.
std::vector<FeatureMatrix> restrict_to(const std::vector<FeatureMatrix>& feats,
                                       const std::vector<int>& kept) {
  std::vector<FeatureMatrix> out;
  out.reserve(feats.size());
  for (const auto& f : feats) {
    FeatureMatrix r;
    r.timesteps = kept;
    r.features = f.features;
    r.values.resize(static_cast<Eigen::Index>(kept.size()), f.values.cols());
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const auto it = std::find(f.timesteps.begin(), f.timesteps.end(), kept[k]);
      r.values.row(static_cast<Eigen::Index>(k)) = f.values.row(it - f.timesteps.begin());
    }
    out.push_back(std::move(r));
  }
  return out;
}

TimestepSelection select_from(const ExperimentConfig& cfg, const std::vector<FeatureMatrix>& feats) {
  auto sel = select_timesteps(cfg.candidates, selection_values(feats, cfg.candidates, cfg.features.front()),
                              cfg.keep_k, cfg.weight_t);
  std::filesystem::create_directories(cfg.out_dir);
  sel.write(cfg.out_dir / "selection.txt");
  return sel;
}

Calibrator calibrate_from(const ExperimentConfig& cfg, const TimestepSelection& sel,
                          const std::vector<FeatureMatrix>& feats) {
  Calibrator cal = fit_calibrator(feats, sel, cfg.features, cfg.calibration);
  std::filesystem::create_directories(cfg.out_dir);
  cal.write(cfg.out_dir / "calibrator.txt");
  return cal;
}

std::string score_csv(const Dataset& data, const std::vector<FeatureMatrix>& feats,
                      const std::vector<double>& scores, const Calibrator& cal) {
  std::string out = "sample_id,score";
  for (int t : cal.timesteps)
    for (auto f : cal.features) out += ",z_" + std::to_string(t) + "_" + to_string(f);
  out += '\n';
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out += data.names[i] + "," + csv_double(scores[i]);
    const Eigen::VectorXd z = feature_vector(feats[i], cal.timesteps, cal.features);
    for (Eigen::Index k = 0; k < z.size(); ++k) out += "," + csv_double(z[k]);
    out += '\n';
  }
  return out;
}

ScoreSummary score_with(const ExperimentConfig& cfg, const NoiseSchedule& schedule,
                        const TimestepSelection& sel, const Calibrator& cal,
                        const std::function<std::shared_ptr<const ScoreField>(const std::string&)>& field_for) {
  if (cal.features != cfg.features || cal.timesteps != sel.kept) {
    throw Error(ErrorCode::kConfig, "calibrator does not match the configured features or selection");
  }
  const Dataset id = load_split(cfg, "id_test");
  const Dataset ood = load_split(cfg, "ood_test");
  ScoreSummary sum;
  std::vector<ComputeLedger> id_ledger;
  std::vector<ComputeLedger> ood_ledger;
  const auto id_feats = split_features(cfg, schedule, *field_for("id_test"), id, sel.kept, sel.weights, &id_ledger);
  const auto ood_feats = split_features(cfg, schedule, *field_for("ood_test"), ood, sel.kept, sel.weights, &ood_ledger);
  for (const auto& f : id_feats) sum.id_scores.push_back(anomaly_score(f, cal, sel, cfg.agg_feat, cfg.agg_t));
  for (const auto& f : ood_feats) sum.ood_scores.push_back(anomaly_score(f, cal, sel, cfg.agg_feat, cfg.agg_t));
  sum.auroc = auroc(sum.id_scores, sum.ood_scores);
  sum.fpr95 = fpr_at_tpr(sum.id_scores, sum.ood_scores, 0.95);
  sum.aupr = aupr(sum.id_scores, sum.ood_scores);
  sum.auroc_sign_invariant = auroc_sign_invariant(sum.id_scores, sum.ood_scores);
  sum.ledgers = id_ledger;
  sum.ledgers.insert(sum.ledgers.end(), ood_ledger.begin(), ood_ledger.end());

  std::filesystem::create_directories(cfg.out_dir);
  write_file(cfg.out_dir / "scores_id.csv", score_csv(id, id_feats, sum.id_scores, cal));
  write_file(cfg.out_dir / "scores_ood.csv", score_csv(ood, ood_feats, sum.ood_scores, cal));
  write_file(cfg.out_dir / "metrics.csv",
             "pair_id,n_id,n_ood,auroc,fpr_at_95tpr,aupr,auroc_sign_invariant\n" + cfg.pair_id + "," +
                 std::to_string(id.samples.size()) + "," + std::to_string(ood.samples.size()) + "," +
                 csv_double(sum.auroc) + "," + csv_double(sum.fpr95) + "," + csv_double(sum.aupr) + "," +
                 csv_double(sum.auroc_sign_invariant) + "\n");
  std::string ledger = "split,sample_id,F,J\n";
  const auto add = [&](const char* split, const Dataset& d, const std::vector<ComputeLedger>& l) {
    for (std::size_t i = 0; i < l.size(); ++i) {
      ledger += std::string(split) + "," + d.names[i] + "," + std::to_string(l[i].forward) + "," +
                std::to_string(l[i].jvp) + "\n";
    }
  };
  add("id_test", id, id_ledger);
  add("ood_test", ood, ood_ledger);
  write_file(cfg.out_dir / "ledger.txt", ledger);
  return sum;
}

DatasetSpec read_synth_spec(const KvFile& kv, const std::filesystem::path& base, const std::string& prefix,
                            const std::string& default_kind, std::uint64_t seed) {
  DatasetSpec spec;
  spec.kind = parse_dataset_kind(kv.get_or(prefix + "_kind", default_kind));
  const auto dims = parse_int_list(kv.get_or("shape", "3,8,8"));
  if (dims.size() != 3) throw Error(ErrorCode::kConfig, "shape needs C,H,W");
  spec.shape = Shape{dims[0], dims[1], dims[2]};
  spec.components = kv.get_int("components", 4);
  spec.component_std = kv.get_double("component_std", 0.3);
  spec.mean_scale = kv.get_double("mean_scale", 0.5);
  spec.mixture_seed = static_cast<std::uint64_t>(kv.get_int("mixture_seed", static_cast<int>(seed)));
  spec.shift_norm = kv.get_double("shift_norm", 1.0);
  spec.shift_seed = static_cast<std::uint64_t>(kv.get_int("shift_seed", static_cast<int>(seed) + 1));
  spec.aniso_left = kv.get_double("aniso_left", 1.0);
  spec.aniso_right = kv.get_double("aniso_right", 1.0);
  spec.source_dir = resolve(base, kv.get_or(prefix + "_source_dir", ""));
  return spec;
}

}  // namespace

NoiseSchedule ExperimentConfig::schedule() const { return linear_schedule(steps, beta1, beta_final); }

GroupSet ExperimentConfig::group(const Shape& shape) const {
  if (group_spec == "default") return default_group(shape.height, shape.width);
  return parse_group(group_spec);
}

GepcConfig ExperimentConfig::gepc_config(const Shape& shape, const std::vector<int>& timesteps,
                                         const std::vector<double>& weights) const {
  GepcConfig gc;
  gc.group = group(shape);
  gc.timesteps = timesteps;
  gc.weights = weights;
  gc.mc_samples = mc_samples;
  gc.pool = pool;
  gc.features = features;
  gc.eps_b = eps_b;
  return gc;
}

ExperimentConfig load_experiment(const KvFile& kv, const std::filesystem::path& base_dir) {
  for (const auto& e : kv.entries()) {
    if (!known_keys().count(e.key)) kv.fail(e, "unknown key '" + e.key + "'");
  }
  // Surfaces duplicate keys even when the value is never read.
  for (const auto& key : known_keys()) (void)kv.get(key);

  ExperimentConfig cfg;
  const int seed = kv.get_int("seed", 7);
  if (seed < 0) throw Error(ErrorCode::kConfig, "seed must be >= 0");
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.threads = kv.get_int("threads", 1);
  if (cfg.threads < 1) throw Error(ErrorCode::kConfig, "threads must be >= 1");
  const std::string kind = kv.get("schedule").value_or("linear");
  if (kind != "linear") throw Error(ErrorCode::kConfig, "unsupported schedule '" + kind + "'");
  cfg.steps = kv.get_int("T", 1000);
  cfg.beta1 = kv.get_double("beta1", 1e-4);
  cfg.beta_final = kv.get_double("betaT", 0.02);
  const NoiseSchedule schedule = cfg.schedule();

  if (kv.has("timesteps") && kv.has("snr_levels")) {
    throw Error(ErrorCode::kConfig, "set either timesteps or snr_levels, not both");
  }
  if (kv.has("timesteps")) {
    cfg.candidates = parse_int_list(kv.require("timesteps"));
  } else if (kv.has("snr_levels")) {
    cfg.candidates = map_levels_to_timesteps(schedule, parse_levels(kv.require("snr_levels")));
  } else {
    cfg.candidates = default_candidate_timesteps();
  }
  if (cfg.candidates.empty()) throw Error(ErrorCode::kConfig, "no candidate timesteps");
  for (std::size_t k = 0; k < cfg.candidates.size(); ++k) {
    const int t = cfg.candidates[k];
    if (t < 1 || t > schedule.steps()) {
      throw Error(ErrorCode::kConfig, "timestep " + std::to_string(t) + " outside [1, " +
                                          std::to_string(schedule.steps()) + "]");
    }
    if (std::count(cfg.candidates.begin(), cfg.candidates.end(), t) > 1) {
      throw Error(ErrorCode::kConfig, "duplicate timestep " + std::to_string(t));
    }
  }

  cfg.group_spec = kv.get_or("group", "default");
  if (cfg.group_spec != "default") (void)parse_group(cfg.group_spec);
  cfg.mc_samples = kv.get_int("mc_samples", 1);
  if (cfg.mc_samples < 1) throw Error(ErrorCode::kConfig, "mc_samples must be >= 1");
  const std::string pool = kv.get_or("pool", "mean");
  if (pool == "mean") {
    cfg.pool.mode = PoolSpec::Mode::kMean;
  } else if (pool == "topk") {
    cfg.pool.mode = PoolSpec::Mode::kTopK;
    cfg.pool.k = kv.get_int("topk_k", 1);
    if (cfg.pool.k < 1) throw Error(ErrorCode::kConfig, "topk_k must be >= 1");
  } else {
    throw Error(ErrorCode::kConfig, "pool must be mean|topk");
  }
  cfg.features = parse_features(kv.get_or("features", "s"));
  cfg.eps_b = kv.get_double("eps_b", 1e-12);
  if (!(cfg.eps_b >= 0.0)) throw Error(ErrorCode::kConfig, "eps_b must be >= 0");

  cfg.keep_k = kv.get_int("keep_k", 2);
  if (cfg.keep_k < 1 || static_cast<std::size_t>(cfg.keep_k) > cfg.candidates.size()) {
    throw Error(ErrorCode::kConfig, "keep_k=" + std::to_string(cfg.keep_k) + " outside [1, " +
                                        std::to_string(cfg.candidates.size()) + "]");
  }
  cfg.weight_t = parse_weight_mode(kv.get_or("weight_t", "inv_cv"));
  cfg.calibration = parse_calibration_mode(kv.get_or("density_mode", "kde"), kv.get_or("vector_mode", "none"));
  cfg.agg_feat = parse_feature_aggregation(kv.get_or("agg_feat", "mean"));
  cfg.agg_t = parse_time_aggregation(kv.get_or("agg_t", "wmean"));

  cfg.out_dir = resolve(base_dir, kv.get_or("out_dir", "out"));
  cfg.pair_id = kv.get_or("pair_id", "id_vs_ood");
  cfg.id_train = resolve(base_dir, kv.get_or("id_train", ""));
  cfg.id_test = resolve(base_dir, kv.get_or("id_test", ""));
  cfg.ood_test = resolve(base_dir, kv.get_or("ood_test", ""));

  cfg.field = kv.get_or("field", "world");
  const auto colon = cfg.field.find(':');
  const std::string field_kind = cfg.field.substr(0, colon);
  if (field_kind == "gmm" || field_kind == "tabulated" || field_kind == "bridge") {
    if (colon == std::string::npos || colon + 1 == cfg.field.size()) {
      throw Error(ErrorCode::kConfig, "field '" + field_kind + "' needs a path");
    }
    std::string resolved;
    for (const auto& part : split(cfg.field.substr(colon + 1), ',')) {
      if (!resolved.empty()) resolved += ',';
      resolved += resolve(base_dir, part).string();
    }
    cfg.field = field_kind + ":" + resolved;
  } else if (cfg.field != "world") {
    throw Error(ErrorCode::kConfig, "field must be world|gmm:<files>|tabulated:<dir>|bridge:<dir>");
  }
  if ((field_kind == "tabulated" || field_kind == "bridge") && cfg.mc_samples != 1) {
    throw Error(ErrorCode::kConfig, "tabulated and bridge fields support mc_samples = 1 only");
  }
  cfg.bridge_cmd = kv.get_or("bridge_cmd", "");
  cfg.bridge_timeout_ms = kv.get_int("bridge_timeout_ms", 60000);

  cfg.synth = kv.get_bool("synth", false);
  const int n_train = kv.get_int("n_train", 500);
  const int n_test = kv.get_int("n_test", 500);
  if (n_train < 2 || n_test < 1) throw Error(ErrorCode::kConfig, "n_train must be >= 2 and n_test >= 1");
  cfg.n_train = static_cast<std::size_t>(n_train);
  cfg.n_test = static_cast<std::size_t>(n_test);
  cfg.id_spec = read_synth_spec(kv, base_dir, "id", "invariant_gmm", cfg.seed);
  cfg.ood_spec = read_synth_spec(kv, base_dir, "ood", "shifted", cfg.seed);
  if (cfg.synth) {
    cfg.id_spec.validate();
    cfg.ood_spec.validate();
    if (cfg.id_train.empty()) cfg.id_train = cfg.out_dir / "data" / "id_train";
    if (cfg.id_test.empty()) cfg.id_test = cfg.out_dir / "data" / "id_test";
    if (cfg.ood_test.empty()) cfg.ood_test = cfg.out_dir / "data" / "ood_test";
  } else if (cfg.field == "world") {
    throw Error(ErrorCode::kConfig, "field = world requires synth = true");
  }
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& config_path) {
  const KvFile kv = KvFile::load(config_path);
  return load_experiment(kv, config_path.parent_path());
}

void prepare_synthetic(ExperimentConfig& cfg) {
  if (!cfg.synth) throw Error(ErrorCode::kConfig, "synth = true required for data generation");
  DatasetSpec train = cfg.id_spec;
  train.n = cfg.n_train;
  train.seed = cfg.seed * 3;
  DatasetSpec id_test = cfg.id_spec;
  id_test.n = cfg.n_test;
  id_test.seed = cfg.seed * 3 + 1;
  DatasetSpec ood_test = cfg.ood_spec;
  ood_test.n = cfg.n_test;
  ood_test.seed = cfg.seed * 3 + 2;
  write_dataset(generate(train), train, cfg.id_train);
  write_dataset(generate(id_test), id_test, cfg.id_test);
  write_dataset(generate(ood_test), ood_test, cfg.ood_test);
}

std::shared_ptr<const ScoreField> make_field(const ExperimentConfig& cfg, const NoiseSchedule& schedule,
                                             const std::string& split_name) {
  if (cfg.field == "world") {
    return std::make_shared<GmmScore>(
        combine({generating_mixture(cfg.id_spec), generating_mixture(cfg.ood_spec)}, {0.5, 0.5}), schedule);
  }
  const auto colon = cfg.field.find(':');
  const std::string kind = cfg.field.substr(0, colon);
  const std::string arg = cfg.field.substr(colon + 1);
  if (kind == "gmm") {
    std::vector<GmmSpec> parts;
    for (const auto& file : split(arg, ',')) parts.push_back(read_gmm_spec(file));
    return std::make_shared<GmmScore>(
        combine(parts, std::vector<double>(parts.size(), 1.0 / static_cast<double>(parts.size()))), schedule);
  }
  if (kind == "tabulated") {
    return std::make_shared<TabulatedScore>(TabulatedScore::load(std::filesystem::path(arg) / split_name));
  }
  return std::make_shared<BridgeScore>(arg, schedule, cfg.bridge_cmd,
                                       std::chrono::milliseconds(cfg.bridge_timeout_ms));
}

std::vector<FeatureMatrix> score_dataset(const ScoreField& field, const NoiseSchedule& schedule,
                                         const Dataset& data, const GepcConfig& cfg, std::uint64_t seed,
                                         int threads, std::vector<ComputeLedger>* ledgers) {
  cfg.validate(schedule);
  std::vector<FeatureMatrix> out(data.samples.size());
  std::vector<ComputeLedger> led(data.samples.size());
  parallel_for(data.samples.size(), field.concurrent() ? threads : 1, [&](std::size_t i) {
    auto res = gepc_score(field, schedule, data.samples[i], cfg, NoiseSource{seed, i});
    out[i] = std::move(res.features);
    led[i] = res.ledger;
  });
  if (ledgers) *ledgers = std::move(led);
  return out;
}

TimestepSelection run_select(const ExperimentConfig& cfg) {
  const NoiseSchedule schedule = cfg.schedule();
  const Dataset train = load_split(cfg, "id_train");
  const auto feats = split_features(cfg, schedule, *make_field(cfg, schedule, "id_train"), train, cfg.candidates,
                                    GepcConfig::uniform_weights(cfg.candidates.size()), nullptr);
  return select_from(cfg, feats);
}

Calibrator run_calibrate(const ExperimentConfig& cfg) {
  const NoiseSchedule schedule = cfg.schedule();
  const auto sel = TimestepSelection::read(cfg.out_dir / "selection.txt");
  const Dataset train = load_split(cfg, "id_train");
  const auto feats = split_features(cfg, schedule, *make_field(cfg, schedule, "id_train"), train, sel.kept,
                                    sel.weights, nullptr);
  return calibrate_from(cfg, sel, feats);
}

ScoreSummary run_score(const ExperimentConfig& cfg) {
  const NoiseSchedule schedule = cfg.schedule();
  const auto sel = TimestepSelection::read(cfg.out_dir / "selection.txt");
  const auto cal = Calibrator::read(cfg.out_dir / "calibrator.txt");
  return score_with(cfg, schedule, sel, cal,
                    [&](const std::string& split) { return make_field(cfg, schedule, split); });
}

namespace {

ScoreSummary run_all(const ExperimentConfig& cfg,
                     const std::function<std::shared_ptr<const ScoreField>(const std::string&)>& field_for) {
  const NoiseSchedule schedule = cfg.schedule();
  const Dataset train = load_split(cfg, "id_train");
  const auto feats = split_features(cfg, schedule, *field_for("id_train"), train, cfg.candidates,
                                    GepcConfig::uniform_weights(cfg.candidates.size()), nullptr);
  const auto sel = select_from(cfg, feats);
  const auto cal = calibrate_from(cfg, sel, restrict_to(feats, sel.kept));
  return score_with(cfg, schedule, sel, cal, field_for);
}

}  // namespace

ScoreSummary run_experiment(ExperimentConfig cfg) {
  if (cfg.synth) prepare_synthetic(cfg);
  const NoiseSchedule schedule = cfg.schedule();
  if (cfg.field.rfind("tabulated:", 0) == 0 || cfg.field.rfind("bridge:", 0) == 0) {
    return run_all(cfg, [&](const std::string& split) { return make_field(cfg, schedule, split); });
  }
  const auto shared = make_field(cfg, schedule, "id_train");
  return run_all(cfg, [&](const std::string&) { return shared; });
}

void write_pgm(const SpatialMap& map, double scale, const std::filesystem::path& path) {
  const auto& a = map.array();
  std::string out = "P5\n" + std::to_string(a.cols()) + " " + std::to_string(a.rows()) + "\n255\n";
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double v = scale > 0.0 ? std::clamp(a(i, j) / scale, 0.0, 1.0) : 0.0;
      out += static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
  write_file(path, out);
}

MapsSummary run_maps(const ExperimentConfig& cfg) {
  const NoiseSchedule schedule = cfg.schedule();
  std::vector<int> steps = cfg.candidates;
  std::vector<double> weights = GepcConfig::uniform_weights(steps.size());
  if (std::filesystem::exists(cfg.out_dir / "selection.txt")) {
    const auto sel = TimestepSelection::read(cfg.out_dir / "selection.txt");
    steps = sel.kept;
    weights = sel.weights;
  }
  const auto maps_for = [&](const std::string& split, const Dataset& data) {
    const auto field = make_field(cfg, schedule, split);
    const GepcConfig gc = cfg.gepc_config(data.samples.front().shape(), steps, weights);
    gc.validate(schedule);
    std::vector<SpatialMap> out(data.samples.size());
    parallel_for(data.samples.size(), field->concurrent() ? cfg.threads : 1, [&](std::size_t i) {
      out[i] = residual_map(*field, schedule, data.samples[i], gc, NoiseSource{cfg.seed, i});
    });
    return out;
  };
  const Dataset train = load_split(cfg, "id_train");
  MapsSummary sum;
  sum.normalizer = global_map_normalizer(maps_for("id_train", train));

  const auto dir = cfg.out_dir / "maps";
  std::filesystem::create_directories(dir);
  for (const std::string split : {"id_test", "ood_test"}) {
    if (split_path(cfg, split).empty() || !std::filesystem::exists(split_path(cfg, split))) continue;
    const Dataset data = load_split(cfg, split);
    const auto maps = maps_for(split, data);
    for (std::size_t i = 0; i < maps.size(); ++i) {
      const std::string stem = split + "_" + std::filesystem::path(data.names[i]).stem().string();
      const auto& a = maps[i].array();
      Field raw(Shape{1, static_cast<int>(a.rows()), static_cast<int>(a.cols())});
      for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c) raw(0, static_cast<int>(r), static_cast<int>(c)) = a(r, c);
      write_gtf(raw, dir / (stem + "_raw.gtf"));
      write_pgm(maps[i], a.maxCoeff(), dir / (stem + "_local.pgm"));
      write_pgm(maps[i], sum.normalizer.degenerate ? 0.0 : sum.normalizer.v_global, dir / (stem + "_global.pgm"));
      ++sum.exported;
    }
  }
  write_file(dir / "meta.txt", "v_global = " + format_double(sum.normalizer.v_global) +
                                   "\ndegenerate = " + (sum.normalizer.degenerate ? "true" : "false") +
                                   "\nid_pool = " + std::to_string(train.samples.size()) + "\n");
  return sum;
}

ScoreSummary run_bridge_score(const ExperimentConfig& cfg) {
  if (cfg.field.rfind("bridge:", 0) != 0) {
    throw Error(ErrorCode::kConfig, "bridge-score needs field = bridge:<dir>");
  }
  const NoiseSchedule schedule = cfg.schedule();
  const auto bridge = make_field(cfg, schedule, "id_train");
  std::map<std::string, std::shared_ptr<const ScoreField>> recorders;
  return run_all(cfg, [&](const std::string& split) {
    auto& rec = recorders[split];
    if (!rec) rec = std::make_shared<RecordingScore>(bridge, cfg.out_dir / "tabulated" / split);
    return rec;
  });
}

}  // namespace gepc
