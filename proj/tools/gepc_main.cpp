// gepc: command-line driver for group-equivariant posterior consistency runs.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "gepc/kvfile.hpp"
#include "gepc/pipeline.hpp"
#include "gepc/theory.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kDataError = 3, kNumericError = 4, kSanityFailure = 5 };

int exit_code_for(gepc::ErrorCode code) {
  using gepc::ErrorCode;
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kOutOfRange:
    case ErrorCode::kNonSquareRotation:
      return kConfigError;
    case ErrorCode::kDegenerate:
    case ErrorCode::kSingularCovariance:
      return kNumericError;
    default:
      return kDataError;
  }
}

struct Options {
  std::string config;
  std::optional<int> seed;
  std::optional<int> threads;
  std::string only;
  std::string out = ".";
  double score_scale = 1.0;
  int mc_draws = 100000;
};

gepc::ExperimentConfig load(const Options& opt) {
  if (opt.config.empty()) throw gepc::Error(gepc::ErrorCode::kConfig, "--config is required");
  gepc::KvFile kv = gepc::KvFile::load(opt.config);
  if (opt.seed) kv.set("seed", std::to_string(*opt.seed));
  if (opt.threads) kv.set("threads", std::to_string(*opt.threads));
  return gepc::load_experiment(kv, std::filesystem::path(opt.config).parent_path());
}

void print_summary(const gepc::ScoreSummary& s) {
  std::printf("auroc=%.6f fpr95=%.6f aupr=%.6f auroc_sign_invariant=%.6f n_id=%zu n_ood=%zu\n", s.auroc,
              s.fpr95, s.aupr, s.auroc_sign_invariant, s.id_scores.size(), s.ood_scores.size());
  if (!s.ledgers.empty()) {
    std::printf("ledger per sample: %lldF+%lldJ\n", static_cast<long long>(s.ledgers.front().forward),
                static_cast<long long>(s.ledgers.front().jvp));
  }
}

int cmd_sanity(const Options& opt) {
  gepc::SanityOptions so;
  so.only = opt.only;
  so.score_scale = opt.score_scale;
  so.mc_draws = static_cast<std::size_t>(opt.mc_draws);
  if (opt.seed) so.seed = static_cast<std::uint64_t>(*opt.seed);
  const auto rows = gepc::run_sanity(so);
  std::filesystem::create_directories(opt.out);
  std::ofstream csv(std::filesystem::path(opt.out) / "sanity.csv");
  csv << "check,expected,measured,stderr,pass\n";
  int failed = 0;
  for (const auto& r : rows) {
    csv << r.name << ',' << gepc::format_double(r.expected) << ',' << gepc::format_double(r.measured) << ','
        << gepc::format_double(r.stderr_) << ',' << (r.pass ? 1 : 0) << '\n';
    std::printf("%-26s %-4s expected=%-12.6g measured=%-12.6g se=%-10.3g %s\n", r.name.c_str(),
                r.pass ? "ok" : "FAIL", r.expected, r.measured, r.stderr_, r.note.c_str());
    if (!r.pass) ++failed;
  }
  if (failed) {
    std::fprintf(stderr, "gepc: %d sanity check(s) failed\n", failed);
    return kSanityFailure;
  }
  std::printf("all %zu sanity checks passed\n", rows.size());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-equivariant posterior consistency: OOD scoring from score-field symmetry residuals"};
  app.require_subcommand(1);
  Options opt;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "experiment config file");
    sub->add_option("--seed", opt.seed, "override the config seed");
    sub->add_option("--threads", opt.threads, "worker threads");
  };
  auto* gen = app.add_subcommand("gen", "generate the synthetic datasets");
  auto* select = app.add_subcommand("select", "ID-only timestep selection");
  auto* calibrate = app.add_subcommand("calibrate", "ID-only calibration on the selection");
  auto* score = app.add_subcommand("score", "score id_test / ood_test and write metrics");
  auto* run = app.add_subcommand("run", "gen (if synthetic), select, calibrate, score");
  auto* maps = app.add_subcommand("maps", "export residual maps");
  auto* bridge = app.add_subcommand("bridge-score", "run the pipeline through the bridge protocol");
  auto* sanity = app.add_subcommand("sanity", "closed-form and identity checks");
  for (auto* sub : {gen, select, calibrate, score, run, maps, bridge}) add_common(sub);
  sanity->add_option("--only", opt.only, "run one check group");
  sanity->add_option("--seed", opt.seed, "override the check seed");
  sanity->add_option("--out", opt.out, "directory for sanity.csv");
  sanity->add_option("--draws", opt.mc_draws, "Monte-Carlo draws per closed-form check");
  sanity->add_option("--inject-score-scale", opt.score_scale)->group("");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sanity->parsed()) return cmd_sanity(opt);
    auto cfg = load(opt);
    if (gen->parsed()) {
      gepc::prepare_synthetic(cfg);
      std::printf("wrote %s, %s, %s\n", cfg.id_train.c_str(), cfg.id_test.c_str(), cfg.ood_test.c_str());
    } else if (select->parsed()) {
      const auto sel = gepc::run_select(cfg);
      std::printf("kept:");
      for (std::size_t k = 0; k < sel.kept.size(); ++k) std::printf(" t=%d (w=%.4f)", sel.kept[k], sel.weights[k]);
      std::printf("\n");
    } else if (calibrate->parsed()) {
      const auto cal = gepc::run_calibrate(cfg);
      std::printf("calibrator: %s over %zu cells\n", gepc::to_string(cal.mode).c_str(), cal.cells());
    } else if (score->parsed()) {
      print_summary(gepc::run_score(cfg));
    } else if (run->parsed()) {
      print_summary(gepc::run_experiment(cfg));
    } else if (maps->parsed()) {
      const auto m = gepc::run_maps(cfg);
      std::printf("v_global=%.6g%s, %zu maps exported\n", m.normalizer.v_global,
                  m.normalizer.degenerate ? " (degenerate)" : "", m.exported);
    } else if (bridge->parsed()) {
      print_summary(gepc::run_bridge_score(cfg));
    }
  } catch (const gepc::Error& e) {
    std::fprintf(stderr, "gepc: %s error: %s\n", gepc::to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gepc: error: %s\n", e.what());
    return kDataError;
  }
  return kOk;
}
