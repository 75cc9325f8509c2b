// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
//
//   acceptance [--out DIR] [--only N]

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gepc/metrics.hpp"
#include "gepc/pipeline.hpp"
#include "gepc/rng.hpp"
#include "gepc/theory.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<gepc::SanityRow> sanity(const std::string& only) {
  gepc::SanityOptions opt;
  opt.only = only;
  return gepc::run_sanity(opt);
}

bool all_pass(const std::vector<gepc::SanityRow>& rows, const std::string& prefix = "") {
  for (const auto& r : rows)
    if (r.name.rfind(prefix, 0) == 0 && !r.pass) return false;
  return true;
}

const gepc::SanityRow* find_row(const std::vector<gepc::SanityRow>& rows, const std::string& name) {
  for (const auto& r : rows)
    if (r.name == name) return &r;
  return nullptr;
}

Verdict mean_shift() {
  const auto t0 = Clock::now();
  const auto rows = sanity("mean_shift");
  const double secs = seconds_since(t0);
  Verdict v{all_pass(rows) && rows.size() == 3 && secs < 5.0, ""};
  for (const auto& r : rows) v.detail += fmt("%s %.5g/%.5g ", r.name.c_str(), r.measured, r.expected);
  v.detail += fmt("(%.2fs, limit 5s)", secs);
  return v;
}

Verdict c4() {
  const auto rows = sanity("c4");
  Verdict v{all_pass(rows) && rows.size() == 2, ""};
  for (const auto& r : rows) v.detail += fmt("%s %.5g/%.5g ", r.name.c_str(), r.measured, r.expected);
  return v;
}

Verdict magnitude() {
  const auto rows = sanity("magnitude");
  const auto* e = find_row(rows, "magnitude[score_energy]");
  const auto* r = find_row(rows, "magnitude[residual]");
  if (!e || !r) return {false, "missing rows"};
  return {e->pass && r->pass,
          fmt("E|s|^2 %.4f vs %.4f (3se=%.4f); residual %.4g vs %.4g", e->expected, e->measured, 3 * e->stderr_,
              r->expected, r->measured)};
}

Verdict sandwich_bounds() {
  const auto rows = sanity("sandwich");
  int inst = 0, inst_ok = 0, zero = 0, zero_ok = 0;
  for (const auto& r : rows) {
    if (r.name.rfind("sandwich_zero[", 0) == 0) {
      ++zero;
      zero_ok += r.pass;
    } else {
      ++inst;
      inst_ok += r.pass;
    }
  }
  return {inst == 50 && inst_ok == 50 && zero > 0 && zero_ok == zero,
          fmt("sandwich %d/%d, zero-perturbation %d/%d", inst_ok, inst, zero_ok, zero)};
}

Verdict cross_backbone() {
  const auto rows = sanity("cross_backbone");
  Verdict v{all_pass(rows) && !rows.empty(), ""};
  for (const auto& r : rows) v.detail += fmt("%s upper %.1f%% ", r.name.c_str(), 100.0 * r.measured);
  return v;
}

Verdict identities() {
  const auto tw = sanity("tweedie");
  const auto cov = sanity("posterior_cov");
  const auto eq = sanity("equivariance");
  if (tw.size() != 1 || cov.size() != 1 || eq.size() != 1) return {false, "missing rows"};
  return {tw[0].pass && cov[0].pass && eq[0].pass,
          fmt("tweedie %.2e (1e-8), cov rel %.2e (1e-4), equivariance %.2e (1e-10)", tw[0].measured,
              cov[0].measured, eq[0].measured)};
}

gepc::ExperimentConfig experiment(const char* name, const std::filesystem::path& out,
                                  const std::vector<std::pair<std::string, std::string>>& overrides) {
  const std::filesystem::path conf = std::filesystem::path(GEPC_CONFIG_DIR) / name;
  gepc::KvFile kv = gepc::KvFile::load(conf);
  kv.set("out_dir", out.string());
  for (const auto& [k, val] : overrides) kv.set(k, val);
  return gepc::load_experiment(kv, conf.parent_path());
}

struct DefaultRun {
  gepc::ExperimentConfig cfg;
  gepc::ScoreSummary summary;
  double seconds = 0.0;
};

// Shared by the detection, ledger and determinism criteria.
const DefaultRun& default_run(const std::filesystem::path& out) {
  static const DefaultRun run = [&] {
    DefaultRun r;
    r.cfg = experiment("default.conf", out / "default_t1", {{"threads", "1"}});
    const auto t0 = Clock::now();
    r.summary = gepc::run_experiment(r.cfg);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

Verdict detection(const std::filesystem::path& out) {
  const DefaultRun& run = default_run(out);
  const auto base_cfg = experiment("mean_shift.conf", out / "mean_shift_norm", {{"features", "norm"}});
  const auto base = gepc::run_experiment(base_cfg);
  const bool gepc_ok = run.summary.auroc >= 0.95;
  const bool base_ok = base.auroc <= 0.6;
  const bool time_ok = run.seconds < 120.0;
  return {gepc_ok && base_ok && time_ok,
          fmt("gepc auroc %.4f (>= 0.95 %s), norm baseline auroc %.4f (<= 0.6 %s), %.1fs single-threaded (< 120s)",
              run.summary.auroc, gepc_ok ? "ok" : "MISSED", base.auroc, base_ok ? "ok" : "MISSED", run.seconds)};
}

Verdict ledger(const std::filesystem::path& out) {
  const DefaultRun& run = default_run(out);
  const auto& sel = gepc::TimestepSelection::read(run.cfg.out_dir / "selection.txt");
  const auto group = run.cfg.group(run.cfg.id_spec.shape);
  const long long expect_f =
      static_cast<long long>(1 + group.size()) * static_cast<long long>(sel.kept.size()) * run.cfg.mc_samples;
  std::size_t bad = 0;
  for (const auto& l : run.summary.ledgers)
    if (l.forward != expect_f || l.jvp != 0) ++bad;
  const bool ok = bad == 0 && !run.summary.ledgers.empty() && expect_f == 16;
  return {ok, fmt("%zu samples, expected %lldF+0J = (1+%zu)*%zu*%d, %zu mismatches", run.summary.ledgers.size(),
                  expect_f, group.size(), sel.kept.size(), run.cfg.mc_samples, bad)};
}

Verdict determinism(const std::filesystem::path& out) {
  const DefaultRun& run = default_run(out);
  auto cfg4 = experiment("default.conf", out / "default_t4", {{"threads", "4"}});
  gepc::run_experiment(cfg4);
  std::vector<std::string> differing;
  for (const char* f : {"selection.txt", "calibrator.txt", "scores_id.csv", "scores_ood.csv", "metrics.csv",
                        "ledger.txt"}) {
    if (slurp(run.cfg.out_dir / f) != slurp(cfg4.out_dir / f)) differing.push_back(f);
  }
  const std::string sel = slurp(cfg4.out_dir / "selection.txt");
  const std::string cal = slurp(cfg4.out_dir / "calibrator.txt");
  std::filesystem::remove_all(cfg4.ood_test);
  std::filesystem::remove(cfg4.out_dir / "selection.txt");
  std::filesystem::remove(cfg4.out_dir / "calibrator.txt");
  gepc::run_select(cfg4);
  gepc::run_calibrate(cfg4);
  const bool leak_free =
      slurp(cfg4.out_dir / "selection.txt") == sel && slurp(cfg4.out_dir / "calibrator.txt") == cal;
  std::string which;
  for (const auto& d : differing) which += " " + d;
  return {differing.empty() && leak_free,
          fmt("1 vs 4 workers: %s; select/calibrate without OOD data: %s",
              differing.empty() ? "identical" : ("differ:" + which).c_str(), leak_free ? "unchanged" : "CHANGED")};
}

Verdict metric_oracles() {
  gepc::CounterRng rng(20240601, 10);
  double worst = 0.0;
  for (int set = 0; set < 100; ++set) {
    std::vector<double> id(1 + rng.below(300)), ood(1 + rng.below(300));
    for (auto& x : id) x = std::round(4.0 * rng.normal());
    for (auto& x : ood) x = std::round(4.0 * rng.normal() + 1.5);
    double wins = 0.0;
    for (double o : ood)
      for (double i : id) wins += o > i ? 1.0 : (o == i ? 0.5 : 0.0);
    const double brute = wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
    worst = std::max(worst, std::abs(gepc::auroc_ranksum(id, ood) - brute));
    worst = std::max(worst, std::abs(gepc::auroc(id, ood) - brute));
  }
  const double example = gepc::auroc(std::vector<double>{0.1, 0.4}, std::vector<double>{0.3, 0.5});
  return {worst <= 1e-12 && example == 0.75, fmt("max |rank-sum - brute| %.2e (1e-12), example %.17g (0.75)",
                                                 worst, example)};
}

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path out = "acceptance_out";
  int only = 0;
  for (int i = 1; i + 1 < argc; i += 2) {
    if (std::strcmp(argv[i], "--out") == 0) {
      out = argv[i + 1];
    } else if (std::strcmp(argv[i], "--only") == 0) {
      only = std::atoi(argv[i + 1]);
    } else {
      std::fprintf(stderr, "usage: acceptance [--out DIR] [--only N]\n");
      return 2;
    }
  }
  std::filesystem::create_directories(out);

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"mean-shift closed form", mean_shift},
      {"C4 anisotropy", c4},
      {"score-magnitude blindness", magnitude},
      {"residual bound sandwich", sandwich_bounds},
      {"cross-backbone upper bound", cross_backbone},
      {"identity suite", identities},
      {"end-to-end detection", [&] { return detection(out); }},
      {"compute ledger", [&] { return ledger(out); }},
      {"determinism and no leakage", [&] { return determinism(out); }},
      {"metric oracles", metric_oracles},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (only && static_cast<int>(k) + 1 != only) continue;
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    std::printf("AC%-2zu %-4s %-28s %s\n", k + 1, v.pass ? "PASS" : "FAIL", criteria[k].first, v.detail.c_str());
    std::fflush(stdout);
    failed += !v.pass;
  }
  std::printf("%d criteria failed\n", failed);
  return failed ? 1 : 0;
}
