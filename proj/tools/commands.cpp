#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tckls/csv.hpp"
#include "tckls/error.hpp"
#include "tckls/estimators.hpp"
#include "tckls/inference.hpp"
#include "tckls/mc_harness.hpp"
#include "tckls/model.hpp"
#include "tckls/simulate.hpp"
#include "tckls/stationary.hpp"
#include "tckls/statistics.hpp"

namespace tckls::cli {

namespace {

struct Global {
  bool quiet = false;
};

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed for '" + path + "'");
}

std::string fmt(double v, int digits = 6) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string interval_text(double lo, double hi) { return "[" + fmt(lo) + ", " + fmt(hi) + ")"; }

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string model;
  double T = 0.0;
  std::size_t steps_per_unit = 1000;
  double x0 = 1.0;
  std::optional<double> burn_in;
  bool stationary_start = false;
  std::size_t every = 1;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a, const Global& g) {
  const ThresholdModel model = load_model(a.model);
  if (!(a.T > 0.0)) throw InputError("--T must be positive");
  if (a.steps_per_unit < 1) throw InputError("--steps-per-unit must be >= 1");
  if (a.every < 1) throw InputError("--every must be >= 1");
  Rng rng = make_stream(a.seed, 0);
  double x0 = a.x0;
  if (a.stationary_start) {
    x0 = warm_start_exact(build_stationary(model), rng);
  } else if (a.burn_in) {
    // The burn-in starts from 1 regardless of --x0.
    x0 = warm_start_burn_in(model, *a.burn_in, a.steps_per_unit, rng);
  }
  const Trajectory traj = simulate_path(model, x0, a.steps_per_unit, a.T, rng);
  const ObservationSet obs = subsample(traj, a.every);
  write_series_csv(a.out, obs.times(), obs.values());
  if (!g.quiet) {
    const auto [mn, mx] = std::minmax_element(obs.values().begin(), obs.values().end());
    std::cout << "T = " << fmt(obs.T_N()) << ", N = " << obs.num_increments() << ", Delta_N = " << fmt(obs.Delta_N())
              << ", min = " << fmt(*mn) << ", max = " << fmt(*mx) << "\n";
  }
  return kOk;
}

// ---- geometry from flags ----------------------------------------------------

RegimeGeometry geometry_from_flags(const std::string& model_path, const std::vector<double>& thresholds,
                                   const std::vector<double>& gammas) {
  if (!model_path.empty()) {
    if (!thresholds.empty() || !gammas.empty()) throw InputError("give either --model or --thresholds/--gamma");
    return load_model(model_path).geometry();
  }
  if (gammas.empty()) throw InputError("the regime geometry needs --model or --gamma");
  std::vector<double> g = gammas;
  if (g.size() == 1) g.assign(thresholds.size() + 1, gammas.front());
  try {
    return RegimeGeometry(thresholds, g);
  } catch (const ModelError& e) {
    throw InputError(e.what());
  }
}

// ---- estimate ---------------------------------------------------------------

struct EstimateArgs {
  std::string data;
  std::string model;
  std::vector<double> thresholds;
  std::vector<double> gammas;
  std::optional<double> dt;
  std::vector<double> sigma_known;
  double alpha = 0.05;
  std::string dump_stats;
  std::string out;
};

void print_estimate_table(const EstimationResult& r) {
  std::cout << "T_N = " << fmt(r.T_N) << ", N = " << r.N << ", Delta_N = " << fmt(r.Delta_N) << "\n";
  const int level = static_cast<int>(std::lround(100.0 * (1.0 - r.alpha)));
  for (std::size_t j = 0; j < r.geometry.num_regimes(); ++j) {
    const VolFit& vf = r.sigma_hat.regimes[j];
    std::cout << "regime " << j << " " << interval_text(r.geometry.lower(j), r.geometry.upper(j))
              << "  gamma = " << fmt(r.geometry.gamma(j)) << "  sigma_hat = " << (vf.ok() ? fmt(vf.sigma) : "n/a")
              << (vf.clamped ? " (clamped)" : "") << (r.sigma_known ? "  sigma_used = " + fmt(r.sigma_used[j]) : "")
              << "\n";
    for (EstimatorKind k : {EstimatorKind::Mle, EstimatorKind::Qmle}) {
      const KindResult& kr = r.of(k);
      const DriftFit& f = kr.drift.regimes[j];
      std::cout << "  " << to_string(k) << ": ";
      if (!f.ok()) {
        std::cout << to_string(f.status) << "\n";
        continue;
      }
      std::cout << "a = " << fmt(f.a) << " " << level << "% [" << fmt(kr.ci[j][0].lo) << ", " << fmt(kr.ci[j][0].hi)
                << "]  b = " << fmt(f.b) << " [" << fmt(kr.ci[j][1].lo) << ", " << fmt(kr.ci[j][1].hi) << "]\n";
    }
  }
}

int cmd_estimate(const EstimateArgs& a, const Global& g) {
  const RegimeGeometry geom = geometry_from_flags(a.model, a.thresholds, a.gammas);
  const Series s = read_series_csv(a.data, a.dt);
  std::optional<ObservationSet> obs;
  try {
    obs.emplace(s.times, s.values);
  } catch (const Error& e) {
    throw InputError(a.data + ": " + e.what());
  }
  EstimateOptions opt;
  opt.alpha = a.alpha;
  if (!a.sigma_known.empty()) opt.sigma_known = a.sigma_known;
  const EstimationResult r = estimate_full(*obs, geom, opt);
  if (!a.out.empty()) write_json(to_json(r), a.out);
  if (!a.dump_stats.empty()) write_json(stats_to_json(r.stats), a.dump_stats);
  if (!g.quiet) print_estimate_table(r);
  return kOk;
}

// ---- test -------------------------------------------------------------------

struct TestArgs {
  std::string data;
  std::optional<double> dt;
  double gamma = 0.5;
  std::size_t n_boot = 1000;
  std::size_t n_grid = 1000;
  double alpha = 0.05;
  std::string fit = "qmle";
  bool stationary_start = false;
  std::size_t max_thresholds = 8;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  std::string out;
  std::string curves;
};

int cmd_test(const TestArgs& a, const Global& g) {
  if (a.n_boot < 1) throw InputError("--n-boot must be >= 1");
  if (a.n_grid < 1) throw InputError("--n-grid must be >= 1");
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw InputError("--alpha must lie in (0, 1)");
  const Series s = read_series_csv(a.data, a.dt);
  std::optional<ObservationSet> obs;
  try {
    obs.emplace(s.times, s.values);
  } catch (const Error& e) {
    throw InputError(a.data + ": " + e.what());
  }
  DetectionOptions opt;
  opt.alpha = a.alpha;
  opt.scan.n_grid = a.n_grid;
  opt.scan.fit = a.fit == "mle" ? EstimatorKind::Mle : EstimatorKind::Qmle;
  opt.bootstrap.n_boot = a.n_boot;
  opt.bootstrap.stationary_start = a.stationary_start;
  opt.bootstrap.jobs = std::max(1u, a.jobs);
  opt.max_thresholds = a.max_thresholds;
  const DetectionReport rep = sequential_detection(*obs, a.gamma, opt, a.seed);

  if (!a.out.empty()) write_json(to_json(rep), a.out);
  if (!a.curves.empty()) {
    for (std::size_t i = 0; i < rep.steps.size(); ++i) {
      const ScanResult& sc = rep.steps[i].scan;
      write_columns_csv(a.curves + "_step" + std::to_string(i + 1) + ".csv", {"rbar", "statistic"},
                        {sc.candidates, sc.statistic});
    }
  }
  if (!g.quiet) {
    for (std::size_t i = 0; i < rep.steps.size(); ++i) {
      const ThresholdTestResult& st = rep.steps[i];
      std::cout << "step " << i + 1 << ": segment " << interval_text(st.scan.lower, st.scan.upper) << ": ";
      if (!st.testable) {
        std::cout << st.note << "\n";
        continue;
      }
      std::cout << "T_data = " << fmt(st.scan.T_data) << " at r = " << fmt(st.scan.r_hat)
                << ", p-value = " << fmt(st.p_value) << " -> " << (st.reject ? "significant" : "not significant");
      if (!st.note.empty()) std::cout << " (" << st.note << ")";
      std::cout << "\n";
    }
    std::cout << "thresholds:";
    if (rep.thresholds.empty()) std::cout << " none";
    for (double r : rep.thresholds) std::cout << " " << fmt(r);
    std::cout << "\n";
    if (rep.fit) print_estimate_table(*rep.fit);
  }
  return kOk;
}

// ---- study ------------------------------------------------------------------

struct StudyArgs {
  std::string kind;
  std::string config;
  unsigned jobs = 1;
  std::string out;
  std::string csv;
  std::string samples;
};

int cmd_study(const StudyArgs& a, const Global& g) {
  const StudyKind kind = study_kind_from_string(a.kind);
  StudyConfig cfg = load_study_config(a.config);
  cfg.jobs = std::max(1u, a.jobs);
  if (!a.samples.empty() && kind != StudyKind::Clt) throw InputError("--samples applies to clt studies only");
  const StudyReport rep = run_study(cfg, kind);
  const nlohmann::json j = to_json(rep);
  if (!a.out.empty()) {
    write_json(j, a.out);
  } else {
    std::cout << j.dump(2) << "\n";
  }
  if (!a.csv.empty()) write_report_csv(rep, a.csv);
  if (!a.samples.empty()) write_samples_csv(rep, a.samples);
  if (!g.quiet) {
    std::cerr << "study " << to_string(kind) << ": " << rep.n_ok << " ok, " << rep.n_failed << " failed, "
              << fmt(rep.runtime_seconds, 4) << " s\n";
  }
  return kOk;
}

// ---- stationary -------------------------------------------------------------

struct StationaryArgs {
  std::string model;
  std::string out;
  std::string summary;
  std::size_t points = 1000;
  double tol = 1e-12;
  std::optional<double> reference;
};

int cmd_stationary(const StationaryArgs& a, const Global& g) {
  const ThresholdModel model = load_model(a.model);
  StationaryOptions opt;
  opt.tol = a.tol;
  opt.reference = a.reference;
  const StationaryDistribution dist = build_stationary(model, opt);
  if (!a.out.empty()) write_stationary_csv(dist, a.out, a.points);

  auto moment = [&](double m, std::optional<std::size_t> j = std::nullopt) {
    const MomentValue v = stationary_moment(dist, m, j);
    return v.finite ? nlohmann::json(v.value) : nlohmann::json("inf");
  };
  nlohmann::json regimes = nlohmann::json::array();
  for (std::size_t j = 0; j < model.num_regimes(); ++j) {
    regimes.push_back({{"index", j},
                       {"lower", model.geometry().lower(j)},
                       {"upper", model.geometry().upper(j)},
                       {"mass", moment(0.0, j)}});
  }
  for (auto& r : regimes) {
    for (const char* k : {"lower", "upper"}) {
      if (!std::isfinite(r[k].get<double>())) r[k] = nullptr;
    }
  }
  const nlohmann::json j{{"state_space", to_string(state_space(model))},
                         {"log_normalization", dist.log_normalization()},
                         {"mean", moment(1.0)},
                         {"second_moment", moment(2.0)},
                         {"left_tail_mass", dist.left_tail_mass()},
                         {"right_tail_mass", dist.right_tail_mass()},
                         {"regimes", regimes},
                         {"warnings", dist.warnings()}};
  if (!a.summary.empty()) write_json(j, a.summary);
  if (!g.quiet) std::cout << j.dump(2) << "\n";
  return kOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Simulation and estimation of threshold CKLS diffusions"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_flag("-q,--quiet", g.quiet, "Suppress the console summary");
  // simulate, estimate and stationary run on one thread; they take --jobs so
  // that every command shares the flag.
  unsigned serial_jobs = 1;

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Simulate a trajectory with the Euler scheme");
  s_sim->add_option("--model", sim.model, "Model JSON file")->required();
  s_sim->add_option("--T", sim.T, "Horizon")->required();
  s_sim->add_option("--steps-per-unit", sim.steps_per_unit, "Euler steps per unit of time");
  s_sim->add_option("--x0", sim.x0, "Initial value");
  s_sim->add_option("--burn-in", sim.burn_in, "Start from the end of a burn-in path of this length");
  s_sim->add_flag("--stationary-start", sim.stationary_start, "Start from a stationary draw");
  s_sim->add_option("--every", sim.every, "Keep every n-th point");
  s_sim->add_option("--seed", sim.seed, "Random seed");
  s_sim->add_option("-o,--output", sim.out, "Output CSV")->required();
  s_sim->add_option("--jobs", serial_jobs, "Ignored; this command is single-threaded");

  EstimateArgs est;
  auto* s_est = app.add_subcommand("estimate", "Estimate drift and volatility parameters");
  s_est->add_option("--data", est.data, "Input CSV")->required();
  s_est->add_option("--model", est.model, "Model JSON providing thresholds and gammas");
  s_est->add_option("--thresholds", est.thresholds, "Thresholds r1,...,rd")->delimiter(',');
  s_est->add_option("--gamma", est.gammas, "Diffusion exponents, one per regime or a single value")->delimiter(',');
  s_est->add_option("--dt", est.dt, "Time step for index or value-only data");
  s_est->add_option("--sigma-known", est.sigma_known, "Known volatilities, one per regime")->delimiter(',');
  s_est->add_option("--alpha", est.alpha, "Confidence intervals at level 1 - alpha");
  s_est->add_option("--dump-stats", est.dump_stats, "Write the path statistics as JSON");
  s_est->add_option("-o,--output", est.out, "Output JSON");
  s_est->add_option("--jobs", serial_jobs, "Ignored; this command is single-threaded");

  TestArgs tst;
  auto* s_tst = app.add_subcommand("test", "Sequential threshold detection");
  s_tst->add_option("--data", tst.data, "Input CSV")->required();
  s_tst->add_option("--dt", tst.dt, "Time step for index or value-only data");
  s_tst->add_option("--gamma", tst.gamma, "Diffusion exponent of every regime");
  s_tst->add_option("--n-boot", tst.n_boot, "Bootstrap replicates");
  s_tst->add_option("--n-grid", tst.n_grid, "Candidate grid intervals");
  s_tst->add_option("--alpha", tst.alpha, "Significance level");
  s_tst->add_option("--fit", tst.fit, "Drift fit inside the statistic")
      ->check(CLI::IsMember({"qmle", "mle"}));
  s_tst->add_flag("--stationary-start", tst.stationary_start, "Start bootstrap paths from a stationary draw");
  s_tst->add_option("--max-thresholds", tst.max_thresholds, "Upper bound on detected thresholds");
  s_tst->add_option("--seed", tst.seed, "Random seed");
  s_tst->add_option("--jobs", tst.jobs, "Worker threads");
  s_tst->add_option("-o,--output", tst.out, "Output JSON report");
  s_tst->add_option("--curves", tst.curves, "Prefix of the per-step statistic curve CSVs");

  StudyArgs sty;
  auto* s_sty = app.add_subcommand("study", "Monte Carlo studies");
  s_sty->add_option("kind", sty.kind, "rmse | clt | size | power")
      ->required()
      ->check(CLI::IsMember({"rmse", "clt", "size", "power"}));
  s_sty->add_option("--config", sty.config, "Study config JSON")->required();
  s_sty->add_option("--jobs", sty.jobs, "Worker threads");
  s_sty->add_option("-o,--output", sty.out, "Report JSON (stdout if omitted)");
  s_sty->add_option("--csv", sty.csv, "Report CSV");
  s_sty->add_option("--samples", sty.samples, "Normalized-error CSV (clt)");

  StationaryArgs sta;
  auto* s_sta = app.add_subcommand("stationary", "Stationary law of a model");
  s_sta->add_option("--model", sta.model, "Model JSON file")->required();
  s_sta->add_option("-o,--output", sta.out, "Density and cdf CSV");
  s_sta->add_option("--summary", sta.summary, "Summary JSON");
  s_sta->add_option("--points", sta.points, "Rows of the CSV");
  s_sta->add_option("--tol", sta.tol, "Tail truncation relative to the density maximum");
  s_sta->add_option("--reference", sta.reference, "Reference point of the scale function");
  s_sta->add_option("--jobs", serial_jobs, "Ignored; this command is single-threaded");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*s_sim) return cmd_simulate(sim, g);
    if (*s_est) return cmd_estimate(est, g);
    if (*s_tst) return cmd_test(tst, g);
    if (*s_sty) return cmd_study(sty, g);
    if (*s_sta) return cmd_stationary(sta, g);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace tckls::cli
