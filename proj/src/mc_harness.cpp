#include "tckls/mc_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "tckls/csv.hpp"
#include "tckls/error.hpp"
#include "tckls/estimators.hpp"
#include "tckls/inference.hpp"
#include "tckls/parallel.hpp"
#include "tckls/rng.hpp"
#include "tckls/simulate.hpp"
#include "tckls/stationary.hpp"

namespace tckls {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMaxFailureMessages = 10;
// Stream index of the common starting value; replicates use 0..n_rep-1.
constexpr std::uint64_t kStartStream = 0xFFFFFFFFFFFFFFFFULL;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<double> observation_times(const StudyConfig& cfg) {
  std::vector<double> t(cfg.N + 1);
  const double h = cfg.T / static_cast<double>(cfg.N);
  for (std::size_t i = 0; i <= cfg.N; ++i) t[i] = static_cast<double>(i) * h;
  t[cfg.N] = cfg.T;
  return t;
}

std::size_t steps_per_unit(const StudyConfig& cfg) {
  const double n = static_cast<double>(cfg.N) * static_cast<double>(cfg.substeps) / cfg.T;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n)));
}

double start_value(const StudyConfig& cfg, const std::optional<StationaryDistribution>& dist, Rng& rng) {
  if (cfg.start == StartMode::Stationary) return sample_stationary_one(*dist, rng);
  return warm_start_burn_in(cfg.model, cfg.burn_in.value_or(cfg.T), steps_per_unit(cfg), rng);
}

// One estimated quantity of the study.
struct Slot {
  std::string estimator;
  std::string name;
  std::size_t regime;
  double truth;
  std::optional<EstimatorKind> kind;
  int p;  // 0 = a, 1 = b
};

std::vector<Slot> make_slots(const ThresholdModel& model) {
  std::vector<Slot> slots;
  for (EstimatorKind k : {EstimatorKind::Mle, EstimatorKind::Qmle}) {
    for (int p = 0; p < 2; ++p) {
      for (std::size_t j = 0; j < model.num_regimes(); ++j) {
        const RegimeParams& r = model.regime(j);
        slots.push_back({to_string(k), p == 0 ? "a" : "b", j, p == 0 ? r.a : r.b, k, p});
      }
    }
  }
  for (std::size_t j = 0; j < model.num_regimes(); ++j) {
    slots.push_back({"sigma", "sigma", j, model.regime(j).sigma, std::nullopt, 0});
  }
  return slots;
}

struct SlotValue {
  double value = kNaN;
  double covered = kNaN;  // 1 / 0, NaN when there is no interval
  double data_var = kNaN;
};

SlotValue extract(const EstimationResult& est, const Slot& s) {
  SlotValue v;
  if (!s.kind) {
    const VolFit& f = est.sigma_hat.regimes[s.regime];
    if (f.ok()) v.value = f.sigma;
    return v;
  }
  const KindResult& kr = est.of(*s.kind);
  const DriftFit& f = kr.drift.regimes[s.regime];
  if (!f.ok()) return v;
  v.value = s.p == 0 ? f.a : f.b;
  const Interval& ci = kr.ci[s.regime][s.p];
  if (std::isfinite(ci.lo) && std::isfinite(ci.hi)) v.covered = (ci.lo <= s.truth && s.truth <= ci.hi) ? 1.0 : 0.0;
  const CovFit& c = kr.cov.regimes[s.regime];
  if (c.ok()) v.data_var = c.cov[s.p][s.p];
  return v;
}

struct ReplicateOut {
  bool ok = false;
  std::string error;
  std::vector<SlotValue> values;
};

// Simulates and estimates every replicate from a common starting value.
std::vector<ReplicateOut> run_estimation_replicates(const StudyConfig& cfg, const std::vector<Slot>& slots,
                                                    StudyReport& rep) {
  std::optional<StationaryDistribution> dist;
  if (cfg.start == StartMode::Stationary) dist.emplace(build_stationary(cfg.model));
  Rng start_rng = make_stream(cfg.seed, kStartStream);
  const double x0 = start_value(cfg, dist, start_rng);
  rep.x0 = x0;

  const std::vector<double> times = observation_times(cfg);
  std::vector<ReplicateOut> out(cfg.n_rep);
  parallel_for(cfg.n_rep, cfg.jobs, [&](std::size_t r) {
    ReplicateOut& o = out[r];
    try {
      Rng rng = make_stream(cfg.seed, r);
      std::vector<double> path = simulate_on_grid(cfg.model, x0, times, cfg.substeps, rng);
      const ObservationSet obs(times, std::move(path));
      EstimateOptions eo;
      eo.alpha = cfg.alpha;
      const EstimationResult est = estimate_full(obs, cfg.model.geometry(), eo);
      for (const Slot& s : slots) o.values.push_back(extract(est, s));
      o.ok = true;
    } catch (const Error& e) {
      o.error = e.what();
    }
  });
  for (std::size_t r = 0; r < out.size(); ++r) {
    if (out[r].ok) {
      ++rep.n_ok;
    } else {
      ++rep.n_failed;
      if (rep.failures.size() < kMaxFailureMessages) {
        rep.failures.push_back("replicate " + std::to_string(r) + ": " + out[r].error);
      }
    }
  }
  return out;
}

ParamSummary summarize(const Slot& s, std::size_t idx, const std::vector<ReplicateOut>& reps) {
  ParamSummary p;
  p.estimator = s.estimator;
  p.name = s.name;
  p.regime = s.regime;
  p.truth = s.truth;
  p.relative = s.truth != 0.0;
  double se = 0.0, sum = 0.0, cov = 0.0;
  std::size_t n_cov = 0;
  for (const auto& r : reps) {
    if (!r.ok) continue;
    const SlotValue& v = r.values[idx];
    if (!std::isfinite(v.value)) continue;
    const double err = v.value - s.truth;
    se += err * err;
    sum += err;
    ++p.n;
    if (!std::isnan(v.covered)) {
      cov += v.covered;
      ++n_cov;
    }
  }
  if (p.n == 0) {
    p.rmse = p.eb = p.relative_eb = p.coverage = kNaN;
    return p;
  }
  const double n = static_cast<double>(p.n);
  p.rmse = std::sqrt(se / n);
  p.eb = sum / n;
  if (p.relative) {
    p.rmse /= std::fabs(s.truth);
    p.relative_eb = p.eb / std::fabs(s.truth);
  } else {
    p.relative_eb = kNaN;
  }
  p.coverage = n_cov > 0 ? cov / static_cast<double>(n_cov) : kNaN;
  return p;
}

}  // namespace

const char* to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::Rmse:
      return "rmse";
    case StudyKind::Clt:
      return "clt";
    case StudyKind::TestSize:
      return "size";
    case StudyKind::TestPower:
      return "power";
  }
  return "?";
}

StudyKind study_kind_from_string(const std::string& s) {
  if (s == "rmse") return StudyKind::Rmse;
  if (s == "clt") return StudyKind::Clt;
  if (s == "size" || s == "test_size") return StudyKind::TestSize;
  if (s == "power" || s == "test_power") return StudyKind::TestPower;
  throw InputError("unknown study kind '" + s + "'");
}

StudyConfig study_config_from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw InputError("study config: expected a JSON object");
  static const char* const keys[] = {"model", "model_file", "T",      "N",      "n_rep",  "seed",  "burn_in",
                                     "substeps", "start",   "alpha", "n_boot", "n_grid", "refine", "fit", "gamma"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(std::begin(keys), std::end(keys), it.key()) == std::end(keys)) {
      throw InputError("study config: unknown key '" + it.key() + "'");
    }
  }
  auto number = [&](const char* key) {
    if (!j.at(key).is_number()) throw InputError(std::string("study config: '") + key + "' must be a number");
    return j.at(key).get<double>();
  };
  auto count = [&](const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw InputError(std::string("study config: '") + key + "' must be a nonnegative integer");
    }
    return j.at(key).get<std::size_t>();
  };

  StudyConfig cfg;
  if (j.contains("model") == j.contains("model_file")) {
    throw InputError("study config: give exactly one of 'model' and 'model_file'");
  }
  if (j.contains("model")) {
    cfg.model = model_from_json(j.at("model"));
  } else {
    if (!j.at("model_file").is_string()) throw InputError("study config: 'model_file' must be a string");
    std::filesystem::path p = j.at("model_file").get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    cfg.model = load_model(p.string());
  }
  if (j.contains("T")) cfg.T = number("T");
  if (j.contains("N")) cfg.N = count("N");
  if (j.contains("n_rep")) cfg.n_rep = count("n_rep");
  if (j.contains("seed")) {
    cfg.seed = count("seed");
  }
  if (j.contains("burn_in")) cfg.burn_in = number("burn_in");
  if (j.contains("substeps")) cfg.substeps = count("substeps");
  if (j.contains("start")) {
    const auto& s = j.at("start");
    if (s == "burn_in") {
      cfg.start = StartMode::BurnIn;
    } else if (s == "stationary") {
      cfg.start = StartMode::Stationary;
    } else {
      throw InputError("study config: 'start' must be \"burn_in\" or \"stationary\"");
    }
  }
  if (j.contains("alpha")) cfg.alpha = number("alpha");
  if (j.contains("n_boot")) cfg.n_boot = count("n_boot");
  if (j.contains("n_grid")) cfg.n_grid = count("n_grid");
  if (j.contains("refine")) cfg.refine = count("refine");
  if (j.contains("fit")) {
    const auto& f = j.at("fit");
    if (f == "qmle") {
      cfg.fit = EstimatorKind::Qmle;
    } else if (f == "mle") {
      cfg.fit = EstimatorKind::Mle;
    } else {
      throw InputError("study config: 'fit' must be \"qmle\" or \"mle\"");
    }
  }
  if (j.contains("gamma")) cfg.gamma = number("gamma");
  validate(cfg);
  return cfg;
}

StudyConfig load_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open study config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("study config '" + path + "': " + e.what());
  }
  return study_config_from_json(j, std::filesystem::path(path).parent_path().string());
}

void validate(const StudyConfig& cfg) {
  if (cfg.n_rep < 1) throw InputError("study config: n_rep must be >= 1");
  if (cfg.N < 2) throw InputError("study config: N must be >= 2");
  if (!(cfg.T > 0.0) || !std::isfinite(cfg.T)) throw InputError("study config: T must be positive");
  if (cfg.burn_in && !(*cfg.burn_in >= 0.0)) throw InputError("study config: burn_in must be >= 0");
  if (cfg.substeps < 1) throw InputError("study config: substeps must be >= 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw InputError("study config: alpha must lie in (0, 1)");
  if (cfg.n_boot < 1) throw InputError("study config: n_boot must be >= 1");
  if (cfg.n_grid < 1) throw InputError("study config: n_grid must be >= 1");
  if (cfg.refine < 1) throw InputError("study config: refine must be >= 1");
}

nlohmann::json to_json(const StudyConfig& cfg) {
  nlohmann::json j{{"model", model_to_json(cfg.model)},
                   {"T", cfg.T},
                   {"N", cfg.N},
                   {"n_rep", cfg.n_rep},
                   {"seed", cfg.seed},
                   {"burn_in", cfg.burn_in.value_or(cfg.T)},
                   {"substeps", cfg.substeps},
                   {"start", cfg.start == StartMode::BurnIn ? "burn_in" : "stationary"},
                   {"alpha", cfg.alpha},
                   {"n_boot", cfg.n_boot},
                   {"n_grid", cfg.n_grid},
                   {"refine", cfg.refine},
                   {"fit", cfg.fit == EstimatorKind::Qmle ? "qmle" : "mle"}};
  j["gamma"] = cfg.gamma.value_or(cfg.model.first().gamma);
  return j;
}

StudyReport run_rmse_study(const StudyConfig& cfg) {
  validate(cfg);
  const auto t0 = Clock::now();
  StudyReport rep;
  rep.kind = StudyKind::Rmse;
  rep.config = cfg;
  const std::vector<Slot> slots = make_slots(cfg.model);
  const std::vector<ReplicateOut> reps = run_estimation_replicates(cfg, slots, rep);
  for (std::size_t i = 0; i < slots.size(); ++i) rep.params.push_back(summarize(slots[i], i, reps));
  rep.runtime_seconds = seconds_since(t0);
  return rep;
}

double ks_distance_normal(std::vector<double> x) {
  if (x.empty()) throw InputError("ks_distance_normal: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = 0.5 * std::erfc(-x[i] / std::sqrt(2.0));
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

StudyReport run_clt_study(const StudyConfig& cfg) {
  validate(cfg);
  const auto t0 = Clock::now();
  StudyReport rep;
  rep.kind = StudyKind::Clt;
  rep.config = cfg;

  const StationaryDistribution dist = build_stationary(cfg.model);
  const AsymptoticCovariance theo[2] = {theoretical_covariance(dist, EstimatorKind::Mle),
                                        theoretical_covariance(dist, EstimatorKind::Qmle)};
  std::vector<Slot> slots;
  for (const Slot& s : make_slots(cfg.model)) {
    if (s.kind) slots.push_back(s);
  }
  const std::vector<ReplicateOut> reps = run_estimation_replicates(cfg, slots, rep);

  for (std::size_t i = 0; i < slots.size(); ++i) {
    const Slot& s = slots[i];
    ParamSummary p = summarize(s, i, reps);
    const CovFit& c = theo[*s.kind == EstimatorKind::Mle ? 0 : 1].regimes[s.regime];
    const double var = c.ok() ? c.cov[s.p][s.p] : kNaN;
    std::vector<double> column(reps.size(), kNaN);
    std::vector<double> finite;
    double ratio_sum = 0.0;
    std::size_t n_ratio = 0;
    for (std::size_t r = 0; r < reps.size(); ++r) {
      if (!reps[r].ok) continue;
      const SlotValue& v = reps[r].values[i];
      if (!std::isfinite(v.value) || !(var > 0.0)) continue;
      column[r] = std::sqrt(cfg.T) * (v.value - s.truth) / std::sqrt(var);
      finite.push_back(column[r]);
      if (std::isfinite(v.data_var)) {
        ratio_sum += v.data_var / var;
        ++n_ratio;
      }
    }
    if (!finite.empty()) {
      double mean = 0.0;
      for (double z : finite) mean += z;
      mean /= static_cast<double>(finite.size());
      double ss = 0.0;
      for (double z : finite) ss += (z - mean) * (z - mean);
      p.mean_normalized = mean;
      p.sd_normalized = finite.size() > 1 ? std::sqrt(ss / static_cast<double>(finite.size() - 1)) : kNaN;
      if (finite.size() > 1) p.ks = ks_distance_normal(finite);
    } else {
      p.mean_normalized = p.sd_normalized = kNaN;
    }
    p.gamma_rel_diff = n_ratio > 0 ? ratio_sum / static_cast<double>(n_ratio) - 1.0 : kNaN;
    rep.params.push_back(p);
    rep.sample_names.push_back(s.estimator + "_" + s.name + std::to_string(s.regime));
    rep.samples.push_back(std::move(column));
  }
  rep.runtime_seconds = seconds_since(t0);
  return rep;
}

StudyReport run_test_calibration(const StudyConfig& cfg, StudyKind kind) {
  validate(cfg);
  if (kind != StudyKind::TestSize && kind != StudyKind::TestPower) {
    throw InputError("run_test_calibration: kind must be size or power");
  }
  const auto t0 = Clock::now();
  StudyReport rep;
  rep.kind = kind;
  rep.config = cfg;

  std::optional<StationaryDistribution> dist;
  if (cfg.start == StartMode::Stationary) dist.emplace(build_stationary(cfg.model));
  const std::vector<double> times = observation_times(cfg);
  const double gamma = cfg.gamma.value_or(cfg.model.first().gamma);

  DetectionOptions opt;
  opt.alpha = cfg.alpha;
  opt.scan.n_grid = cfg.n_grid;
  opt.scan.fit = cfg.fit;
  opt.bootstrap.n_boot = cfg.n_boot;
  opt.bootstrap.refine = cfg.refine;
  opt.bootstrap.jobs = 1;

  struct Out {
    bool ok = false;
    std::string error;
    std::size_t n_thresholds = 0;
    double r_hat = kNaN;
    double p_value = kNaN;
    double T = kNaN;
  };
  std::vector<Out> out(cfg.n_rep);
  parallel_for(cfg.n_rep, cfg.jobs, [&](std::size_t r) {
    Out& o = out[r];
    try {
      Rng rng = make_stream(cfg.seed, r);
      const double x0 = start_value(cfg, dist, rng);
      std::vector<double> path = simulate_on_grid(cfg.model, x0, times, cfg.substeps, rng);
      const ObservationSet obs(times, std::move(path));
      const DetectionReport d = sequential_detection(obs, gamma, opt, derive_seed(cfg.seed, r));
      o.n_thresholds = d.thresholds.size();
      const ThresholdTestResult& first = d.steps.front();
      if (!first.scan.degenerate) {
        o.r_hat = first.scan.r_hat;
        o.T = first.scan.T_data;
      }
      if (first.testable) o.p_value = first.p_value;
      o.ok = true;
    } catch (const Error& e) {
      o.error = e.what();
    }
  });

  std::size_t rejections = 0;
  for (std::size_t r = 0; r < out.size(); ++r) {
    const Out& o = out[r];
    rep.n_thresholds.push_back(o.n_thresholds);
    rep.first_r_hat.push_back(o.r_hat);
    rep.first_p_value.push_back(o.p_value);
    rep.first_T.push_back(o.T);
    if (o.ok) {
      ++rep.n_ok;
      rejections += o.n_thresholds > 0 ? 1 : 0;
    } else {
      ++rep.n_failed;
      if (rep.failures.size() < kMaxFailureMessages) {
        rep.failures.push_back("replicate " + std::to_string(r) + ": " + o.error);
      }
    }
  }
  if (rep.n_ok > 0) {
    const double n = static_cast<double>(rep.n_ok);
    rep.rejection_rate = static_cast<double>(rejections) / n;
    rep.mc_error = std::sqrt(rep.rejection_rate * (1.0 - rep.rejection_rate) / n);
  } else {
    rep.rejection_rate = rep.mc_error = kNaN;
  }
  rep.runtime_seconds = seconds_since(t0);
  return rep;
}

StudyReport run_study(const StudyConfig& cfg, StudyKind kind) {
  switch (kind) {
    case StudyKind::Rmse:
      return run_rmse_study(cfg);
    case StudyKind::Clt:
      return run_clt_study(cfg);
    case StudyKind::TestSize:
    case StudyKind::TestPower:
      return run_test_calibration(cfg, kind);
  }
  throw InputError("unknown study kind");
}

nlohmann::json to_json(const StudyReport& r) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j{{"study", to_string(r.kind)},
         {"config", to_json(r.config)},
         {"n_ok", r.n_ok},
         {"n_failed", r.n_failed},
         {"failures", r.failures}};
  j["x0"] = r.x0 ? num(*r.x0) : json(nullptr);
  if (r.kind == StudyKind::TestSize || r.kind == StudyKind::TestPower) {
    j["rejection_rate"] = num(r.rejection_rate);
    j["mc_error"] = num(r.mc_error);
    std::size_t max_t = 0;
    for (std::size_t n : r.n_thresholds) max_t = std::max(max_t, n);
    std::vector<std::size_t> hist(max_t + 1, 0);
    for (std::size_t n : r.n_thresholds) ++hist[n];
    j["threshold_count_histogram"] = hist;
    return j;
  }
  json params = json::array();
  for (const ParamSummary& p : r.params) {
    json e{{"estimator", p.estimator},
           {"parameter", p.name},
           {"regime", p.regime},
           {"true", p.truth},
           {"n", p.n},
           {"rmse", num(p.rmse)},
           {"rmse_relative", p.relative},
           {"eb", num(p.eb)},
           {"relative_eb", num(p.relative_eb)},
           {"coverage", num(p.coverage)}};
    if (r.kind == StudyKind::Clt) {
      e["ks"] = p.ks ? num(*p.ks) : json(nullptr);
      e["mean_normalized"] = num(p.mean_normalized);
      e["sd_normalized"] = num(p.sd_normalized);
      e["gamma_rel_diff"] = num(p.gamma_rel_diff);
    }
    params.push_back(e);
  }
  j["parameters"] = params;
  return j;
}

void write_report_csv(const StudyReport& r, const std::string& path) {
  if (r.kind == StudyKind::TestSize || r.kind == StudyKind::TestPower) {
    std::vector<double> idx, nt;
    for (std::size_t i = 0; i < r.n_thresholds.size(); ++i) {
      idx.push_back(static_cast<double>(i));
      nt.push_back(static_cast<double>(r.n_thresholds[i]));
    }
    write_columns_csv(path, {"replicate", "n_thresholds", "r_hat", "p_value", "T_data"},
                      {idx, nt, r.first_r_hat, r.first_p_value, r.first_T});
    return;
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out.precision(17);
  out << "estimator,parameter,regime,true,n,rmse,rmse_relative,eb,relative_eb,coverage";
  if (r.kind == StudyKind::Clt) out << ",ks,mean_normalized,sd_normalized,gamma_rel_diff";
  out << '\n';
  auto cell = [&](double v) {
    if (std::isfinite(v)) out << v;
  };
  for (const ParamSummary& p : r.params) {
    out << p.estimator << ',' << p.name << ',' << p.regime << ',' << p.truth << ',' << p.n << ',';
    cell(p.rmse);
    out << ',' << (p.relative ? 1 : 0) << ',';
    cell(p.eb);
    out << ',';
    cell(p.relative_eb);
    out << ',';
    cell(p.coverage);
    if (r.kind == StudyKind::Clt) {
      out << ',';
      if (p.ks) cell(*p.ks);
      out << ',';
      cell(p.mean_normalized);
      out << ',';
      cell(p.sd_normalized);
      out << ',';
      cell(p.gamma_rel_diff);
    }
    out << '\n';
  }
  if (!out) throw Error("write failed for '" + path + "'");
}

void write_samples_csv(const StudyReport& r, const std::string& path) {
  if (r.kind != StudyKind::Clt) throw InputError("normalized-error samples exist only for clt studies");
  write_columns_csv(path, r.sample_names, r.samples);
}

}  // namespace tckls
