#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tckls/model.hpp"

namespace tckls {

enum class StudyKind { Rmse, Clt, TestSize, TestPower };
const char* to_string(StudyKind kind);
StudyKind study_kind_from_string(const std::string& s);

enum class StartMode {
  BurnIn,      // final value of a path started at 1 and run for burn_in
  Stationary,  // exact draw from the stationary law
};

struct StudyConfig {
  ThresholdModel model{{}, {RegimeParams{0.3, 0.2, 0.2, 0.5}}};
  double T = 200.0;
  /// Number of observation increments; observations at t_i = i T / N.
  std::size_t N = 200000;
  std::size_t n_rep = 200;
  std::uint64_t seed = 1;
  /// Burn-in horizon; defaults to T.
  std::optional<double> burn_in;
  /// Euler steps per observation interval.
  std::size_t substeps = 1;
  /// RMSE and CLT studies share one starting value; calibration studies
  /// draw one per dataset.
  StartMode start = StartMode::BurnIn;
  double alpha = 0.05;
  std::size_t n_boot = 200;
  std::size_t n_grid = 1000;
  std::size_t refine = 10;
  /// Drift fit inside the threshold statistic.
  EstimatorKind fit = EstimatorKind::Qmle;
  /// Diffusion exponent of the detection geometry; defaults to the first
  /// regime's gamma.
  std::optional<double> gamma;
  /// Not part of the report.
  unsigned jobs = 1;
};

/// Keys: model | model_file, T, N, n_rep, seed, burn_in, substeps, start
/// ("burn_in" | "stationary"), alpha, n_boot, n_grid, refine, fit ("qmle" |
/// "mle"), gamma.
/// Unknown keys are an InputError. model_file is resolved against base_dir
/// when relative.
StudyConfig study_config_from_json(const nlohmann::json& j, const std::string& base_dir = "");
StudyConfig load_study_config(const std::string& path);
nlohmann::json to_json(const StudyConfig& cfg);
void validate(const StudyConfig& cfg);

struct ParamSummary {
  std::string estimator;  // "MLE", "QMLE" or "sigma"
  std::string name;       // "a", "b" or "sigma"
  std::size_t regime = 0;
  double truth = 0.0;
  std::size_t n = 0;
  /// RMS(theta_hat - theta) / |theta|, or the absolute RMSE when theta = 0.
  double rmse = 0.0;
  bool relative = true;
  double eb = 0.0;
  double relative_eb = 0.0;  // NaN when theta = 0
  /// Fraction of replicates whose CI holds theta; NaN for sigma.
  double coverage = 0.0;
  /// CLT studies only.
  std::optional<double> ks;
  double mean_normalized = 0.0;
  double sd_normalized = 0.0;
  /// Mean of data-driven variance over theoretical variance, minus one.
  double gamma_rel_diff = 0.0;
};

struct StudyReport {
  StudyKind kind = StudyKind::Rmse;
  StudyConfig config;
  std::optional<double> x0;  // common starting value
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  std::vector<std::string> failures;  // first few messages
  std::vector<ParamSummary> params;

  /// CLT: one column of normalized errors per parameter, NaN for failed
  /// replicates.
  std::vector<std::string> sample_names;
  std::vector<std::vector<double>> samples;

  /// Calibration studies.
  double rejection_rate = 0.0;
  double mc_error = 0.0;
  std::vector<std::size_t> n_thresholds;
  std::vector<double> first_r_hat;
  std::vector<double> first_p_value;
  std::vector<double> first_T;

  double runtime_seconds = 0.0;
};

/// Preconditions: validate(cfg) passes, model ergodic.
StudyReport run_rmse_study(const StudyConfig& cfg);
StudyReport run_clt_study(const StudyConfig& cfg);
/// Sequential detection on n_rep datasets simulated from cfg.model.
StudyReport run_test_calibration(const StudyConfig& cfg, StudyKind kind = StudyKind::TestSize);
StudyReport run_study(const StudyConfig& cfg, StudyKind kind);

/// Kolmogorov-Smirnov distance of a sample to N(0, 1).
double ks_distance_normal(std::vector<double> sample);

/// Wall time is left out so that reports are reproducible.
nlohmann::json to_json(const StudyReport& report);
/// RMSE/CLT: one row per parameter. Calibration: one row per dataset.
void write_report_csv(const StudyReport& report, const std::string& path);
/// CLT normalized-error samples.
void write_samples_csv(const StudyReport& report, const std::string& path);

}  // namespace tckls
