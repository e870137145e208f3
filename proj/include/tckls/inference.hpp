#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tckls/estimators.hpp"
#include "tckls/model.hpp"
#include "tckls/statistics.hpp"

namespace tckls {

struct ScanOptions {
  /// Candidates r_j = q20 (1 - j/n) + q80 j/n for j = 0..n_grid.
  std::size_t n_grid = 1000;
  /// Minimum number of in-segment observations on each side of a candidate.
  std::size_t min_obs = 10;
  /// Drift fit under both hypotheses. QMLE fits make the statistic a sum of
  /// nonnegative quadratic forms; MLE fits use the slow path per candidate.
  EstimatorKind fit = EstimatorKind::Qmle;
};

struct ScanResult {
  std::size_t segment = 0;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<double> candidates;
  /// NaN where a candidate leaves fewer than min_obs points on a side or a
  /// fit is degenerate.
  std::vector<double> statistic;
  bool degenerate = true;
  std::string note;
  std::size_t argmax = 0;
  double r_hat = 0.0;
  double T_data = -std::numeric_limits<double>::infinity();
};

/// Quasi-likelihood a M0 - b M1 - a^2 Q0 / 2 + a b Q1 - b^2 Q2 / 2 of one
/// regime.
double quasi_loglik(const PathStatistics& stats, std::size_t j, double a, double b);

/// Nearest-rank empirical quantile of a sorted sample.
double nearest_rank(std::span<const double> sorted, double p);

/// T(rbar) for a threshold added inside regime k of the null geometry.
/// Refits every regime under both hypotheses. nullopt when a side has fewer
/// than min_obs observations or a fit is degenerate.
std::optional<double> qlr_statistic(const ObservationSet& obs, const RegimeGeometry& h0, std::size_t k, double rbar,
                                    const ScanOptions& options = {});

/// Statistic curve over the percentile grid of segment k.
ScanResult scan(const ObservationSet& obs, const RegimeGeometry& h0, std::size_t k, const ScanOptions& options = {});

/// #{b : T_data < T_b} / n.
double bootstrap_count_pvalue(double T_data, std::span<const double> boot);

struct BootstrapOptions {
  std::size_t n_boot = 1000;
  /// Euler substeps per observation interval.
  std::size_t refine = 10;
  /// Start bootstrap paths from a stationary draw instead of the data's X_0.
  bool stationary_start = false;
  unsigned jobs = 1;
};

/// Null model used by the bootstrap: MLE drift and bracket volatility on
/// the null geometry. Throws ModelError or NotErgodicError when the fit is
/// not an admissible ergodic model.
ThresholdModel fit_null_model(const ObservationSet& obs, const RegimeGeometry& h0);

struct BootstrapResult {
  double p_value = 1.0;
  std::vector<double> statistics;
};

/// Simulates n_boot paths of the null model on the observation grid and
/// recomputes the scan maximum of segment k on each.
BootstrapResult bootstrap_pvalue(const ObservationSet& obs, const ThresholdModel& fitted_h0, std::size_t k,
                                 double T_data, const ScanOptions& scan_options, const BootstrapOptions& options,
                                 std::uint64_t seed);

struct ThresholdTestResult {
  ScanResult scan;
  bool testable = false;
  std::string note;
  double p_value = 1.0;
  std::size_t n_boot = 0;
  bool reject = false;
};

struct DetectionOptions {
  double alpha = 0.05;
  ScanOptions scan;
  BootstrapOptions bootstrap;
  std::size_t max_thresholds = 8;
};

struct DetectionReport {
  std::vector<double> thresholds;
  std::vector<ThresholdTestResult> steps;
  RegimeGeometry geometry;
  std::optional<EstimationResult> fit;
};

/// Tests segment k of the null geometry once: scan, null fit, bootstrap.
ThresholdTestResult test_segment(const ObservationSet& obs, const RegimeGeometry& h0, std::size_t k,
                                 const DetectionOptions& options, std::uint64_t seed);

/// Depth-first, left-to-right splitting starting from a single regime with
/// exponent gamma. A segment is split when p_value < alpha.
DetectionReport sequential_detection(const ObservationSet& obs, double gamma, const DetectionOptions& options,
                                     std::uint64_t seed);

nlohmann::json to_json(const ThresholdTestResult& r);
nlohmann::json to_json(const DetectionReport& r);

}  // namespace tckls
