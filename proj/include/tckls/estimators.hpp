#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tckls/model.hpp"
#include "tckls/stationary.hpp"
#include "tckls/statistics.hpp"

namespace tckls {

enum class FitStatus { Ok, Unvisited, Degenerate };

const char* to_string(FitStatus s);

using Mat2 = std::array<std::array<double, 2>, 2>;

struct DriftFit {
  FitStatus status = FitStatus::Unvisited;
  double a = 0.0;
  double b = 0.0;
  bool ok() const { return status == FitStatus::Ok; }
};

struct DriftEstimate {
  EstimatorKind kind = EstimatorKind::Qmle;
  std::vector<DriftFit> regimes;
};

/// Maximiser of a theta' (m0, -m1) - theta' Q theta / 2 with
/// Q = [[q0, -q1], [-q1, q2]]. Unvisited when q0 = 0, degenerate when
/// q0 q2 - q1^2 <= 1e-12 q0 q2.
DriftFit drift_closed_form(double q0, double q1, double q2, double m0, double m1);

DriftEstimate qmle(const PathStatistics& stats);
DriftEstimate mle(const PathStatistics& stats, const ModifiedIncrements& mcal);

struct VolFit {
  FitStatus status = FitStatus::Unvisited;
  double sigma = 0.0;
  /// The bracket came out negative and was clamped to 0.
  bool clamped = false;
  bool ok() const { return status == FitStatus::Ok; }
};

struct VolEstimate {
  std::vector<VolFit> regimes;
  std::vector<double> values() const;
};

VolEstimate estimate_sigma(const PathStatistics& stats, const BracketStatistics& brackets);

struct CovFit {
  FitStatus status = FitStatus::Unvisited;
  Mat2 gamma{};  // asymptotic covariance of sqrt(T) (theta_hat - theta) per unit sigma^2
  Mat2 cov{};    // sigma^2 * gamma
  bool ok() const { return status == FitStatus::Ok; }
};

struct AsymptoticCovariance {
  EstimatorKind kind = EstimatorKind::Qmle;
  std::vector<CovFit> regimes;
};

/// Data-driven covariance: MLE sigma^2 T [[Q^{-2g}, -Q^{1-2g}], [., Q^{2-2g}]]^{-1};
/// QMLE sigma^2 G H G with G = T [[Q^0, -Q^1], [., Q^2]]^{-1} and
/// H = [[Q^{2g}, -Q^{1+2g}], [., Q^{2+2g}]] / T.
AsymptoticCovariance asymptotic_covariance(const PathStatistics& stats, EstimatorKind kind,
                                           std::span<const double> sigma);

/// Same matrices with Q / T replaced by the ergodic limits Q_inf, using the
/// model's true sigma.
AsymptoticCovariance theoretical_covariance(const StationaryDistribution& dist, EstimatorKind kind);

struct EstimateOptions {
  double alpha = 0.05;
  /// Use these volatilities in the modified increments and covariances
  /// instead of the bracket estimates.
  std::optional<std::vector<double>> sigma_known;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct KindResult {
  DriftEstimate drift;
  AsymptoticCovariance cov;
  std::vector<std::array<Interval, 2>> ci;
};

struct EstimationResult {
  RegimeGeometry geometry;
  double T_N = 0.0;
  std::size_t N = 0;
  double Delta_N = 0.0;
  double alpha = 0.05;
  bool sigma_known = false;
  VolEstimate sigma_hat;
  std::vector<double> sigma_used;
  KindResult mle;
  KindResult qmle;
  PathStatistics stats;

  const KindResult& of(EstimatorKind k) const { return k == EstimatorKind::Mle ? mle : qmle; }
};

/// Brackets, then sigma_hat, then the modified increments, then both drift
/// estimators, covariances and normal confidence intervals
/// theta_hat +- z_{1-alpha/2} sqrt(cov_ii / T_N).
EstimationResult estimate_full(const ObservationSet& obs, const RegimeGeometry& geometry,
                               const EstimateOptions& options = {});

nlohmann::json to_json(const EstimationResult& result);

}  // namespace tckls
