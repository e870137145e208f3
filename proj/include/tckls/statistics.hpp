#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tckls/model.hpp"

namespace tckls {

/// Discretely observed path 0 = t_0 < ... < t_N (any t_0 is accepted; the
/// horizon is measured from it).
class ObservationSet {
 public:
  ObservationSet(std::vector<double> times, std::vector<double> values);

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return times_.size(); }
  /// Number of increments N.
  std::size_t num_increments() const { return times_.size() - 1; }
  double T_N() const { return times_.back() - times_.front(); }
  double Delta_N() const { return delta_; }
  double x0() const { return values_.front(); }
  double xT() const { return values_.back(); }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  double delta_ = 0.0;
};

/// Values keyed by a real exponent; lookups match within 1e-12.
class ExponentMap {
 public:
  void set(double m, double value);
  std::optional<double> find(double m) const;
  bool contains(double m) const { return find(m).has_value(); }
  const std::vector<std::pair<double, double>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<double, double>> entries_;
};

/// Exponent sets requested per regime for the Q (time-weighted) and
/// M (increment-weighted) sums.
struct ExponentSet {
  std::vector<std::vector<double>> q;
  std::vector<std::vector<double>> m;
};

/// Everything the estimators, the brackets and the modified increments need:
/// Q: {0, 1, 2} and, when gamma_j > 0, {-2g, 1-2g, 2-2g, 2g, 1+2g, 2+2g, -1};
/// M: {0, 1}.
ExponentSet required_exponents(const RegimeGeometry& geometry);

struct PathStatistics {
  RegimeGeometry geometry;
  std::size_t N = 0;
  double T_N = 0.0;
  double x0 = 0.0;
  double xT = 0.0;
  std::vector<ExponentMap> q_sums;
  std::vector<ExponentMap> m_sums;

  /// Throw MissingStatisticError when the exponent was not computed.
  double Q(std::size_t j, double m) const;
  double M(std::size_t j, double m) const;
  bool visited(std::size_t j) const { return Q(j, 0.0) > 0.0; }
};

/// Q^{j,m} = sum x_i^m 1_{I_j}(x_i) (t_{i+1} - t_i) and
/// M^{j,m} = sum x_i^m 1_{I_j}(x_i) (x_{i+1} - x_i), over i = 0..N-1.
/// Throws NumericError if a negative exponent meets a zero observation.
PathStatistics compute_QM(const ObservationSet& obs, const RegimeGeometry& geometry, const ExponentSet& exponents);
PathStatistics compute_QM(const ObservationSet& obs, const RegimeGeometry& geometry);

/// Modified increments calM^{j,m} for m in {-2g_j, 1-2g_j}; the m = 0 entry
/// is M^{j,0}.
struct ModifiedIncrements {
  std::vector<ExponentMap> values;
  double at(std::size_t j, double m) const;
};

ModifiedIncrements compute_modified_M(const PathStatistics& stats, std::span<const double> sigma);

/// Single-regime-and-exponent version; exposed for testing against
/// fine-grid Ito sums.
double modified_increment(const PathStatistics& stats, std::size_t j, double m, double sigma_j);

/// Discretised quadratic variation of the clipped path f_j(X).
struct BracketStatistics {
  std::vector<double> values;
};

BracketStatistics compute_brackets(const PathStatistics& stats);

nlohmann::json stats_to_json(const PathStatistics& stats);

}  // namespace tckls
