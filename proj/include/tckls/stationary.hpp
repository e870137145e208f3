#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tckls/model.hpp"
#include "tckls/rng.hpp"

namespace tckls {

/// Reference point of the scale function: r_1 when the model has a
/// threshold, otherwise `user` or 1.
double scale_reference(const ThresholdModel& model, std::optional<double> user = std::nullopt);

/// log S'(x) = -int_ref^x 2 (a(y) - b(y) y) / (sigma(y)^2 |y|^{2 gamma(y)}) dy,
/// evaluated in closed form regime by regime.
double log_scale_derivative(const ThresholdModel& model, double x, std::optional<double> reference = std::nullopt);
double scale_derivative(const ThresholdModel& model, double x, std::optional<double> reference = std::nullopt);

/// Speed density m(x) = 2 / (sigma(x)^2 |x|^{2 gamma(x)} S'(x)).
double log_speed_density(const ThresholdModel& model, double x, std::optional<double> reference = std::nullopt);
double speed_density(const ThresholdModel& model, double x, std::optional<double> reference = std::nullopt);

struct StationaryOptions {
  /// Tail truncation level relative to the density maximum.
  double tol = 1e-12;
  std::optional<double> reference;
  /// Upper bound on the probability mass of one cdf cell.
  double max_cell_mass = 5e-4;
};

struct MomentValue {
  bool finite = false;
  double value = 0.0;  // +inf when not finite
};

class StationaryDistribution;
/// Throws NotErgodicError for a model without a stationary law and
/// ConvergenceError if the quadrature fails.
StationaryDistribution build_stationary(const ThresholdModel& model, const StationaryOptions& options = {});
MomentValue stationary_moment(const StationaryDistribution& dist, double m,
                              std::optional<std::size_t> regime);

/// Normalised stationary law mu(dx) = m(x) dx / Z, tabulated on cells whose
/// boundaries include every threshold.
class StationaryDistribution {
 public:
  const ThresholdModel& model() const { return model_; }
  double reference() const { return reference_; }

  /// log Z, where Z = int m(y) dy.
  double log_normalization() const { return log_offset_ + std::log(scaled_mass_); }

  /// Normalised density mu(x); zero outside the state space.
  double density(double x) const;
  /// Cell boundaries of the cdf table and the table itself.
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& cdf_table() const { return cdf_; }
  /// Cdf by linear interpolation of the table.
  double cdf(double x) const;
  /// Inverse of the interpolated cdf, clamped to the tabulated support.
  double quantile(double u) const;

  /// Mass outside the tabulated support (integrated, not tabulated).
  double left_tail_mass() const { return left_tail_ / scaled_mass_; }
  double right_tail_mass() const { return right_tail_ / scaled_mass_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  friend StationaryDistribution build_stationary(const ThresholdModel&, const StationaryOptions&);
  friend MomentValue stationary_moment(const StationaryDistribution&, double, std::optional<std::size_t>);
  explicit StationaryDistribution(ThresholdModel model) : model_(std::move(model)) {}

  ThresholdModel model_;
  double reference_ = 1.0;
  double log_offset_ = 0.0;  // density evaluations are scaled by exp(-log_offset_)
  double scaled_mass_ = 0.0;
  double left_tail_ = 0.0;
  double right_tail_ = 0.0;
  std::vector<double> grid_;
  std::vector<double> cdf_;
  std::vector<std::string> warnings_;
};

/// int x^m mu(dx), restricted to I_j when `regime` is given. Integer m use
/// x^m, other m use |x|^m. Moments declared infinite by the moment rules
/// are reported as such without integrating.
MomentValue stationary_moment(const StationaryDistribution& dist, double m,
                              std::optional<std::size_t> regime);
inline MomentValue stationary_moment(const StationaryDistribution& dist, double m) {
  return stationary_moment(dist, m, std::nullopt);
}

/// Q_inf^{j,m}; throws NumericError when the moment is infinite.
double ergodic_constant(const StationaryDistribution& dist, std::size_t j, double m);

/// Inverse-cdf draws from the interpolated table.
std::vector<double> sample_stationary(const StationaryDistribution& dist, Rng& rng, std::size_t n);
double sample_stationary_one(const StationaryDistribution& dist, Rng& rng);

/// CSV with header x,density,cdf on `points` equally spaced abscissas
/// between the 1e-9 and 1 - 1e-9 quantiles.
void write_stationary_csv(const StationaryDistribution& dist, const std::string& path, std::size_t points = 1000);

}  // namespace tckls
