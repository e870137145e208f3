#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace tckls {

/// Coefficients of one regime: drift a - b x, diffusion sigma |x|^gamma.
struct RegimeParams {
  double a = 0.0;
  double b = 0.0;
  double sigma = 1.0;
  double gamma = 0.0;

  bool operator==(const RegimeParams&) const = default;
};

enum class EstimatorKind { Mle, Qmle };

const char* to_string(EstimatorKind kind);

/// Where a regime sits in the partition; selects the boundary terms of the
/// bracket and modified-increment formulas.
enum class RegimePosition {
  Only,      // d = 0, a single regime covering the whole state space
  First,     // I_0 = [0, r_1) or (-inf, r_1)
  Interior,  // [r_j, r_{j+1})
  Last,      // [r_d, +inf)
};

/// Thresholds and diffusion exponents: everything the path statistics need
/// to know about the model, without drift or volatility values.
class RegimeGeometry {
 public:
  RegimeGeometry() = default;
  RegimeGeometry(std::vector<double> thresholds, std::vector<double> gammas);

  std::size_t num_regimes() const { return gammas_.size(); }
  const std::vector<double>& thresholds() const { return thresholds_; }
  const std::vector<double>& gammas() const { return gammas_; }
  double gamma(std::size_t j) const { return gammas_.at(j); }

  /// gamma_0 == 0: I_0 extends to -inf.
  bool whole_line() const { return gammas_.front() == 0.0; }

  /// Left end of I_j (-inf for j = 0 on the whole line, 0 otherwise).
  double lower(std::size_t j) const;
  /// Right end of I_j (+inf for the last regime).
  double upper(std::size_t j) const;
  RegimePosition position(std::size_t j) const;

  /// Index j with x in I_j; intervals are half-open [r_j, r_{j+1}).
  /// Throws DomainError for x < 0 unless whole_line().
  std::size_t regime_of(double x) const;

  /// Copy with an extra threshold inserted inside regime k; both halves
  /// keep the gamma of regime k.
  RegimeGeometry split(std::size_t k, double threshold) const;

 private:
  std::vector<double> thresholds_;
  std::vector<double> gammas_{0.0};
};

/// Full parameterisation of a T-CKLS diffusion.
class ThresholdModel {
 public:
  ThresholdModel(std::vector<double> thresholds, std::vector<RegimeParams> regimes);

  std::size_t num_regimes() const { return regimes_.size(); }
  const std::vector<double>& thresholds() const { return geometry_.thresholds(); }
  const std::vector<RegimeParams>& regimes() const { return regimes_; }
  const RegimeParams& regime(std::size_t j) const { return regimes_.at(j); }
  const RegimeParams& first() const { return regimes_.front(); }
  const RegimeParams& last() const { return regimes_.back(); }
  const RegimeGeometry& geometry() const { return geometry_; }

  std::size_t regime_of(double x) const { return geometry_.regime_of(x); }
  const RegimeParams& params_at(double x) const { return regimes_[regime_of(x)]; }

  std::vector<double> sigmas() const;

 private:
  RegimeGeometry geometry_;
  std::vector<RegimeParams> regimes_;
};

struct ErgodicityClass {
  bool ergodic = false;
  std::string reason;
};

enum class StateSpaceKind {
  WholeLine,
  NonnegReflecting,      // [0, inf), 0 instantaneously reflecting
  PositiveUnattainable,  // (0, inf), 0 never reached
};

const char* to_string(StateSpaceKind kind);

ErgodicityClass classify_ergodicity(const ThresholdModel& model);
StateSpaceKind state_space(const ThresholdModel& model);

/// Finiteness of the m-th moment of the stationary law (m may be negative;
/// the moment is the integral of |x|^m). Requires an ergodic model.
bool moment_is_finite(const ThresholdModel& model, double m);

struct MomentCheck {
  std::string name;
  double order = 0.0;
  bool finite = false;
};

struct MomentHypothesisReport {
  EstimatorKind kind = EstimatorKind::Qmle;
  bool holds = false;
  std::vector<MomentCheck> checks;
  /// (p, q) with 1/p + 2/q = 1 witnessing the MLE hypothesis, if found.
  std::optional<std::pair<double, double>> witness;
};

/// Moment conditions required by the long-time asymptotics of each drift
/// estimator. Throws NotErgodicError when the model has no stationary law.
MomentHypothesisReport check_moment_hypotheses(const ThresholdModel& model, EstimatorKind kind);

void to_json(nlohmann::json& j, const RegimeParams& p);
void from_json(const nlohmann::json& j, RegimeParams& p);
nlohmann::json model_to_json(const ThresholdModel& model);
/// Unknown keys are rejected with InputError.
ThresholdModel model_from_json(const nlohmann::json& j);
ThresholdModel load_model(const std::string& path);

}  // namespace tckls
