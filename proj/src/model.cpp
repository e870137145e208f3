#include "tckls/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "tckls/error.hpp"

namespace tckls {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string describe(const char* what, double value) {
  std::ostringstream os;
  os.precision(17);
  os << what << " (got " << value << ")";
  return os.str();
}

void validate_thresholds(const std::vector<double>& thresholds) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!std::isfinite(thresholds[i]) || thresholds[i] <= 0.0) {
      throw ModelError(describe("thresholds must be finite and strictly positive", thresholds[i]));
    }
    if (i > 0 && thresholds[i] <= thresholds[i - 1]) {
      throw ModelError(describe("thresholds must be strictly increasing", thresholds[i]));
    }
  }
}

}  // namespace

const char* to_string(EstimatorKind kind) {
  return kind == EstimatorKind::Mle ? "MLE" : "QMLE";
}

const char* to_string(StateSpaceKind kind) {
  switch (kind) {
    case StateSpaceKind::WholeLine:
      return "whole-line";
    case StateSpaceKind::NonnegReflecting:
      return "nonneg-reflecting-at-zero";
    case StateSpaceKind::PositiveUnattainable:
      return "positive-unattainable-zero";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// RegimeGeometry

RegimeGeometry::RegimeGeometry(std::vector<double> thresholds, std::vector<double> gammas)
    : thresholds_(std::move(thresholds)), gammas_(std::move(gammas)) {
  validate_thresholds(thresholds_);
  if (gammas_.size() != thresholds_.size() + 1) {
    throw ModelError("geometry needs exactly one more gamma than thresholds");
  }
  for (double g : gammas_) {
    if (!(g >= 0.0 && g <= 1.0)) throw ModelError(describe("gamma must lie in [0, 1]", g));
  }
  const double g0 = gammas_.front();
  if (!(g0 == 0.0 || (g0 >= 0.5 && g0 <= 1.0))) {
    throw ModelError(describe("gamma of regime 0 must be 0 or in [1/2, 1]", g0));
  }
}

double RegimeGeometry::lower(std::size_t j) const {
  if (j == 0) return whole_line() ? -kInf : 0.0;
  return thresholds_.at(j - 1);
}

double RegimeGeometry::upper(std::size_t j) const {
  if (j + 1 >= num_regimes()) return kInf;
  return thresholds_.at(j);
}

RegimePosition RegimeGeometry::position(std::size_t j) const {
  if (num_regimes() == 1) return RegimePosition::Only;
  if (j == 0) return RegimePosition::First;
  if (j + 1 == num_regimes()) return RegimePosition::Last;
  return RegimePosition::Interior;
}

std::size_t RegimeGeometry::regime_of(double x) const {
  if (std::isnan(x)) throw DomainError("regime_of: NaN state");
  if (x < 0.0 && !whole_line()) {
    throw DomainError(describe("state is negative but the state space is [0, inf)", x));
  }
  // First threshold strictly greater than x: boundary points go to the right.
  auto it = std::upper_bound(thresholds_.begin(), thresholds_.end(), x);
  return static_cast<std::size_t>(it - thresholds_.begin());
}

RegimeGeometry RegimeGeometry::split(std::size_t k, double threshold) const {
  if (k >= num_regimes()) throw ModelError("split: regime index out of range");
  if (!(threshold > std::max(lower(k), 0.0) && threshold < upper(k))) {
    throw ModelError(describe("split: new threshold must lie strictly inside the regime", threshold));
  }
  std::vector<double> th = thresholds_;
  std::vector<double> gm = gammas_;
  th.insert(th.begin() + static_cast<std::ptrdiff_t>(k), threshold);
  gm.insert(gm.begin() + static_cast<std::ptrdiff_t>(k), gammas_[k]);
  return RegimeGeometry(std::move(th), std::move(gm));
}

// ---------------------------------------------------------------------------
// ThresholdModel

namespace {

std::vector<double> gammas_of(const std::vector<RegimeParams>& regimes) {
  std::vector<double> g;
  g.reserve(regimes.size());
  for (const auto& r : regimes) g.push_back(r.gamma);
  return g;
}

}  // namespace

ThresholdModel::ThresholdModel(std::vector<double> thresholds, std::vector<RegimeParams> regimes)
    : regimes_(std::move(regimes)) {
  if (regimes_.empty()) throw ModelError("model needs at least one regime");
  if (regimes_.size() != thresholds.size() + 1) {
    throw ModelError("model needs exactly one more regime than thresholds");
  }
  for (const auto& r : regimes_) {
    if (!std::isfinite(r.a) || !std::isfinite(r.b)) throw ModelError("drift coefficients must be finite");
    if (!(r.sigma > 0.0) || !std::isfinite(r.sigma)) throw ModelError(describe("sigma must be > 0", r.sigma));
  }
  geometry_ = RegimeGeometry(std::move(thresholds), gammas_of(regimes_));
  const RegimeParams& r0 = regimes_.front();
  if (r0.gamma >= 0.5 && r0.gamma < 1.0 && !(r0.a > 0.0)) {
    throw ModelError(describe("a_0 must be > 0 when gamma_0 is in [1/2, 1)", r0.a));
  }
  if (r0.gamma == 1.0 && !(r0.a >= 0.0)) {
    throw ModelError(describe("a_0 must be >= 0 when gamma_0 = 1", r0.a));
  }
}

std::vector<double> ThresholdModel::sigmas() const {
  std::vector<double> s;
  s.reserve(regimes_.size());
  for (const auto& r : regimes_) s.push_back(r.sigma);
  return s;
}

// ---------------------------------------------------------------------------
// Ergodicity and state space

ErgodicityClass classify_ergodicity(const ThresholdModel& model) {
  const RegimeParams& r0 = model.first();
  const RegimeParams& rd = model.last();

  std::string lower_row;
  bool lower_ok = false;
  if (r0.gamma == 0.0) {
    lower_ok = r0.b > 0.0 || (r0.a > 0.0 && r0.b == 0.0);
    lower_row = "gamma_0=0: b_0>0, or a_0>0 and b_0=0";
  } else if (r0.gamma < 1.0) {
    lower_ok = r0.a > 0.0;
    lower_row = "gamma_0 in [1/2,1): a_0>0";
  } else {
    lower_ok = r0.a > 0.0 || (r0.a == 0.0 && r0.b < -0.5 * r0.sigma * r0.sigma);
    lower_row = "gamma_0=1: a_0>0, or a_0=0 and b_0<-sigma_0^2/2";
  }

  std::string upper_row;
  bool upper_ok = false;
  if (rd.b > 0.0) {
    upper_ok = true;
    upper_row = "b_d>0";
  } else if (rd.gamma <= 0.5) {
    upper_ok = rd.a < 0.0 && rd.b == 0.0;
    upper_row = "gamma_d in [0,1/2]: a_d<0 and b_d=0";
  } else if (rd.gamma < 1.0) {
    upper_ok = rd.b == 0.0;
    upper_row = "gamma_d in (1/2,1): b_d=0";
  } else {
    upper_ok = rd.b > -0.5 * rd.sigma * rd.sigma && rd.b <= 0.0;
    upper_row = "gamma_d=1: b_d in (-sigma_d^2/2, 0]";
  }

  ErgodicityClass out;
  out.ergodic = lower_ok && upper_ok;
  if (out.ergodic) {
    out.reason = "ergodic [" + lower_row + "] [" + upper_row + "]";
  } else if (!lower_ok) {
    out.reason = "regime 0 fails: " + lower_row;
  } else {
    out.reason = "regime d fails: " + upper_row;
  }
  return out;
}

StateSpaceKind state_space(const ThresholdModel& model) {
  const RegimeParams& r0 = model.first();
  if (r0.gamma == 0.0) return StateSpaceKind::WholeLine;
  if (r0.gamma == 0.5 && r0.a > 0.0 && r0.a < 0.5 * r0.sigma * r0.sigma) {
    return StateSpaceKind::NonnegReflecting;
  }
  return StateSpaceKind::PositiveUnattainable;
}

// ---------------------------------------------------------------------------
// Moments

bool moment_is_finite(const ThresholdModel& model, double m) {
  if (!classify_ergodicity(model).ergodic) {
    throw NotErgodicError("moment_is_finite: model is not ergodic");
  }
  if (m == 0.0) return true;
  if (m > 0.0) {
    // Governed by the tail of the last regime.
    const RegimeParams& rd = model.last();
    const double s2 = rd.sigma * rd.sigma;
    // gamma_d = 1: the speed density decays like x^(-2 - 2 b_d / sigma_d^2),
    // whatever the sign of b_d.
    if (rd.gamma == 1.0) return m < 1.0 + 2.0 * rd.b / s2;
    if (rd.b > 0.0 || rd.gamma < 0.5) return true;
    if (rd.gamma == 0.5) return rd.a < -m * s2 / 2.0;
    // S' has a finite limit, so the density decays like x^(-2 gamma_d).
    return m < 2.0 * rd.gamma - 1.0;
  }
  // Negative order: governed by the behaviour near 0 (regime 0).
  const double k = -m;
  const RegimeParams& r0 = model.first();
  const double s2 = r0.sigma * r0.sigma;
  if (r0.gamma == 0.0) return k < 1.0;
  if (r0.gamma == 0.5) return r0.a > k * s2 / 2.0;
  if (r0.gamma == 1.0 && r0.a == 0.0) {
    // Density behaves like x^(-2 - 2 b_0 / sigma_0^2) at 0.
    return k < -1.0 - 2.0 * r0.b / s2;
  }
  return true;
}

MomentHypothesisReport check_moment_hypotheses(const ThresholdModel& model, EstimatorKind kind) {
  if (!classify_ergodicity(model).ergodic) {
    throw NotErgodicError("check_moment_hypotheses: model is not ergodic");
  }
  MomentHypothesisReport rep;
  rep.kind = kind;
  const double gd = model.last().gamma;
  const bool all_zero =
      std::all_of(model.regimes().begin(), model.regimes().end(), [](const RegimeParams& r) { return r.gamma == 0.0; });

  auto check = [&](std::string name, double order) {
    MomentCheck c{std::move(name), order, moment_is_finite(model, order)};
    rep.checks.push_back(c);
    return c.finite;
  };

  if (all_zero) {
    rep.holds = check("second moment (gamma = 0)", 2.0);
    return rep;
  }
  if (kind == EstimatorKind::Qmle) {
    rep.holds = check("(2+2 gamma_d)-th moment", 2.0 + 2.0 * gd);
    return rep;
  }

  auto try_pair = [&](double q) {
    const double p = q / (q - 2.0);
    const double pos = std::max(2.0 * (1.0 + gd), p);
    return moment_is_finite(model, pos) && moment_is_finite(model, -q);
  };
  std::vector<double> candidates{3.0};
  for (int i = 21; i <= 100; ++i) candidates.push_back(i / 10.0);
  for (double q : candidates) {
    if (try_pair(q)) {
      rep.witness = std::make_pair(q / (q - 2.0), q);
      break;
    }
  }
  const auto [p, q] = rep.witness.value_or(std::make_pair(3.0, 3.0));
  check("max(2(1+gamma_d), p)-th moment", std::max(2.0 * (1.0 + gd), p));
  check("(-q)-th moment", -q);
  rep.holds = rep.witness.has_value();
  return rep;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw InputError(std::string(where) + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) throw InputError(std::string(where) + ": unknown key '" + it.key() + "'");
  }
}

double number_at(const nlohmann::json& j, const char* key, const char* where) {
  if (!j.contains(key)) throw InputError(std::string(where) + ": missing key '" + key + "'");
  if (!j.at(key).is_number()) throw InputError(std::string(where) + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const RegimeParams& p) {
  j = nlohmann::json{{"a", p.a}, {"b", p.b}, {"sigma", p.sigma}, {"gamma", p.gamma}};
}

void from_json(const nlohmann::json& j, RegimeParams& p) {
  reject_unknown(j, {"a", "b", "sigma", "gamma"}, "regime");
  p.a = number_at(j, "a", "regime");
  p.b = number_at(j, "b", "regime");
  p.sigma = number_at(j, "sigma", "regime");
  p.gamma = number_at(j, "gamma", "regime");
}

nlohmann::json model_to_json(const ThresholdModel& model) {
  return nlohmann::json{{"thresholds", model.thresholds()}, {"regimes", model.regimes()}};
}

ThresholdModel model_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"thresholds", "regimes"}, "model");
  if (!j.contains("regimes") || !j.at("regimes").is_array()) {
    throw InputError("model: 'regimes' must be an array");
  }
  std::vector<double> thresholds;
  if (j.contains("thresholds")) {
    if (!j.at("thresholds").is_array()) throw InputError("model: 'thresholds' must be an array");
    for (const auto& t : j.at("thresholds")) {
      if (!t.is_number()) throw InputError("model: thresholds must be numbers");
      thresholds.push_back(t.get<double>());
    }
  }
  std::vector<RegimeParams> regimes;
  for (const auto& r : j.at("regimes")) regimes.push_back(r.get<RegimeParams>());
  try {
    return ThresholdModel(std::move(thresholds), std::move(regimes));
  } catch (const ModelError& e) {
    throw InputError(std::string("model: ") + e.what());
  }
}

ThresholdModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("model file '" + path + "': " + e.what());
  }
  return model_from_json(j);
}

}  // namespace tckls
