#include "tckls/estimators.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include <boost/math/distributions/normal.hpp>

#include "tckls/error.hpp"

namespace tckls {

namespace {

constexpr double kDegenerate = 1e-12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Inverse of [[p, -q], [-q, r]]; nullopt when numerically singular.
std::optional<Mat2> inverse_of(double p, double q, double r) {
  const double den = p * r - q * q;
  if (!(p > 0.0) || !(r > 0.0) || !(den > kDegenerate * p * r)) return std::nullopt;
  return Mat2{{{r / den, q / den}, {q / den, p / den}}};
}

Mat2 multiply(const Mat2& x, const Mat2& y) {
  Mat2 z{};
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) z[i][k] = x[i][0] * y[0][k] + x[i][1] * y[1][k];
  return z;
}

Mat2 scaled(const Mat2& x, double s) {
  Mat2 z = x;
  for (auto& row : z)
    for (double& v : row) v *= s;
  return z;
}

Mat2 symmetrized(Mat2 x) {
  const double off = 0.5 * (x[0][1] + x[1][0]);
  x[0][1] = off;
  x[1][0] = off;
  return x;
}

// Sandwich or plain inverse from per-unit-time moments.
CovFit covariance_from_moments(EstimatorKind kind, double gamma, double sigma,
                               const std::function<double(double)>& moment) {
  CovFit fit;
  if (!(moment(0.0) > 0.0)) {
    fit.status = FitStatus::Unvisited;
    return fit;
  }
  std::optional<Mat2> g;
  if (kind == EstimatorKind::Mle) {
    g = inverse_of(moment(-2.0 * gamma), moment(1.0 - 2.0 * gamma), moment(2.0 - 2.0 * gamma));
  } else {
    const auto g0 = inverse_of(moment(0.0), moment(1.0), moment(2.0));
    if (g0) {
      const Mat2 h{{{moment(2.0 * gamma), -moment(1.0 + 2.0 * gamma)},
                    {-moment(1.0 + 2.0 * gamma), moment(2.0 + 2.0 * gamma)}}};
      g = multiply(multiply(*g0, h), *g0);
    }
  }
  if (!g) {
    fit.status = FitStatus::Degenerate;
    return fit;
  }
  fit.status = FitStatus::Ok;
  fit.gamma = symmetrized(*g);
  fit.cov = scaled(fit.gamma, sigma * sigma);
  return fit;
}

}  // namespace

const char* to_string(FitStatus s) {
  switch (s) {
    case FitStatus::Ok:
      return "ok";
    case FitStatus::Unvisited:
      return "unvisited";
    case FitStatus::Degenerate:
      return "degenerate";
  }
  return "?";
}

DriftFit drift_closed_form(double q0, double q1, double q2, double m0, double m1) {
  DriftFit fit;
  if (!(q0 > 0.0)) return fit;
  const double den = q0 * q2 - q1 * q1;
  if (!(den > kDegenerate * q0 * q2)) {
    fit.status = FitStatus::Degenerate;
    return fit;
  }
  fit.status = FitStatus::Ok;
  fit.a = (m0 * q2 - q1 * m1) / den;
  fit.b = (m0 * q1 - q0 * m1) / den;
  return fit;
}

DriftEstimate qmle(const PathStatistics& s) {
  DriftEstimate out;
  out.kind = EstimatorKind::Qmle;
  for (std::size_t j = 0; j < s.geometry.num_regimes(); ++j) {
    out.regimes.push_back(drift_closed_form(s.Q(j, 0.0), s.Q(j, 1.0), s.Q(j, 2.0), s.M(j, 0.0), s.M(j, 1.0)));
  }
  return out;
}

DriftEstimate mle(const PathStatistics& s, const ModifiedIncrements& mcal) {
  DriftEstimate out;
  out.kind = EstimatorKind::Mle;
  for (std::size_t j = 0; j < s.geometry.num_regimes(); ++j) {
    const double g = s.geometry.gamma(j);
    DriftFit fit;
    if (s.Q(j, 0.0) > 0.0) {
      fit = drift_closed_form(s.Q(j, -2.0 * g), s.Q(j, 1.0 - 2.0 * g), s.Q(j, 2.0 - 2.0 * g), mcal.at(j, -2.0 * g),
                              mcal.at(j, 1.0 - 2.0 * g));
    }
    out.regimes.push_back(fit);
  }
  return out;
}

std::vector<double> VolEstimate::values() const {
  std::vector<double> v;
  for (const auto& r : regimes) v.push_back(r.ok() ? r.sigma : kNaN);
  return v;
}

VolEstimate estimate_sigma(const PathStatistics& s, const BracketStatistics& brackets) {
  VolEstimate out;
  for (std::size_t j = 0; j < s.geometry.num_regimes(); ++j) {
    VolFit fit;
    const double q = s.Q(j, 2.0 * s.geometry.gamma(j));
    if (s.Q(j, 0.0) > 0.0 && q > 0.0) {
      fit.status = FitStatus::Ok;
      double bracket = brackets.values.at(j);
      if (!(bracket >= 0.0)) {
        fit.clamped = true;
        bracket = 0.0;
      }
      fit.sigma = std::sqrt(bracket / q);
    }
    out.regimes.push_back(fit);
  }
  return out;
}

AsymptoticCovariance asymptotic_covariance(const PathStatistics& s, EstimatorKind kind,
                                           std::span<const double> sigma) {
  if (sigma.size() != s.geometry.num_regimes()) throw InputError("asymptotic_covariance: need one sigma per regime");
  AsymptoticCovariance out;
  out.kind = kind;
  const double T = s.T_N;
  for (std::size_t j = 0; j < s.geometry.num_regimes(); ++j) {
    out.regimes.push_back(covariance_from_moments(kind, s.geometry.gamma(j), sigma[j],
                                                  [&](double m) { return s.Q(j, m) / T; }));
  }
  return out;
}

AsymptoticCovariance theoretical_covariance(const StationaryDistribution& dist, EstimatorKind kind) {
  const ThresholdModel& model = dist.model();
  AsymptoticCovariance out;
  out.kind = kind;
  for (std::size_t j = 0; j < model.num_regimes(); ++j) {
    const RegimeParams& r = model.regime(j);
    out.regimes.push_back(
        covariance_from_moments(kind, r.gamma, r.sigma, [&](double m) { return ergodic_constant(dist, j, m); }));
  }
  return out;
}

EstimationResult estimate_full(const ObservationSet& obs, const RegimeGeometry& geometry,
                               const EstimateOptions& opt) {
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  EstimationResult res;
  res.geometry = geometry;
  res.T_N = obs.T_N();
  res.N = obs.num_increments();
  res.Delta_N = obs.Delta_N();
  res.alpha = opt.alpha;
  res.stats = compute_QM(obs, geometry);
  res.sigma_hat = estimate_sigma(res.stats, compute_brackets(res.stats));

  const std::size_t d1 = geometry.num_regimes();
  if (opt.sigma_known) {
    if (opt.sigma_known->size() != d1) throw InputError("known sigma needs one value per regime");
    for (double s : *opt.sigma_known) {
      if (!(s > 0.0)) throw InputError("known sigma values must be positive");
    }
    res.sigma_known = true;
    res.sigma_used = *opt.sigma_known;
  } else {
    res.sigma_used.resize(d1);
    for (std::size_t j = 0; j < d1; ++j) res.sigma_used[j] = res.sigma_hat.regimes[j].sigma;
  }

  res.mle.drift = mle(res.stats, compute_modified_M(res.stats, res.sigma_used));
  res.qmle.drift = qmle(res.stats);
  res.mle.cov = asymptotic_covariance(res.stats, EstimatorKind::Mle, res.sigma_used);
  res.qmle.cov = asymptotic_covariance(res.stats, EstimatorKind::Qmle, res.sigma_used);

  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - opt.alpha / 2.0);
  for (KindResult* kr : {&res.mle, &res.qmle}) {
    kr->ci.resize(d1);
    for (std::size_t j = 0; j < d1; ++j) {
      const DriftFit& f = kr->drift.regimes[j];
      const CovFit& c = kr->cov.regimes[j];
      const double theta[2] = {f.a, f.b};
      for (int p = 0; p < 2; ++p) {
        if (f.ok() && c.ok()) {
          const double half = z * std::sqrt(std::max(c.cov[p][p], 0.0) / res.T_N);
          kr->ci[j][p] = {theta[p] - half, theta[p] + half};
        } else {
          kr->ci[j][p] = {kNaN, kNaN};
        }
      }
    }
  }
  return res;
}

nlohmann::json to_json(const EstimationResult& r) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  auto mat = [&](const Mat2& m) { return json{{num(m[0][0]), num(m[0][1])}, {num(m[1][0]), num(m[1][1])}}; };
  json regimes = json::array();
  for (std::size_t j = 0; j < r.geometry.num_regimes(); ++j) {
    const VolFit& vf = r.sigma_hat.regimes[j];
    json reg{{"index", j},
             {"lower", num(r.geometry.lower(j))},
             {"upper", num(r.geometry.upper(j))},
             {"gamma", r.geometry.gamma(j)},
             {"sigma", vf.ok() ? num(vf.sigma) : json(nullptr)},
             {"sigma_status", to_string(vf.status)},
             {"sigma_clamped", vf.clamped},
             {"sigma_used", num(r.sigma_used[j])}};
    for (EstimatorKind k : {EstimatorKind::Mle, EstimatorKind::Qmle}) {
      const KindResult& kr = r.of(k);
      const DriftFit& f = kr.drift.regimes[j];
      const CovFit& c = kr.cov.regimes[j];
      json e{{"kind", to_string(k)}, {"status", to_string(f.status)}};
      e["a"] = f.ok() ? num(f.a) : json(nullptr);
      e["b"] = f.ok() ? num(f.b) : json(nullptr);
      e["cov"] = c.ok() ? mat(c.cov) : json(nullptr);
      e["ci"] = json{{"a", {num(kr.ci[j][0].lo), num(kr.ci[j][0].hi)}}, {"b", {num(kr.ci[j][1].lo), num(kr.ci[j][1].hi)}}};
      reg[to_string(k)] = e;
    }
    regimes.push_back(reg);
  }
  return json{{"T_N", r.T_N},
              {"N", r.N},
              {"Delta_N", r.Delta_N},
              {"alpha", r.alpha},
              {"sigma_known", r.sigma_known},
              {"thresholds", r.geometry.thresholds()},
              {"regimes", regimes}};
}

}  // namespace tckls
