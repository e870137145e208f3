#include "tckls/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "tckls/error.hpp"

namespace tckls {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// int y^p dy, without the constant.
double power_antideriv(double y, double p) {
  if (p == -1.0) return std::log(y);
  if (p == 0.0) return y;
  if (p == 1.0) return 0.5 * y * y;
  return std::pow(y, p + 1.0) / (p + 1.0);
}

// Antiderivative of 2 (a - b y) / (sigma^2 y^{2 gamma}) for one regime.
double drift_antideriv(const RegimeParams& r, double y) {
  const double s2 = r.sigma * r.sigma;
  double v = 0.0;
  if (r.a != 0.0) v += (2.0 * r.a / s2) * power_antideriv(y, -2.0 * r.gamma);
  if (r.b != 0.0) v -= (2.0 * r.b / s2) * power_antideriv(y, 1.0 - 2.0 * r.gamma);
  return v;
}

// int_u^v of the same integrand, u <= v, summed over the regimes crossed.
double drift_integral_ordered(const ThresholdModel& model, double u, double v) {
  double acc = 0.0;
  double lo = u;
  const auto& th = model.thresholds();
  while (lo < v) {
    const std::size_t j = model.regime_of(lo);
    const double hi = std::min(v, j < th.size() ? th[j] : kInf);
    const RegimeParams& r = model.regime(j);
    acc += drift_antideriv(r, hi) - drift_antideriv(r, lo);
    lo = hi;
  }
  return acc;
}

double drift_integral(const ThresholdModel& model, double ref, double x) {
  if (x == ref) return 0.0;
  return x > ref ? drift_integral_ordered(model, ref, x) : -drift_integral_ordered(model, x, ref);
}

void check_interior(const ThresholdModel& model, double x) {
  if (std::isnan(x)) throw DomainError("stationary: NaN abscissa");
  if (model.first().gamma != 0.0 && !(x > 0.0)) {
    throw DomainError("stationary: x must be > 0 on a nonnegative state space");
  }
}

// Closed-form log speed density with per-regime anchors, built once.
class LogDensity {
 public:
  LogDensity(const ThresholdModel& model, double ref) : model_(model) {
    const std::size_t d1 = model.num_regimes();
    anchor_.resize(d1);
    offset_.resize(d1);
    for (std::size_t j = 0; j < d1; ++j) {
      anchor_[j] = j == 0 ? (d1 > 1 ? model.thresholds()[0] : ref) : model.thresholds()[j - 1];
      offset_[j] = drift_integral(model, ref, anchor_[j]) - drift_antideriv(model.regime(j), anchor_[j]);
    }
  }

  double operator()(double x) const {
    const std::size_t j = model_.regime_of(x);
    const RegimeParams& r = model_.regime(j);
    const double integral = offset_[j] + drift_antideriv(r, x);
    double v = std::log(2.0) - 2.0 * std::log(r.sigma) + integral;
    if (r.gamma != 0.0) v -= 2.0 * r.gamma * std::log(std::fabs(x));
    return v;
  }

 private:
  const ThresholdModel& model_;
  std::vector<double> anchor_;
  std::vector<double> offset_;
};

bool is_integer(double m) { return m == std::floor(m); }

struct Quadrature {
  boost::math::quadrature::tanh_sinh<double> ts;
  boost::math::quadrature::exp_sinh<double> es;

  // Cells touching 0 may carry an integrable endpoint singularity.
  template <class F>
  double cell(F f, double a, double b, bool touches_zero) {
    if (touches_zero) return ts.integrate(f, a, b, 1e-12);
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 8, 1e-11, &err);
  }

  template <class F>
  double tail(F f, double a, double b) {
    try {
      return es.integrate(f, a, b, 1e-11);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  }
};

template <class F>
auto sanitized(F f) {
  return [f](double x) {
    const double v = f(x);
    return std::isnan(v) ? 0.0 : v;
  };
}

}  // namespace

double scale_reference(const ThresholdModel& model, std::optional<double> user) {
  if (!model.thresholds().empty()) return model.thresholds().front();
  return user.value_or(1.0);
}

double log_scale_derivative(const ThresholdModel& model, double x, std::optional<double> reference) {
  check_interior(model, x);
  const double ref = scale_reference(model, reference);
  return -drift_integral(model, ref, x);
}

double scale_derivative(const ThresholdModel& model, double x, std::optional<double> reference) {
  return std::exp(log_scale_derivative(model, x, reference));
}

double log_speed_density(const ThresholdModel& model, double x, std::optional<double> reference) {
  check_interior(model, x);
  return LogDensity(model, scale_reference(model, reference))(x);
}

double speed_density(const ThresholdModel& model, double x, std::optional<double> reference) {
  return std::exp(log_speed_density(model, x, reference));
}

// ---------------------------------------------------------------------------
// build_stationary

StationaryDistribution build_stationary(const ThresholdModel& model, const StationaryOptions& opt) {
  const ErgodicityClass erg = classify_ergodicity(model);
  if (!erg.ergodic) throw NotErgodicError("build_stationary: " + erg.reason);
  if (!(opt.tol > 0.0 && opt.tol < 1.0)) throw InputError("build_stationary: tol must lie in (0, 1)");

  StationaryDistribution dist(model);
  dist.reference_ = scale_reference(model, opt.reference);
  const LogDensity logm(dist.model_, dist.reference_);
  const bool whole = model.first().gamma == 0.0;
  const auto& th = model.thresholds();

  // Coarse geometric scan to locate the bulk of the law.
  std::vector<double> probe;
  if (whole) {
    const double c = dist.reference_;
    probe.push_back(c);
    for (int k = -160; k <= 320; ++k) {
      const double s = std::ldexp(std::exp2(k / 8.0 - std::floor(k / 8.0)), static_cast<int>(std::floor(k / 8.0)));
      probe.push_back(c + s);
      probe.push_back(c - s);
    }
  } else {
    for (int k = -320; k <= 320; ++k) probe.push_back(std::exp2(k / 8.0));
  }
  for (double t : th) probe.push_back(t);
  std::sort(probe.begin(), probe.end());
  probe.erase(std::unique(probe.begin(), probe.end()), probe.end());

  std::vector<double> lp(probe.size());
  double lmax = -kInf;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    lp[i] = logm(probe[i]);
    if (std::isfinite(lp[i])) lmax = std::max(lmax, lp[i]);
  }
  if (!std::isfinite(lmax)) throw ConvergenceError("build_stationary: speed density vanishes on the probe grid");
  const double cut = lmax + std::log(opt.tol);
  std::size_t first = probe.size();
  std::size_t last = 0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    if (lp[i] >= cut) {
      first = std::min(first, i);
      last = i;
    }
  }
  const std::size_t ilo = first == 0 ? 0 : first - 1;
  const std::size_t ihi = std::min(probe.size() - 1, last + 1);
  if (last + 1 >= probe.size()) dist.warnings_.push_back("density still above truncation level at the probe limit");

  std::vector<double> breaks;
  if (!whole) breaks.push_back(0.0);
  for (std::size_t i = ilo; i <= ihi; ++i) breaks.push_back(probe[i]);
  for (double t : th) {
    if (t > breaks.front() && t < breaks.back()) breaks.push_back(t);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  dist.log_offset_ = lmax;
  auto f = sanitized([&](double x) { return std::exp(logm(x) - lmax); });
  Quadrature quad;

  auto masses_of = [&](const std::vector<double>& b) {
    std::vector<double> m(b.size() - 1);
    for (std::size_t i = 0; i + 1 < b.size(); ++i) m[i] = quad.cell(f, b[i], b[i + 1], !whole && b[i] == 0.0);
    return m;
  };

  std::vector<double> mass = masses_of(breaks);
  for (int pass = 0; pass < 4; ++pass) {
    double total = 0.0;
    for (double v : mass) total += v;
    const double cap = opt.max_cell_mass * total;
    bool split = false;
    std::vector<double> nb{breaks.front()};
    for (std::size_t i = 0; i < mass.size(); ++i) {
      const double a = breaks[i];
      const double b = breaks[i + 1];
      const int parts = mass[i] > cap ? static_cast<int>(std::ceil(mass[i] / cap)) : 1;
      if (parts > 1) split = true;
      for (int k = 1; k < parts; ++k) nb.push_back(a + (b - a) * k / parts);
      nb.push_back(b);
    }
    if (!split) break;
    breaks = std::move(nb);
    mass = masses_of(breaks);
  }

  for (double v : mass) {
    if (!std::isfinite(v) || v < 0.0) throw ConvergenceError("build_stationary: cell quadrature failed");
  }

  dist.right_tail_ = quad.tail(f, breaks.back(), kInf);
  if (!std::isfinite(dist.right_tail_)) {
    dist.warnings_.push_back("right tail quadrature failed; tail mass ignored");
    dist.right_tail_ = 0.0;
  }
  if (whole) {
    dist.left_tail_ = quad.tail(f, -kInf, breaks.front());
    if (!std::isfinite(dist.left_tail_)) {
      dist.warnings_.push_back("left tail quadrature failed; tail mass ignored");
      dist.left_tail_ = 0.0;
    }
  }

  // Cumulative sums with compensation: the table must reach 1 within 1e-8.
  double s = dist.left_tail_;
  double c = 0.0;
  std::vector<double> cum{s};
  for (double v : mass) {
    const double t = s + v;
    c += std::fabs(s) >= std::fabs(v) ? (s - t) + v : (v - t) + s;
    s = t;
    cum.push_back(s + c);
  }
  dist.scaled_mass_ = cum.back() + dist.right_tail_;
  if (!(dist.scaled_mass_ > 0.0) || !std::isfinite(dist.scaled_mass_)) {
    throw ConvergenceError("build_stationary: normalisation is not finite and positive");
  }
  dist.grid_ = std::move(breaks);
  dist.cdf_.resize(cum.size());
  for (std::size_t i = 0; i < cum.size(); ++i) dist.cdf_[i] = cum[i] / dist.scaled_mass_;
  return dist;
}

double StationaryDistribution::density(double x) const {
  if (model_.first().gamma != 0.0 && !(x > 0.0)) return 0.0;
  const LogDensity logm(model_, reference_);
  return std::exp(logm(x) - log_offset_) / scaled_mass_;
}

double StationaryDistribution::cdf(double x) const {
  if (x <= grid_.front()) return x < grid_.front() ? 0.0 : cdf_.front();
  if (x >= grid_.back()) return x > grid_.back() ? 1.0 : cdf_.back();
  const auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - grid_.begin()) - 1;
  const double w = (x - grid_[i]) / (grid_[i + 1] - grid_[i]);
  return cdf_[i] + w * (cdf_[i + 1] - cdf_[i]);
}

double StationaryDistribution::quantile(double u) const {
  if (u <= cdf_.front()) return grid_.front();
  if (u >= cdf_.back()) return grid_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const std::size_t i = static_cast<std::size_t>(it - cdf_.begin()) - 1;
  const double dc = cdf_[i + 1] - cdf_[i];
  if (!(dc > 0.0)) return grid_[i];
  return grid_[i] + (u - cdf_[i]) / dc * (grid_[i + 1] - grid_[i]);
}

// ---------------------------------------------------------------------------
// Moments

namespace {

bool regime_moment_finite(const ThresholdModel& model, double m, std::optional<std::size_t> regime) {
  if (!regime) return moment_is_finite(model, m);
  const std::size_t j = *regime;
  const bool touches_inf = j + 1 == model.num_regimes();
  const bool touches_zero = j == 0;
  if (m > 0.0 && !touches_inf) return true;
  if (m < 0.0 && !touches_zero) return true;
  return moment_is_finite(model, m);
}

}  // namespace

MomentValue stationary_moment(const StationaryDistribution& dist, double m, std::optional<std::size_t> regime) {
  const ThresholdModel& model = dist.model_;
  if (regime && *regime >= model.num_regimes()) throw InputError("stationary_moment: regime index out of range");
  if (!regime_moment_finite(model, m, regime)) return {false, kInf};

  const LogDensity logm(model, dist.reference_);
  const bool whole = model.first().gamma == 0.0;
  const double lo = regime ? model.geometry().lower(*regime) : -kInf;
  const double hi = regime ? model.geometry().upper(*regime) : kInf;
  // Combined in log space: x^m alone overflows near 0 for strongly negative m.
  auto g = sanitized([&](double x) {
    const double lm = logm(x) - dist.log_offset_;
    if (m == 0.0) return std::exp(lm);
    if (x == 0.0) return m > 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    const double sign = (x < 0.0 && is_integer(m) && std::fmod(m, 2.0) != 0.0) ? -1.0 : 1.0;
    return sign * std::exp(m * std::log(std::fabs(x)) + lm);
  });
  Quadrature quad;

  const auto& grid = dist.grid_;
  double s = 0.0;
  double c = 0.0;
  auto add = [&](double v) {
    const double t = s + v;
    c += std::fabs(s) >= std::fabs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  };
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (grid[i] < lo || grid[i + 1] > hi) continue;
    add(quad.cell(g, grid[i], grid[i + 1], !whole && grid[i] == 0.0));
  }
  if (hi == kInf) {
    const double t = quad.tail(g, grid.back(), kInf);
    if (std::isfinite(t)) add(t);
  }
  if (whole && lo == -kInf) {
    const double t = quad.tail(g, -kInf, grid.front());
    if (std::isfinite(t)) add(t);
  }
  const double value = (s + c) / dist.scaled_mass_;
  if (!std::isfinite(value)) throw ConvergenceError("stationary_moment: quadrature did not converge");
  return {true, value};
}

double ergodic_constant(const StationaryDistribution& dist, std::size_t j, double m) {
  const MomentValue v = stationary_moment(dist, m, j);
  if (!v.finite) throw NumericError("ergodic constant Q_inf is infinite for this exponent");
  return v.value;
}

// ---------------------------------------------------------------------------
// Sampling and export

double sample_stationary_one(const StationaryDistribution& dist, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return dist.quantile(unif(rng));
}

std::vector<double> sample_stationary(const StationaryDistribution& dist, Rng& rng, std::size_t n) {
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_stationary_one(dist, rng));
  return out;
}

void write_stationary_csv(const StationaryDistribution& dist, const std::string& path, std::size_t points) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write '" + path + "'");
  os.precision(17);
  os << "x,density,cdf\n";
  if (points < 2) points = 2;
  const double lo = dist.quantile(1e-9);
  const double hi = dist.quantile(1.0 - 1e-9);
  for (std::size_t i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    const bool inside = dist.model().first().gamma == 0.0 || x > 0.0;
    os << x << ',' << (inside ? dist.density(x) : 0.0) << ',' << dist.cdf(x) << '\n';
  }
  if (!os) throw Error("write failed for '" + path + "'");
}

}  // namespace tckls
