#include "tckls/statistics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>

#include "tckls/error.hpp"
#include "tckls/kernels/power_sums.hpp"

namespace tckls {

namespace {

constexpr double kKeyTol = 1e-12;

std::string exponent_key(double m) {
  if (std::fabs(m) < kKeyTol) m = 0.0;
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, m);
  return std::string(buf, res.ptr);
}

void add_unique(std::vector<double>& v, double m) {
  for (double e : v) {
    if (std::fabs(e - m) < kKeyTol) return;
  }
  v.push_back(m);
}

}  // namespace

// ---------------------------------------------------------------------------
// ObservationSet

ObservationSet::ObservationSet(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.size() != values_.size()) throw InputError("observations: times and values differ in length");
  if (times_.size() < 2) throw InputError("observations: at least 2 points are required");
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i]) || !std::isfinite(values_[i])) {
      throw InputError("observations: non-finite entry at row " + std::to_string(i));
    }
    if (i > 0) {
      if (!(times_[i] > times_[i - 1])) {
        throw InputError("observations: times must be strictly increasing (row " + std::to_string(i) + ")");
      }
      delta_ = std::max(delta_, times_[i] - times_[i - 1]);
    }
  }
}

// ---------------------------------------------------------------------------
// ExponentMap

void ExponentMap::set(double m, double value) {
  for (auto& e : entries_) {
    if (std::fabs(e.first - m) < kKeyTol) {
      e.second = value;
      return;
    }
  }
  entries_.emplace_back(m, value);
}

std::optional<double> ExponentMap::find(double m) const {
  for (const auto& e : entries_) {
    if (std::fabs(e.first - m) < kKeyTol) return e.second;
  }
  return std::nullopt;
}

ExponentSet required_exponents(const RegimeGeometry& geometry) {
  ExponentSet ex;
  for (std::size_t j = 0; j < geometry.num_regimes(); ++j) {
    const double g = geometry.gamma(j);
    std::vector<double> q{0.0, 1.0, 2.0};
    if (g > 0.0) {
      for (double m : {-2.0 * g, 1.0 - 2.0 * g, 2.0 - 2.0 * g, 2.0 * g, 1.0 + 2.0 * g, 2.0 + 2.0 * g, -1.0}) {
        add_unique(q, m);
      }
    }
    ex.q.push_back(std::move(q));
    ex.m.push_back({0.0, 1.0});
  }
  return ex;
}

double PathStatistics::Q(std::size_t j, double m) const {
  if (j >= q_sums.size()) throw MissingStatisticError("Q: regime index out of range");
  if (auto v = q_sums[j].find(m)) return *v;
  throw MissingStatisticError("missing statistic Q." + std::to_string(j) + "." + exponent_key(m));
}

double PathStatistics::M(std::size_t j, double m) const {
  if (j >= m_sums.size()) throw MissingStatisticError("M: regime index out of range");
  if (auto v = m_sums[j].find(m)) return *v;
  throw MissingStatisticError("missing statistic M." + std::to_string(j) + "." + exponent_key(m));
}

// ---------------------------------------------------------------------------
// compute_QM

namespace {

struct PowerGroup {
  double frac = 0.0;
  std::vector<std::pair<int, double>> members;  // (integer part, requested exponent)
};

std::vector<PowerGroup> group_by_fraction(const std::vector<double>& exps) {
  std::vector<PowerGroup> groups;
  for (double e : exps) {
    double fl = std::floor(e);
    double f = e - fl;
    if (f > 1.0 - kKeyTol) {
      f = 0.0;
      fl += 1.0;
    } else if (f < kKeyTol) {
      f = 0.0;
    }
    const int k = static_cast<int>(fl);
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const PowerGroup& g) { return std::fabs(g.frac - f) < kKeyTol; });
    if (it == groups.end()) {
      groups.push_back({f, {}});
      it = groups.end() - 1;
    }
    it->members.emplace_back(k, e);
  }
  return groups;
}

// Fills `target` with the requested sums of x^e * base over regime [lo, hi).
void accumulate(std::span<const double> x, std::span<const double> base, double lo, double hi,
                const std::vector<double>& exps, ExponentMap& target) {
  std::vector<double> w(x.size());
  double out[kernels::kMaxPowers];
  for (const PowerGroup& g : group_by_fraction(exps)) {
    int kmin = g.members.front().first;
    int kmax = kmin;
    for (const auto& m : g.members) {
      kmin = std::min(kmin, m.first);
      kmax = std::max(kmax, m.first);
    }
    if (kmin < kernels::kMinPower || kmax > kernels::kMaxPower) {
      throw InputError("compute_QM: exponent outside the supported range [-4, 6]");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool in = x[i] >= lo && x[i] < hi;
      if (!in) {
        w[i] = 0.0;
      } else {
        w[i] = g.frac == 0.0 ? base[i] : base[i] * std::pow(x[i], g.frac);
      }
    }
    for (int k0 = kmin; k0 <= kmax; k0 += kernels::kMaxPowers) {
      const int k1 = std::min(kmax, k0 + kernels::kMaxPowers - 1);
      kernels::interval_power_sums(x, w, lo, hi, k0, k1, std::span<double>(out, kernels::kMaxPowers));
      for (const auto& m : g.members) {
        if (m.first >= k0 && m.first <= k1) target.set(m.second, out[m.first - k0]);
      }
    }
  }
}

}  // namespace

PathStatistics compute_QM(const ObservationSet& obs, const RegimeGeometry& geometry, const ExponentSet& exponents) {
  const std::size_t d1 = geometry.num_regimes();
  if (exponents.q.size() != d1 || exponents.m.size() != d1) {
    throw InputError("compute_QM: exponent sets must cover every regime");
  }
  const std::size_t n = obs.num_increments();
  const auto& t = obs.times();
  const auto& v = obs.values();
  std::vector<double> dt(n);
  std::vector<double> dx(n);
  for (std::size_t i = 0; i < n; ++i) {
    dt[i] = t[i + 1] - t[i];
    dx[i] = v[i + 1] - v[i];
  }
  std::span<const double> x(v.data(), n);

  if (!geometry.whole_line()) {
    for (double xi : v) {
      if (xi < 0.0) throw DomainError("compute_QM: negative observation on a nonnegative state space");
    }
  }

  PathStatistics st;
  st.geometry = geometry;
  st.N = n;
  st.T_N = obs.T_N();
  st.x0 = obs.x0();
  st.xT = obs.xT();
  st.q_sums.resize(d1);
  st.m_sums.resize(d1);

  for (std::size_t j = 0; j < d1; ++j) {
    const double lo = geometry.lower(j);
    const double hi = geometry.upper(j);
    const bool negative = std::any_of(exponents.q[j].begin(), exponents.q[j].end(), [](double e) { return e < 0; }) ||
                          std::any_of(exponents.m[j].begin(), exponents.m[j].end(), [](double e) { return e < 0; });
    if (negative) {
      for (double xi : x) {
        if (xi == 0.0 && xi >= lo && xi < hi) {
          throw NumericError("compute_QM: zero observation in regime " + std::to_string(j) +
                             " where a negative exponent is requested");
        }
      }
    }
    accumulate(x, dt, lo, hi, exponents.q[j], st.q_sums[j]);
    accumulate(x, dx, lo, hi, exponents.m[j], st.m_sums[j]);
  }
  return st;
}

PathStatistics compute_QM(const ObservationSet& obs, const RegimeGeometry& geometry) {
  return compute_QM(obs, geometry, required_exponents(geometry));
}

// ---------------------------------------------------------------------------
// Modified increments and brackets

namespace {

// Antiderivative of y^m.
double antideriv(double y, double m) {
  if (std::fabs(m + 1.0) < kKeyTol) return std::log(y);
  return std::pow(y, m + 1.0) / (m + 1.0);
}

// frak f_j: increment of max(X, r_j) for j >= 1, of min(X, r_1) for j = 0.
double frak(const PathStatistics& s, std::size_t j) {
  const auto& r = s.geometry.thresholds();
  if (j == 0) return std::min(s.xT, r[0]) - std::min(s.x0, r[0]);
  const double rj = r[j - 1];
  return std::max(s.xT, rj) - std::max(s.x0, rj);
}

// Sum of M^{k,0} over k > j.
double upper_increment(const PathStatistics& s, std::size_t j) {
  double acc = 0.0;
  for (std::size_t k = j + 1; k < s.geometry.num_regimes(); ++k) acc += s.M(k, 0.0);
  return acc;
}

}  // namespace

double modified_increment(const PathStatistics& s, std::size_t j, double m, double sigma_j) {
  if (std::fabs(m) < kKeyTol) return s.M(j, 0.0);
  const double g = s.geometry.gamma(j);
  const double ito = 0.5 * m * sigma_j * sigma_j * s.Q(j, m + 2.0 * g - 1.0);
  switch (s.geometry.position(j)) {
    case RegimePosition::Only:
      return antideriv(s.xT, m) - antideriv(s.x0, m) - ito;
    case RegimePosition::First: {
      const double r1 = s.geometry.upper(0);
      return antideriv(std::min(s.xT, r1), m) - antideriv(std::min(s.x0, r1), m) - ito +
             std::pow(r1, m) * (s.M(0, 0.0) - frak(s, 0));
    }
    case RegimePosition::Last: {
      const double rd = s.geometry.lower(j);
      return antideriv(std::max(s.xT, rd), m) - antideriv(std::max(s.x0, rd), m) - ito +
             std::pow(rd, m) * (s.M(j, 0.0) - frak(s, j));
    }
    case RegimePosition::Interior: {
      const double lo = s.geometry.lower(j);
      const double hi = s.geometry.upper(j);
      const double plo = std::pow(lo, m);
      const double phi = std::pow(hi, m);
      return antideriv(std::clamp(s.xT, lo, hi), m) - antideriv(std::clamp(s.x0, lo, hi), m) - ito +
             plo * s.M(j, 0.0) + phi * frak(s, j + 1) - plo * frak(s, j) - (phi - plo) * upper_increment(s, j);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double ModifiedIncrements::at(std::size_t j, double m) const {
  if (j >= values.size()) throw MissingStatisticError("modified increment: regime index out of range");
  if (auto v = values[j].find(m)) return *v;
  throw MissingStatisticError("missing modified increment for regime " + std::to_string(j) + ", exponent " +
                              exponent_key(m));
}

ModifiedIncrements compute_modified_M(const PathStatistics& stats, std::span<const double> sigma) {
  const std::size_t d1 = stats.geometry.num_regimes();
  if (sigma.size() != d1) throw InputError("compute_modified_M: need one sigma per regime");
  ModifiedIncrements out;
  out.values.resize(d1);
  for (std::size_t j = 0; j < d1; ++j) {
    if (!(sigma[j] >= 0.0)) throw InputError("compute_modified_M: sigma must be nonnegative");
    const double g = stats.geometry.gamma(j);
    out.values[j].set(0.0, stats.M(j, 0.0));
    for (double m : {-2.0 * g, 1.0 - 2.0 * g}) {
      if (std::fabs(m) < kKeyTol) continue;
      out.values[j].set(m, modified_increment(stats, j, m, sigma[j]));
    }
  }
  return out;
}

BracketStatistics compute_brackets(const PathStatistics& s) {
  const std::size_t d1 = s.geometry.num_regimes();
  BracketStatistics out;
  out.values.resize(d1);
  for (std::size_t j = 0; j < d1; ++j) {
    const double m0 = s.M(j, 0.0);
    const double m1 = s.M(j, 1.0);
    double value = 0.0;
    switch (s.geometry.position(j)) {
      case RegimePosition::Only:
        value = s.xT * s.xT - s.x0 * s.x0 - 2.0 * m1;
        break;
      case RegimePosition::First: {
        const double r1 = s.geometry.upper(0);
        const double fT = std::min(s.xT, r1);
        const double f0 = std::min(s.x0, r1);
        value = fT * fT - f0 * f0 + 2.0 * (r1 * m0 - m1) - 2.0 * r1 * frak(s, 0);
        break;
      }
      case RegimePosition::Last: {
        const double rd = s.geometry.lower(j);
        const double fT = std::max(s.xT - rd, 0.0);
        const double f0 = std::max(s.x0 - rd, 0.0);
        value = fT * fT - f0 * f0 + 2.0 * (rd * m0 - m1);
        break;
      }
      case RegimePosition::Interior: {
        const double lo = s.geometry.lower(j);
        const double hi = s.geometry.upper(j);
        const double fT = std::clamp(s.xT, lo, hi) - lo;
        const double f0 = std::clamp(s.x0, lo, hi) - lo;
        value = fT * fT - f0 * f0 - 2.0 * m1 + 2.0 * lo * m0 +
                2.0 * (hi - lo) * (frak(s, j + 1) - upper_increment(s, j));
        break;
      }
    }
    out.values[j] = value;
  }
  return out;
}

nlohmann::json stats_to_json(const PathStatistics& s) {
  nlohmann::json j;
  j["N"] = s.N;
  j["T_N"] = s.T_N;
  j["X_0"] = s.x0;
  j["X_T"] = s.xT;
  j["thresholds"] = s.geometry.thresholds();
  j["gammas"] = s.geometry.gammas();
  nlohmann::json sums = nlohmann::json::object();
  for (std::size_t r = 0; r < s.q_sums.size(); ++r) {
    for (const auto& [m, v] : s.q_sums[r].entries()) sums["Q." + std::to_string(r) + "." + exponent_key(m)] = v;
    for (const auto& [m, v] : s.m_sums[r].entries()) sums["M." + std::to_string(r) + "." + exponent_key(m)] = v;
  }
  j["sums"] = sums;
  return j;
}

}  // namespace tckls
