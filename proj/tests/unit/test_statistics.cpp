#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "tckls/error.hpp"
#include "tckls/simulate.hpp"
#include "tckls/statistics.hpp"

using namespace tckls;

namespace {

RegimeGeometry table1_geometry() { return RegimeGeometry({1.0, 1.5}, {0.5, 0.0, 0.5}); }

ThresholdModel table1() {
  return ThresholdModel({1.0, 1.5}, {{0.3, 0.2, 0.2, 0.5}, {0.0, 0.0, 0.4, 0.0}, {0.3, 0.2, 0.2, 0.5}});
}

ObservationSet random_path(std::uint64_t seed, std::size_t n, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::uniform_real_distribution<double> gap(0.001, 0.02);
  std::vector<double> t{0.0};
  std::vector<double> v{u(rng)};
  for (std::size_t i = 1; i < n; ++i) {
    t.push_back(t.back() + gap(rng));
    v.push_back(u(rng));
  }
  return ObservationSet(t, v);
}

// Straightforward long double re-summation, written independently of the
// kernels.
long double naive_sum(const ObservationSet& o, double lo, double hi, double m, bool time_weighted) {
  long double s = 0.0L;
  const auto& t = o.times();
  const auto& v = o.values();
  for (std::size_t i = 0; i + 1 < o.size(); ++i) {
    if (v[i] < lo || v[i] >= hi) continue;
    const long double w = time_weighted ? (long double)t[i + 1] - t[i] : (long double)v[i + 1] - v[i];
    s += std::pow((long double)v[i], (long double)m) * w;
  }
  return s;
}

}  // namespace

TEST_CASE("two-point example") {
  const ObservationSet o({0.0, 1.0}, {0.5, 0.7});
  const PathStatistics s = compute_QM(o, RegimeGeometry({}, {0.5}));
  CHECK(s.Q(0, 0.0) == 1.0);
  CHECK(s.Q(0, 1.0) == 0.5);
  CHECK(s.M(0, 0.0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(s.M(0, 1.0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(s.N == 1);
  CHECK(s.T_N == 1.0);
}

TEST_CASE("unvisited regimes are zero") {
  const ObservationSet o = random_path(1, 200, 0.1, 0.99);
  const PathStatistics s = compute_QM(o, table1_geometry());
  for (std::size_t j : {1u, 2u}) {
    CHECK_FALSE(s.visited(j));
    for (double m : {0.0, 1.0, 2.0}) CHECK(s.Q(j, m) == 0.0);
    CHECK(s.M(j, 0.0) == 0.0);
    CHECK(s.M(j, 1.0) == 0.0);
  }
  CHECK(s.visited(0));
}

TEST_CASE("sums match a naive re-summation") {
  const RegimeGeometry g = table1_geometry();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ObservationSet o = random_path(seed, 100, 0.2, 2.5);
    const PathStatistics s = compute_QM(o, g);
    const ExponentSet ex = required_exponents(g);
    for (std::size_t j = 0; j < 3; ++j) {
      for (double m : ex.q[j]) {
        const long double ref = naive_sum(o, g.lower(j), g.upper(j), m, true);
        CHECK(std::fabs(s.Q(j, m) - (double)ref) <= 4e-16 * std::fabs((double)ref) + 1e-300);
      }
      for (double m : ex.m[j]) {
        long double abs = 0.0L;
        for (std::size_t i = 0; i + 1 < o.size(); ++i) {
          const double x = o.values()[i];
          if (x >= g.lower(j) && x < g.upper(j)) abs += std::fabs(std::pow(x, m) * (o.values()[i + 1] - x));
        }
        const long double ref = naive_sum(o, g.lower(j), g.upper(j), m, false);
        CHECK(std::fabs(s.M(j, m) - (double)ref) <= 4e-16 * (double)abs);
      }
    }
  }
}

TEST_CASE("partition identities") {
  const RegimeGeometry g = table1_geometry();
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const ObservationSet o = random_path(seed, 1000, 0.2, 2.5);
    const PathStatistics s = compute_QM(o, g);
    double q = 0.0, m = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      q += s.Q(j, 0.0);
      m += s.M(j, 0.0);
    }
    CHECK(std::fabs(q - o.T_N()) <= 1e-14 * o.T_N());
    CHECK(std::fabs(m - (o.xT() - o.x0())) <= 1e-13);
  }
}

TEST_CASE("locality") {
  const RegimeGeometry g = table1_geometry();
  ObservationSet o = random_path(5, 300, 0.2, 2.5);
  const PathStatistics a = compute_QM(o, g);
  // Move points of regime 2 that are not successors of a regime-1 point.
  std::vector<double> v = o.values();
  for (std::size_t i = 1; i < v.size(); ++i) {
    const bool prev_in_1 = v[i - 1] >= 1.0 && v[i - 1] < 1.5;
    if (v[i] >= 1.5 && !prev_in_1) v[i] = 1.5 + 3.0 * (v[i] - 1.5);
  }
  const PathStatistics b = compute_QM(ObservationSet(o.times(), v), g);
  for (double m : {0.0, 1.0, 2.0}) CHECK(a.Q(1, m) == b.Q(1, m));
  CHECK(a.M(1, 0.0) == b.M(1, 0.0));
  CHECK(a.M(1, 1.0) == b.M(1, 1.0));
}

TEST_CASE("negative exponent at zero is a numeric error") {
  const ObservationSet o({0.0, 1.0, 2.0}, {0.0, 0.5, 0.7});
  CHECK_THROWS_AS(compute_QM(o, RegimeGeometry({}, {0.5})), NumericError);
  CHECK_NOTHROW(compute_QM(o, RegimeGeometry({}, {0.0})));
  CHECK_THROWS_AS(compute_QM(o, RegimeGeometry({1.0}, {0.5, 0.5})), NumericError);
  CHECK_THROWS_AS(ObservationSet({0.0}, {1.0}), InputError);
  CHECK_THROWS_AS(ObservationSet({0.0, 0.0}, {1.0, 1.0}), InputError);
}

TEST_CASE("single-regime bracket is the realized quadratic variation") {
  for (std::uint64_t seed = 40; seed < 45; ++seed) {
    const ObservationSet o = random_path(seed, 500, 0.2, 2.5);
    const PathStatistics s = compute_QM(o, RegimeGeometry({}, {0.5}));
    double qv = 0.0, abs = 0.0;
    for (std::size_t i = 0; i + 1 < o.size(); ++i) {
      const double d = o.values()[i + 1] - o.values()[i];
      qv += d * d;
      abs += std::fabs(o.values()[i] * d);
    }
    CHECK(std::fabs(compute_brackets(s).values[0] - qv) <= 1e-13 * abs);
  }
}

TEST_CASE("constant path has zero brackets") {
  const ObservationSet o({0.0, 1.0, 2.0, 3.0}, {1.2, 1.2, 1.2, 1.2});
  const PathStatistics s = compute_QM(o, table1_geometry());
  for (double b : compute_brackets(s).values) CHECK(b == 0.0);
}

TEST_CASE("brackets estimate sigma^2 on a long path") {
  const ThresholdModel m = table1();
  Rng rng(12);
  const Trajectory t = simulate_path(m, 1.2, 1000, 1000.0, rng);
  const PathStatistics s = compute_QM(t.observations(), m.geometry());
  const BracketStatistics b = compute_brackets(s);
  for (std::size_t j = 0; j < 3; ++j) {
    const double ratio = b.values[j] / s.Q(j, 2.0 * m.regime(j).gamma);
    const double sig2 = m.regime(j).sigma * m.regime(j).sigma;
    CHECK(std::fabs(ratio / sig2 - 1.0) < 0.05);
  }
}

TEST_CASE("modified increments telescope inside an interior regime") {
  // Every point in [1, 1.5) and X_T = X_0.
  const ObservationSet o({0.0, 0.3, 0.7, 1.0}, {1.2, 1.4, 1.1, 1.2});
  const RegimeGeometry g({1.0, 1.5}, {0.5, 0.5, 0.5});
  const PathStatistics s = compute_QM(o, g);
  const double sigma = 0.3;
  for (double m : {-1.0, 1.0}) {
    const double expected = -(m / 2.0) * sigma * sigma * s.Q(1, m + 2.0 * 0.5 - 1.0);
    CHECK(modified_increment(s, 1, m, sigma) == doctest::Approx(expected).epsilon(1e-12));
  }
  const ModifiedIncrements mc = compute_modified_M(s, std::vector<double>{0.2, sigma, 0.2});
  CHECK(mc.at(1, 0.0) == s.M(1, 0.0));
  CHECK_THROWS_AS(mc.at(1, 7.0), MissingStatisticError);
}

TEST_CASE("CIR modified increment on three points") {
  const ObservationSet o({0.0, 0.5, 1.0}, {1.0, 1.2, 0.9});
  const PathStatistics s = compute_QM(o, RegimeGeometry({}, {0.5}));
  const double sigma = 0.2;
  // ln(X_T) - ln(X_0) + (1/2) sigma^2 Q^{-1}.
  const double q = 0.5 / 1.0 + 0.5 / 1.2;
  const double expected = std::log(0.9) - std::log(1.0) + 0.5 * sigma * sigma * q;
  CHECK(modified_increment(s, 0, -1.0, sigma) == doctest::Approx(expected).epsilon(1e-14));
  // m = 1 - 2g = 0 is the plain increment.
  CHECK(modified_increment(s, 0, 0.0, sigma) == s.M(0, 0.0));
}

TEST_CASE("missing statistics throw") {
  const ObservationSet o({0.0, 1.0}, {0.5, 0.7});
  ExponentSet ex;
  ex.q = {{0.0}};
  ex.m = {{0.0}};
  const PathStatistics s = compute_QM(o, RegimeGeometry({}, {0.5}), ex);
  CHECK_THROWS_AS(s.Q(0, 2.0), MissingStatisticError);
  CHECK_THROWS_AS(s.M(0, 1.0), MissingStatisticError);
  CHECK_THROWS_AS(compute_brackets(s), MissingStatisticError);
}

TEST_CASE("statistics JSON keys") {
  const ObservationSet o({0.0, 1.0}, {0.5, 0.7});
  const nlohmann::json j = stats_to_json(compute_QM(o, RegimeGeometry({}, {0.5})));
  CHECK(j.at("sums").contains("Q.0.-1"));
  CHECK(j.at("sums").contains("Q.0.0"));
  CHECK(j.at("sums").contains("M.0.1"));
  CHECK(j.at("T_N") == 1.0);
}
