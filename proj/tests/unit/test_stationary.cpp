#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tckls/error.hpp"
#include "tckls/stationary.hpp"

using namespace tckls;

namespace {

ThresholdModel cir() { return ThresholdModel({}, {{0.3, 0.2, 0.2, 0.5}}); }
ThresholdModel ou() { return ThresholdModel({}, {{0.3, 0.2, 0.2, 0.0}}); }
ThresholdModel table1() {
  return ThresholdModel({1.0, 1.5}, {{0.3, 0.2, 0.2, 0.5}, {0.0, 0.0, 0.4, 0.0}, {0.3, 0.2, 0.2, 0.5}});
}

double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

}  // namespace

TEST_CASE("scale derivative") {
  CHECK(scale_derivative(table1(), 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  const ThresholdModel o({}, {{0.0, 1.0, std::sqrt(2.0), 0.0}});
  CHECK(scale_derivative(o, 1.0, 0.0) == doctest::Approx(std::exp(0.5)).epsilon(1e-13));

  // Independent quadrature of the defining integral.
  auto integrand = [](double y) { return 2.0 * (0.3 - 0.2 * y) / (0.04 * y); };
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 1.0, 2.0, 15, 1e-14);
  CHECK(rel(scale_derivative(cir(), 2.0), std::exp(-integral)) < 1e-10);
  CHECK_THROWS_AS(scale_derivative(cir(), -1.0), DomainError);
}

TEST_CASE("CIR density is Gamma(15, rate 10)") {
  const StationaryDistribution d = build_stationary(cir());
  const boost::math::gamma_distribution<double> g(15.0, 0.1);
  for (double x : {0.5, 1.5, 3.0}) CHECK(rel(d.density(x), boost::math::pdf(g, x)) < 1e-8);
  CHECK(stationary_moment(d, 0.0).value == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::fabs(stationary_moment(d, 1.0).value - 1.5) < 1e-6);
  CHECK(std::fabs(stationary_moment(d, 2.0).value - 2.4) < 1e-6);
  CHECK(speed_density(cir(), 1.0) > 0.0);
}

TEST_CASE("OU density is Normal(1.5, 0.1)") {
  const StationaryDistribution d = build_stationary(ou());
  const boost::math::normal_distribution<double> n(1.5, std::sqrt(0.1));
  for (double x : {0.5, 1.5, 2.2}) CHECK(rel(d.density(x), boost::math::pdf(n, x)) < 1e-8);
  const double m1 = stationary_moment(d, 1.0).value;
  const double m2 = stationary_moment(d, 2.0).value;
  CHECK(std::fabs(m1 - 1.5) < 1e-6);
  CHECK(std::fabs(m2 - m1 * m1 - 0.1) < 1e-6);
}

TEST_CASE("Table 1 law is normalised and the cdf table is monotone") {
  const StationaryDistribution d = build_stationary(table1());
  CHECK(std::fabs(stationary_moment(d, 0.0).value - 1.0) < 1e-8);
  double mass = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    const double q = ergodic_constant(d, j, 0.0);
    CHECK(q > 0.0);
    mass += q;
  }
  CHECK(std::fabs(mass - 1.0) < 1e-8);
  const auto& c = d.cdf_table();
  CHECK(std::is_sorted(c.begin(), c.end()));
  CHECK(std::fabs(c.front()) < 1e-8);
  CHECK(std::fabs(c.back() - 1.0) < 1e-8);
  for (double x : d.grid()) CHECK(d.density(x) >= 0.0);
  CHECK(std::isfinite(d.log_normalization()));
}

TEST_CASE("infinite moments are flagged") {
  const StationaryDistribution d = build_stationary(cir());
  CHECK_FALSE(stationary_moment(d, -16.0).finite);
  CHECK(std::isinf(stationary_moment(d, -16.0).value));
  CHECK(stationary_moment(d, -14.0).finite);
  CHECK_THROWS_AS(ergodic_constant(d, 0, -16.0), NumericError);
  // Gamma(15, 10): E[X^-1] = 10 / 14.
  CHECK(stationary_moment(d, -1.0).value == doctest::Approx(10.0 / 14.0).epsilon(1e-8));
}

TEST_CASE("non-ergodic models are rejected") {
  CHECK_THROWS_AS(build_stationary(ThresholdModel({}, {{0.1, 0.0, 0.2, 0.5}})), NotErgodicError);
}

TEST_CASE("stationary sampling") {
  const StationaryDistribution c = build_stationary(cir());
  Rng rng(42);
  auto s = sample_stationary(c, rng, 100000);
  std::sort(s.begin(), s.end());
  const boost::math::gamma_distribution<double> g(15.0, 0.1);
  double ks = 0.0;
  const double n = static_cast<double>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double F = boost::math::cdf(g, s[i]);
    ks = std::max({ks, std::fabs(F - i / n), std::fabs(F - (i + 1) / n)});
  }
  CHECK(ks < 0.01);

  const StationaryDistribution o = build_stationary(ou());
  Rng r2(43);
  const auto so = sample_stationary(o, r2, 100000);
  double mean = 0.0;
  for (double v : so) mean += v;
  mean /= static_cast<double>(so.size());
  CHECK(std::fabs(mean - 1.5) < 4.0 * std::sqrt(0.1 / 1e5));
  CHECK(sample_stationary(o, r2, 0).empty());
}

TEST_CASE("stationary CSV export") {
  const std::string path = "test_stationary_export.csv";
  write_stationary_csv(build_stationary(cir()), path, 50);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "x,density,cdf");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 50);
  std::remove(path.c_str());
}
