#include <doctest.h>

#include <cmath>
#include <vector>

#include "tckls/error.hpp"
#include "tckls/simulate.hpp"

using namespace tckls;

namespace {

ThresholdModel table1() {
  return ThresholdModel({1.0, 1.5}, {{0.3, 0.2, 0.2, 0.5}, {0.0, 0.0, 0.4, 0.0}, {0.3, 0.2, 0.2, 0.5}});
}

}  // namespace

TEST_CASE("euler step arithmetic") {
  const ThresholdModel cir({}, {{0.3, 0.2, 0.2, 0.5}});
  CHECK(euler_step(cir, 1.0, 0.01, 1.0) == doctest::Approx(1.021).epsilon(1e-14));
  CHECK(euler_step(cir, 2.0, 0.1, 0.0) == doctest::Approx(2.0 + 0.1 * (0.3 - 0.4)).epsilon(1e-15));
  // Reflection: a large negative shock lands at |.|
  CHECK(euler_step(cir, 0.01, 0.01, -10.0) > 0.0);
  // x = 1.5 uses regime 2 (a = 0.3, b = 0.2) not regime 1 (a = b = 0).
  CHECK(euler_step(table1(), 1.5, 0.1, 0.0) == doctest::Approx(1.5 + 0.1 * (0.3 - 0.3)).epsilon(1e-15));
  CHECK(euler_step(table1(), 1.4999, 0.1, 0.0) == 1.4999);
  const ThresholdModel o({}, {{0.0, 1.0, 1.0, 0.0}});
  CHECK(euler_step(o, 0.0, 0.01, -10.0) == doctest::Approx(-1.0));
}

TEST_CASE("simulate_path grid") {
  Rng rng(1);
  const Trajectory t = simulate_path(table1(), 1.0, 10, 1.0, rng);
  REQUIRE(t.times.size() == 11);
  for (std::size_t i = 0; i <= 10; ++i) CHECK(t.times[i] == doctest::Approx(0.1 * i));
  CHECK(t.values[0] == 1.0);
  CHECK_THROWS_AS(simulate_path(table1(), 1.0, 0, 1.0, rng), InputError);
  CHECK_THROWS_AS(simulate_path(table1(), 1.0, 10, 0.0, rng), InputError);
}

TEST_CASE("small-noise OU follows the ODE") {
  const double a = 0.3, b = 0.2, x0 = 3.0, T = 2.0;
  const ThresholdModel m({}, {{a, b, 1e-12, 0.0}});
  Rng rng(3);
  const Trajectory t = simulate_path(m, x0, 10000, T, rng);
  const double exact = x0 * std::exp(-b * T) + a / b * (1.0 - std::exp(-b * T));
  CHECK(std::fabs(t.values.back() - exact) < 1e-3);
}

TEST_CASE("simulation is deterministic and nonnegative") {
  Rng r1(9), r2(9);
  const Trajectory a = simulate_path(table1(), 1.0, 100, 50.0, r1);
  const Trajectory b = simulate_path(table1(), 1.0, 100, 50.0, r2);
  CHECK(a.values == b.values);
  for (double v : a.values) CHECK(v >= 0.0);

  const std::vector<double> grid{0.0, 0.5, 1.0, 2.0};
  Rng r3(4), r4(4);
  CHECK(simulate_on_grid(table1(), 1.0, grid, 5, r3) == simulate_on_grid(table1(), 1.0, grid, 5, r4));
  const std::vector<double> bad{0.0, 0.5, 0.5};
  CHECK_THROWS_AS(simulate_on_grid(table1(), 1.0, bad, 5, r3), InputError);
}

TEST_CASE("warm starts") {
  const ThresholdModel o({}, {{0.3, 0.2, 0.2, 0.0}});
  const StationaryDistribution d = build_stationary(o);
  Rng rng(5);
  double mean = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) mean += warm_start_exact(d, rng);
  mean /= n;
  CHECK(std::fabs(mean - 1.5) < 3.0 * std::sqrt(0.1 / n));

  CHECK(warm_start_burn_in(table1(), 0.0, 100, rng) == 1.0);
  const double x = warm_start_burn_in(table1(), 1000.0, 100, rng);
  CHECK(x > 0.0);
  CHECK(std::isfinite(x));
  CHECK_THROWS_AS(warm_start_burn_in(ThresholdModel({}, {{0.1, 0.0, 0.2, 0.5}}), 1.0, 10, rng), NotErgodicError);
}

TEST_CASE("subsample") {
  Rng rng(6);
  const Trajectory t = simulate_path(table1(), 1.0, 100, 1.0, rng);
  REQUIRE(t.times.size() == 101);
  const ObservationSet s1 = subsample(t, 1);
  CHECK(s1.values() == t.values);
  CHECK(s1.times() == t.times);
  CHECK(subsample(t, 10).size() == 11);
  const std::vector<double> list{0.0, 0.1, 0.3, 1.0};
  const ObservationSet s = subsample(t, list);
  CHECK(s.size() == 4);
  CHECK(s.Delta_N() == doctest::Approx(0.7));
  const std::vector<double> missing{0.0, 0.105};
  CHECK_THROWS_AS(subsample(t, missing), InputError);
  CHECK_THROWS_AS(subsample(t, 0), InputError);
}

TEST_CASE("time averages approach stationary moments") {
  const ThresholdModel m = table1();
  const StationaryDistribution d = build_stationary(m);
  Rng rng(8);
  const double x0 = warm_start_exact(d, rng);
  const Trajectory t = simulate_path(m, x0, 1000, 1000.0, rng);
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i + 1 < t.values.size(); ++i) {
    s1 += t.values[i];
    s2 += t.values[i] * t.values[i];
  }
  const double n = static_cast<double>(t.values.size() - 1);
  CHECK(std::fabs(s1 / n / stationary_moment(d, 1.0).value - 1.0) < 0.05);
  CHECK(std::fabs(s2 / n / stationary_moment(d, 2.0).value - 1.0) < 0.05);
}
