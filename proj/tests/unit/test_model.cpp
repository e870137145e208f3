#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <limits>

#include "tckls/error.hpp"
#include "tckls/model.hpp"

using namespace tckls;

namespace {

ThresholdModel table1() {
  return ThresholdModel({1.0, 1.5}, {{0.3, 0.2, 0.2, 0.5}, {0.0, 0.0, 0.4, 0.0}, {0.3, 0.2, 0.2, 0.5}});
}

ThresholdModel single(double a, double b, double sigma, double gamma) {
  return ThresholdModel({}, {{a, b, sigma, gamma}});
}

}  // namespace

TEST_CASE("regime_of uses half-open intervals") {
  const ThresholdModel m = table1();
  CHECK(m.regime_of(0.99) == 0);
  CHECK(m.regime_of(1.0) == 1);
  CHECK(m.regime_of(1.4999) == 1);
  CHECK(m.regime_of(1.5) == 2);
  CHECK(m.regime_of(0.0) == 0);
  CHECK(m.regime_of(1e9) == 2);
  CHECK_THROWS_AS(m.regime_of(-0.1), DomainError);
}

TEST_CASE("regime_of on the whole line") {
  const ThresholdModel m({1.0}, {{0.0, 1.0, 1.0, 0.0}, {0.0, 1.0, 1.0, 0.0}});
  CHECK(m.regime_of(-5.0) == 0);
  CHECK(m.regime_of(1.0) == 1);
  CHECK(m.geometry().lower(0) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("regime_of is monotone and the indicators partition the line") {
  const ThresholdModel m = table1();
  std::size_t prev = 0;
  for (int i = 0; i <= 400; ++i) {
    const double x = i * 0.005;
    const std::size_t j = m.regime_of(x);
    CHECK(j >= prev);
    prev = j;
    int hits = 0;
    for (std::size_t k = 0; k < m.num_regimes(); ++k) {
      hits += (x >= m.geometry().lower(k) && x < m.geometry().upper(k)) ? 1 : 0;
    }
    CHECK(hits == 1);
  }
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(ThresholdModel({1.0}, {{0.3, 0.2, 0.2, 0.5}}), ModelError);
  CHECK_THROWS_AS(ThresholdModel({1.5, 1.0}, {{0.3, 0.2, 0.2, 0.5}, {0, 0, 1, 0}, {0.3, 0.2, 0.2, 0.5}}),
                  ModelError);
  CHECK_THROWS_AS(ThresholdModel({-1.0}, {{0.0, 0.2, 0.2, 0.0}, {0.3, 0.2, 0.2, 0.5}}), ModelError);
  CHECK_THROWS_AS(single(0.3, 0.2, 0.0, 0.5), ModelError);
  CHECK_THROWS_AS(single(0.3, 0.2, 0.2, 1.2), ModelError);
  CHECK_THROWS_AS(single(0.3, 0.2, 0.2, 0.3), ModelError);  // gamma_0 in (0, 1/2)
  CHECK_THROWS_AS(single(0.0, 0.2, 0.2, 0.5), ModelError);  // a_0 > 0 needed
  CHECK_NOTHROW(single(0.0, -0.1, 0.2, 1.0));               // a_0 >= 0 allowed at gamma_0 = 1
  CHECK_THROWS_AS(single(-0.1, 0.2, 0.2, 1.0), ModelError);
  // Interior regimes may use gamma in (0, 1/2).
  CHECK_NOTHROW(ThresholdModel({1.0}, {{0.3, 0.2, 0.2, 0.5}, {0.3, 0.2, 0.2, 0.25}}));
}

TEST_CASE("classify_ergodicity rows") {
  CHECK(classify_ergodicity(table1()).ergodic);
  CHECK_FALSE(classify_ergodicity(single(0.1, 0.0, 0.2, 0.5)).ergodic);
  CHECK(classify_ergodicity(ThresholdModel({1.0}, {{0.3, 0.2, 0.2, 0.5}, {-0.1, 0.0, 0.2, 0.5}})).ergodic);
  // gamma_0 = 1, a_0 = 0 needs b_0 < -sigma_0^2/2 strictly.
  const ThresholdModel edge({1.0}, {{0.0, -0.02, 0.2, 1.0}, {0.3, 0.2, 0.2, 0.5}});
  CHECK_FALSE(classify_ergodicity(edge).ergodic);
  const ThresholdModel inside({1.0}, {{0.0, -0.03, 0.2, 1.0}, {0.3, 0.2, 0.2, 0.5}});
  CHECK(classify_ergodicity(inside).ergodic);
  // gamma_d = 1: b_d in (-sigma_d^2/2, 0].
  CHECK(classify_ergodicity(ThresholdModel({1.0}, {{0.3, 0.2, 0.2, 0.5}, {0.1, -0.01, 0.2, 1.0}})).ergodic);
  CHECK_FALSE(classify_ergodicity(ThresholdModel({1.0}, {{0.3, 0.2, 0.2, 0.5}, {0.1, -0.021, 0.2, 1.0}})).ergodic);
  // gamma_d in (1/2, 1) with b_d = 0 is ergodic.
  CHECK(classify_ergodicity(ThresholdModel({1.0}, {{0.3, 0.2, 0.2, 0.5}, {0.1, 0.0, 0.2, 0.75}})).ergodic);
  // OU: b_0 > 0 on the left.
  CHECK(classify_ergodicity(single(0.0, 1.0, 1.0, 0.0)).ergodic);
  CHECK_FALSE(classify_ergodicity(single(0.0, -1.0, 1.0, 0.0)).ergodic);
  for (const auto& m : {single(0.1, 0.0, 0.2, 0.5), edge}) CHECK_FALSE(classify_ergodicity(m).reason.empty());
}

TEST_CASE("ergodicity ignores interior regimes") {
  const ThresholdModel a({1.0, 2.0}, {{0.3, 0.2, 0.2, 0.5}, {0.0, 0.0, 0.4, 0.0}, {0.3, 0.2, 0.2, 0.5}});
  const ThresholdModel b({1.0, 2.0}, {{0.3, 0.2, 0.2, 0.5}, {-5.0, -3.0, 9.0, 1.0}, {0.3, 0.2, 0.2, 0.5}});
  CHECK(classify_ergodicity(a).ergodic == classify_ergodicity(b).ergodic);
}

TEST_CASE("state_space") {
  CHECK(state_space(single(0.0, 1.0, 1.0, 0.0)) == StateSpaceKind::WholeLine);
  CHECK(state_space(single(0.01, 0.2, 0.2, 0.5)) == StateSpaceKind::NonnegReflecting);
  CHECK(state_space(single(0.3, 0.2, 0.2, 0.5)) == StateSpaceKind::PositiveUnattainable);
  CHECK(state_space(single(0.3, 0.2, 0.2, 0.75)) == StateSpaceKind::PositiveUnattainable);
}

TEST_CASE("moment hypotheses") {
  const auto q1 = check_moment_hypotheses(table1(), EstimatorKind::Qmle);
  const auto m1 = check_moment_hypotheses(table1(), EstimatorKind::Mle);
  CHECK(q1.holds);
  CHECK(m1.holds);
  REQUIRE(m1.witness);
  CHECK(m1.witness->second == doctest::Approx(3.0));

  const ThresholdModel ou({1.0}, {{0.0, 1.0, 1.0, 0.0}, {0.0, 2.0, 1.0, 0.0}});
  CHECK(check_moment_hypotheses(ou, EstimatorKind::Qmle).holds);
  CHECK(check_moment_hypotheses(ou, EstimatorKind::Mle).holds);

  // a_0 = 0.05, sigma_0 = 0.2: (-q)-th moments exist for q < 2.5, so q = 2.1
  // (p = 21) is a witness. With a_0 = 0.03 no q > 2 works.
  const auto m05 = check_moment_hypotheses(single(0.05, 0.2, 0.2, 0.5), EstimatorKind::Mle);
  CHECK(m05.holds);
  REQUIRE(m05.witness);
  CHECK(m05.witness->second == doctest::Approx(2.1));
  CHECK(m05.witness->first == doctest::Approx(21.0));
  const auto m03 = check_moment_hypotheses(single(0.03, 0.2, 0.2, 0.5), EstimatorKind::Mle);
  CHECK_FALSE(m03.holds);
  CHECK(check_moment_hypotheses(single(0.03, 0.2, 0.2, 0.5), EstimatorKind::Qmle).holds);

  CHECK_THROWS_AS(check_moment_hypotheses(single(0.1, 0.0, 0.2, 0.5), EstimatorKind::Qmle), NotErgodicError);
}

TEST_CASE("moment_is_finite boundaries") {
  const ThresholdModel cir = single(0.3, 0.2, 0.2, 0.5);
  CHECK(moment_is_finite(cir, 50.0));
  CHECK(moment_is_finite(cir, -14.9));
  CHECK_FALSE(moment_is_finite(cir, -15.0));
  CHECK_FALSE(moment_is_finite(cir, -16.0));
  const ThresholdModel ou = single(0.3, 0.2, 0.2, 0.0);
  CHECK(moment_is_finite(ou, -0.5));
  CHECK_FALSE(moment_is_finite(ou, -1.0));
  // Power tails: x^(-2 gamma) for gamma in (1/2, 1) with b = 0, and
  // x^(-2 - 2 b / sigma^2) for gamma = 1.
  const ThresholdModel g34 = ThresholdModel({1.0}, {{0.3, 0.2, 0.2, 0.5}, {-0.1, 0.0, 0.2, 0.75}});
  CHECK(moment_is_finite(g34, 0.45));
  CHECK_FALSE(moment_is_finite(g34, 0.55));
  const ThresholdModel g1 = ThresholdModel({1.0}, {{0.3, 0.2, 0.2, 0.5}, {0.1, 0.02, 0.2, 1.0}});
  CHECK(moment_is_finite(g1, 1.9));
  CHECK_FALSE(moment_is_finite(g1, 2.1));
}

TEST_CASE("geometry split keeps the regime gamma") {
  const RegimeGeometry g({1.0}, {0.5, 0.5});
  const RegimeGeometry s = g.split(1, 2.0);
  CHECK(s.thresholds() == std::vector<double>{1.0, 2.0});
  CHECK(s.gammas() == std::vector<double>{0.5, 0.5, 0.5});
  CHECK_THROWS_AS(g.split(0, 1.0), ModelError);
  CHECK_THROWS_AS(g.split(0, 0.0), ModelError);
  CHECK(s.position(0) == RegimePosition::First);
  CHECK(s.position(1) == RegimePosition::Interior);
  CHECK(s.position(2) == RegimePosition::Last);
  CHECK(RegimeGeometry({}, {0.5}).position(0) == RegimePosition::Only);
}

TEST_CASE("model JSON round trip and unknown keys") {
  const ThresholdModel m = table1();
  const ThresholdModel back = model_from_json(model_to_json(m));
  CHECK(back.thresholds() == m.thresholds());
  CHECK(back.regimes() == m.regimes());

  nlohmann::json j = model_to_json(m);
  j["extra"] = 1;
  CHECK_THROWS_AS(model_from_json(j), InputError);
  nlohmann::json r = model_to_json(m);
  r["regimes"][0]["rho"] = 0.1;
  CHECK_THROWS_AS(model_from_json(r), InputError);
  nlohmann::json missing = model_to_json(m);
  missing["regimes"][1].erase("sigma");
  CHECK_THROWS_AS(model_from_json(missing), InputError);

  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), InputError);
  const std::string path = "test_model_roundtrip.json";
  {
    std::ofstream out(path);
    out << model_to_json(m).dump();
  }
  CHECK(load_model(path).regimes() == m.regimes());
  std::remove(path.c_str());
}
