#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <stdexcept>
#include <vector>

#include "tckls/kernels/power_sums.hpp"

using namespace tckls::kernels;

namespace {

struct Data {
  std::vector<double> x;
  std::vector<double> w;
};

Data make_data(std::size_t n, std::uint64_t seed, bool signed_weights) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.05, 3.0);
  std::normal_distribution<double> nw(0.0, 0.01);
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    d.x.push_back(ux(rng));
    d.w.push_back(signed_weights ? nw(rng) : 1e-3 * (1.0 + ux(rng)));
  }
  return d;
}

// Reference with the same per-term recipe and plain index-order summation.
std::vector<double> naive(const Data& d, double lo, double hi, int kmin, int kmax, std::vector<double>& abs_sum) {
  std::vector<double> out(kmax - kmin + 1, 0.0);
  abs_sum.assign(out.size(), 0.0);
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    const double x = d.x[i];
    if (!(x >= lo && x < hi)) continue;
    for (int k = kmin; k <= kmax; ++k) {
      double p = 1.0;
      if (k > 0) {
        p = x;
        for (int e = 1; e < k; ++e) p *= x;
      } else if (k < 0) {
        const double r = 1.0 / x;
        p = r;
        for (int e = -1; e > k; --e) p *= r;
      }
      out[k - kmin] += p * d.w[i];
      abs_sum[k - kmin] += std::fabs(p * d.w[i]);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("scalar kernel matches a naive loop") {
  const Data d = make_data(1001, 3, true);
  std::vector<double> abs;
  const auto ref = naive(d, 0.5, 2.0, -3, 4, abs);
  std::vector<double> out(kMaxPowers);
  interval_power_sums(Isa::Scalar, d.x, d.w, 0.5, 2.0, -3, 4, out);
  for (std::size_t k = 0; k < ref.size(); ++k) {
    CHECK(std::fabs(out[k] - ref[k]) <= 1e-14 * abs[k] + 1e-300);
  }
}

TEST_CASE("AVX2 kernel agrees with the scalar kernel") {
  if (!isa_available(Isa::Avx2)) {
    MESSAGE("AVX2 not available on this CPU; equivalence test skipped");
    return;
  }
  for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 31u, 64u, 1000u, 4099u}) {
    for (bool sw : {false, true}) {
      const Data d = make_data(n, 11 + n, sw);
      for (auto [kmin, kmax] : {std::pair{-4, 3}, std::pair{0, 2}, std::pair{-1, -1}, std::pair{1, 6}}) {
        for (auto [lo, hi] : {std::pair{0.0, 1e300}, std::pair{0.7, 1.9}, std::pair{2.5, 2.6}}) {
          std::vector<double> s(kMaxPowers), v(kMaxPowers), abs;
          interval_power_sums(Isa::Scalar, d.x, d.w, lo, hi, kmin, kmax, s);
          interval_power_sums(Isa::Avx2, d.x, d.w, lo, hi, kmin, kmax, v);
          naive(d, lo, hi, kmin, kmax, abs);
          for (int k = 0; k <= kmax - kmin; ++k) {
            // Both are compensated sums of identical terms; they may differ
            // in the last bit through the reduction order only.
            const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(s[k]) + 1e-28 * abs[k];
            CHECK(std::fabs(s[k] - v[k]) <= tol);
          }
        }
      }
    }
  }
}

TEST_CASE("AVX2 kernel is bitwise reproducible") {
  if (!isa_available(Isa::Avx2)) return;
  const Data d = make_data(777, 5, true);
  std::vector<double> a(kMaxPowers), b(kMaxPowers);
  interval_power_sums(Isa::Avx2, d.x, d.w, 0.3, 2.2, -2, 5, a);
  interval_power_sums(Isa::Avx2, d.x, d.w, 0.3, 2.2, -2, 5, b);
  CHECK(a == b);
}

TEST_CASE("kernel argument checks and dispatch") {
  const Data d = make_data(10, 1, false);
  std::vector<double> out(kMaxPowers);
  CHECK_THROWS_AS(interval_power_sums(Isa::Scalar, d.x, std::span<const double>(d.w.data(), 5), 0, 1, 0, 1, out),
                  std::invalid_argument);
  CHECK_THROWS_AS(interval_power_sums(Isa::Scalar, d.x, d.w, 0, 1, -5, 0, out), std::invalid_argument);
  CHECK_THROWS_AS(interval_power_sums(Isa::Scalar, d.x, d.w, 0, 1, 2, 1, out), std::invalid_argument);
  std::vector<double> small(1);
  CHECK_THROWS_AS(interval_power_sums(Isa::Scalar, d.x, d.w, 0, 1, 0, 2, small), std::invalid_argument);

  const Isa before = active_isa();
  set_active_isa(Isa::Scalar);
  CHECK(active_isa() == Isa::Scalar);
  std::vector<double> via(kMaxPowers), direct(kMaxPowers);
  interval_power_sums(d.x, d.w, 0.0, 10.0, 0, 3, via);
  interval_power_sums(Isa::Scalar, d.x, d.w, 0.0, 10.0, 0, 3, direct);
  CHECK(via == direct);
  if (!isa_available(Isa::Avx2)) CHECK_THROWS_AS(set_active_isa(Isa::Avx2), std::invalid_argument);
  set_active_isa(before);
  CHECK(std::string(to_string(Isa::Avx2)) == "avx2");
}

TEST_CASE("empty interval gives zero sums") {
  const Data d = make_data(100, 2, false);
  std::vector<double> out(kMaxPowers, 1.0);
  interval_power_sums(Isa::Scalar, d.x, d.w, 10.0, 20.0, 0, 2, out);
  CHECK(out[0] == 0.0);
  CHECK(out[2] == 0.0);
}
