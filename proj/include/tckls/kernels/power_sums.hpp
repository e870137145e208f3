#pragma once

#include <cstddef>
#include <span>

namespace tckls::kernels {

enum class Isa { Scalar, Avx2 };

const char* to_string(Isa isa);

/// Compiled in and supported by the running CPU.
bool isa_available(Isa isa);

/// ISA used by the dispatching entry points. Defaults to the best available
/// one; the environment variable TCKLS_KERNEL=scalar|avx2 overrides it.
Isa active_isa();

/// Throws std::invalid_argument if the ISA is unavailable.
void set_active_isa(Isa isa);

inline constexpr int kMinPower = -4;
inline constexpr int kMaxPower = 6;
inline constexpr int kMaxPowers = 8;

/// out[k - kmin] = sum of x[i]^k * w[i] over the i with lo <= x[i] < hi, for
/// k = kmin..kmax, accumulated with Neumaier compensation.
///
/// x^k is formed by repeated multiplication: x*x*...*x for k > 0 and
/// r*r*...*r with r = 1/x for k < 0 (x^0 = 1). Every variant computes the
/// identical term for each i; only the order of the compensated reduction
/// differs between ISAs. Callers must not request k < 0 when an in-interval
/// x is zero.
void interval_power_sums(std::span<const double> x, std::span<const double> w, double lo, double hi, int kmin,
                         int kmax, std::span<double> out);

void interval_power_sums(Isa isa, std::span<const double> x, std::span<const double> w, double lo, double hi,
                         int kmin, int kmax, std::span<double> out);

namespace detail {

void interval_power_sums_scalar(const double* x, const double* w, std::size_t n, double lo, double hi, int kmin,
                                int kmax, double* out);
#if defined(TCKLS_HAVE_AVX2_KERNEL)
void interval_power_sums_avx2(const double* x, const double* w, std::size_t n, double lo, double hi, int kmin,
                              int kmax, double* out);
#endif

}  // namespace detail

}  // namespace tckls::kernels
