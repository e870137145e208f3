#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "tckls/kernels/power_sums.hpp"

namespace tckls::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(TCKLS_HAVE_AVX2_KERNEL) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa detect_default() {
  if (const char* env = std::getenv("TCKLS_KERNEL")) {
    const std::string v(env);
    if (v == "scalar") return Isa::Scalar;
    if (v == "avx2" && cpu_has_avx2()) return Isa::Avx2;
  }
  return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detect_default()};
  return isa;
}

void check_args(std::span<const double> x, std::span<const double> w, int kmin, int kmax, std::span<double> out) {
  if (x.size() != w.size()) throw std::invalid_argument("interval_power_sums: x and w differ in length");
  if (kmin > kmax || kmin < kMinPower || kmax > kMaxPower || kmax - kmin + 1 > kMaxPowers) {
    throw std::invalid_argument("interval_power_sums: unsupported power range");
  }
  if (out.size() < static_cast<std::size_t>(kmax - kmin + 1)) {
    throw std::invalid_argument("interval_power_sums: output span too short");
  }
}

}  // namespace

const char* to_string(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) { return isa == Isa::Scalar || cpu_has_avx2(); }

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_available(isa)) throw std::invalid_argument(std::string("kernel ISA unavailable: ") + to_string(isa));
  active().store(isa, std::memory_order_relaxed);
}

void interval_power_sums(Isa isa, std::span<const double> x, std::span<const double> w, double lo, double hi,
                         int kmin, int kmax, std::span<double> out) {
  check_args(x, w, kmin, kmax, out);
  switch (isa) {
    case Isa::Avx2:
#if defined(TCKLS_HAVE_AVX2_KERNEL)
      if (cpu_has_avx2()) {
        detail::interval_power_sums_avx2(x.data(), w.data(), x.size(), lo, hi, kmin, kmax, out.data());
        return;
      }
#endif
      throw std::invalid_argument("interval_power_sums: AVX2 kernel unavailable");
    case Isa::Scalar:
      break;
  }
  detail::interval_power_sums_scalar(x.data(), w.data(), x.size(), lo, hi, kmin, kmax, out.data());
}

void interval_power_sums(std::span<const double> x, std::span<const double> w, double lo, double hi, int kmin,
                         int kmax, std::span<double> out) {
  interval_power_sums(active_isa(), x, w, lo, hi, kmin, kmax, out);
}

}  // namespace tckls::kernels
