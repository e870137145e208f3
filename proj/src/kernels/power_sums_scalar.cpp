#include <cmath>

#include "tckls/kernels/power_sums.hpp"

namespace tckls::kernels::detail {

namespace {

inline void neumaier_add(double& s, double& c, double v) {
  const double t = s + v;
  if (std::fabs(s) >= std::fabs(v)) {
    c += (s - t) + v;
  } else {
    c += (v - t) + s;
  }
  s = t;
}

}  // namespace

void interval_power_sums_scalar(const double* x, const double* w, std::size_t n, double lo, double hi, int kmin,
                                int kmax, double* out) {
  const int count = kmax - kmin + 1;
  double s[kMaxPowers] = {};
  double c[kMaxPowers] = {};
  double pw[kMaxPowers];

  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    if (!(xi >= lo && xi < hi)) continue;
    // Powers kmin..kmax, built with the shared multiplication recipe.
    const double inv = 1.0 / xi;
    double neg = 1.0;
    double pos = 1.0;
    for (int k = -1; k >= kmin; --k) {
      neg = (k == -1) ? inv : neg * inv;
      if (k <= kmax) pw[k - kmin] = neg;
    }
    for (int k = 0; k <= kmax; ++k) {
      if (k == 1) {
        pos = xi;
      } else if (k > 1) {
        pos = pos * xi;
      }
      if (k >= kmin) pw[k - kmin] = pos;
    }
    const double wi = w[i];
    for (int k = 0; k < count; ++k) neumaier_add(s[k], c[k], pw[k] * wi);
  }
  for (int k = 0; k < count; ++k) out[k] = s[k] + c[k];
}

}  // namespace tckls::kernels::detail
