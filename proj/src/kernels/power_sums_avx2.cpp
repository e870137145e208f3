// Compiled with -mavx2 only; the dispatcher calls into this file after a
// runtime CPU check.
#include <immintrin.h>

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

inline __m256d vabs(__m256d v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }

// Lane-wise Neumaier step.
inline void vneumaier_add(__m256d& s, __m256d& c, __m256d v) {
  const __m256d t = _mm256_add_pd(s, v);
  const __m256d s_big = _mm256_add_pd(_mm256_sub_pd(s, t), v);
  const __m256d v_big = _mm256_add_pd(_mm256_sub_pd(v, t), s);
  const __m256d use_s = _mm256_cmp_pd(vabs(s), vabs(v), _CMP_GE_OQ);
  c = _mm256_add_pd(c, _mm256_blendv_pd(v_big, s_big, use_s));
  s = t;
}

}  // namespace

void interval_power_sums_avx2(const double* x, const double* w, std::size_t n, double lo, double hi, int kmin,
                              int kmax, double* out) {
  const int count = kmax - kmin + 1;
  __m256d s[kMaxPowers];
  __m256d c[kMaxPowers];
  __m256d pw[kMaxPowers];
  for (int k = 0; k < count; ++k) {
    s[k] = _mm256_setzero_pd();
    c[k] = _mm256_setzero_pd();
  }
  const __m256d vlo = _mm256_set1_pd(lo);
  const __m256d vhi = _mm256_set1_pd(hi);
  const __m256d one = _mm256_set1_pd(1.0);

  auto process = [&](__m256d xv, __m256d wv, __m256d valid) {
    const __m256d in = _mm256_and_pd(valid, _mm256_and_pd(_mm256_cmp_pd(xv, vlo, _CMP_GE_OQ),
                                                          _mm256_cmp_pd(xv, vhi, _CMP_LT_OQ)));
    // Outside lanes see x = 1 and w = 0, contributing an exact zero.
    const __m256d xm = _mm256_blendv_pd(one, xv, in);
    const __m256d wm = _mm256_and_pd(in, wv);
    const __m256d inv = _mm256_div_pd(one, xm);
    __m256d neg = one;
    __m256d pos = one;
    for (int k = -1; k >= kmin; --k) {
      neg = (k == -1) ? inv : _mm256_mul_pd(neg, inv);
      if (k <= kmax) pw[k - kmin] = neg;
    }
    for (int k = 0; k <= kmax; ++k) {
      if (k == 1) {
        pos = xm;
      } else if (k > 1) {
        pos = _mm256_mul_pd(pos, xm);
      }
      if (k >= kmin) pw[k - kmin] = pos;
    }
    for (int k = 0; k < count; ++k) vneumaier_add(s[k], c[k], _mm256_mul_pd(pw[k], wm));
  };

  const __m256d all = _mm256_castsi256_pd(_mm256_set1_epi64x(-1));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    process(_mm256_loadu_pd(x + i), _mm256_loadu_pd(w + i), all);
  }
  if (i < n) {
    const long long rem = static_cast<long long>(n - i);
    const __m256i lane_mask =
        _mm256_set_epi64x(rem > 3 ? -1 : 0, rem > 2 ? -1 : 0, rem > 1 ? -1 : 0, rem > 0 ? -1 : 0);
    const __m256d xv = _mm256_maskload_pd(x + i, lane_mask);
    const __m256d wv = _mm256_maskload_pd(w + i, lane_mask);
    process(xv, wv, _mm256_castsi256_pd(lane_mask));
  }

  // Fixed-order reduction of the lane partials.
  for (int k = 0; k < count; ++k) {
    alignas(32) double sl[4];
    alignas(32) double cl[4];
    _mm256_store_pd(sl, s[k]);
    _mm256_store_pd(cl, c[k]);
    double rs = 0.0;
    double rc = 0.0;
    for (double v : sl) neumaier_add(rs, rc, v);
    for (double v : cl) neumaier_add(rs, rc, v);
    out[k] = rs + rc;
  }
}

}  // namespace tckls::kernels::detail
