#include "tckls/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "tckls/error.hpp"
#include "tckls/parallel.hpp"
#include "tckls/rng.hpp"
#include "tckls/simulate.hpp"
#include "tckls/stationary.hpp"

namespace tckls {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Q0, Q1, Q2, M0, M1 of a set of left points.
struct Moments5 {
  double v[5] = {0, 0, 0, 0, 0};
};

struct CompensatedPrefix {
  double s[5] = {0, 0, 0, 0, 0};
  double c[5] = {0, 0, 0, 0, 0};

  void add(const double* t) {
    for (int k = 0; k < 5; ++k) {
      const double u = s[k] + t[k];
      c[k] += std::fabs(s[k]) >= std::fabs(t[k]) ? (s[k] - u) + t[k] : (t[k] - u) + s[k];
      s[k] = u;
    }
  }
  Moments5 value() const {
    Moments5 m;
    for (int k = 0; k < 5; ++k) m.v[k] = s[k] + c[k];
    return m;
  }
};

DriftFit fit5(const Moments5& m) { return drift_closed_form(m.v[0], m.v[1], m.v[2], m.v[3], m.v[4]); }

// 2 (l(theta_side) - l(theta)) for a quadratic l maximised at theta_side.
double quad_gap(const Moments5& m, const DriftFit& side, const DriftFit& pooled) {
  const double da = side.a - pooled.a;
  const double db = side.b - pooled.b;
  return m.v[0] * da * da - 2.0 * m.v[1] * da * db + m.v[2] * db * db;
}

std::vector<double> segment_values(const ObservationSet& obs, double lo, double hi) {
  std::vector<double> v;
  for (double x : obs.values()) {
    if (x >= lo && x < hi) v.push_back(x);
  }
  std::sort(v.begin(), v.end());
  return v;
}

std::size_t count_left_points(const ObservationSet& obs, double lo, double hi) {
  std::size_t n = 0;
  const auto& v = obs.values();
  for (std::size_t i = 0; i + 1 < v.size(); ++i) n += (v[i] >= lo && v[i] < hi) ? 1 : 0;
  return n;
}

}  // namespace

double quasi_loglik(const PathStatistics& s, std::size_t j, double a, double b) {
  return a * s.M(j, 0.0) - b * s.M(j, 1.0) - 0.5 * a * a * s.Q(j, 0.0) + a * b * s.Q(j, 1.0) -
         0.5 * b * b * s.Q(j, 2.0);
}

double nearest_rank(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InputError("nearest_rank: empty sample");
  const double n = static_cast<double>(sorted.size());
  const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(p * n)));
  return sorted[std::min(rank, sorted.size()) - 1];
}

std::optional<double> qlr_statistic(const ObservationSet& obs, const RegimeGeometry& h0, std::size_t k, double rbar,
                                    const ScanOptions& opt) {
  if (k >= h0.num_regimes()) throw InputError("qlr_statistic: segment index out of range");
  const double lo = h0.lower(k);
  const double hi = h0.upper(k);
  if (!(rbar > lo && rbar < hi && rbar > 0.0)) return std::nullopt;  // thresholds are positive
  if (count_left_points(obs, lo, rbar) < opt.min_obs || count_left_points(obs, rbar, hi) < opt.min_obs) {
    return std::nullopt;
  }
  const RegimeGeometry h1 = h0.split(k, rbar);
  const PathStatistics s0 = compute_QM(obs, h0);
  const PathStatistics s1 = compute_QM(obs, h1);

  auto fit = [&](const PathStatistics& s) {
    if (opt.fit == EstimatorKind::Qmle) return qmle(s);
    const VolEstimate sig = estimate_sigma(s, compute_brackets(s));
    std::vector<double> sv(s.geometry.num_regimes());
    for (std::size_t j = 0; j < sv.size(); ++j) sv[j] = sig.regimes[j].sigma;
    return mle(s, compute_modified_M(s, sv));
  };
  const DriftEstimate f0 = fit(s0);
  const DriftEstimate f1 = fit(s1);
  if (!f0.regimes[k].ok() || !f1.regimes[k].ok() || !f1.regimes[k + 1].ok()) return std::nullopt;

  auto ll = [](const PathStatistics& s, const DriftEstimate& f, std::size_t j) {
    return f.regimes[j].ok() ? quasi_loglik(s, j, f.regimes[j].a, f.regimes[j].b) : 0.0;
  };
  double diff = 0.0;
  for (std::size_t j = 0; j < h0.num_regimes(); ++j) {
    if (j < k) {
      diff += ll(s1, f1, j) - ll(s0, f0, j);
    } else if (j == k) {
      diff += ll(s1, f1, k) + ll(s1, f1, k + 1) - ll(s0, f0, k);
    } else {
      diff += ll(s1, f1, j + 1) - ll(s0, f0, j);
    }
  }
  return 2.0 * diff;
}

ScanResult scan(const ObservationSet& obs, const RegimeGeometry& h0, std::size_t k, const ScanOptions& opt) {
  if (k >= h0.num_regimes()) throw InputError("scan: segment index out of range");
  if (opt.n_grid < 1) throw InputError("scan: n_grid must be >= 1");
  ScanResult res;
  res.segment = k;
  res.lower = h0.lower(k);
  res.upper = h0.upper(k);
  const double lo = res.lower;
  const double hi = res.upper;

  const std::vector<double> seg = segment_values(obs, lo, hi);
  if (seg.size() < 2 * opt.min_obs) {
    res.note = "segment holds too few observations";
    return res;
  }
  const double q20 = nearest_rank(seg, 0.2);
  const double q80 = nearest_rank(seg, 0.8);
  if (!(q80 > q20)) {
    res.note = "empty percentile interval";
    return res;
  }
  res.candidates.resize(opt.n_grid + 1);
  const double n = static_cast<double>(opt.n_grid);
  for (std::size_t j = 0; j <= opt.n_grid; ++j) {
    const double w = static_cast<double>(j) / n;
    res.candidates[j] = q20 * (1.0 - w) + q80 * w;
  }
  res.statistic.assign(res.candidates.size(), kNaN);

  if (opt.fit == EstimatorKind::Mle) {
    for (std::size_t j = 0; j < res.candidates.size(); ++j) {
      if (auto t = qlr_statistic(obs, h0, k, res.candidates[j], opt)) res.statistic[j] = *t;
    }
  } else {
    // Left points of the segment sorted by value, with compensated prefix
    // and suffix sums of (dt, x dt, x^2 dt, dx, x dx).
    const auto& t = obs.times();
    const auto& v = obs.values();
    struct Item {
      double x;
      double terms[5];
    };
    std::vector<Item> items;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      const double x = v[i];
      if (!(x >= lo && x < hi)) continue;
      const double dt = t[i + 1] - t[i];
      const double dx = v[i + 1] - v[i];
      items.push_back({x, {dt, x * dt, x * x * dt, dx, x * dx}});
    }
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.x < b.x; });
    const std::size_t m = items.size();
    std::vector<Moments5> prefix(m + 1);
    std::vector<Moments5> suffix(m + 1);
    CompensatedPrefix acc;
    for (std::size_t i = 0; i < m; ++i) {
      acc.add(items[i].terms);
      prefix[i + 1] = acc.value();
    }
    CompensatedPrefix racc;
    for (std::size_t i = m; i-- > 0;) {
      racc.add(items[i].terms);
      suffix[i] = racc.value();
    }
    const Moments5 total = prefix[m];
    const DriftFit pooled = fit5(total);
    if (pooled.ok()) {
      for (std::size_t j = 0; j < res.candidates.size(); ++j) {
        const double r = res.candidates[j];
        if (!(r > lo && r < hi && r > 0.0)) continue;
        const auto it = std::lower_bound(items.begin(), items.end(), r, [](const Item& a, double x) { return a.x < x; });
        const auto left = static_cast<std::size_t>(it - items.begin());
        if (left < opt.min_obs || m - left < opt.min_obs) continue;
        const DriftFit fl = fit5(prefix[left]);
        const DriftFit fr = fit5(suffix[left]);
        if (!fl.ok() || !fr.ok()) continue;
        res.statistic[j] = quad_gap(prefix[left], fl, pooled) + quad_gap(suffix[left], fr, pooled);
      }
    }
  }

  for (std::size_t j = 0; j < res.statistic.size(); ++j) {
    const double s = res.statistic[j];
    if (std::isnan(s)) continue;
    if (res.degenerate || s > res.T_data) {
      res.degenerate = false;
      res.T_data = s;
      res.argmax = j;
      res.r_hat = res.candidates[j];
    }
  }
  if (res.degenerate) res.note = "no admissible candidate";
  return res;
}

double bootstrap_count_pvalue(double T_data, std::span<const double> boot) {
  if (boot.empty()) throw InputError("bootstrap p-value needs at least one replicate");
  std::size_t count = 0;
  for (double t : boot) count += T_data < t ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(boot.size());
}

ThresholdModel fit_null_model(const ObservationSet& obs, const RegimeGeometry& h0) {
  const EstimationResult est = estimate_full(obs, h0);
  std::vector<RegimeParams> regimes;
  for (std::size_t j = 0; j < h0.num_regimes(); ++j) {
    const DriftFit& f = est.mle.drift.regimes[j];
    const VolFit& s = est.sigma_hat.regimes[j];
    if (!f.ok() || !s.ok() || !(s.sigma > 0.0)) {
      throw ModelError("null fit: regime " + std::to_string(j) + " is " + to_string(f.ok() ? s.status : f.status));
    }
    regimes.push_back({f.a, f.b, s.sigma, h0.gamma(j)});
  }
  ThresholdModel model(h0.thresholds(), std::move(regimes));
  const ErgodicityClass erg = classify_ergodicity(model);
  if (!erg.ergodic) throw NotErgodicError("null fit is not ergodic: " + erg.reason);
  return model;
}

BootstrapResult bootstrap_pvalue(const ObservationSet& obs, const ThresholdModel& fitted_h0, std::size_t k,
                                 double T_data, const ScanOptions& scan_options, const BootstrapOptions& opt,
                                 std::uint64_t seed) {
  if (opt.n_boot < 1) throw InputError("bootstrap: n_boot must be >= 1");
  const ErgodicityClass erg = classify_ergodicity(fitted_h0);
  if (!erg.ergodic) throw NotErgodicError("bootstrap: null model is not ergodic: " + erg.reason);
  std::optional<StationaryDistribution> dist;
  if (opt.stationary_start) dist.emplace(build_stationary(fitted_h0));
  const RegimeGeometry& geom = fitted_h0.geometry();

  BootstrapResult out;
  out.statistics.assign(opt.n_boot, kNegInf);
  parallel_for(opt.n_boot, opt.jobs, [&](std::size_t b) {
    Rng rng = make_stream(seed, b);
    const double x0 = dist ? sample_stationary_one(*dist, rng) : obs.x0();
    std::vector<double> path = simulate_on_grid(fitted_h0, x0, obs.times(), opt.refine, rng);
    const ObservationSet sim(obs.times(), std::move(path));
    const ScanResult s = scan(sim, geom, k, scan_options);
    out.statistics[b] = s.degenerate ? kNegInf : s.T_data;
  });
  out.p_value = bootstrap_count_pvalue(T_data, out.statistics);
  return out;
}

ThresholdTestResult test_segment(const ObservationSet& obs, const RegimeGeometry& h0, std::size_t k,
                                 const DetectionOptions& opt, std::uint64_t seed) {
  ThresholdTestResult r;
  r.scan = scan(obs, h0, k, opt.scan);
  if (r.scan.degenerate) {
    r.note = "untestable: " + r.scan.note;
    return r;
  }
  std::optional<ThresholdModel> null_model;
  try {
    null_model.emplace(fit_null_model(obs, h0));
  } catch (const Error& e) {
    r.note = std::string("untestable: ") + e.what();
    return r;
  }
  const BootstrapResult boot = bootstrap_pvalue(obs, *null_model, k, r.scan.T_data, opt.scan, opt.bootstrap, seed);
  r.testable = true;
  r.p_value = boot.p_value;
  r.n_boot = boot.statistics.size();
  r.reject = r.p_value < opt.alpha;
  return r;
}

DetectionReport sequential_detection(const ObservationSet& obs, double gamma, const DetectionOptions& opt,
                                     std::uint64_t seed) {
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (opt.bootstrap.n_boot < 1) throw InputError("n_boot must be >= 1");
  DetectionReport rep;
  rep.geometry = RegimeGeometry({}, {gamma});

  std::function<void(double)> visit = [&](double lower) {
    std::size_t k = 0;
    while (k < rep.geometry.num_regimes() && rep.geometry.lower(k) != lower) ++k;
    ThresholdTestResult r = test_segment(obs, rep.geometry, k, opt, derive_seed(seed, rep.steps.size()));
    const bool split = r.reject && rep.geometry.thresholds().size() < opt.max_thresholds;
    if (r.reject && !split) r.note = "threshold limit reached";
    const double r_hat = r.scan.r_hat;
    rep.steps.push_back(std::move(r));
    if (!split) return;
    rep.geometry = rep.geometry.split(k, r_hat);
    visit(lower);
    visit(r_hat);
  };
  visit(rep.geometry.lower(0));
  rep.thresholds = rep.geometry.thresholds();
  try {
    rep.fit.emplace(estimate_full(obs, rep.geometry));
  } catch (const Error&) {
    rep.fit.reset();
  }
  return rep;
}

nlohmann::json to_json(const ThresholdTestResult& r) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return json{{"segment", {num(r.scan.lower), num(r.scan.upper)}},
              {"testable", r.testable},
              {"note", r.note},
              {"n_candidates", r.scan.candidates.size()},
              {"r_hat", r.scan.degenerate ? json(nullptr) : num(r.scan.r_hat)},
              {"T_data", r.scan.degenerate ? json(nullptr) : num(r.scan.T_data)},
              {"p_value", r.p_value},
              {"n_boot", r.n_boot},
              {"decision", r.reject ? "reject" : "accept"}};
}

nlohmann::json to_json(const DetectionReport& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : r.steps) steps.push_back(to_json(s));
  nlohmann::json j{{"thresholds", r.thresholds}, {"gammas", r.geometry.gammas()}, {"steps", steps}};
  j["fit"] = r.fit ? to_json(*r.fit) : nlohmann::json(nullptr);
  return j;
}

}  // namespace tckls
