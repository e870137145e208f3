#include "tckls/simulate.hpp"

#include <cmath>
#include <random>

#include "tckls/error.hpp"

namespace tckls {

namespace {

double diffusion_power(double x, double gamma) {
  if (gamma == 0.0) return 1.0;
  if (gamma == 0.5) return std::sqrt(x);
  if (gamma == 1.0) return x;
  return std::pow(x, gamma);
}

}  // namespace

double euler_step(const ThresholdModel& model, double x, double h, double g) {
  const RegimeParams& r = model.params_at(x);
  const double next = x + h * (r.a - r.b * x) + std::sqrt(h) * r.sigma * diffusion_power(x, r.gamma) * g;
  return model.first().gamma == 0.0 ? next : std::fabs(next);
}

Trajectory simulate_path(const ThresholdModel& model, double x0, std::size_t n_per_unit, double T, Rng& rng) {
  if (n_per_unit < 1) throw InputError("simulate_path: n_per_unit must be >= 1");
  if (!(T > 0.0) || !std::isfinite(T)) throw InputError("simulate_path: T must be positive");
  model.regime_of(x0);
  const double n = static_cast<double>(n_per_unit);
  const auto steps = static_cast<std::size_t>(std::ceil(T * n - 1e-9));
  const double h = 1.0 / n;
  Trajectory tr;
  tr.times.resize(steps + 1);
  tr.values.resize(steps + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  double x = x0;
  tr.times[0] = 0.0;
  tr.values[0] = x;
  for (std::size_t k = 1; k <= steps; ++k) {
    x = euler_step(model, x, h, normal(rng));
    tr.times[k] = static_cast<double>(k) / n;
    tr.values[k] = x;
  }
  return tr;
}

std::vector<double> simulate_on_grid(const ThresholdModel& model, double x0, std::span<const double> times,
                                     std::size_t refine, Rng& rng) {
  if (refine < 1) throw InputError("simulate_on_grid: refine must be >= 1");
  if (times.empty()) return {};
  model.regime_of(x0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(times.size());
  double x = x0;
  out[0] = x;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double h = (times[i] - times[i - 1]) / static_cast<double>(refine);
    if (!(h > 0.0)) throw InputError("simulate_on_grid: times must be strictly increasing");
    for (std::size_t k = 0; k < refine; ++k) x = euler_step(model, x, h, normal(rng));
    out[i] = x;
  }
  return out;
}

double warm_start_burn_in(const ThresholdModel& model, double T_b, std::size_t n_per_unit, Rng& rng) {
  if (!classify_ergodicity(model).ergodic) throw NotErgodicError("warm_start: model is not ergodic");
  if (!(T_b >= 0.0)) throw InputError("warm_start: burn-in length must be >= 0");
  if (T_b == 0.0) return 1.0;
  return simulate_path(model, 1.0, n_per_unit, T_b, rng).values.back();
}

double warm_start_exact(const StationaryDistribution& dist, Rng& rng) { return sample_stationary_one(dist, rng); }

ObservationSet subsample(const Trajectory& traj, std::size_t stride) {
  if (stride < 1) throw InputError("subsample: stride must be >= 1");
  std::vector<double> t;
  std::vector<double> v;
  for (std::size_t i = 0; i < traj.times.size(); i += stride) {
    t.push_back(traj.times[i]);
    v.push_back(traj.values[i]);
  }
  return ObservationSet(std::move(t), std::move(v));
}

ObservationSet subsample(const Trajectory& traj, std::span<const double> times) {
  std::vector<double> t;
  std::vector<double> v;
  std::size_t i = 0;
  for (double want : times) {
    while (i < traj.times.size() && traj.times[i] < want - 1e-12) ++i;
    if (i == traj.times.size() || std::fabs(traj.times[i] - want) > 1e-12) {
      throw InputError("subsample: time " + std::to_string(want) + " is not on the trajectory grid");
    }
    t.push_back(traj.times[i]);
    v.push_back(traj.values[i]);
    ++i;
  }
  return ObservationSet(std::move(t), std::move(v));
}

}  // namespace tckls
