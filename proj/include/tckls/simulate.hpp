#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tckls/model.hpp"
#include "tckls/rng.hpp"
#include "tckls/stationary.hpp"
#include "tckls/statistics.hpp"

namespace tckls {

struct Trajectory {
  std::vector<double> times;
  std::vector<double> values;

  ObservationSet observations() const { return ObservationSet(times, values); }
};

/// One explicit Euler step with the coefficients of the regime containing x:
/// x + h (a - b x) + sqrt(h) sigma x^gamma g, reflected by |.| unless the
/// state space is the whole line.
double euler_step(const ThresholdModel& model, double x, double h, double g);

/// ceil(T * n_per_unit) steps of size 1 / n_per_unit from x0.
Trajectory simulate_path(const ThresholdModel& model, double x0, std::size_t n_per_unit, double T, Rng& rng);

/// Values at the given times, with `refine` Euler substeps per interval;
/// the first value is x0.
std::vector<double> simulate_on_grid(const ThresholdModel& model, double x0, std::span<const double> times,
                                     std::size_t refine, Rng& rng);

/// Final value of a path started at 1 and run for T_b at step 1 / n_per_unit.
double warm_start_burn_in(const ThresholdModel& model, double T_b, std::size_t n_per_unit, Rng& rng);
/// One draw from the stationary law.
double warm_start_exact(const StationaryDistribution& dist, Rng& rng);

/// Every stride-th point, starting with the first.
ObservationSet subsample(const Trajectory& traj, std::size_t stride);
/// Points at the listed times (matched within 1e-12); throws InputError for
/// a time absent from the trajectory.
ObservationSet subsample(const Trajectory& traj, std::span<const double> times);

}  // namespace tckls
