#pragma once

#include "agediff/evolution.hpp"

namespace agediff {

/// Boundary birth values B(t_k) on the uniform time grid t_k = k * delta.
struct BirthTrajectory {
  double delta = 0.0;
  std::vector<Vector> B;  ///< index k = 0..steps()

  int steps() const { return static_cast<int>(B.size()) - 1; }
  double time(int k) const { return k * delta; }
};

/// Optional time-dependent forcing added to the births.
using TimeForcing = std::function<Vector(double)>;

/// March the renewal equation for the births
///   B(t) = sum_j w_j b(a_j) u(t, a_j) + h(t)
/// without evolving the full density: the population at time t_k splits into
/// cohorts born after t_0 (a convolution of B against the kernel
/// K_j = b(a_j) Pi(a_j, 0)) and transported initial cohorts. The split
/// reproduces the boundary values of the evolved density exactly, so the
/// marched B and the birth functional of independently evolved snapshots
/// agree to roundoff. T must be a nonnegative grid multiple of delta.
BirthTrajectory solve_birth(const Scenario& s, const PropagatorCache& c,
                            const AgeDensity& phi, double T,
                            const TimeForcing& h = nullptr);

/// Largest relative gap between a marched birth trajectory and the birth
/// functional of independently evolved snapshots:
///   max_k ||B(t_k) - beta(u(t_k))|| / (1 + ||B(t_k)||).
/// Snapshot times must lie on the trajectory's time grid.
double birth_consistency(const Scenario& s,
                         const std::vector<TrajectorySnapshot>& snapshots,
                         const BirthTrajectory& births);

/// Number of delta-steps in a horizon t; Error unless t is a nonnegative
/// grid multiple of delta (relative tolerance 1e-9).
int grid_steps(double t, double delta, const char* what);

}  // namespace agediff
