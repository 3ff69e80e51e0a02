#pragma once

#include "agediff/evolution.hpp"

namespace agediff {

/// One step of the population semigroup on the age grid: every cohort moves
/// one age step through its propagator and the boundary closes with the birth
/// functional,
///   u(t+delta, a_j) = P_j u(t, a_{j-1}),  u(t+delta, 0) = beta(u(t+delta)).
/// The oldest cohort leaves the grid.
void semigroup_step(const Scenario& s, const PropagatorCache& c, AgeDensity& u);

/// Apply the semigroup at a grid-aligned time t (Error otherwise).
AgeDensity apply_semigroup(const Scenario& s, const PropagatorCache& c,
                           AgeDensity u, double t);

/// Evolve up to T and record a snapshot at t = 0, every `stride` steps, and
/// at the final time. total_population is the positive-part mass.
std::vector<TrajectorySnapshot> evolve_trajectory(const Scenario& s,
                                                  const PropagatorCache& c,
                                                  const AgeDensity& phi,
                                                  double T, int stride = 1);

/// Bounded operator acting on age densities.
using AgeOperator = std::function<AgeDensity(const AgeDensity&)>;

/// Semigroup perturbed by a bounded operator, first-order splitting: each
/// step applies u <- step(u + delta * Bop(u)). A zero perturbation reproduces
/// apply_semigroup exactly.
AgeDensity apply_perturbed(const Scenario& s, const PropagatorCache& c,
                           const AgeOperator& Bop, AgeDensity u, double t);

/// Density-dependent extra mortality: rate(u, t) is one nonnegative value per
/// cell, age-independent. The semilinear step damps every cohort (including
/// the newborn boundary) by (1 + delta * rate)^{-1} after the linear shift.
struct NonlinearMortality {
  std::function<Vector(const AgeDensity&, double)> rate;

  /// Constant extra mortality value >= 0.
  static NonlinearMortality constant(const Scenario& s, double value);
  /// Crowding rate equal to the current age-integrated population norm.
  static NonlinearMortality logistic(const Scenario& s);
};

/// Evolve the semilinear problem (linear shift plus density-dependent decay)
/// with snapshots at t = 0, every `stride` steps, and at the final time.
/// Throws Error if the rate returns a negative or non-finite value.
std::vector<TrajectorySnapshot> solve_semilinear(const Scenario& s,
                                                 const PropagatorCache& c,
                                                 const NonlinearMortality& mort,
                                                 const AgeDensity& phi, double T,
                                                 int stride = 1);

}  // namespace agediff
