#pragma once

#include "agediff/model.hpp"

namespace agediff {

enum class Stepper {
  implicit_euler,   ///< default; entrywise nonnegative steps
  crank_nicolson,   ///< second order in age, no positivity guarantee
};

/// Per-step solution operators of the age-parameterized evolution family.
///
/// step[j-1] approximates the flow of v' = A(a) v across [a_{j-1}, a_j] with
/// the coefficient frozen at the step midpoint; from_zero[j] is the ordered
/// product step[j-1] * ... * step[0].
struct PropagatorCache {
  Stepper stepper = Stepper::implicit_euler;
  std::vector<Matrix> step;       ///< P_j, index j-1, j = 1..n_age
  std::vector<Matrix> from_zero;  ///< Pi(a_j, 0), index j = 0..n_age
};

/// Build the propagators. Implicit Euler: P_j = (I - delta A(a_{j-1/2}))^{-1},
/// entrywise nonnegative whenever A has nonnegative off-diagonal entries.
/// Throws Error on a singular step matrix or loss of positivity (implicit
/// Euler only).
PropagatorCache build_propagators(const Scenario& s,
                                  Stepper stepper = Stepper::implicit_euler);

/// Apply the shifted propagator Pi_lambda(a_j, a_i) = e^{-lambda (a_j - a_i)}
/// P_j ... P_{i+1} to x. Requires 0 <= i <= j <= n_age. The shift is one exact
/// scalar factor, so propagate(lambda) == e^{-lambda (a_j-a_i)} propagate(0)
/// bitwise.
Vector propagate(const Scenario& s, const PropagatorCache& c, int i, int j,
                 Vector x, double lambda = 0.0);

/// Mild solution of the shifted inhomogeneous problem on the age grid.
struct MildSolution {
  double lambda = 0.0;
  AgeDensity v;
};

/// March v_j = e^{-lambda delta} P_j (v_{j-1} + delta phi_{j-1}), v_0 = x.
/// Unrolled this is v_j = Pi_lambda(a_j,0) x + sum_{i<j} delta
/// Pi_lambda(a_j,a_i) phi(a_i), the left-rectangle Duhamel quadrature
/// interlocked with every spectral formula in the library.
MildSolution mild_solve(const Scenario& s, const PropagatorCache& c,
                        double lambda, const Vector& x, const AgeDensity& phi);

}  // namespace agediff
