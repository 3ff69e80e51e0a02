#pragma once

#include "agediff/evolution.hpp"
#include "agediff/semigroup.hpp"

#include <optional>

namespace agediff {

/// Discounted offspring operator
///   Q_lambda = sum_j w_j e^{-lambda a_j} b(a_j) Pi(a_j, 0):
/// maps a newborn profile to the discounted profile of its offspring over one
/// life span. Its spectral radius is strictly decreasing in lambda; the
/// growth rate lambda0 is the root of r(Q_lambda) = 1. Terms whose discount
/// overflows yield an all-infinite matrix (reported as infinite radius).
Matrix assemble_Q(const Scenario& s, const PropagatorCache& c, double lambda);

/// Perron data of an entrywise nonnegative matrix.
struct PerronPair {
  double radius = 0.0;
  Vector vec;  ///< nonnegative eigenvector with unit state norm
  int iterations = 0;
};

/// Power iteration from the uniform positive start. Converges when the
/// normalized iterate and the radius estimate both settle to `tol`; Error if
/// not within max_iter. A (numerically) nilpotent matrix yields radius 0; a
/// non-finite matrix yields radius +infinity.
PerronPair perron_pair(const Scenario& s, const Matrix& Q, double tol = 1e-12,
                       int max_iter = 10000);

double spectral_radius(const Scenario& s, const Matrix& Q, double tol = 1e-12,
                       int max_iter = 10000);

/// Perron vector of the transpose, scaled so that pairing(dual, zeta) = 1.
Vector dual_eigenfunctional(const Scenario& s, const Matrix& Q,
                            const Vector& zeta, double tol = 1e-12,
                            int max_iter = 10000);

/// Growth rate lambda0 with r(Q_{lambda0}) = 1: checks lambda = 0 first, then
/// brackets by doubling (Error when no sign change appears within 60
/// doublings) and bisects until |r - 1| <= root_tol.
double find_lambda0(const Scenario& s, const PropagatorCache& c,
                    double root_tol = 1e-10);

/// Everything the spectral projection needs, computed once per scenario.
struct SpectralData {
  double lambda0 = 0.0;   ///< growth rate, r(Q_{lambda0}) = 1
  double r_of_Q0 = 0.0;   ///< basic reproduction radius r(Q_0)
  Vector zeta;            ///< Perron profile of Q_{lambda0}, unit state norm
  Vector zeta_dual;       ///< dual functional, pairing(zeta_dual, zeta) = 1
  double denom = 0.0;     ///< <zeta', sum_j w_j a_j e^{-l0 a_j} b_j Pi(a_j,0) zeta>
  double omega_hat = 0.0; ///< transport growth bound of the scenario
};

SpectralData compute_spectral_data(const Scenario& s, const PropagatorCache& c,
                                   double root_tol = 1e-10);

/// Accumulated discounted births of the inhomogeneity:
///   H_lambda phi = sum_j w_j b(a_j) [sum_{i<j} delta Pi_lambda(a_j,a_i) phi_i].
Vector apply_H(const Scenario& s, const PropagatorCache& c, double lambda,
               const AgeDensity& phi);

/// Resolvent of the population generator at a real lambda:
///   psi(a_j) = Pi_lambda(a_j,0) psi(0) + [Duhamel part],
///   psi(0) = (I - Q_lambda)^{-1} H_lambda phi.
/// Refused (Error) when |r(Q_lambda) - 1| < 1e-8: lambda collides with the
/// point spectrum and the renewal system is numerically singular.
AgeDensity resolvent(const Scenario& s, const PropagatorCache& c, double lambda,
                     const AgeDensity& phi);

/// Residuals certifying that psi solves the resolvent problem for phi:
/// the mild (variation-of-constants) identity along age and the renewal
/// boundary identity psi(0) = beta(psi). Both are relative.
struct DomainCheck {
  double mild_residual = 0.0;
  double boundary_residual = 0.0;
};

DomainCheck check_generator_domain(const Scenario& s, const PropagatorCache& c,
                                   double lambda, const AgeDensity& phi,
                                   const AgeDensity& psi);

/// Discrete eigenprofile psi*(a_j) = e^{-lambda0 a_j} Pi(a_j, 0) zeta, marched
/// with the same per-step propagators the semigroup uses.
AgeDensity eigen_profile(const Scenario& s, const PropagatorCache& c,
                         const SpectralData& data);

/// Coefficient of phi along the growth mode:
///   <zeta', H_{lambda0} phi> / denom.
double projection_coefficient(const Scenario& s, const PropagatorCache& c,
                              const SpectralData& data, const AgeDensity& phi);

/// Rank-one spectral projection P phi = projection_coefficient(phi) * psi*.
AgeDensity spectral_projection(const Scenario& s, const PropagatorCache& c,
                               const SpectralData& data, const AgeDensity& phi);

/// Residual certifying (mu, psi0) as an eigenpair of the renewal structure:
/// the larger of ||Q_mu psi0 - psi0|| / ||psi0|| and the boundary residual of
/// the transported profile psi(a_j) = Pi_mu(a_j, 0) psi0. Zero of both exactly
/// characterizes eigenvalues of the population generator.
double verify_eigenpair(const Scenario& s, const PropagatorCache& c, double mu,
                        const Vector& psi0);

/// Sign of the asymptotic behavior, decided by the basic reproduction radius.
enum class Stability { stable_exponential, stable_neutral, unstable };

const char* to_string(Stability tag);

struct TrichotomyVerdict {
  Stability verdict = Stability::stable_neutral;
  double r_of_Q0 = 0.0;
  /// Growth rate when it exists on the search range (always 0 for the
  /// neutral band).
  std::optional<double> lambda0;
};

/// Classify: r(Q_0) < 1 - band_tol decays exponentially, |r(Q_0) - 1| <=
/// band_tol is neutral, r(Q_0) > 1 + band_tol grows.
TrichotomyVerdict classify_stability(const Scenario& s, const PropagatorCache& c,
                                     double band_tol = 1e-8);

/// Rescaled-gap history R(t) = ||e^{-lambda0 t} S(t) phi - P phi|| and the
/// exponential fit R(t) ~ amplitude * e^{-epsilon t} over the trailing window.
struct AegReport {
  double lambda0 = 0.0;
  std::vector<double> times;
  std::vector<double> residuals;
  double epsilon = 0.0;    ///< fitted decay rate (+inf when at the floor)
  double amplitude = 0.0;  ///< fitted prefactor
  bool converged_early = false;  ///< some residual hit the roundoff floor
  bool passed = false;     ///< epsilon > 0, or converged early
};

/// Evolve phi to time T, recording R(t) every `stride` steps, and fit the
/// decay rate over [T - window, T] (window defaults to T/2). Residuals at or
/// below the floor 1e-13 (1 + ||P phi||) mark early convergence and are
/// excluded from the fit; with fewer than two points left the fit reports
/// epsilon = +inf.
AegReport aeg_report(const Scenario& s, const PropagatorCache& c,
                     const SpectralData& data, const AgeDensity& phi, double T,
                     int stride = 1, std::optional<double> window = {});

/// Growth rate of the dynamics restricted to the complement of the growth
/// mode: deflated power iteration on the one-step map, geometric mean of the
/// per-step norms over the trailing `tail` iterations, divided by delta.
/// Strictly below lambda0 exactly when the rescaled semigroup gap decays.
double subdominant_growth(const Scenario& s, const PropagatorCache& c,
                          const SpectralData& data, int iterations = 4000,
                          int tail = 800, unsigned seed = 1234);

/// Spectral projection transported through the nonlinearity: P applied to
/// phi + sum_{k<K} delta e^{-lambda0 t_k} F(u(t_k)), where u follows the
/// semilinear flow and F(u) = -rate(u) u. Requires lambda0 > 0 so the
/// discounted tail decays; tail_estimate bounds the truncation by
/// e^{-lambda0 T} ||F(u(T))|| / lambda0.
struct NonlinearProjection {
  AgeDensity value;
  double tail_estimate = 0.0;
  double T_trunc = 0.0;
};

NonlinearProjection nonlinear_projection(const Scenario& s,
                                         const PropagatorCache& c,
                                         const SpectralData& data,
                                         const NonlinearMortality& mort,
                                         const AgeDensity& phi, double T_trunc);

}  // namespace agediff
