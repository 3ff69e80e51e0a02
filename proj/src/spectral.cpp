#include "agediff/spectral.hpp"

#include "agediff/renewal.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace agediff {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_density(const Scenario& s, const AgeDensity& u, const char* what) {
  if (u.nodes() != s.age.n_age + 1) {
    std::ostringstream os;
    os << what << ": density not on the age grid";
    throw Error(os.str());
  }
}

double density_gap(const Scenario& s, const AgeDensity& a, const AgeDensity& b,
                   double scale_a = 1.0) {
  double acc = 0.0;
  for (int j = 1; j <= s.age.n_age; ++j)
    acc += s.weights[j] * s.state_norm(scale_a * a.v[j] - b.v[j]);
  return acc;
}

Vector rate_or_throw(const Scenario& s, const NonlinearMortality& mort,
                     const AgeDensity& u, double t) {
  if (!mort.rate) throw Error("nonlinear projection: mortality rate is not set");
  Vector r = mort.rate(u, t);
  if (r.size() != s.dim() || !r.allFinite() || r.minCoeff() < 0.0)
    throw Error("nonlinear projection: mortality rate must be finite and nonnegative");
  return r;
}

}  // namespace

Matrix assemble_Q(const Scenario& s, const PropagatorCache& c, double lambda) {
  const int m = s.dim();
  Matrix Q = Matrix::Zero(m, m);
  for (int j = 1; j <= s.age.n_age; ++j) {
    const double f = s.weights[j] * std::exp(-lambda * s.age.node(j));
    if (!std::isfinite(f)) return Matrix::Constant(m, m, kInf);
    Q.noalias() += f * (s.b_node[j] * c.from_zero[j]);
  }
  return Q;
}

PerronPair perron_pair(const Scenario& s, const Matrix& Q, double tol,
                       int max_iter) {
  const int m = s.dim();
  if (Q.rows() != m || Q.cols() != m)
    throw Error("perron_pair: matrix does not match the scenario dimension");
  PerronPair out;
  if (!Q.allFinite()) {
    out.radius = kInf;
    return out;
  }
  Vector x = Vector::Constant(m, 1.0);
  x /= s.state_norm(x);
  double est = -1.0;
  for (int it = 1; it <= max_iter; ++it) {
    Vector y = Q * x;
    const double ny = s.state_norm(y);
    if (!std::isfinite(ny)) {
      out.radius = kInf;
      return out;
    }
    if (ny == 0.0) {
      out.radius = 0.0;
      out.vec = x;
      out.iterations = it;
      return out;
    }
    y /= ny;
    if (std::abs(ny - est) <= tol * (1.0 + ny) && s.state_norm(y - x) <= tol) {
      out.radius = ny;
      out.vec = y;
      out.iterations = it;
      return out;
    }
    est = ny;
    x = std::move(y);
  }
  std::ostringstream os;
  os << "perron_pair: power iteration did not converge within " << max_iter
     << " iterations (last radius estimate " << est << ")";
  throw Error(os.str());
}

double spectral_radius(const Scenario& s, const Matrix& Q, double tol,
                       int max_iter) {
  return perron_pair(s, Q, tol, max_iter).radius;
}

Vector dual_eigenfunctional(const Scenario& s, const Matrix& Q,
                            const Vector& zeta, double tol, int max_iter) {
  PerronPair dual = perron_pair(s, Matrix(Q.transpose()), tol, max_iter);
  const double overlap = s.pairing(dual.vec, zeta);
  if (!std::isfinite(overlap) || overlap <= 0.0)
    throw Error("dual_eigenfunctional: dual and primal Perron vectors do not "
                "overlap; the birth structure is reducible");
  return dual.vec / overlap;
}

double find_lambda0(const Scenario& s, const PropagatorCache& c,
                    double root_tol) {
  if (!(root_tol > 0.0)) throw Error("find_lambda0: root_tol must be positive");
  auto radius_at = [&](double lam) {
    return perron_pair(s, assemble_Q(s, c, lam)).radius;
  };
  const double r0 = radius_at(0.0);
  if (std::abs(r0 - 1.0) <= root_tol) return 0.0;

  double lo = 0.0, hi = 0.0;
  double step = 1.0;
  if (r0 > 1.0) {
    // radius decreases in lambda: march right until it drops below 1
    lo = 0.0;
    hi = step;
    int tries = 0;
    while (!(radius_at(hi) < 1.0)) {
      lo = hi;
      step *= 2.0;
      hi = lo + step;
      if (++tries > 60)
        throw Error("find_lambda0: offspring radius never drops below 1; no "
                    "finite growth rate on the search range");
    }
  } else {
    hi = 0.0;
    lo = -step;
    int tries = 0;
    while (radius_at(lo) < 1.0) {
      hi = lo;
      step *= 2.0;
      lo = hi - step;
      if (++tries > 60)
        throw Error("find_lambda0: offspring radius never exceeds 1; no "
                    "finite growth rate on the search range");
    }
  }

  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double r = radius_at(mid);
    if (std::isfinite(r) && std::abs(r - 1.0) <= root_tol) return mid;
    if (!(r < 1.0))
      lo = mid;
    else
      hi = mid;
  }
  throw Error("find_lambda0: bisection stalled before reaching the root "
              "tolerance; the offspring radius may be discontinuous");
}

SpectralData compute_spectral_data(const Scenario& s, const PropagatorCache& c,
                                   double root_tol) {
  SpectralData d;
  d.omega_hat = s.omega_hat;
  d.r_of_Q0 = spectral_radius(s, assemble_Q(s, c, 0.0));
  d.lambda0 = find_lambda0(s, c, root_tol);

  const Matrix Q = assemble_Q(s, c, d.lambda0);
  const PerronPair p = perron_pair(s, Q);
  d.zeta = p.vec;
  d.zeta_dual = dual_eigenfunctional(s, Q, d.zeta);

  Vector acc = Vector::Zero(s.dim());
  for (int j = 1; j <= s.age.n_age; ++j) {
    const double a = s.age.node(j);
    acc.noalias() += s.weights[j] * a * std::exp(-d.lambda0 * a) *
                     (s.b_node[j] * (c.from_zero[j] * d.zeta));
  }
  d.denom = s.pairing(d.zeta_dual, acc);
  if (!std::isfinite(d.denom) || d.denom <= 0.0) {
    std::ostringstream os;
    os << "spectral data: projection denominator " << d.denom
       << " is not positive; the growth mode is degenerate";
    throw Error(os.str());
  }
  return d;
}

Vector apply_H(const Scenario& s, const PropagatorCache& c, double lambda,
               const AgeDensity& phi) {
  check_density(s, phi, "apply_H");
  const MildSolution part =
      mild_solve(s, c, lambda, Vector::Zero(s.dim()), phi);
  return birth_functional(s, part.v);
}

AgeDensity resolvent(const Scenario& s, const PropagatorCache& c, double lambda,
                     const AgeDensity& phi) {
  check_density(s, phi, "resolvent");
  const int m = s.dim();
  const Matrix Q = assemble_Q(s, c, lambda);
  const double r = spectral_radius(s, Q);
  if (std::abs(r - 1.0) < 1e-8) {
    std::ostringstream os;
    os << "resolvent refused at lambda = " << lambda
       << ": r(Q_lambda) = " << r
       << " makes I - Q_lambda numerically singular (lambda collides with an "
          "eigenvalue of the population generator)";
    throw Error(os.str());
  }

  MildSolution part = mild_solve(s, c, lambda, Vector::Zero(m), phi);
  const Vector rhs = birth_functional(s, part.v);
  const Matrix lhs = Matrix::Identity(m, m) - Q;
  const Vector psi0 = Eigen::PartialPivLU<Matrix>(lhs).solve(rhs);
  if (!psi0.allFinite() ||
      s.state_norm(lhs * psi0 - rhs) > 1e-8 * (1.0 + s.state_norm(rhs)))
    throw Error("resolvent: renewal system I - Q_lambda could not be solved "
                "reliably");

  // Boundary contribution via the cached prefix products: a route independent
  // of the marching used for the Duhamel part, so the domain checks are not
  // tautological.
  AgeDensity psi = std::move(part.v);
  psi.v[0] = psi0;
  for (int j = 1; j <= s.age.n_age; ++j)
    psi.v[j].noalias() +=
        std::exp(-lambda * s.age.node(j)) * (c.from_zero[j] * psi0);
  return psi;
}

DomainCheck check_generator_domain(const Scenario& s, const PropagatorCache& c,
                                   double lambda, const AgeDensity& phi,
                                   const AgeDensity& psi) {
  check_density(s, phi, "check_generator_domain");
  check_density(s, psi, "check_generator_domain");
  const MildSolution remarch = mild_solve(s, c, lambda, psi.v[0], phi);

  DomainCheck out;
  double norm_psi = density_norm(s, psi);
  out.mild_residual = density_gap(s, psi, remarch.v) / (1.0 + norm_psi);
  const Vector beta = birth_functional(s, psi);
  out.boundary_residual =
      s.state_norm(psi.v[0] - beta) / (1.0 + s.state_norm(psi.v[0]));
  return out;
}

AgeDensity eigen_profile(const Scenario& s, const PropagatorCache& c,
                         const SpectralData& data) {
  return mild_solve(s, c, data.lambda0, data.zeta, AgeDensity::zero(s)).v;
}

double projection_coefficient(const Scenario& s, const PropagatorCache& c,
                              const SpectralData& data, const AgeDensity& phi) {
  const Vector h = apply_H(s, c, data.lambda0, phi);
  return s.pairing(data.zeta_dual, h) / data.denom;
}

AgeDensity spectral_projection(const Scenario& s, const PropagatorCache& c,
                               const SpectralData& data, const AgeDensity& phi) {
  const double coeff = projection_coefficient(s, c, data, phi);
  AgeDensity out = eigen_profile(s, c, data);
  for (Vector& x : out.v) x *= coeff;
  return out;
}

double verify_eigenpair(const Scenario& s, const PropagatorCache& c, double mu,
                        const Vector& psi0) {
  if (psi0.size() != s.dim()) throw Error("verify_eigenpair: wrong dimension");
  const double norm0 = s.state_norm(psi0);
  if (!(norm0 > 0.0)) throw Error("verify_eigenpair: psi0 must be nonzero");
  const Matrix Q = assemble_Q(s, c, mu);
  const double fixed_point = s.state_norm(Q * psi0 - psi0) / norm0;

  // Transported profile must reproduce psi0 through the birth functional.
  const AgeDensity profile = mild_solve(s, c, mu, psi0, AgeDensity::zero(s)).v;
  const double boundary =
      s.state_norm(birth_functional(s, profile) - psi0) / norm0;
  return std::max(fixed_point, boundary);
}

const char* to_string(Stability tag) {
  switch (tag) {
    case Stability::stable_exponential: return "stable_exponential";
    case Stability::stable_neutral: return "stable_neutral";
    case Stability::unstable: return "unstable";
  }
  return "unknown";
}

TrichotomyVerdict classify_stability(const Scenario& s, const PropagatorCache& c,
                                     double band_tol) {
  if (!(band_tol >= 0.0)) throw Error("classify_stability: band_tol must be >= 0");
  TrichotomyVerdict v;
  v.r_of_Q0 = spectral_radius(s, assemble_Q(s, c, 0.0));
  if (std::abs(v.r_of_Q0 - 1.0) <= band_tol) {
    v.verdict = Stability::stable_neutral;
    v.lambda0 = 0.0;
    return v;
  }
  v.verdict = v.r_of_Q0 < 1.0 ? Stability::stable_exponential
                              : Stability::unstable;
  try {
    v.lambda0 = find_lambda0(s, c);
  } catch (const Error&) {
    v.lambda0.reset();  // verdict stands on r(Q_0) alone
  }
  return v;
}

AegReport aeg_report(const Scenario& s, const PropagatorCache& c,
                     const SpectralData& data, const AgeDensity& phi, double T,
                     int stride, std::optional<double> window) {
  check_density(s, phi, "aeg_report");
  if (stride < 1) throw Error("aeg_report: stride must be positive");
  const double delta = s.age.delta();
  const int steps = grid_steps(T, delta, "aeg_report: T");

  const AgeDensity proj = spectral_projection(s, c, data, phi);
  const double floor = 1e-13 * (1.0 + density_norm(s, proj));

  AegReport rep;
  rep.lambda0 = data.lambda0;
  auto record = [&](double t, const AgeDensity& u) {
    rep.times.push_back(t);
    rep.residuals.push_back(
        density_gap(s, u, proj, std::exp(-data.lambda0 * t)));
  };

  AgeDensity u = phi;
  record(0.0, u);
  for (int k = 1; k <= steps; ++k) {
    semigroup_step(s, c, u);
    if (k % stride == 0 || k == steps) record(k * delta, u);
  }

  const double win = window.value_or(T / 2.0);
  if (!(win > 0.0)) throw Error("aeg_report: window must be positive");
  const double t_from = T - win - 1e-9;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int used = 0;
  for (size_t i = 0; i < rep.times.size(); ++i) {
    if (rep.residuals[i] <= floor) rep.converged_early = true;
    if (rep.times[i] < t_from || rep.residuals[i] <= floor) continue;
    const double x = rep.times[i];
    const double y = std::log(rep.residuals[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++used;
  }
  if (used < 2) {
    rep.converged_early = true;
    rep.epsilon = kInf;
    rep.amplitude = 0.0;
    rep.passed = true;  // at the roundoff floor: decayed as fast as measurable
    return rep;
  }
  const double det = used * sxx - sx * sx;
  if (det <= 0.0) throw Error("aeg_report: degenerate fit window");
  const double slope = (used * sxy - sx * sy) / det;
  const double intercept = (sy * sxx - sx * sxy) / det;
  rep.epsilon = -slope;
  rep.amplitude = std::exp(intercept);
  rep.passed = rep.converged_early || rep.epsilon > 0.0;
  return rep;
}

double subdominant_growth(const Scenario& s, const PropagatorCache& c,
                          const SpectralData& data, int iterations, int tail,
                          unsigned seed) {
  if (tail < 1 || iterations <= tail)
    throw Error("subdominant_growth: need iterations > tail >= 1");
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  AgeDensity x = AgeDensity::zero(s);
  for (Vector& v : x.v)
    for (int i = 0; i < v.size(); ++i) v[i] = unif(gen);

  // Remove the growth mode, then keep deflating while iterating: the residual
  // direction grows like the largest remaining mode.
  AgeDensity px = spectral_projection(s, c, data, x);
  for (int j = 0; j <= s.age.n_age; ++j) x.v[j] -= px.v[j];
  double nn = density_norm(s, x);
  if (!(nn > 0.0))
    throw Error("subdominant_growth: start vector lies entirely in the growth mode");
  for (Vector& v : x.v) v /= nn;

  const double g = std::exp(data.lambda0 * s.age.delta());
  double logsum = 0.0;
  int counted = 0;
  for (int k = 1; k <= iterations; ++k) {
    px = spectral_projection(s, c, data, x);
    semigroup_step(s, c, x);
    for (int j = 0; j <= s.age.n_age; ++j) x.v[j] -= g * px.v[j];
    nn = density_norm(s, x);
    if (!std::isfinite(nn) || nn == 0.0)
      throw Error("subdominant_growth: deflated iterate vanished or overflowed");
    for (Vector& v : x.v) v /= nn;
    if (k > iterations - tail) {
      logsum += std::log(nn);
      ++counted;
    }
  }
  return (logsum / counted) / s.age.delta();
}

NonlinearProjection nonlinear_projection(const Scenario& s,
                                         const PropagatorCache& c,
                                         const SpectralData& data,
                                         const NonlinearMortality& mort,
                                         const AgeDensity& phi, double T_trunc) {
  check_density(s, phi, "nonlinear_projection");
  if (!(data.lambda0 > 0.0)) {
    std::ostringstream os;
    os << "nonlinear_projection requires a positive growth rate (lambda0 = "
       << data.lambda0 << "); the discounted forcing has no decaying tail";
    throw Error(os.str());
  }
  const double delta = s.age.delta();
  const int steps = grid_steps(T_trunc, delta, "nonlinear_projection: T_trunc");
  if (steps < 1) throw Error("nonlinear_projection: T_trunc must be positive");

  AgeDensity u = phi;
  AgeDensity acc = AgeDensity::zero(s);
  Vector r;
  for (int k = 0; k < steps; ++k) {
    r = rate_or_throw(s, mort, u, k * delta);
    const double discount = delta * std::exp(-data.lambda0 * k * delta);
    for (int j = 0; j <= s.age.n_age; ++j)
      acc.v[j].array() -= discount * r.array() * u.v[j].array();
    semigroup_step(s, c, u);
    const Eigen::ArrayXd damp = 1.0 / (1.0 + delta * r.array());
    for (int j = 0; j <= s.age.n_age; ++j) u.v[j].array() *= damp;
  }

  AgeDensity shifted = phi;
  for (int j = 0; j <= s.age.n_age; ++j) shifted.v[j] += acc.v[j];

  NonlinearProjection out;
  out.value = spectral_projection(s, c, data, shifted);
  out.T_trunc = steps * delta;
  r = rate_or_throw(s, mort, u, steps * delta);
  AgeDensity fnow = u;
  for (int j = 0; j <= s.age.n_age; ++j)
    fnow.v[j].array() *= r.array();
  out.tail_estimate = std::exp(-data.lambda0 * out.T_trunc) *
                      density_norm(s, fnow) / data.lambda0;
  return out;
}

}  // namespace agediff
