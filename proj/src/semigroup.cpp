#include "agediff/semigroup.hpp"

#include "agediff/renewal.hpp"

#include <cmath>
#include <sstream>

namespace agediff {

namespace {

void check_density(const Scenario& s, const AgeDensity& u, const char* what) {
  if (u.nodes() != s.age.n_age + 1) {
    std::ostringstream os;
    os << what << ": density not on the age grid (" << u.nodes() << " nodes, expected "
       << s.age.n_age + 1 << ")";
    throw Error(os.str());
  }
  for (const Vector& x : u.v)
    if (x.size() != s.dim()) {
      std::ostringstream os;
      os << what << ": density has wrong state dimension";
      throw Error(os.str());
    }
}

TrajectorySnapshot make_snapshot(const Scenario& s, double t, const AgeDensity& u) {
  TrajectorySnapshot snap;
  snap.t = t;
  snap.u = u;
  snap.total_population = positive_mass(s, u);
  return snap;
}

Vector checked_rate(const Scenario& s, const NonlinearMortality& mort,
                    const AgeDensity& u, double t) {
  if (!mort.rate) throw Error("semilinear solve: mortality rate is not set");
  Vector r = mort.rate(u, t);
  if (r.size() != s.dim())
    throw Error("semilinear solve: mortality rate has wrong dimension");
  if (!r.allFinite() || r.minCoeff() < 0.0) {
    std::ostringstream os;
    os << "semilinear solve: mortality rate must be finite and nonnegative at t=" << t;
    throw Error(os.str());
  }
  return r;
}

}  // namespace

void semigroup_step(const Scenario& s, const PropagatorCache& c, AgeDensity& u) {
  // Descending order shifts in place: node j-1 is read before it is written.
  for (int j = s.age.n_age; j >= 1; --j) u.v[j] = c.step[j - 1] * u.v[j - 1];
  u.v[0] = birth_functional(s, u);
}

AgeDensity apply_semigroup(const Scenario& s, const PropagatorCache& c,
                           AgeDensity u, double t) {
  check_density(s, u, "apply_semigroup");
  const int steps = grid_steps(t, s.age.delta(), "apply_semigroup: t");
  for (int k = 0; k < steps; ++k) semigroup_step(s, c, u);
  return u;
}

std::vector<TrajectorySnapshot> evolve_trajectory(const Scenario& s,
                                                  const PropagatorCache& c,
                                                  const AgeDensity& phi,
                                                  double T, int stride) {
  check_density(s, phi, "evolve_trajectory");
  if (stride < 1) throw Error("evolve_trajectory: stride must be positive");
  const int steps = grid_steps(T, s.age.delta(), "evolve_trajectory: T");

  std::vector<TrajectorySnapshot> out;
  AgeDensity u = phi;
  out.push_back(make_snapshot(s, 0.0, u));
  for (int k = 1; k <= steps; ++k) {
    semigroup_step(s, c, u);
    if (k % stride == 0 || k == steps)
      out.push_back(make_snapshot(s, k * s.age.delta(), u));
  }
  return out;
}

AgeDensity apply_perturbed(const Scenario& s, const PropagatorCache& c,
                           const AgeOperator& Bop, AgeDensity u, double t) {
  check_density(s, u, "apply_perturbed");
  if (!Bop) throw Error("apply_perturbed: perturbation is not set");
  const int steps = grid_steps(t, s.age.delta(), "apply_perturbed: t");
  const double delta = s.age.delta();
  for (int k = 0; k < steps; ++k) {
    AgeDensity w = Bop(u);
    check_density(s, w, "apply_perturbed: perturbation output");
    for (int j = 0; j <= s.age.n_age; ++j) u.v[j] += delta * w.v[j];
    semigroup_step(s, c, u);
  }
  return u;
}

NonlinearMortality NonlinearMortality::constant(const Scenario& s, double value) {
  if (!(value >= 0.0) || !std::isfinite(value))
    throw Error("constant mortality rate must be finite and nonnegative");
  const int dim = s.dim();
  NonlinearMortality m;
  m.rate = [dim, value](const AgeDensity&, double) {
    return Vector(Vector::Constant(dim, value));
  };
  return m;
}

NonlinearMortality NonlinearMortality::logistic(const Scenario& s) {
  const int dim = s.dim();
  const Vector w = s.weights;
  const double cw = s.cell_weight();
  NonlinearMortality m;
  m.rate = [dim, w, cw](const AgeDensity& u, double) {
    double total = 0.0;
    for (int j = 1; j < u.nodes(); ++j) total += w[j] * cw * u.v[j].cwiseAbs().sum();
    return Vector(Vector::Constant(dim, total));
  };
  return m;
}

std::vector<TrajectorySnapshot> solve_semilinear(const Scenario& s,
                                                 const PropagatorCache& c,
                                                 const NonlinearMortality& mort,
                                                 const AgeDensity& phi, double T,
                                                 int stride) {
  check_density(s, phi, "solve_semilinear");
  if (stride < 1) throw Error("solve_semilinear: stride must be positive");
  const int steps = grid_steps(T, s.age.delta(), "solve_semilinear: T");
  const double delta = s.age.delta();

  std::vector<TrajectorySnapshot> out;
  AgeDensity u = phi;
  out.push_back(make_snapshot(s, 0.0, u));
  for (int k = 1; k <= steps; ++k) {
    const Vector r = checked_rate(s, mort, u, (k - 1) * delta);
    semigroup_step(s, c, u);
    const Eigen::ArrayXd damp = 1.0 / (1.0 + delta * r.array());
    for (int j = 0; j <= s.age.n_age; ++j) u.v[j].array() *= damp;
    if (k % stride == 0 || k == steps)
      out.push_back(make_snapshot(s, k * delta, u));
  }
  return out;
}

}  // namespace agediff
