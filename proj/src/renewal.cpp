#include "agediff/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace agediff {

int grid_steps(double t, double delta, const char* what) {
  const double ratio = t / delta;
  const long long k = std::llround(ratio);
  if (k < 0 || std::abs(ratio - k) > 1e-9 * std::max(1.0, std::abs(ratio))) {
    std::ostringstream os;
    os << what << " = " << t << " is not a nonnegative multiple of delta = "
       << delta;
    throw Error(os.str());
  }
  return static_cast<int>(k);
}

BirthTrajectory solve_birth(const Scenario& s, const PropagatorCache& c,
                            const AgeDensity& phi, double T,
                            const TimeForcing& h) {
  const int n = s.age.n_age;
  const double delta = s.age.delta();
  if (phi.nodes() != n + 1)
    throw Error("solve_birth: initial density not on the age grid");
  const int steps = grid_steps(T, delta, "solve_birth: T");

  std::vector<Matrix> K(n + 1);
  for (int j = 1; j <= n; ++j) K[j] = s.b_node[j] * c.from_zero[j];

  // y[i] = Pi(a_{i+k}, a_i) phi(a_i): initial cohorts surviving at step k.
  std::vector<Vector> y(phi.v.begin(), phi.v.end());

  auto forcing = [&](int k) -> Vector {
    if (!h) return Vector::Zero(s.dim());
    Vector f = h(k * delta);
    if (f.size() != s.dim()) throw Error("solve_birth: forcing has wrong dimension");
    return f;
  };

  BirthTrajectory out;
  out.delta = delta;
  out.B.reserve(steps + 1);
  out.B.push_back(birth_functional(s, phi) + forcing(0));

  for (int k = 1; k <= steps; ++k) {
    const int last = n - k;  // cohort starting at a_i has reached a_{i+k}
    for (int i = 0; i <= last; ++i) y[i] = c.step[i + k - 1] * y[i];

    Vector acc = forcing(k);
    const int jmax = std::min(k - 1, n);
    for (int j = 1; j <= jmax; ++j)
      acc.noalias() += s.weights[j] * (K[j] * out.B[k - j]);
    for (int i = 0; i <= last; ++i)
      acc.noalias() += s.weights[i + k] * (s.b_node[i + k] * y[i]);
    out.B.push_back(std::move(acc));
  }
  return out;
}

double birth_consistency(const Scenario& s,
                         const std::vector<TrajectorySnapshot>& snapshots,
                         const BirthTrajectory& births) {
  if (births.B.empty()) throw Error("birth_consistency: empty birth trajectory");
  double worst = 0.0;
  for (const auto& snap : snapshots) {
    const int k = grid_steps(snap.t, births.delta, "birth_consistency: snapshot time");
    if (k >= static_cast<int>(births.B.size())) {
      std::ostringstream os;
      os << "birth_consistency: snapshot at t=" << snap.t
         << " lies beyond the birth trajectory";
      throw Error(os.str());
    }
    const Vector beta = birth_functional(s, snap.u);
    const double gap =
        s.state_norm(beta - births.B[k]) / (1.0 + s.state_norm(births.B[k]));
    worst = std::max(worst, gap);
  }
  return worst;
}

}  // namespace agediff
