#include "agediff/evolution.hpp"

#include <cmath>
#include <sstream>

namespace agediff {

PropagatorCache build_propagators(const Scenario& s, Stepper stepper) {
  const int n = s.age.n_age;
  const int m = s.dim();
  const double delta = s.age.delta();

  PropagatorCache c;
  c.stepper = stepper;
  c.step.reserve(n);
  c.from_zero.reserve(n + 1);
  c.from_zero.push_back(Matrix::Identity(m, m));

  for (int j = 1; j <= n; ++j) {
    const Matrix& A = s.A_mid[j - 1];
    const Matrix half = (stepper == Stepper::implicit_euler)
                            ? Matrix(Matrix::Identity(m, m))
                            : Matrix(Matrix::Identity(m, m) + 0.5 * delta * A);
    const double theta = (stepper == Stepper::implicit_euler) ? 1.0 : 0.5;
    Matrix lhs = Matrix::Identity(m, m) - theta * delta * A;
    Eigen::PartialPivLU<Matrix> lu(lhs);
    // PartialPivLU does not signal singularity; check the reconstruction.
    Matrix P = lu.solve(half);
    const double scale = 1.0 + delta * A.cwiseAbs().maxCoeff();
    if (!P.allFinite() || (lhs * P - half).cwiseAbs().maxCoeff() > 1e-8 * scale) {
      std::ostringstream os;
      os << "singular step matrix at age step " << j
         << "; refine delta or check the generator";
      throw Error(os.str());
    }
    if (stepper == Stepper::implicit_euler) {
      const double min_entry = P.minCoeff();
      if (min_entry < -1e-10 * (1.0 + P.cwiseAbs().maxCoeff())) {
        std::ostringstream os;
        os << "propagator lost entrywise nonnegativity at age step " << j
           << " (min entry " << min_entry
           << "); the generator must have nonnegative off-diagonal entries";
        throw Error(os.str());
      }
    }
    c.from_zero.push_back(P * c.from_zero.back());
    c.step.push_back(std::move(P));
  }
  return c;
}

Vector propagate(const Scenario& s, const PropagatorCache& c, int i, int j,
                 Vector x, double lambda) {
  if (i < 0 || j > s.age.n_age || i > j) {
    std::ostringstream os;
    os << "propagate requires 0 <= i <= j <= n_age, got i=" << i << ", j=" << j;
    throw Error(os.str());
  }
  for (int k = i + 1; k <= j; ++k) x = c.step[k - 1] * x;
  if (lambda != 0.0 && j > i) x *= std::exp(-lambda * (j - i) * s.age.delta());
  return x;
}

MildSolution mild_solve(const Scenario& s, const PropagatorCache& c,
                        double lambda, const Vector& x, const AgeDensity& phi) {
  const int n = s.age.n_age;
  const double delta = s.age.delta();
  if (x.size() != s.dim()) throw Error("mild_solve: initial value has wrong dimension");
  if (phi.nodes() != n + 1) throw Error("mild_solve: inhomogeneity not on the age grid");

  MildSolution out;
  out.lambda = lambda;
  out.v.v.resize(n + 1);
  out.v.v[0] = x;
  const double shift = std::exp(-lambda * delta);
  for (int j = 1; j <= n; ++j) {
    out.v.v[j].noalias() = c.step[j - 1] * (out.v.v[j - 1] + delta * phi.v[j - 1]);
    out.v.v[j] *= shift;
  }
  return out;
}

}  // namespace agediff
