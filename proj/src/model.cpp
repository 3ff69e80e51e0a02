#include "agediff/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace agediff {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(msg);
}

double checked_sample(const Field& f, const char* name, double a, double x) {
  if (!f) throw Error(std::string("coefficient '") + name + "' is not set");
  double v = f(a, x);
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "coefficient '" << name << "' is not finite at a=" << a << ", x=" << x;
    throw Error(os.str());
  }
  return v;
}

Matrix diffusion_generator(const Scenario& s, double a) {
  const int n = s.space.n_cells;
  const double h = s.space.h();
  Matrix A = Matrix::Zero(n, n);
  // Cell-centered diffusivities; interior faces use the harmonic mean so the
  // flux is continuous across discontinuities of d. Zero-flux boundaries make
  // every row sum to -m.
  std::vector<double> dc(n);
  for (int i = 0; i < n; ++i) {
    dc[i] = checked_sample(s.coeffs.d, "d", a, s.space.center(i));
    if (dc[i] <= 0.0) {
      std::ostringstream os;
      os << "diffusivity d must be positive, got " << dc[i] << " at a=" << a
         << ", x=" << s.space.center(i);
      throw Error(os.str());
    }
  }
  for (int f = 1; f < n; ++f) {
    const double dface = 2.0 * dc[f - 1] * dc[f] / (dc[f - 1] + dc[f]);
    const double c = dface / (h * h);
    A(f - 1, f - 1) -= c;
    A(f - 1, f) += c;
    A(f, f) -= c;
    A(f, f - 1) += c;
  }
  for (int i = 0; i < n; ++i) {
    const double m = checked_sample(s.coeffs.m_death, "m", a, s.space.center(i));
    if (m < 0.0) {
      std::ostringstream os;
      os << "mortality m must be nonnegative, got " << m << " at a=" << a
         << ", x=" << s.space.center(i);
      throw Error(os.str());
    }
    A(i, i) -= m;
  }
  return A;
}

Matrix matrix_generator(const Scenario& s, double a) {
  if (s.matrices) {
    Matrix A = s.matrices->A(a);
    require(A.rows() == s.dim() && A.cols() == s.dim(),
            "matrix family A(a) has wrong dimensions");
    require(A.allFinite(), "matrix family A(a) has non-finite entries");
    return A;
  }
  const int n = s.space.n_cells;
  Matrix A = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double m = checked_sample(s.coeffs.m_death, "m", a, s.space.center(i));
    if (m < 0.0) {
      std::ostringstream os;
      os << "mortality m must be nonnegative, got " << m << " at a=" << a;
      throw Error(os.str());
    }
    A(i, i) = -m;
  }
  return A;
}

double induced_l1_norm(const Matrix& B) {
  return B.cwiseAbs().colwise().sum().maxCoeff();
}

void check_age_range(const Scenario& s, double a) {
  if (a < -1e-12 * s.age.a_max || a > s.age.a_max * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "age " << a << " is outside [0, " << s.age.a_max << "]";
    throw Error(os.str());
  }
}

}  // namespace

Matrix Scenario::generator(double a) const {
  check_age_range(*this, a);
  return backend == Backend::diffusion1d ? diffusion_generator(*this, a)
                                         : matrix_generator(*this, a);
}

Matrix Scenario::birth(double a) const {
  check_age_range(*this, a);
  const int n = dim();
  if (backend == Backend::matrix && matrices) {
    Matrix b = matrices->b(a);
    if (b.rows() != n || b.cols() != n)
      throw Error("matrix family b(a) has wrong dimensions");
    if (!b.allFinite()) throw Error("matrix family b(a) has non-finite entries");
    if ((b.array() < 0.0).any()) {
      std::ostringstream os;
      os << "birth operator has negative entries at a=" << a;
      throw Error(os.str());
    }
    return b;
  }
  Matrix b = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double v = checked_sample(coeffs.b_birth, "b", a, space.center(i));
    if (v < 0.0) {
      std::ostringstream os;
      os << "birth rate b must be nonnegative, got " << v << " at a=" << a
         << ", x=" << space.center(i);
      throw Error(os.str());
    }
    b(i, i) = v;
  }
  return b;
}

double estimate_growth_bound(const Scenario& s) {
  double bound = -std::numeric_limits<double>::infinity();
  for (int j = 0; j <= s.age.n_age; ++j) {
    const Matrix A = s.generator(s.age.node(j));
    double mu = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < A.cols(); ++c) {
      double col = A(c, c);
      for (int r = 0; r < A.rows(); ++r)
        if (r != c) col += std::abs(A(r, c));
      mu = std::max(mu, col);
    }
    bound = std::max(bound, mu);
    if (j >= 1) {
      const Matrix Am = s.generator(s.age.midpoint(j));
      for (int c = 0; c < Am.cols(); ++c) {
        double col = Am(c, c);
        for (int r = 0; r < Am.rows(); ++r)
          if (r != c) col += std::abs(Am(r, c));
        bound = std::max(bound, col);
      }
    }
  }
  return bound;
}

Scenario build_scenario(const ScenarioConfig& cfg) {
  require(cfg.age.n_age >= 2, "n_age must be at least 2");
  require(cfg.age.a_max > 0.0, "a_max must be positive");
  require(cfg.space.n_cells >= 1, "n_cells must be at least 1");
  if (cfg.backend == Backend::diffusion1d) {
    require(cfg.space.x_max > cfg.space.x_min, "x_max must exceed x_min");
    require(!cfg.matrices, "matrix families are only valid for the matrix backend");
    require(static_cast<bool>(cfg.coeffs.d), "diffusion1d backend requires d");
  }

  Scenario s;
  s.backend = cfg.backend;
  s.age = cfg.age;
  s.space = cfg.space;
  s.coeffs = cfg.coeffs;
  s.matrices = cfg.matrices;
  s.infinite_age = cfg.infinite_age;

  const int n = s.age.n_age;
  const double delta = s.age.delta();

  // Weight 0 at age 0 keeps every birth quadrature explicit; the endpoint
  // corrections keep the rule exact for constants and second order overall.
  s.weights = Vector::Zero(n + 1);
  for (int j = 1; j <= n; ++j) s.weights[j] = delta;
  s.weights[1] = 1.5 * delta;
  s.weights[n] = 0.5 * delta;

  s.A_mid.reserve(n);
  for (int j = 1; j <= n; ++j) s.A_mid.push_back(s.generator(s.age.midpoint(j)));
  s.b_node.reserve(n + 1);
  for (int j = 0; j <= n; ++j) s.b_node.push_back(s.birth(s.age.node(j)));

  double bmax = 0.0;
  bool b_all_zero = true;
  for (int j = 1; j <= n; ++j) {
    const double bn = induced_l1_norm(s.b_node[j]);
    bmax = std::max(bmax, bn);
    if (bn > 0.0) b_all_zero = false;
  }
  require(!b_all_zero,
          "birth rate is identically zero on the age grid; the renewal "
          "problem degenerates");
  s.b_norm = bmax;

  s.omega_hat = estimate_growth_bound(s);
  if (s.infinite_age) {
    if (!(s.omega_hat < 0.0)) {
      std::ostringstream os;
      os << "infinite_age requires a negative growth bound, got omega_hat="
         << s.omega_hat << "; truncation at a_max is not justified";
      throw Error(os.str());
    }
    s.tail_bound = std::exp(s.omega_hat * s.age.a_max);
  }
  return s;
}

AgeDensity AgeDensity::zero(const Scenario& s) {
  AgeDensity u;
  u.v.assign(s.age.n_age + 1, Vector::Zero(s.dim()));
  return u;
}

AgeDensity AgeDensity::constant(const Scenario& s, double value) {
  AgeDensity u;
  u.v.assign(s.age.n_age + 1, Vector::Constant(s.dim(), value));
  return u;
}

AgeDensity AgeDensity::sampled(const Scenario& s, const Field& f) {
  AgeDensity u = AgeDensity::zero(s);
  for (int j = 0; j <= s.age.n_age; ++j)
    for (int i = 0; i < s.dim(); ++i) {
      const double val = f(s.age.node(j), s.space.center(i));
      if (!std::isfinite(val)) throw Error("sampled density is not finite");
      u.v[j][i] = val;
    }
  return u;
}

double density_norm(const Scenario& s, const AgeDensity& u) {
  double acc = 0.0;
  for (int j = 1; j <= s.age.n_age; ++j) acc += s.weights[j] * s.state_norm(u.v[j]);
  return acc;
}

double positive_mass(const Scenario& s, const AgeDensity& u) {
  double acc = 0.0;
  for (int j = 1; j <= s.age.n_age; ++j)
    acc += s.weights[j] * s.cell_weight() * u.v[j].cwiseMax(0.0).sum();
  return acc;
}

Vector birth_functional(const Scenario& s, const AgeDensity& u) {
  Vector acc = Vector::Zero(s.dim());
  for (int j = 1; j <= s.age.n_age; ++j)
    acc.noalias() += s.weights[j] * (s.b_node[j] * u.v[j]);
  return acc;
}

}  // namespace agediff
