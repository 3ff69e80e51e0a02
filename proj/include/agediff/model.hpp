#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace agediff {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Error type for invalid configurations, failed preconditions and refused
/// computations. The message names the offending quantity.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Uniform age grid on [0, a_max] with nodes a_j = j * delta.
struct AgeGrid {
  double a_max = 1.0;
  int n_age = 2;

  double delta() const { return a_max / n_age; }
  double node(int j) const { return j * delta(); }
  /// Midpoint of step j (between nodes j-1 and j), j in 1..n_age.
  double midpoint(int j) const { return (j - 0.5) * delta(); }
};

/// Uniform cell grid on [x_min, x_max]. For the matrix backend n_cells is the
/// dimension of the state space and the geometry is only used to place the
/// sample points for coefficient evaluation.
struct SpaceGrid {
  double x_min = 0.0;
  double x_max = 1.0;
  int n_cells = 1;

  double h() const { return (x_max - x_min) / n_cells; }
  double center(int i) const { return x_min + (i + 0.5) * h(); }
};

enum class Backend { matrix, diffusion1d };

/// Scalar coefficient field over (age, position).
using Field = std::function<double(double, double)>;

struct CoefficientFamily {
  Field d;        ///< diffusivity, diffusion1d backend only, must be > 0
  Field m_death;  ///< mortality rate, must be >= 0
  Field b_birth;  ///< birth rate, >= 0 and not identically zero on the grid
  double holder_rho = 1.0;  ///< age-regularity exponent, metadata only
};

/// Caller-supplied operator families for the matrix backend. When present
/// they override the diagonal families derived from CoefficientFamily.
struct MatrixFamily {
  std::function<Matrix(double)> A;  ///< generator at age a
  std::function<Matrix(double)> b;  ///< birth operator at age a, entrywise >= 0
};

struct ScenarioConfig {
  Backend backend = Backend::matrix;
  AgeGrid age;
  SpaceGrid space;
  CoefficientFamily coeffs;
  std::optional<MatrixFamily> matrices;
  bool infinite_age = false;
};

/// Validated scenario with coefficients frozen on the grid.
///
/// The age-quadrature weights satisfy w_0 = 0 (so birth sums depend only on
/// strictly positive ages and the renewal marching stays explicit), sum to
/// a_max exactly, and integrate linear functions with O(delta^2) error:
/// w_1 = 3 delta / 2, interior delta, w_n = delta / 2.
struct Scenario {
  Backend backend = Backend::matrix;
  AgeGrid age;
  SpaceGrid space;
  CoefficientFamily coeffs;
  std::optional<MatrixFamily> matrices;
  bool infinite_age = false;

  std::vector<Matrix> A_mid;   ///< generator at step midpoints, entry j-1 for step j
  std::vector<Matrix> b_node;  ///< birth operator at nodes 0..n_age
  Vector weights;              ///< age-quadrature weights w_j, j = 0..n_age
  double omega_hat = 0.0;      ///< L1 logarithmic-norm growth bound
  double b_norm = 0.0;         ///< max induced-L1 norm of the birth operator
  double tail_bound = 0.0;     ///< exp(omega_hat * a_max) when infinite_age

  int dim() const { return space.n_cells; }
  /// L1 cell weight: h for diffusion1d, 1 for the matrix backend.
  double cell_weight() const {
    return backend == Backend::diffusion1d ? space.h() : 1.0;
  }
  /// State-space norm: cell-weighted sum of absolute entries.
  double state_norm(const Vector& x) const {
    return cell_weight() * x.cwiseAbs().sum();
  }
  /// Duality pairing against the state space (L1 with L-infinity dual).
  double pairing(const Vector& dual, const Vector& x) const {
    return cell_weight() * dual.dot(x);
  }

  /// Assemble the generator at an arbitrary age (finite-volume Laplacian with
  /// harmonic-mean face diffusivities and zero-flux boundaries, minus the
  /// mortality multiplier; or the caller-supplied matrix family).
  Matrix generator(double a) const;
  /// Birth operator at an arbitrary age.
  Matrix birth(double a) const;
};

/// Validate a configuration and freeze coefficients on the grid. Throws Error
/// on: n_age < 2, n_cells < 1, non-positive a_max or cell width, non-finite or
/// sign-violating coefficient samples, birth rate identically zero on the
/// grid, or infinite_age without a negative growth bound.
Scenario build_scenario(const ScenarioConfig& cfg);

/// Upper bound for the one-step growth of the evolution family: the maximum
/// over sampled ages (nodes and step midpoints) of the L1 logarithmic norm
/// mu_1(A) = max_col(diagonal + off-diagonal absolute column sum).
double estimate_growth_bound(const Scenario& s);

/// Density on the age grid: one state vector per node, indices 0..n_age.
struct AgeDensity {
  std::vector<Vector> v;

  int nodes() const { return static_cast<int>(v.size()); }

  static AgeDensity zero(const Scenario& s);
  static AgeDensity constant(const Scenario& s, double value);
  /// Sample a field (age, position) -> value on the grid nodes.
  static AgeDensity sampled(const Scenario& s, const Field& f);
};

/// Age-integrated L1 norm: sum_j w_j ||u(a_j)|| with the scenario weights.
double density_norm(const Scenario& s, const AgeDensity& u);

/// Positive-part norm, used as total population for trajectory summaries.
double positive_mass(const Scenario& s, const AgeDensity& u);

/// Birth functional beta(u) = sum_j w_j b(a_j) u(a_j). Every boundary value,
/// renewal sum and Q/H quadrature in the library routes through this single
/// weight convention.
Vector birth_functional(const Scenario& s, const AgeDensity& u);

/// Snapshot of an evolving density.
struct TrajectorySnapshot {
  double t = 0.0;
  AgeDensity u;
  double total_population = 0.0;
};

}  // namespace agediff
