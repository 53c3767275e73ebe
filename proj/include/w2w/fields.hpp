#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace w2w {

using cplx = std::complex<double>;

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ResolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverFailure : std::runtime_error {
  SolverFailure(const std::string& what, std::vector<double> hist)
      : std::runtime_error(what), history(std::move(hist)) {}
  std::vector<double> history;
};

namespace detail {
struct DomainData;
}

/// Periodic strip T_x x [0,1].  Fourier modes |m| <= M in x, Legendre-Gauss-
/// Lobatto collocation in z (optionally pulled toward the walls by a tanh map).
/// Cheap to copy; the grid, quadrature, derivative matrices and Helmholtz
/// tables are shared and immutable.
class DomainSpec {
 public:
  DomainSpec() = default;

  double l_x() const;
  int M() const;
  int N_z() const;
  double stretch() const;
  int modes() const { return 2 * M() + 1; }
  int nx() const;  // physical x-points used for products

  const Eigen::VectorXd& z_grid() const;
  const Eigen::VectorXd& weights() const;  // sum to 1 (volume averages)
  const Eigen::MatrixXd& D() const;        // d/dz at the nodes
  const Eigen::MatrixXd& D2() const;

  double wavenumber(int m) const;  // 2*pi*m/l_x
  bool same_as(const DomainSpec& o) const;

  // Dirichlet solve of (d^2/dz^2 - k_m^2) g_m = f_m, every mode at once.
  // Rows of f are modes (m = -M..M), columns are nodes; boundary columns of f
  // are ignored and those of the result are zero.
  Eigen::MatrixXcd solve_helmholtz(const Eigen::MatrixXcd& f, int refine = 2) const;

  // Lagrange interpolation weights for evaluating a nodal profile at z.
  Eigen::VectorXd interpolation_row(double z) const;

  const detail::DomainData& data() const { return *d_; }

 private:
  friend DomainSpec build_domain(double, int, int, double);
  std::shared_ptr<const detail::DomainData> d_;
};

DomainSpec build_domain(double l_x, int M, int N_z, double stretch = 0.0);

class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(const DomainSpec& d);
  SpectralField(const DomainSpec& d, Eigen::MatrixXcd coeffs);

  // Sample f(x,z) on the physical grid and keep |m| <= M.
  static SpectralField from_function(const DomainSpec& d,
                                     const std::function<double(double, double)>& f);
  // x-independent profile given at the nodes.
  static SpectralField from_profile(const DomainSpec& d, const Eigen::VectorXd& prof);

  const DomainSpec& domain() const { return dom_; }
  const Eigen::MatrixXcd& coeffs() const { return c_; }
  Eigen::MatrixXcd& coeffs() { return c_; }

  cplx coeff(int m, int j) const { return c_(m + dom_.M(), j); }
  cplx& coeff(int m, int j) { return c_(m + dom_.M(), j); }

  double eval(double x, double z) const;
  Eigen::VectorXd mean_profile() const;  // horizontal average at the nodes

  double hermitian_defect() const;
  void symmetrize();
  void zero_walls();

  SpectralField& operator+=(const SpectralField& o);
  SpectralField& operator-=(const SpectralField& o);
  SpectralField& operator*=(double s);

 private:
  DomainSpec dom_;
  Eigen::MatrixXcd c_;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);
SpectralField operator-(SpectralField a);

SpectralField dx(const SpectralField& f);
SpectralField dz(const SpectralField& f);
SpectralField laplacian(const SpectralField& f);
SpectralField product(const SpectralField& f, const SpectralField& g);

// physical values, nx() rows by N_z columns
Eigen::MatrixXd to_physical(const SpectralField& f);
SpectralField from_physical(const DomainSpec& d, const Eigen::MatrixXd& p);

double integrate_profile(const DomainSpec& d, const Eigen::VectorXd& prof);
double inner(const SpectralField& f, const SpectralField& g);       // avg f g
double grad_inner(const SpectralField& f, const SpectralField& g);  // avg grad f . grad g
double l2_norm(const SpectralField& f);

struct VelocityField {
  SpectralField psi, u_x, u_z;
  const DomainSpec& domain() const { return psi.domain(); }
  SpectralField w() const { return u_z; }
  VelocityField scaled(double s) const;
};

VelocityField streamfunction_to_velocity(const SpectralField& psi);
double divergence_residual(const VelocityField& u);  // relative, discrete L2

double energy_norm(const VelocityField& u);
double enstrophy_norm(const VelocityField& u);

// Random band-limited test fields: (z(1-z))^p times a trigonometric polynomial
// in x (|m| <= m_max) with a random polynomial of the given degree in z.
// p = 2 gives a no-slip streamfunction, p = 1 a field vanishing at the walls.
SpectralField random_field(const DomainSpec& d, std::mt19937_64& rng, int m_max, int degree,
                           int wall_power);

std::string field_to_json(const SpectralField& f);
SpectralField field_from_json(const std::string& text);

}  // namespace w2w
