#pragma once

#include <vector>

#include "w2w/fields.hpp"

namespace w2w {

struct SolverOptions {
  double tol = 1e-10;
  int max_iter = 0;  // 0: 10 (2M+1) N_z
  int restart = 200;
};

// Krylov bookkeeping.  Residuals are measured in the H^{-1} norm
// ||r||_{A^{-1}} = ||grad A^{-1} r|| relative to the right-hand side.
struct SolveInfo {
  int iterations = 0;
  double residual = 0;
  std::vector<double> history;
};

// Skew-symmetric advection: B f = (u.grad f + div(u f))/2 at the interior
// nodes.  Exactly antisymmetric in the quadrature inner product on fields that
// vanish at the walls.
class Advector {
 public:
  explicit Advector(const VelocityField& u);
  SpectralField apply(const SpectralField& f) const;
  const VelocityField& velocity() const { return u_; }

 private:
  VelocityField u_;
  Eigen::MatrixXd ux_, w_;
};

// A = -Delta with Dirichlet walls, applied as an inverse
SpectralField inverse_minus_laplacian(const SpectralField& f);

// <f, A^{-1} f>
double dual_norm_sq(const SpectralField& f);

// u.grad theta = Delta theta + w, theta = 0 on the walls
SpectralField solve_steady_theta(const VelocityField& u, const SolverOptions& opt = {},
                                 SolveInfo* info = nullptr);
SpectralField solve_steady_theta(const VelocityField& u, double tol, SolveInfo* info = nullptr);

struct NuDirect {
  double nu;           // 1 + <w theta>
  double nu_gradient;  // <|grad T|^2>, T = theta + 1 - z
  double theta_min, theta_max;  // total temperature range at the nodes
  SpectralField theta;
  SolveInfo info;
};

NuDirect nu_direct_full(const VelocityField& u, const SolverOptions& opt = {});
double nu_direct(const VelocityField& u, double tol = 1e-10);

struct Symmetrized {
  SpectralField eta, xi;
  SolveInfo info;
};

// u.grad eta = Delta xi + w, u.grad xi = Delta eta
Symmetrized solve_symmetrized(const VelocityField& u, const SolverOptions& opt = {});
Symmetrized solve_symmetrized(const VelocityField& u, double tol);

// Variational principles.  eta must equal 1 at z = 0 and 0 at z = 1, xi must
// vanish on the walls.
double nu_primal(const VelocityField& u, const SpectralField& eta);
double nu_dual(const VelocityField& u, const SpectralField& xi);

struct OptResult {
  double value;
  SpectralField field;  // minimizing eta or maximizing xi
  SolveInfo info;
};

OptResult nu_primal_opt(const VelocityField& u, const SolverOptions& opt = {});
OptResult nu_dual_opt(const VelocityField& u, const SolverOptions& opt = {});

struct TransportReport {
  double nu_direct, nu_primal, nu_dual;
  double pe_energy, pe_enstrophy;
  double res_direct, res_primal, res_dual;
  double nu_identity_defect;  // |(1 + <w theta>) - <|grad T|^2>| / Nu
  bool max_principle_ok;      // 0 <= T <= 1 at the nodes, soft check
};

TransportReport transport_report(const VelocityField& u, const SolverOptions& opt = {});

}  // namespace w2w
