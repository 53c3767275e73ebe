#pragma once

#include <vector>

#include "w2w/fields.hpp"

namespace w2w {

// Dirichlet inverse Laplacian, mode by mode.
SpectralField inverse_laplacian(const SpectralField& f);

// u . grad f with dealiased products, truncated to |m| <= M.
SpectralField advect(const VelocityField& u, const SpectralField& f);

// Horizontal average of w*xi at the nodes, computed from the coefficients.
Eigen::VectorXd mean_flux_profile(const VelocityField& u, const SpectralField& xi);

// avg |mean_x(w xi) - avg(w xi)|^2
double flux_deficit(const VelocityField& u, const SpectralField& xi);

// avg |grad Delta^{-1} div(u xi)|^2.  The k = 0 part is integrated exactly
// (it reduces to the flux deficit); k != 0 parts use the Helmholtz solve and
// the gradient quadrature.
double advection_term(const VelocityField& u, const SpectralField& xi);

struct ModeTerm {
  int m;       // mode index, m >= 1
  double k;    // wavenumber 2 pi m / l_x
  double q;    // Q_k + Q_{-k}
};

struct KernelDecomposition {
  double k0_term = 0;
  std::vector<ModeTerm> q_terms;  // every m = 1..M, ascending
  double total = 0;
};

KernelDecomposition mode_decomposition(const VelocityField& u, const SpectralField& xi);

// Green's function of -d^2/dz^2 + k^2 on [0,1] with Dirichlet ends.
double green_kernel(double k, double z, double zp);

// int int G_k(z,z') f(z) conj(f(z')) for the interpolant of a nodal profile,
// by nested Gauss quadrature split at the kink.  Cross-check path only.
double kernel_quadratic_form(const DomainSpec& d, double k, const Eigen::VectorXcd& f);

// int G_k(z,z') f(z') dz' at each node (same quadrature as above).
Eigen::VectorXcd kernel_apply(const DomainSpec& d, double k, const Eigen::VectorXcd& f);

struct Interval {
  double a, b;
};

struct L1Bound {
  double lhs, rhs;
};

// ||G_k||_{L1(AxA)} against 2|A|/|k| min(|A|, 1/|k|), or 2|A| int_A z(1-z) for k = 0.
L1Bound kernel_l1_bound_check(double k, const std::vector<Interval>& A);

}  // namespace w2w
