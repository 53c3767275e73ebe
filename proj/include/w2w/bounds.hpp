#pragma once

#include <string>
#include <utility>
#include <vector>

#include "w2w/fields.hpp"

namespace w2w {

// Piecewise-linear z-profile through (z_k, eta_k): z_0 = 0 < ... < z_K = 1,
// eta(0) = 1, eta(1) = 0.
struct Profile {
  std::vector<double> z, eta;
};

Profile eta_delta_profile(double delta);  // 1 - z/(2 delta) | 1/2 | (1 - z)/(2 delta)
double profile_gradient_sq(const Profile& p);  // int |eta'|^2

struct BoundCertificate {
  std::string kind;   // energy | symmetrization | howard
  double value = 0;
  Profile profile;    // eta used, empty when not applicable
  double delta = 0;   // NaN when not applicable
  double lambda = 0;  // M(eta) for the Pe-parameterized bound, NaN otherwise
};

// 1 + (avg w^2)^{1/2} / 2
double energy_bound(const VelocityField& u);
BoundCertificate energy_certificate(const VelocityField& u);

// avg |grad eta'|^2 + avg |grad Delta^{-1} div(u eta)|^2 for a piecewise-linear eta.
// div(u eta) = w eta' is integrated exactly across the jumps of eta'.
double symmetrization_value(const VelocityField& u, const Profile& eta);
BoundCertificate symmetrization_bound(const VelocityField& u, double delta);
// Minimum over delta on a log grid in [delta_min, 1/2].
BoundCertificate symmetrization_bound_min(const VelocityField& u, int n_delta = 40, double delta_min = 1e-3);

struct SpectralConstraint {
  double value;   // max over k of the top generalized eigenvalue
  double k_max;   // maximizing wavenumber
  std::vector<std::pair<double, double>> per_k;  // (k, lambda_max(k))
  // sup of lambda_max(k) beyond the scan: max|eta'|^2 k^2 / (k^2 + pi^2)^3 at the next k
  double tail_bound;
};

// sup over no-slip divergence-free u of avg |grad Delta^{-1} div(u eta)|^2 / avg |grad u|^2,
// scanned over k = 2 pi m / l_x, m = 1..modes.  psi is expanded in
// (1 - x^2)^2 P_i(x), x = 2z - 1, i < basis.
SpectralConstraint spectral_constraint_M(const Profile& eta, double l_x, int modes, int basis = 40);
// int |eta'|^2 + Pe^2 M(eta)
BoundCertificate symmetrization_bound_pe(const Profile& eta, double pe, double l_x, int modes, int basis = 40);

// M(eta_delta) on a log grid in [delta_min, 1/2], scanned to k >= 4/delta
// (basis 60 below delta = 0.03, 40 above).  Independent of Pe, so one table
// serves a whole sweep.
struct DeltaConstraint {
  double delta;
  SpectralConstraint M;
};
std::vector<DeltaConstraint> eta_delta_constraints(double l_x, int n_delta = 16, double delta_min = 5e-3,
                                                   int jobs = 1);
// min over the table of 1/(2 delta) + Pe^2 max(M, tail_bound): holds for every
// flow on the strip of period l_x with enstrophy norm Pe.
BoundCertificate apriori_bound(const std::vector<DeltaConstraint>& table, double pe);

// int |mean_x(w theta) - 1|^2 + eps avg|grad u|^2 avg|grad theta|^2, requires avg(w theta) = 1.
double howard_value(const VelocityField& u, const SpectralField& theta, double epsilon);
// Lower bound on howard_value over all admissible pairs:
// min(1/8, inf_{0 < delta <= 1/2} delta/4 + eps/(64 delta^2)).
BoundCertificate howard_lower_bound(double epsilon);

// max over interior nodes of |mean_x(w theta)| / (min(z, 1-z) sqrt(avg|d_z w|^2 avg|d_z theta|^2)),
// paired with the constant 4.
std::pair<double, double> check_lingrowth(const SpectralField& w, const SpectralField& theta);

// int int G_k(z,z') f(z) conj(f(z')) for f given on panels, exact across the
// panel ends.  Exposed for testing.
class PanelGreen {
 public:
  // Gauss nodes on every panel [a_p, b_p] (sorted, disjoint).
  PanelGreen(std::vector<std::pair<double, double>> panels, int order = 12);
  const std::vector<double>& nodes() const { return z_; }
  const std::vector<double>& weights() const { return w_; }
  // h(z_i) = int G_k(z_i, z') f(z') dz' with f given at the nodes
  Eigen::VectorXcd apply(double k, const Eigen::VectorXcd& f) const;
  double quadratic_form(double k, const Eigen::VectorXcd& f) const;

 private:
  std::vector<std::pair<double, double>> panels_;
  int q_;
  std::vector<double> z_, w_;
  std::vector<double> t_ref_, w_ref_;  // reference nodes on [0,1]
};

}  // namespace w2w
