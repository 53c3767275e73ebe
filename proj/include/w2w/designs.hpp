#pragma once

#include <string>
#include <vector>

#include "w2w/fields.hpp"

namespace w2w {

// Transition cutoff: f(0) = 1, f(1) = 0, flat at both ends, f(t)^2 + f(1-t)^2 = 1.
double cutoff_f(double t);
// Boundary cutoff: g(0) = 1, g(1) = 0, flat at both ends, int_0^1 g^2 = 1.
double cutoff_g(double t);
double cutoff_g_gamma();  // coefficient of the sin^2 bump in g
double cutoff_f_prime(double t);
double cutoff_g_prime(double t);
double cutoff_f_second(double t);
double cutoff_g_second(double t);

inline constexpr double kPsiAmplitude = 1.4142135623730951;  // c0, mean of (Psi')^2 = 1

struct Design {
  VelocityField u;
  SpectralField xi;  // normalized so that avg(w xi) = 1
  std::vector<std::string> warnings;
};

// ---- convection rolls ----

struct RollParams {
  double delta;  // boundary-layer thickness, (0, 1/2]
  double l;      // roll width; 2 pi l divides the period
};

double roll_chi(double delta, double z);
double roll_chi_prime(double delta, double z);
double roll_chi_second(double delta, double z);

// delta = eps^{1/2}, l the admissible width nearest sqrt(delta) from below
// (more rolls).  Infeasible when delta > 1/2.
RollParams roll_optimal_params(double epsilon, double l_x);
RollParams roll_optimal_params(double epsilon, const DomainSpec& d);

// psi = chi(z) l^{1/2} c0 cos(x/l), xi = chi(z) l^{1/2} Psi'(x/l) rescaled.
Design build_roll(const RollParams& p, const DomainSpec& d);

// Domain holding exactly one roll period (l_x = 2 pi l).
DomainSpec roll_cell(const RollParams& p, int M, int N_z, double stretch = 0.0);

// ---- branching flows ----

struct BranchingParams {
  int n = 0;
  std::vector<double> z;  // z_1..z_n
  std::vector<double> l;  // l_1..l_n
  int k_bulk = 0;
  double c1 = 0;
  double epsilon = 0;
  double l_x = 0;  // period the design lives on
};

BranchingParams branching_params(double epsilon, double l_x);

// Names each violated relation; empty when the parameters are admissible.
std::vector<std::string> validate_branching(const BranchingParams& p);

// chi_j for j = 1..n, symmetric about z = 1/2
double branching_chi(const BranchingParams& p, int j, double z);
double branching_chi_prime(const BranchingParams& p, int j, double z);
double branching_chi_second(const BranchingParams& p, int j, double z);

// mode indices on domain d: of psi_j, and of the sum / difference
// interactions between neighbouring layers
std::vector<int> branching_modes(const BranchingParams& p, const DomainSpec& d);
std::vector<int> branching_sum_modes(const BranchingParams& p, const DomainSpec& d);
std::vector<int> branching_diff_modes(const BranchingParams& p, const DomainSpec& d);

struct BranchingDesign : Design {
  BranchingParams params;
  double xi_scale = 0;  // xi = xi_scale * w
};

BranchingDesign build_branching(const BranchingParams& p, const DomainSpec& d);
BranchingDesign build_branching(double epsilon, const DomainSpec& d);

// Smallest period cell (l_x / k_bulk).  M = 0 picks the resolution policy
// minimum, twice the largest sum mode.
// Wall stretch suited to the thinnest layer, 0.5 ln(1/(1 - z_n)).
double branching_stretch(const BranchingParams& p);

DomainSpec branching_cell(const BranchingParams& p, int N_z, double stretch = 0.0, int M = 0);

// u . grad xi at the nodes with the cutoff derivatives taken analytically
// (no z-differentiation matrix).  Band-limited in x, so the modes are exact.
SpectralField branching_advection_exact(const BranchingDesign& des);

// Volume averages of the designed pair computed from the analytic cutoffs
// (exact in x, composite Gauss in z split at every layer edge), with
// xi = w / avg(w^2) as built by build_roll / build_branching.
struct DesignNorms {
  double energy_u;     // avg |u|^2
  double enstrophy_u;  // avg |grad u|^2
  double w_sq;         // avg w^2
  double grad_xi;      // avg |grad xi|^2
};

DesignNorms roll_norms_exact(const RollParams& p);
DesignNorms branching_norms_exact(const BranchingParams& p);

std::string roll_params_to_json(const RollParams& p);
std::string branching_params_to_json(const BranchingParams& p);

}  // namespace w2w
