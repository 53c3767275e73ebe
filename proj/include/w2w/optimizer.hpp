#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "w2w/designs.hpp"
#include "w2w/fields.hpp"

namespace w2w {

struct OptimizerFailure : std::runtime_error {
  OptimizerFailure(const std::string& what, std::vector<double> tr)
      : std::runtime_error(what), trace(std::move(tr)) {}
  std::vector<double> trace;  // objective per iteration
};

struct EfficiencyReport {
  double epsilon = 0;
  double advection = 0;    // avg |grad Delta^{-1} div(u xi)|^2
  double enstrophy_u = 0;  // avg |grad u|^2 (avg |u|^2 for the energy functional)
  double grad_xi = 0;      // avg |grad xi|^2
  double total_E = 0;      // advection + eps enstrophy_u grad_xi
  double analytic_bound = 0;  // lengthscale estimate, NaN when not a branching design
  double constraint_residual = 0;  // |avg(w xi) - 1|
  double pe = 0;           // eps^{-1/2}
  double nu_lower = 0;     // 1 + 1/total_E: Nu of the rescaled flow is at least this
};

// Integral-formulation efficiency.  Requires avg(w xi) = 1 within 1e-8.
// Branching parameters, when given, fill analytic_bound.
EfficiencyReport efficiency_enstrophy(const VelocityField& u, const SpectralField& xi, double epsilon,
                                      const BranchingParams* params = nullptr);
EfficiencyReport efficiency_energy(const VelocityField& u, const SpectralField& xi, double epsilon);

// Efficiency of a built design: advection term from the collocated pair,
// norms from the analytic cutoffs (design_norms_exact), which stay exact
// where collocation derivatives of the flat-to-all-orders cutoffs do not.
EfficiencyReport efficiency_branching(const BranchingDesign& des, double epsilon);
EfficiencyReport efficiency_roll(const Design& des, const RollParams& p, double epsilon, bool enstrophy = true);

// Flow of intensity Pe (enstrophy or energy norm) paired with the test
// function rescaled so that the efficiency is unchanged.
VelocityField rescale_to_pe(const VelocityField& u, double pe, bool enstrophy);

// l_bl + int (l')^2 + eps (1/l_bulk^2 + int 1/l^2 + 1/l_bl)^2 for the monotone
// interpolant of (z_k, l_k).
double analytic_branching_bound(const BranchingParams& p, double epsilon);

struct LengthscaleProfile {
  std::vector<double> grid;  // z nodes, z_bulk .. z_bl
  std::vector<double> ell;
  double l_bulk = 0, l_bl = 0;
  double objective = 0;
  double max_slope = 0;  // max |l'|
  int iterations = 0;
};

struct LengthscaleOptions {
  bool busse = false;      // drop the int (l')^2 term
  double max_slope = 10;   // |l'| bound
  int restarts = 10;
  unsigned long seed = 1;
  int max_iter = 200000;
  double tol = 1e-9;       // projected-gradient norm, relative
};

// Piecewise-linear l on a grid geometric in 1 - z.
LengthscaleProfile solve_1d_lengthscale(double epsilon, double z_bulk, double z_bl, int n_grid,
                                        const LengthscaleOptions& opt = {});

// Objective of the 1D problem for a given profile on the same grid.
double lengthscale_objective(const std::vector<double>& grid, const std::vector<double>& ell,
                             double epsilon, bool busse = false);

// Geometric grid on [z_bulk, z_bl] used by the solver.
std::vector<double> lengthscale_grid(double z_bulk, double z_bl, int n_grid);

// Least-squares c for c * (1 - z)^power and the relative L2 deviation.
std::pair<double, double> power_law_fit(const std::vector<double>& grid, const std::vector<double>& ell,
                                        double power);

struct ScalingFit {
  double exponent, prefactor, r_squared;
};

// log y = exponent log x + log prefactor.  Needs >= 2 samples spanning a decade.
ScalingFit fit_scaling(const std::vector<std::pair<double, double>>& samples);

}  // namespace w2w
