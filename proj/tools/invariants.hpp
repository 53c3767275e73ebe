#pragma once

#include <string>
#include <vector>

namespace w2w::suite {

// One named check: pass when value <= tol.  value is the worst normalized
// defect over the cases tried.
struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0;
  double tol = 0;
  int cases = 0;
  std::string detail;
};

// Random no-slip flows, M = 4, enstrophy log-uniform in [1, 100]:
// primal/dual gap, both against the direct solve, and the symmetrized
// identities (orthogonality, Nu - 1 split, theta = eta + xi).
std::vector<CheckResult> duality_checks(unsigned long seed, int flows, int M = 4, int N_z = 33);

// advection_term against k0_term + sum Q_k on random pairs and on both designs.
std::vector<CheckResult> mode_decomposition_checks(unsigned long seed, int pairs);

// Q_k = 0, J independent of x, avg(w xi) = 1 on roll designs.
std::vector<CheckResult> roll_exactness_checks();

// Support of the branching advection field, disjoint sum / difference sets,
// sum chi_j^2 = 1 on the bulk.
std::vector<CheckResult> branching_support_checks(const std::vector<double>& epsilons);

// mean_x(w theta) grows at most linearly away from the walls (constant 4).
CheckResult lingrowth_check(unsigned long seed, int pairs);

// ||G_k||_{L1(A x A)} against the constant-2 bound on random (k, A).
CheckResult kernel_l1_check(unsigned long seed, int count);

// E_total - howard - sum Q_k = 0 and howard >= the lower-bound constant on designed pairs.
std::vector<CheckResult> howard_checks();

// Iterative Nu against a dense LU of the full discretized operator.
CheckResult dense_oracle_check(unsigned long seed, int flows, int M = 4, int N_z = 17);

// energy and symmetrization bounds dominate Nu on random flows.
std::vector<CheckResult> bound_ordering_checks(unsigned long seed, int flows);

// total_E = advection + eps product and Nu(rescaled flow) >= 1 + 1/E.
std::vector<CheckResult> efficiency_checks();

// Everything above with `samples` random cases per randomized check.
std::vector<CheckResult> full_suite(unsigned long seed, int samples);

// "name PASS|FAIL value tol cases detail", floats with 17 significant digits.
std::string format_result(const CheckResult& r);

}  // namespace w2w::suite
