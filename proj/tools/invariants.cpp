#include "invariants.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "oracles.hpp"
#include "w2w/advection.hpp"
#include "w2w/bounds.hpp"
#include "w2w/designs.hpp"
#include "w2w/optimizer.hpp"
#include "w2w/transport.hpp"

namespace w2w::suite {

namespace {

CheckResult make(std::string name, double value, double tol, int cases, std::string detail = "") {
  return {std::move(name), value <= tol, value, tol, cases, std::move(detail)};
}

double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

// no-slip flow with enstrophy norm log-uniform in [1, 100]
VelocityField random_flow(const DomainSpec& d, std::mt19937_64& rng) {
  auto u = streamfunction_to_velocity(random_field(d, rng, d.M(), 6, 2));
  const double target = std::exp(uniform(rng, 0, std::log(100.0)));
  return u.scaled(target / enstrophy_norm(u));
}

double stretch_for(double delta) { return 0.5 * std::log(1 / delta) + 0.2; }

Design roll_design(const RollParams& p, int M, int N) { return build_roll(p, roll_cell(p, M, N, stretch_for(p.delta))); }

BranchingDesign branching_design(double eps, int N) {
  auto p = branching_params(eps, 2 * M_PI);
  return build_branching(p, branching_cell(p, N, branching_stretch(p)));
}

double q_sum(const KernelDecomposition& k) {
  double s = 0;
  for (auto& t : k.q_terms) s += t.q;
  return s;
}

}  // namespace

std::vector<CheckResult> duality_checks(unsigned long seed, int flows, int M, int N_z) {
  std::mt19937_64 rng(seed);
  double gap = 0, vs_direct = 0, ortho = 0, split = 0, theta = 0;
  for (int t = 0; t < flows; ++t) {
    auto d = build_domain(uniform(rng, 0.8, 3.0), M, N_z);
    auto u = random_flow(d, rng);
    auto dir = nu_direct_full(u);
    auto pr = nu_primal_opt(u);
    auto du = nu_dual_opt(u);
    gap = std::max(gap, std::abs(pr.value - du.value) / dir.nu);
    vs_direct = std::max({vs_direct, std::abs(pr.value - dir.nu) / dir.nu, std::abs(du.value - dir.nu) / dir.nu});
    auto s = solve_symmetrized(u);
    const double gee = grad_inner(s.eta, s.eta), gxx = grad_inner(s.xi, s.xi);
    ortho = std::max(ortho, std::abs(grad_inner(s.eta, s.xi)) / (gee + gxx));
    split = std::max(split, std::abs(1 + gee + gxx - dir.nu) / dir.nu);
    theta = std::max(theta, l2_norm(s.eta + s.xi - dir.theta) / l2_norm(dir.theta));
  }
  return {make("duality_gap", gap, 1e-6, flows, "|nu_primal - nu_dual| / Nu"),
          make("duality_vs_direct", vs_direct, 1e-5, flows, "max |nu_primal|dual - nu_direct| / Nu"),
          make("symmetrized_orthogonality", ortho, 1e-8, flows, "|avg grad eta . grad xi| / (|grad eta|^2 + |grad xi|^2)"),
          make("symmetrized_nu_split", split, 1e-8, flows, "|1 + |grad eta|^2 + |grad xi|^2 - Nu| / Nu"),
          make("symmetrized_theta_split", theta, 1e-8, flows, "|eta + xi - theta| / |theta|")};
}

std::vector<CheckResult> mode_decomposition_checks(unsigned long seed, int pairs) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  auto defect = [](const VelocityField& u, const SpectralField& xi) {
    const double a = advection_term(u, xi);
    return std::abs(mode_decomposition(u, xi).total - a) / a;
  };
  for (int t = 0; t < pairs; ++t) {
    auto d = build_domain(uniform(rng, 0.5, 4.0), 5, 28 + t % 8, t % 3 == 0 ? 1.0 : 0.0);
    auto u = streamfunction_to_velocity(random_field(d, rng, 5, 6, 2));
    auto xi = random_field(d, rng, 5, 7, 1);
    worst = std::max(worst, defect(u, xi));
  }
  double designs = 0;
  auto r = roll_design(roll_optimal_params(1e-4, 2 * M_PI), 8, 64);
  designs = std::max(designs, defect(r.u, r.xi));
  auto b = branching_design(1e-4, 96);
  designs = std::max(designs, defect(b.u, b.xi));
  return {make("mode_decomposition_random", worst, 1e-10, pairs, "|k0 + sum Q_k - advection| / advection"),
          make("mode_decomposition_designs", designs, 1e-10, 2, "roll and branching designs")};
}

std::vector<CheckResult> roll_exactness_checks() {
  const std::vector<RollParams> params{{0.1, 0.25}, {0.05, 0.5}, {0.3, 0.5}, roll_optimal_params(1e-4, 2 * M_PI),
                                       roll_optimal_params(1e-6, 2 * M_PI)};
  double q = 0, xdep = 0, flux = 0;
  for (auto& p : params) {
    auto des = roll_design(p, 16, 96);
    auto dec = mode_decomposition(des.u, des.xi);
    for (auto& t : dec.q_terms) q = std::max(q, std::abs(t.q) / dec.total);
    auto J = advect(des.u, des.xi);
    const int M = J.domain().M();
    const double mean = J.coeffs().row(M).cwiseAbs().maxCoeff();
    for (int m = 1; m <= M; ++m) xdep = std::max(xdep, J.coeffs().row(M + m).cwiseAbs().maxCoeff() / mean);
    flux = std::max(flux, std::abs(inner(des.u.u_z, des.xi) - 1));
  }
  const int n = static_cast<int>(params.size());
  return {make("roll_q_vanishes", q, 1e-12, n, "max |Q_k| / advection"),
          make("roll_flux_x_independent", xdep, 1e-12, n, "max |J_m|, m != 0, over max |J_0|"),
          make("roll_net_flux", flux, 1e-12, n, "|avg(w xi) - 1|")};
}

std::vector<CheckResult> branching_support_checks(const std::vector<double>& epsilons) {
  double leak = 0, overlap = 0, partition = 0;
  for (double eps : epsilons) {
    auto p = branching_params(eps, 2 * M_PI);
    auto d = branching_cell(p, 128, branching_stretch(p));
    auto des = build_branching(p, d);
    auto J = branching_advection_exact(des);
    auto sums = branching_sum_modes(p, d), diffs = branching_diff_modes(p, d);
    for (int s : sums) overlap += std::count(diffs.begin(), diffs.end(), s);
    const double scale = J.coeffs().cwiseAbs().maxCoeff();
    for (int m = 1; m <= d.M(); ++m) {
      if (std::count(sums.begin(), sums.end(), m) || std::count(diffs.begin(), diffs.end(), m)) continue;
      leak = std::max(leak, J.coeffs().row(d.M() + m).cwiseAbs().maxCoeff() / scale);
    }
    const double zn = p.z.back();
    for (int i = 0; i <= 4000; ++i) {
      const double z = (1 - zn) + (2 * zn - 1) * i / 4000.0;
      double s = 0;
      for (int j = 1; j <= p.n; ++j) s += std::pow(branching_chi(p, j, z), 2);
      partition = std::max(partition, std::abs(s - 1));
    }
  }
  const int n = static_cast<int>(epsilons.size());
  return {make("branching_spectral_support", leak, 1e-10, n, "max |J_m| off {0, sums, diffs} over max |J|"),
          make("branching_sum_diff_disjoint", overlap, 0, n, "shared sum / difference modes"),
          make("branching_partition", partition, 1e-10, n, "max |sum chi_j^2 - 1| on the bulk")};
}

CheckResult lingrowth_check(unsigned long seed, int pairs) {
  std::mt19937_64 rng(seed);
  auto d = build_domain(2 * M_PI, 4, 64);
  double worst = 0;
  for (int t = 0; t < pairs; ++t) {
    auto w = random_field(d, rng, 4, 8, 1);
    auto th = random_field(d, rng, 4, 8, 1);
    worst = std::max(worst, check_lingrowth(w, th).first);
  }
  return make("lingrowth_ratio", worst, 4.0, pairs, "max |mean_x(w theta)| / (min(z, 1-z) |w'| |theta'|)");
}

CheckResult kernel_l1_check(unsigned long seed, int count) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (int t = 0; t < count; ++t) {
    const double k = t % 10 == 0 ? 0.0 : std::exp(uniform(rng, std::log(0.1), std::log(1e3)));
    std::vector<Interval> A;
    const int pieces = 1 + t % 3;
    for (int i = 0; i < pieces; ++i) {
      double a = uniform(rng, 0, 1), b = uniform(rng, 0, 1);
      if (a > b) std::swap(a, b);
      A.push_back({a, b});
    }
    auto r = kernel_l1_bound_check(k, A);
    if (r.rhs > 0) worst = std::max(worst, r.lhs / r.rhs);
  }
  return make("kernel_l1_bound", worst, 1.0, count, "max ||G_k||_L1(AxA) / (constant-2 bound)");
}

std::vector<CheckResult> howard_checks() {
  struct Case {
    Design des;
    double eps;
  };
  std::vector<Case> cases;
  for (double eps : {1e-3, 1e-4}) cases.push_back({roll_design(roll_optimal_params(eps, 2 * M_PI), 16, 96), eps});
  cases.push_back({roll_design({0.2, 0.5}, 16, 64), 1e-3});
  auto b4 = branching_design(1e-4, 96);
  cases.push_back({b4, 1e-4});
  auto b5 = branching_design(1e-5, 160);
  for (double e : {1e-5, 1e-7}) cases.push_back({b5, e});
  double gap = 0, lower = 0;
  for (auto& c : cases) {
    const double h = howard_value(c.des.u, c.des.xi, c.eps);
    auto r = efficiency_enstrophy(c.des.u, c.des.xi, c.eps);
    const double q = q_sum(mode_decomposition(c.des.u, c.des.xi));
    gap = std::max(gap, std::abs(r.total_E - h - q) / r.total_E);
    lower = std::max(lower, howard_lower_bound(c.eps).value / h);
  }
  const int n = static_cast<int>(cases.size());
  return {make("howard_gap_identity", gap, 1e-10, n, "|E_total - howard - sum Q_k| / E_total"),
          make("howard_lower_bound", lower, 1.0, n, "max (3/16 eps^{1/3} or 1/8) / howard")};
}

CheckResult dense_oracle_check(unsigned long seed, int flows, int M, int N_z) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (int t = 0; t < flows; ++t) {
    auto d = build_domain(uniform(rng, 0.8, 3.0), M, N_z);
    auto u = random_flow(d, rng);
    const double dense = oracle::dense_nu(u);
    worst = std::max(worst, std::abs(nu_direct(u, 1e-12) - dense) / dense);
  }
  return make("dense_oracle", worst, 1e-8, flows, "|nu_direct - dense LU| / Nu");
}

std::vector<CheckResult> bound_ordering_checks(unsigned long seed, int flows) {
  std::mt19937_64 rng(seed);
  auto d = build_domain(2 * M_PI, 6, 48, 0.5);
  double en = -1, sym = -1;
  for (int t = 0; t < flows; ++t) {
    auto u = random_flow(d, rng);
    const double nu = nu_direct(u);
    en = std::max(en, (nu - energy_bound(u)) / nu);
    sym = std::max(sym, (nu - symmetrization_bound_min(u, 16).value) / nu);
  }
  return {make("energy_bound_order", en, 1e-8, flows, "max (Nu - energy bound) / Nu"),
          make("symmetrization_bound_order", sym, 1e-8, flows, "max (Nu - min-over-delta bound) / Nu")};
}

std::vector<CheckResult> efficiency_checks() {
  double ident = 0, recip = -1;
  auto check = [&](const EfficiencyReport& r, const VelocityField& u) {
    ident = std::max(ident, std::abs(r.total_E - r.advection - r.epsilon * r.enstrophy_u * r.grad_xi) / r.total_E);
    const double nu = nu_direct(u);
    recip = std::max(recip, (r.nu_lower - nu) / nu);
  };
  for (double eps : {1e-3, 1e-4}) {
    auto p = roll_optimal_params(eps, 2 * M_PI);
    auto des = roll_design(p, 32, 128);
    const double pe = 1 / std::sqrt(eps);
    check(efficiency_roll(des, p, eps, false), rescale_to_pe(des.u, pe, false));
    check(efficiency_enstrophy(des.u, des.xi, eps), rescale_to_pe(des.u, pe, true));
  }
  auto b = branching_design(1e-4, 96);
  check(efficiency_branching(b, 1e-4), rescale_to_pe(b.u, 100, true));
  return {make("efficiency_decomposition", ident, 1e-12, 5, "|E - advection - eps product| / E"),
          make("reciprocal_relation", recip, 1e-8, 5, "max (1 + 1/E - Nu) / Nu at Pe = eps^{-1/2}")};
}

std::vector<CheckResult> full_suite(unsigned long seed, int samples) {
  std::vector<CheckResult> out;
  auto add = [&](std::vector<CheckResult> v) { out.insert(out.end(), v.begin(), v.end()); };
  add(duality_checks(seed, samples));
  add(mode_decomposition_checks(seed + 1, samples));
  add(roll_exactness_checks());
  add(branching_support_checks({1e-4, 1e-5}));
  out.push_back(lingrowth_check(seed + 2, 4 * samples));
  out.push_back(kernel_l1_check(seed + 3, 4 * samples));
  add(howard_checks());
  out.push_back(dense_oracle_check(seed + 4, samples));
  add(bound_ordering_checks(seed + 5, samples));
  add(efficiency_checks());
  return out;
}

std::string format_result(const CheckResult& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-28s %s %.17g %.17g %d %s", r.name.c_str(), r.pass ? "PASS" : "FAIL", r.value,
                r.tol, r.cases, r.detail.c_str());
  return buf;
}

}  // namespace w2w::suite
