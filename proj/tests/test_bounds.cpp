#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "w2w/advection.hpp"
#include "w2w/bounds.hpp"
#include "w2w/designs.hpp"
#include "w2w/optimizer.hpp"
#include "w2w/transport.hpp"

using namespace w2w;

namespace {

VelocityField random_flow(const DomainSpec& d, std::mt19937_64& rng, double scale) {
  return streamfunction_to_velocity(random_field(d, rng, 3, 6, 2)).scaled(scale);
}

// pair (u, theta) with avg(w theta) = 1
SpectralField normalized(const VelocityField& u, const SpectralField& th) {
  return (1 / inner(u.u_z, th)) * th;
}

}  // namespace

TEST_CASE("PanelGreen integrates the Green's function exactly") {
  // int int G_k = int h, h = (1 - cosh(k(z - 1/2)) / cosh(k/2)) / k^2
  std::vector<std::pair<double, double>> uniform;
  for (int p = 0; p < 10; ++p) uniform.push_back({p / 10.0, (p + 1) / 10.0});
  PanelGreen pg(uniform);
  Eigen::VectorXcd one = Eigen::VectorXcd::Ones(pg.nodes().size());
  CHECK(pg.quadratic_form(0, one) == doctest::Approx(1.0 / 12).epsilon(1e-13));
  for (double k : {0.5, 3.0, 20.0}) {
    const double exact = 1 / (k * k) - 2 / (k * k * k) * std::tanh(k / 2);
    CHECK(pg.quadratic_form(k, one) == doctest::Approx(exact).epsilon(1e-11));
  }
  // large k needs panels of width ~ 1/k
  std::vector<std::pair<double, double>> fine;
  for (int p = 0; p < 400; ++p) fine.push_back({p / 400.0, (p + 1) / 400.0});
  PanelGreen pf(fine);
  Eigen::VectorXcd onef = Eigen::VectorXcd::Ones(pf.nodes().size());
  const double k = 500;
  CHECK(pf.quadratic_form(k, onef) == doctest::Approx(1 / (k * k) - 2 / (k * k * k) * std::tanh(k / 2)).epsilon(1e-10));

  // indicator of a disconnected set against the closed-form L1 norm of G
  std::vector<std::pair<double, double>> gap;
  for (int p = 0; p < 6; ++p) gap.push_back({0.05 * p, 0.05 * (p + 1)});
  for (int p = 0; p < 8; ++p) gap.push_back({0.6 + 0.05 * p, 0.6 + 0.05 * (p + 1)});
  PanelGreen pgap(gap);
  Eigen::VectorXcd ind = Eigen::VectorXcd::Ones(pgap.nodes().size());
  for (double kk : {0.0, 2.0, 40.0}) {
    auto l1 = kernel_l1_bound_check(kk, {{0, 0.3}, {0.6, 1.0}});
    CHECK(pgap.quadratic_form(kk, ind) == doctest::Approx(l1.lhs).epsilon(1e-9));
  }
  CHECK_THROWS_AS(PanelGreen({{0.2, 0.5}, {0.4, 0.6}}), InvalidArgument);
}

TEST_CASE("eta_delta profiles") {
  for (double d : {0.01, 0.1, 0.3, 0.5}) CHECK(profile_gradient_sq(eta_delta_profile(d)) == doctest::Approx(1 / (2 * d)));
  CHECK_THROWS_AS(eta_delta_profile(0.6), InvalidArgument);
  CHECK_THROWS_AS(eta_delta_profile(0.0), InvalidArgument);
  // a jump (repeated knot) is not in H1
  CHECK_THROWS_AS(profile_gradient_sq({{0, 0.5, 0.5, 1}, {1, 1, 0, 0}}), InvalidArgument);
  CHECK_THROWS_AS(profile_gradient_sq({{0, 1}, {1, 0.2}}), InvalidArgument);
}

TEST_CASE("energy bound") {
  auto d = build_domain(2 * M_PI, 8, 32, 0.0);
  VelocityField zero = streamfunction_to_velocity(SpectralField(d));
  CHECK(energy_bound(zero) == 1.0);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 4; ++t) {
    auto u = random_flow(d, rng, 5.0 * (t + 1));
    CHECK(energy_bound(u) >= nu_direct(u) * (1 - 1e-8));
  }
  // roll at Pe = 100 in the energy norm
  RollParams p{0.25, 0.5};
  auto des = build_roll(p, roll_cell(p, 12, 48, 0.5));
  auto u = rescale_to_pe(des.u, 100, false);
  const double b = energy_bound(u), nu = nu_direct(u);
  CHECK(b <= 51 + 1e-9);
  CHECK(b >= nu);
  auto c = energy_certificate(u);
  CHECK(c.kind == "energy");
  CHECK(c.value == b);
}

TEST_CASE("symmetrization bound") {
  auto d = build_domain(2 * M_PI, 8, 48, 0.5);
  VelocityField zero = streamfunction_to_velocity(SpectralField(d));
  for (double delta : {0.02, 0.1, 0.5}) CHECK(symmetrization_bound(zero, delta).value == doctest::Approx(1 / (2 * delta)));
  auto zmin = symmetrization_bound_min(zero);
  CHECK(zmin.delta == 0.5);
  CHECK(zmin.value == doctest::Approx(1.0));

  std::mt19937_64 rng(11);
  for (int t = 0; t < 3; ++t) {
    auto u = random_flow(d, rng, 10.0 * (t + 1));
    // delta = 1/2: eta = 1 - z, div(u eta) = -w
    const double half = symmetrization_bound(u, 0.5).value;
    CHECK(half == doctest::Approx(1 + dual_norm_sq(u.u_z)).epsilon(1e-9));
    const double nu = nu_direct(u);
    for (double delta : {0.03, 0.15, 0.4}) {
      auto c = symmetrization_bound(u, delta);
      CHECK(c.kind == "symmetrization");
      CHECK(c.delta == delta);
      CHECK(c.value >= nu - 1e-6 * nu);
    }
    auto m = symmetrization_bound_min(u, 24);
    CHECK(m.value >= nu - 1e-6 * nu);
    CHECK(m.value <= half);
    CHECK(energy_bound(u) >= nu - 1e-6 * nu);
  }
}

TEST_CASE("bound sandwich for a designed roll") {
  RollParams p{0.2, 0.5};
  auto des = build_roll(p, roll_cell(p, 16, 64, 0.5));
  auto u = des.u.scaled(30);
  auto xi = (1 / 30.0) * des.xi;
  const double nu = nu_direct(u);
  CHECK(nu_dual(u, xi) <= nu * (1 + 1e-8));
  CHECK(nu <= std::min(energy_bound(u), symmetrization_bound_min(u, 24).value) * (1 + 1e-8));
}

TEST_CASE("branching flow at Pe = 1e3: min-over-delta bound within C Pe^{2/3}") {
  // min_delta 1/(2 delta) + 4 delta^2 Pe^2 = (3/4) 16^{1/3} Pe^{2/3}
  const double C = 0.75 * std::cbrt(16.0);
  auto bp = branching_params(1e-4, 2 * M_PI);
  auto des = build_branching(bp, branching_cell(bp, 96, branching_stretch(bp)));
  const double pe = 1e3;
  auto u = rescale_to_pe(des.u, pe, true);
  auto c = symmetrization_bound_min(u, 40);
  const double nu = nu_direct(u);
  CHECK(c.value >= nu - 1e-6 * nu);
  CHECK(c.value <= C * std::pow(pe, 2.0 / 3) * 1.02);
}

TEST_CASE("spectral constraint M(eta)") {
  const double lx = 2 * M_PI;
  auto lin = spectral_constraint_M(eta_delta_profile(0.5), lx, 6, 32);
  CHECK(lin.value > 0);
  CHECK(lin.per_k.size() == 6);
  // the tail bound dominates every scanned lambda at k >= k_tail as well
  for (auto [k, lam] : lin.per_k) CHECK(lam <= k * k / std::pow(k * k + M_PI * M_PI, 3) * (1 + 1e-9));
  const double kt = 7.0;
  CHECK(lin.tail_bound == doctest::Approx(kt * kt / std::pow(kt * kt + M_PI * M_PI, 3)));
  auto lin2 = spectral_constraint_M(eta_delta_profile(0.5), lx, 6, 40);
  CHECK(lin2.value == doctest::Approx(lin.value).epsilon(1e-8));

  // 2 int w theta eta' <= 4 delta avg|d_z w| avg|d_z theta| gives M(eta_delta) <= 4 delta^2
  for (double delta : {0.05, 0.1, 0.25, 0.5}) {
    auto m = spectral_constraint_M(eta_delta_profile(delta), lx, 24, 40);
    CHECK(m.value > 0);
    CHECK(m.value <= 4 * delta * delta);
  }

  // any single flow is a competitor in the sup
  auto eta = eta_delta_profile(0.15);
  auto M = spectral_constraint_M(eta, lx, 8, 40).value;
  auto d = build_domain(lx, 8, 64, 0.3);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 3; ++t) {
    auto u = random_flow(d, rng, 1.0);
    const double q = symmetrization_value(u, eta) - profile_gradient_sq(eta);
    const double ens = enstrophy_norm(u);
    CHECK(q / (ens * ens) <= M * (1 + 1e-8));
  }

  // affine in Pe^2
  auto b0 = symmetrization_bound_pe(eta, 0, lx, 8, 40);
  auto b1 = symmetrization_bound_pe(eta, 10, lx, 8, 40);
  auto b2 = symmetrization_bound_pe(eta, 20, lx, 8, 40);
  CHECK(b0.value == doctest::Approx(profile_gradient_sq(eta)));
  CHECK(b2.value - b0.value == doctest::Approx(4 * (b1.value - b0.value)).epsilon(1e-12));
  CHECK(b1.lambda == doctest::Approx(M));

  CHECK_THROWS_AS(spectral_constraint_M({{0, 0.5, 0.5, 1}, {1, 1, 0, 0}}, lx, 4), InvalidArgument);
  CHECK_THROWS_AS(spectral_constraint_M(eta, lx, 0), InvalidArgument);
}

TEST_CASE("a priori bound over eta_delta") {
  const double lx = 2 * M_PI;
  auto table = eta_delta_constraints(lx, 6, 0.05, 3);
  REQUIRE(table.size() == 6);
  CHECK(table.back().delta == 0.5);
  for (auto& t : table) {
    CHECK(t.M.per_k.back().first >= 4 / t.delta);
    CHECK(t.M.value <= 4 * t.delta * t.delta);
  }
  // threads do not change the table
  auto serial = eta_delta_constraints(lx, 6, 0.05, 1);
  for (size_t i = 0; i < table.size(); ++i) CHECK(serial[i].M.value == table[i].M.value);

  CHECK(apriori_bound(table, 0).value == doctest::Approx(1.0));
  CHECK(apriori_bound(table, 0).delta == 0.5);
  // sup over flows of enstrophy Pe dominates each flow's own bound at the same delta
  auto d = build_domain(lx, 6, 64, 0.5);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 3; ++t) {
    auto u = random_flow(d, rng, 1.0);
    const double pe = 30.0 * (t + 1);
    u = u.scaled(pe / enstrophy_norm(u));
    auto b = apriori_bound(table, pe);
    CHECK(b.value >= symmetrization_bound(u, b.delta).value * (1 - 1e-8));
    CHECK(b.value >= nu_direct(u));
  }
  CHECK_THROWS_AS(apriori_bound({}, 1), InvalidArgument);
  CHECK_THROWS_AS(eta_delta_constraints(lx, 1), InvalidArgument);
}

TEST_CASE("Howard functional") {
  // closed-form lower bound
  for (double eps : {1e-9, 1e-6, 1e-3}) CHECK(howard_lower_bound(eps).value == doctest::Approx(3.0 / 16 * std::cbrt(eps)));
  CHECK(howard_lower_bound(0.5).value == 0.125);
  CHECK(howard_lower_bound(1e-6).delta == doctest::Approx(0.005));

  const double eps = 1e-3;
  RollParams p{0.2, 0.5};
  auto des = build_roll(p, roll_cell(p, 16, 64, 0.5));
  const double h = howard_value(des.u, des.xi, eps);
  auto r = efficiency_enstrophy(des.u, des.xi, eps);
  auto kd = mode_decomposition(des.u, des.xi);
  double sq = 0;
  for (auto& t : kd.q_terms) sq += t.q;
  CHECK(std::abs(r.total_E - h - sq) <= 1e-10 * r.total_E);
  CHECK(h <= r.total_E);
  CHECK(h >= howard_lower_bound(eps).value);

  auto bp = branching_params(1e-5, 2 * M_PI);
  auto bd = build_branching(bp, branching_cell(bp, 160, branching_stretch(bp)));
  for (double e : {1e-5, 1e-7}) {
    const double hb = howard_value(bd.u, bd.xi, e);
    auto rb = efficiency_enstrophy(bd.u, bd.xi, e);
    auto kb = mode_decomposition(bd.u, bd.xi);
    double qb = 0;
    for (auto& t : kb.q_terms) qb += t.q;
    CHECK(qb >= 0);
    CHECK(std::abs(rb.total_E - hb - qb) <= 1e-10 * rb.total_E);
    CHECK(hb >= howard_lower_bound(e).value);
  }

  auto d = build_domain(2 * M_PI, 8, 48, 0.3);
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    auto u = random_flow(d, rng, 1.0);
    auto th = normalized(u, random_field(d, rng, 3, 6, 1));
    for (double e : {1e-2, 1e-4, 1e-6}) CHECK(howard_value(u, th, e) >= howard_lower_bound(e).value);
  }

  CHECK_THROWS_AS(howard_value(des.u, 2.0 * des.xi, eps), InvalidArgument);
  CHECK_THROWS_AS(howard_value(des.u, des.xi, 0), InvalidArgument);
}

TEST_CASE("linear growth of the mean flux near the walls") {
  auto d = build_domain(2 * M_PI, 4, 64, 0.0);
  Eigen::VectorXd s = d.z_grid().unaryExpr([](double z) { return std::sin(M_PI * z); });
  auto f = SpectralField::from_profile(d, s);
  auto [ratio, C] = check_lingrowth(f, f);
  double expect = 0;
  for (int j = 1; j + 1 < d.N_z(); ++j) {
    const double z = d.z_grid()(j);
    expect = std::max(expect, std::pow(std::sin(M_PI * z), 2) / (std::min(z, 1 - z) * M_PI * M_PI / 2));
  }
  CHECK(ratio == doctest::Approx(expect).epsilon(1e-10));
  CHECK(C == 4.0);
  CHECK(ratio <= 4);

  CHECK(check_lingrowth(SpectralField(d), f).first == 0.0);

  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    auto w = random_field(d, rng, 4, 8, 1);
    auto th = random_field(d, rng, 4, 8, 1);
    worst = std::max(worst, check_lingrowth(w, th).first);
  }
  CHECK(worst <= 4);
  MESSAGE("max ratio over 100 random pairs: " << worst);
}
