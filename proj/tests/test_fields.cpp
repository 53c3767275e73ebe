#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "w2w/fields.hpp"

using namespace w2w;

namespace {

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd sample(const DomainSpec& d, const std::function<double(double, double)>& f) {
  Eigen::MatrixXd p(d.nx(), d.N_z());
  for (int j = 0; j < d.N_z(); ++j)
    for (int i = 0; i < d.nx(); ++i) p(i, j) = f(d.l_x() * i / d.nx(), d.z_grid()(j));
  return p;
}

}  // namespace

TEST_CASE("build_domain shapes and errors") {
  auto d = build_domain(2 * M_PI, 8, 33);
  CHECK(d.modes() == 17);
  CHECK(d.N_z() == 33);
  CHECK(d.z_grid()(0) == 0.0);
  CHECK(d.z_grid()(32) == 1.0);
  for (int j = 1; j < 33; ++j) CHECK(d.z_grid()(j) > d.z_grid()(j - 1));
  CHECK(d.weights().sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(d.nx() >= 3 * 8 + 1);

  auto m = build_domain(1.0, 1, 8);
  CHECK(m.modes() == 3);

  CHECK_THROWS_AS(build_domain(-1, 8, 33), InvalidArgument);
  CHECK_THROWS_AS(build_domain(1, 0, 33), InvalidArgument);
  CHECK_THROWS_AS(build_domain(1, 4, 7), InvalidArgument);
}

TEST_CASE("quadrature is exact on low-degree polynomials") {
  for (int N : {8, 17, 33, 64}) {
    auto d = build_domain(1.0, 2, N);
    for (int p = 0; p <= N - 1; ++p) {
      Eigen::VectorXd prof = d.z_grid().array().pow(p);
      CHECK(std::abs(integrate_profile(d, prof) - 1.0 / (p + 1)) <= 1e-12 / (p + 1));
    }
  }
}

TEST_CASE("stretched grid clusters at the walls and stays accurate") {
  auto plain = build_domain(1.0, 2, 129);
  auto st = build_domain(1.0, 2, 129, 3.0);
  CHECK(st.z_grid()(1) < plain.z_grid()(1));
  CHECK(st.weights().sum() == doctest::Approx(1.0).epsilon(1e-14));
  Eigen::VectorXd prof = st.z_grid().unaryExpr([](double z) { return std::exp(z) * std::sin(3 * z); });
  double exact = (std::exp(1.0) * (std::sin(3.0) - 3 * std::cos(3.0)) + 3) / 10;
  CHECK(std::abs(integrate_profile(st, prof) - exact) < 1e-12);
  Eigen::VectorXd dprof = st.D() * prof;
  for (int j = 0; j < 129; ++j) {
    double z = st.z_grid()(j);
    CHECK(std::abs(dprof(j) - std::exp(z) * (std::sin(3 * z) + 3 * std::cos(3 * z))) < 1e-8);
  }
}

TEST_CASE("differentiation of z^2(1-z)cos(2 pi x / l_x)") {
  const double lx = 3.0;
  auto d = build_domain(lx, 4, 16);
  const double k = 2 * M_PI / lx;
  auto f = SpectralField::from_function(d, [&](double x, double z) { return z * z * (1 - z) * std::cos(k * x); });
  auto fx = to_physical(dx(f));
  auto fz = to_physical(dz(f));
  auto ex = sample(d, [&](double x, double z) { return -k * z * z * (1 - z) * std::sin(k * x); });
  auto ez = sample(d, [&](double x, double z) { return (2 * z - 3 * z * z) * std::cos(k * x); });
  CHECK(max_abs_diff(fx, ex) < 1e-10);
  CHECK(max_abs_diff(fz, ez) < 1e-10);
}

TEST_CASE("dealiased products are exact for band-limited factors") {
  auto d = build_domain(2 * M_PI, 4, 17);
  auto a = SpectralField::from_function(d, [](double x, double z) { return std::cos(2 * x) * z; });
  auto b = SpectralField::from_function(d, [](double x, double z) { return std::sin(3 * x) + z * z; });
  auto p = product(a, b);
  // cos2x sin3x = (sin5x + sinx)/2, mode 5 is dropped
  auto e = SpectralField::from_function(
      d, [](double x, double z) { return z * std::sin(x) / 2 + std::cos(2 * x) * z * z * z; });
  CHECK((p.coeffs() - e.coeffs()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(p.hermitian_defect() < 1e-15);
}

TEST_CASE("streamfunction to velocity") {
  const double lx = 2 * M_PI;
  auto d = build_domain(lx, 4, 33);
  SpectralField zero(d);
  auto u0 = streamfunction_to_velocity(zero);
  CHECK(energy_norm(u0) == 0.0);
  CHECK(enstrophy_norm(u0) == 0.0);

  auto psi = SpectralField::from_function(d, [](double x, double z) { return std::sin(M_PI * z) * std::cos(x); });
  auto u = streamfunction_to_velocity(psi);
  auto ux = sample(d, [](double x, double z) { return -M_PI * std::cos(M_PI * z) * std::cos(x); });
  auto uz = sample(d, [](double x, double z) { return -std::sin(M_PI * z) * std::sin(x); });
  CHECK(max_abs_diff(to_physical(u.u_x), ux) < 1e-10);
  CHECK(max_abs_diff(to_physical(u.u_z), uz) < 1e-12);

  double e2 = M_PI * M_PI / 4 + 0.25;
  CHECK(std::abs(energy_norm(u) - std::sqrt(e2)) < 1e-12);
  // enstrophy: |grad u_x|^2 + |grad u_z|^2 averaged
  double ens2 = (std::pow(M_PI, 4) + M_PI * M_PI) / 4 + (M_PI * M_PI + 1) / 4;
  CHECK(std::abs(enstrophy_norm(u) - std::sqrt(ens2)) < 1e-10);

  auto v = u.scaled(-2.5);
  CHECK(std::abs(energy_norm(v) - 2.5 * energy_norm(u)) < 1e-12);
  CHECK(std::abs(enstrophy_norm(v) - 2.5 * enstrophy_norm(u)) < 1e-10);
}

TEST_CASE("random streamfunctions are divergence free and Hermitian") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto d = build_domain(1.0 + trial * 0.3, 6, 24 + trial);
    auto psi = random_field(d, rng, 6, 8, 2);
    auto u = streamfunction_to_velocity(psi);
    CHECK(divergence_residual(u) < 1e-10);
    CHECK(psi.hermitian_defect() < 1e-15);
    CHECK(u.u_x.hermitian_defect() == 0.0);
    CHECK(u.u_z.hermitian_defect() == 0.0);
    CHECK(u.u_z.coeffs().col(0).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(u.u_x.coeffs().col(d.N_z() - 1).cwiseAbs().maxCoeff() < 1e-9);
    auto lap = laplacian(psi);
    CHECK(lap.hermitian_defect() == 0.0);
  }
}

TEST_CASE("point evaluation matches the sampled function") {
  auto d = build_domain(2.0, 5, 21);
  auto f = SpectralField::from_function(d, [](double x, double z) {
    return z * (1 - z) * (1 + std::cos(M_PI * x)) + z * z * z * std::sin(2 * M_PI * x);
  });
  for (double x : {0.1, 0.77, 1.5})
    for (double z : {0.0, 0.123, 0.5, 0.9, 1.0}) {
      double e = z * (1 - z) * (1 + std::cos(M_PI * x)) + z * z * z * std::sin(2 * M_PI * x);
      CHECK(std::abs(f.eval(x, z) - e) < 1e-12);
    }
}

TEST_CASE("Helmholtz solve inverts the collocation operator") {
  auto d = build_domain(2 * M_PI, 3, 33);
  auto f = SpectralField::from_function(d, [](double x, double z) { return std::sin(M_PI * z) * (1 + std::cos(2 * x)); });
  SpectralField g(d, d.solve_helmholtz(f.coeffs()));
  for (int j = 0; j < d.N_z(); ++j) {
    double z = d.z_grid()(j);
    CHECK(std::abs(g.coeff(0, j).real() + std::sin(M_PI * z) / (M_PI * M_PI)) < 1e-12);
    CHECK(std::abs(g.coeff(2, j).real() + 0.5 * std::sin(M_PI * z) / (M_PI * M_PI + 4)) < 1e-12);
  }
  auto back = laplacian(g);
  Eigen::MatrixXcd diff = (back.coeffs() - f.coeffs()).middleCols(1, d.N_z() - 2);
  CHECK(diff.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("field JSON round trip") {
  std::mt19937_64 rng(3);
  auto d = build_domain(1.7, 3, 12, 1.5);
  auto f = random_field(d, rng, 3, 5, 1);
  auto g = field_from_json(field_to_json(f));
  CHECK(g.domain().same_as(d));
  CHECK((g.coeffs() - f.coeffs()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(field_from_json("{\"l_x\": 1}"), InvalidArgument);
  CHECK_THROWS_AS(field_from_json("not json"), InvalidArgument);
}
