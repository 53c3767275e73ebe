#include "w2w/transport.hpp"

#include <cmath>

namespace w2w {

namespace {

// quadrature inner product of two coefficient arrays (real fields)
double winner(const DomainSpec& d, const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  const auto& w = d.weights();
  double s = 0;
  for (int j = 0; j < a.cols(); ++j)
    s += w(j) * (a.col(j).real().dot(b.col(j).real()) + a.col(j).imag().dot(b.col(j).imag()));
  return s;
}

Eigen::MatrixXcd ainv(const DomainSpec& d, const Eigen::MatrixXcd& f) { return -d.solve_helmholtz(f); }

int max_iterations(const DomainSpec& d, const SolverOptions& opt) {
  return opt.max_iter > 0 ? opt.max_iter : 10 * d.modes() * d.N_z();
}

void check_walls(const SpectralField& f, const Eigen::VectorXd& target, const char* what) {
  const auto& c = f.coeffs();
  const int M = f.domain().M(), N = f.domain().N_z();
  double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  for (int col : {0, N - 1})
    for (int r = 0; r < c.rows(); ++r) {
      cplx t = r == M ? cplx(target(col == 0 ? 0 : 1)) : cplx(0);
      if (std::abs(c(r, col) - t) > 1e-10 * scale) throw InvalidArgument(what);
    }
}

SpectralField conduction(const DomainSpec& d) {
  return SpectralField::from_profile(d, (1.0 - d.z_grid().array()).matrix());
}

// Preconditioned CG for H x = b, H = A - B A^{-1} B, preconditioner A^{-1}.
// A p is carried by recurrence so the stiff collocation Laplacian is never
// applied.
SpectralField pcg(const Advector& B, const SpectralField& b, const SolverOptions& opt, SolveInfo& info) {
  const auto& d = b.domain();
  SpectralField x(d);
  Eigen::MatrixXcd r = b.coeffs();
  r.col(0).setZero();
  r.col(d.N_z() - 1).setZero();
  Eigen::MatrixXcd z = ainv(d, r);
  Eigen::MatrixXcd p = z, Ap = r;
  double rz = winner(d, r, z);
  const double bn = std::sqrt(rz);
  info = {};
  if (bn == 0) return x;
  const int maxit = max_iterations(d, opt);
  for (int it = 1; it <= maxit; ++it) {
    SpectralField P(d, p);
    auto BP = B.apply(P);
    Eigen::MatrixXcd Hp = Ap - B.apply(SpectralField(d, ainv(d, BP.coeffs()))).coeffs();
    double pHp = winner(d, p, Hp);
    if (!(pHp > 0)) throw SolverFailure("CG breakdown: operator not positive", info.history);
    double alpha = rz / pHp;
    x.coeffs() += alpha * p;
    r -= alpha * Hp;
    z = ainv(d, r);
    double rz1 = winner(d, r, z);
    double rel = std::sqrt(std::max(rz1, 0.0)) / bn;
    info.history.push_back(rel);
    info.iterations = it;
    info.residual = rel;
    if (rel <= opt.tol) return x;
    double beta = rz1 / rz;
    rz = rz1;
    p = z + beta * p;
    Ap = r + beta * Ap;
  }
  throw SolverFailure("CG did not converge", info.history);
}

}  // namespace

Advector::Advector(const VelocityField& u) : u_(u), ux_(to_physical(u.u_x)), w_(to_physical(u.u_z)) {}

SpectralField Advector::apply(const SpectralField& f) const {
  const auto& d = f.domain();
  Eigen::MatrixXd X = to_physical(f);
  Eigen::MatrixXd Xx = to_physical(dx(f));
  Eigen::MatrixXd Xz = to_physical(dz(f));
  auto adv = from_physical(d, ux_.cwiseProduct(Xx) + w_.cwiseProduct(Xz));
  auto fx = from_physical(d, ux_.cwiseProduct(X));
  auto fz = from_physical(d, w_.cwiseProduct(X));
  SpectralField out = adv + dx(fx) + dz(fz);
  out *= 0.5;
  out.zero_walls();
  return out;
}

SpectralField inverse_minus_laplacian(const SpectralField& f) {
  return SpectralField(f.domain(), ainv(f.domain(), f.coeffs()));
}

double dual_norm_sq(const SpectralField& f) {
  return winner(f.domain(), f.coeffs(), ainv(f.domain(), f.coeffs()));
}

// Right-preconditioned GMRES(restart) on (A + B) A^{-1} y = w in the A^{-1}
// inner product, theta = A^{-1} y.  In that inner product B A^{-1} is skew, so
// the preconditioned operator is the identity plus a skew map.
SpectralField solve_steady_theta(const VelocityField& u, const SolverOptions& opt, SolveInfo* info_out) {
  const auto& d = u.domain();
  Advector B(u);
  SolveInfo info;
  SpectralField theta(d);
  Eigen::MatrixXcd r = u.u_z.coeffs();
  r.col(0).setZero();
  r.col(d.N_z() - 1).setZero();
  Eigen::MatrixXcd z = ainv(d, r);
  const double bn = std::sqrt(winner(d, r, z));
  if (bn == 0) {
    if (info_out) *info_out = info;
    return theta;
  }
  const int maxit = max_iterations(d, opt);
  const int m = std::max(1, opt.restart);
  std::vector<Eigen::MatrixXcd> V, Z;
  int total = 0;
  bool done = false;
  while (!done) {
    double beta = std::sqrt(std::max(0.0, winner(d, r, z)));
    if (beta <= opt.tol * bn) break;
    V.assign(1, r / beta);
    Z.assign(1, z / beta);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd cs(m), sn(m), g = Eigen::VectorXd::Zero(m + 1);
    g(0) = beta;
    int j = 0;
    for (; j < m; ++j) {
      Eigen::MatrixXcd q = V[j] + B.apply(SpectralField(d, Z[j])).coeffs();
      Eigen::MatrixXcd zq = ainv(d, q);
      for (int i = 0; i <= j; ++i) {
        double h = winner(d, Z[i], q);
        H(i, j) = h;
        q -= h * V[i];
        zq -= h * Z[i];
      }
      double hn = std::sqrt(std::max(0.0, winner(d, q, zq)));
      H(j + 1, j) = hn;
      for (int i = 0; i < j; ++i) {
        double t = cs(i) * H(i, j) + sn(i) * H(i + 1, j);
        H(i + 1, j) = -sn(i) * H(i, j) + cs(i) * H(i + 1, j);
        H(i, j) = t;
      }
      double rho = std::hypot(H(j, j), H(j + 1, j));
      cs(j) = H(j, j) / rho;
      sn(j) = H(j + 1, j) / rho;
      H(j, j) = rho;
      H(j + 1, j) = 0;
      g(j + 1) = -sn(j) * g(j);
      g(j) = cs(j) * g(j);
      ++total;
      double rel = std::abs(g(j + 1)) / bn;
      info.history.push_back(rel);
      if (rel <= opt.tol || total >= maxit || hn == 0) {
        ++j;
        done = rel <= opt.tol || hn == 0;
        break;
      }
      V.push_back(q / hn);
      Z.push_back(zq / hn);
    }
    int k = std::min(j, m);
    Eigen::VectorXd y =
        H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    for (int i = 0; i < k; ++i) theta.coeffs() += y(i) * Z[i];
    // residual update r <- r - (A+B) A^{-1} V y, with the Krylov relation
    // replaced by an explicit product to avoid drift
    Eigen::MatrixXcd Zy = Eigen::MatrixXcd::Zero(d.modes(), d.N_z());
    Eigen::MatrixXcd Vy = Zy;
    for (int i = 0; i < k; ++i) {
      Zy += y(i) * Z[i];
      Vy += y(i) * V[i];
    }
    r -= Vy + B.apply(SpectralField(d, Zy)).coeffs();
    z = ainv(d, r);
    if (!done && total >= maxit) throw SolverFailure("GMRES did not converge", info.history);
  }
  // true residual in the A^{-1} norm: e = A^{-1}(w - B theta) - theta
  SpectralField e(d, ainv(d, u.u_z.coeffs() - B.apply(theta).coeffs()));
  e -= theta;
  info.iterations = total;
  info.residual = std::sqrt(std::max(0.0, grad_inner(e, e))) / bn;
  if (info_out) *info_out = info;
  return theta;
}

SpectralField solve_steady_theta(const VelocityField& u, double tol, SolveInfo* info) {
  SolverOptions o;
  o.tol = tol;
  return solve_steady_theta(u, o, info);
}

NuDirect nu_direct_full(const VelocityField& u, const SolverOptions& opt) {
  const auto& d = u.domain();
  NuDirect out;
  out.theta = solve_steady_theta(u, opt, &out.info);
  out.nu = 1 + inner(u.u_z, out.theta);
  auto T = out.theta + conduction(d);
  out.nu_gradient = grad_inner(T, T);
  Eigen::MatrixXd p = to_physical(T);
  out.theta_min = p.minCoeff();
  out.theta_max = p.maxCoeff();
  if (std::abs(out.nu - out.nu_gradient) > 1e-6 * out.nu)
    throw SolverFailure("Nu identity violated: under-resolved or unconverged", out.info.history);
  return out;
}

double nu_direct(const VelocityField& u, double tol) {
  SolverOptions o;
  o.tol = tol;
  return nu_direct_full(u, o).nu;
}

Symmetrized solve_symmetrized(const VelocityField& u, const SolverOptions& opt) {
  const auto& d = u.domain();
  Advector B(u);
  Symmetrized s;
  s.xi = pcg(B, u.u_z, opt, s.info);
  s.eta = -inverse_minus_laplacian(B.apply(s.xi));
  (void)d;
  return s;
}

Symmetrized solve_symmetrized(const VelocityField& u, double tol) {
  SolverOptions o;
  o.tol = tol;
  return solve_symmetrized(u, o);
}

double nu_primal(const VelocityField& u, const SpectralField& eta) {
  const auto& d = eta.domain();
  Eigen::VectorXd ends(2);
  ends << 1.0, 0.0;
  check_walls(eta, ends, "eta must equal 1 at z = 0 and 0 at z = 1");
  SpectralField eta0 = eta - conduction(d);
  eta0.zero_walls();
  Advector B(u);
  // u.grad(1 - z) = -w is applied exactly
  auto J = B.apply(eta0) - u.u_z;
  return grad_inner(eta, eta) + dual_norm_sq(J);
}

double nu_dual(const VelocityField& u, const SpectralField& xi) {
  check_walls(xi, Eigen::VectorXd::Zero(2), "xi must vanish on the walls");
  Advector B(u);
  return 1 + 2 * inner(u.u_z, xi) - grad_inner(xi, xi) - dual_norm_sq(B.apply(xi));
}

OptResult nu_dual_opt(const VelocityField& u, const SolverOptions& opt) {
  Advector B(u);
  OptResult r;
  r.field = pcg(B, u.u_z, opt, r.info);
  r.value = nu_dual(u, r.field);
  return r;
}

OptResult nu_primal_opt(const VelocityField& u, const SolverOptions& opt) {
  const auto& d = u.domain();
  Advector B(u);
  auto rhs = -B.apply(inverse_minus_laplacian(u.u_z));
  OptResult r;
  auto eta0 = pcg(B, rhs, opt, r.info);
  r.field = eta0 + conduction(d);
  r.value = nu_primal(u, r.field);
  return r;
}

TransportReport transport_report(const VelocityField& u, const SolverOptions& opt) {
  TransportReport t;
  auto dir = nu_direct_full(u, opt);
  auto pr = nu_primal_opt(u, opt);
  auto du = nu_dual_opt(u, opt);
  t.nu_direct = dir.nu;
  t.nu_primal = pr.value;
  t.nu_dual = du.value;
  t.pe_energy = energy_norm(u);
  t.pe_enstrophy = enstrophy_norm(u);
  t.res_direct = dir.info.residual;
  t.res_primal = pr.info.residual;
  t.res_dual = du.info.residual;
  t.nu_identity_defect = std::abs(dir.nu - dir.nu_gradient) / dir.nu;
  t.max_principle_ok = dir.theta_min >= -1e-6 && dir.theta_max <= 1 + 1e-6;
  return t;
}

}  // namespace w2w
