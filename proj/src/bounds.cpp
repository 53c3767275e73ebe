#include "w2w/bounds.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <cmath>
#include <limits>

#include "w2w/advection.hpp"

namespace w2w {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Golub-Welsch on [0,1]
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    x[i] = 0.5 * (es.eigenvalues()(i) + 1);
    w[i] = std::pow(es.eigenvectors()(0, i), 2);
  }
}

// sinh(k x) / sinh(k y), 0 <= x <= y, y > 0
double sinh_ratio(double k, double x, double y) {
  if (k * y < 1e-12) return x / y;
  return std::exp(-k * (y - x)) * std::expm1(-2 * k * x) / std::expm1(-2 * k * y);
}

// G_k(z, z)
double green_diag(double k, double z) {
  if (k < 1e-12) return z * (1 - z);
  return std::expm1(-2 * k * z) * std::expm1(-2 * k * (1 - z)) / (-2 * k * std::expm1(-2 * k));
}

void validate(const Profile& p) {
  const size_t K = p.z.size();
  if (K < 2 || p.eta.size() != K) throw InvalidArgument("profile needs matching z and eta with at least two knots");
  if (p.z.front() != 0 || p.z.back() != 1) throw InvalidArgument("profile must span [0, 1]");
  for (size_t i = 0; i + 1 < K; ++i)
    if (!(p.z[i + 1] > p.z[i])) throw InvalidArgument("profile knots must increase strictly (eta must be in H1)");
  if (std::abs(p.eta.front() - 1) > 1e-14 || std::abs(p.eta.back()) > 1e-14)
    throw InvalidArgument("profile must satisfy eta(0) = 1, eta(1) = 0");
}

double slope(const Profile& p, size_t i) { return (p.eta[i + 1] - p.eta[i]) / (p.z[i + 1] - p.z[i]); }

// Panels covering every piece where eta' != 0, split at the extra breakpoints
// and to length <= h_max.
std::vector<std::pair<double, double>> profile_panels(const Profile& p, const std::vector<double>& extra,
                                                      double h_max) {
  std::vector<std::pair<double, double>> panels;
  for (size_t i = 0; i + 1 < p.z.size(); ++i) {
    if (slope(p, i) == 0) continue;
    const double a = p.z[i], b = p.z[i + 1];
    std::vector<double> bp{a, b};
    for (double e : extra)
      if (e > a && e < b) bp.push_back(e);
    std::sort(bp.begin(), bp.end());
    for (size_t j = 0; j + 1 < bp.size(); ++j) {
      const double len = bp[j + 1] - bp[j];
      if (len <= 0) continue;
      const int s = std::max(1, static_cast<int>(std::ceil(len / h_max)));
      for (int t = 0; t < s; ++t) panels.push_back({bp[j] + len * t / s, bp[j] + len * (t + 1) / s});
    }
  }
  return panels;
}

std::vector<double> node_slopes(const Profile& p, const std::vector<double>& z) {
  std::vector<double> s(z.size());
  for (size_t i = 0; i < z.size(); ++i) {
    size_t k = std::upper_bound(p.z.begin(), p.z.end(), z[i]) - p.z.begin();
    k = std::clamp<size_t>(k, 1, p.z.size() - 1) - 1;
    s[i] = slope(p, k);
  }
  return s;
}

}  // namespace

PanelGreen::PanelGreen(std::vector<std::pair<double, double>> panels, int order)
    : panels_(std::move(panels)), q_(order) {
  if (order < 2) throw InvalidArgument("quadrature order must be at least 2");
  std::sort(panels_.begin(), panels_.end());
  for (size_t p = 0; p < panels_.size(); ++p) {
    if (!(panels_[p].first >= 0 && panels_[p].second <= 1 && panels_[p].first < panels_[p].second))
      throw InvalidArgument("panels must be nonempty subintervals of [0, 1]");
    if (p > 0 && panels_[p].first < panels_[p - 1].second) throw InvalidArgument("panels overlap");
  }
  gauss_legendre(q_, t_ref_, w_ref_);
  for (auto [a, b] : panels_)
    for (int i = 0; i < q_; ++i) {
      z_.push_back(a + (b - a) * t_ref_[i]);
      w_.push_back((b - a) * w_ref_[i]);
    }
}

Eigen::VectorXcd PanelGreen::apply(double k, const Eigen::VectorXcd& f) const {
  const int P = static_cast<int>(panels_.size()), q = q_, n = P * q;
  if (f.size() != n) throw InvalidArgument("f must be given at the panel nodes");
  k = std::abs(k);
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(n);
  if (n == 0) return h;

  // far field through the separable form G = G(z,z) sinh ratios
  cplx L = 0;
  for (int p = 0; p < P; ++p) {
    const double a = panels_[p].first;
    for (int i = p * q; i < (p + 1) * q; ++i)
      if (p > 0) h(i) += L * sinh_ratio(k, a, z_[i]);
    if (p + 1 < P) {
      const double an = panels_[p + 1].first;
      L = (p > 0 ? L * sinh_ratio(k, a, an) : cplx(0));
      for (int j = p * q; j < (p + 1) * q; ++j) L += w_[j] * f(j) * sinh_ratio(k, z_[j], an);
    }
  }
  cplx U = 0;
  for (int p = P - 1; p >= 0; --p) {
    const double b = panels_[p].second;
    for (int i = p * q; i < (p + 1) * q; ++i)
      if (p < P - 1) h(i) += U * sinh_ratio(k, 1 - b, 1 - z_[i]);
    if (p > 0) {
      const double bp = panels_[p - 1].second;
      U = (p < P - 1 ? U * sinh_ratio(k, 1 - b, 1 - bp) : cplx(0));
      for (int j = p * q; j < (p + 1) * q; ++j) U += w_[j] * f(j) * sinh_ratio(k, 1 - z_[j], 1 - bp);
    }
  }
  for (int i = 0; i < n; ++i) h(i) *= green_diag(k, z_[i]);

  // near field: Lagrange interpolant of f on the panel, integrated against
  // G(z_i, .) with the quadrature split at z_i
  std::vector<double> bw(q);
  for (int j = 0; j < q; ++j) {
    double s = 1;
    for (int l = 0; l < q; ++l)
      if (l != j) s *= t_ref_[j] - t_ref_[l];
    bw[j] = 1 / s;
  }
  auto lagrange = [&](double t, std::vector<double>& out) {
    out.assign(q, 0);
    for (int j = 0; j < q; ++j)
      if (t == t_ref_[j]) {
        out[j] = 1;
        return;
      }
    double den = 0;
    for (int j = 0; j < q; ++j) den += bw[j] / (t - t_ref_[j]);
    for (int j = 0; j < q; ++j) out[j] = bw[j] / (t - t_ref_[j]) / den;
  };
  std::vector<double> lj;
  Eigen::MatrixXd W(q, q);
  for (int p = 0; p < P; ++p) {
    const double a = panels_[p].first, len = panels_[p].second - a;
    W.setZero();
    for (int i = 0; i < q; ++i) {
      const double ti = t_ref_[i], zi = a + len * ti;
      for (int side = 0; side < 2; ++side) {
        const double lo = side == 0 ? 0 : ti, hi = side == 0 ? ti : 1;
        for (int half = 0; half < 2; ++half) {
          const double s0 = lo + (hi - lo) * 0.5 * half, s1 = s0 + (hi - lo) * 0.5;
          for (int g = 0; g < q; ++g) {
            const double t = s0 + (s1 - s0) * t_ref_[g];
            const double wt = (s1 - s0) * w_ref_[g] * len;
            lagrange(t, lj);
            const double G = green_kernel(k, zi, a + len * t);
            for (int j = 0; j < q; ++j) W(i, j) += wt * G * lj[j];
          }
        }
      }
    }
    h.segment(p * q, q) += W * f.segment(p * q, q);
  }
  return h;
}

double PanelGreen::quadratic_form(double k, const Eigen::VectorXcd& f) const {
  Eigen::VectorXcd h = apply(k, f);
  cplx s = 0;
  for (int i = 0; i < h.size(); ++i) s += w_[i] * std::conj(f(i)) * h(i);
  return s.real();
}

Profile eta_delta_profile(double delta) {
  if (!(delta > 0 && delta <= 0.5)) throw InvalidArgument("delta must lie in (0, 1/2]");
  if (delta == 0.5) return {{0, 0.5, 1}, {1, 0.5, 0}};
  return {{0, delta, 1 - delta, 1}, {1, 0.5, 0.5, 0}};
}

double profile_gradient_sq(const Profile& p) {
  validate(p);
  double s = 0;
  for (size_t i = 0; i + 1 < p.z.size(); ++i) s += std::pow(slope(p, i), 2) * (p.z[i + 1] - p.z[i]);
  return s;
}

double energy_bound(const VelocityField& u) { return 1 + 0.5 * std::sqrt(inner(u.u_z, u.u_z)); }

BoundCertificate energy_certificate(const VelocityField& u) {
  return {"energy", energy_bound(u), {}, kNaN, kNaN};
}

double symmetrization_value(const VelocityField& u, const Profile& eta) {
  const double grad = profile_gradient_sq(eta);
  const auto& d = u.domain();
  const int M = d.M(), N = d.N_z();
  const double kmax = std::max(d.wavenumber(M), 1.0);
  std::vector<double> extra(d.z_grid().data(), d.z_grid().data() + N);
  PanelGreen pg(profile_panels(eta, extra, std::min(2 / kmax, 1.0 / 16)));
  const auto& z = pg.nodes();
  const int n = static_cast<int>(z.size());
  if (n == 0) return grad;
  Eigen::MatrixXd R(n, N);
  for (int i = 0; i < n; ++i) R.row(i) = d.interpolation_row(z[i]).transpose();
  const auto s = node_slopes(eta, z);
  Eigen::VectorXd sv = Eigen::Map<const Eigen::VectorXd>(s.data(), n);
  const auto& W = u.u_z.coeffs();
  double Q = 0;
  for (int m = 0; m <= M; ++m) {
    Eigen::VectorXcd wm = R.cast<cplx>() * W.row(m + M).transpose();
    Eigen::VectorXcd f = sv.cast<cplx>().cwiseProduct(wm);
    Q += (m == 0 ? 1 : 2) * pg.quadratic_form(d.wavenumber(m), f);
  }
  return grad + Q;
}

BoundCertificate symmetrization_bound(const VelocityField& u, double delta) {
  auto p = eta_delta_profile(delta);
  return {"symmetrization", symmetrization_value(u, p), p, delta, kNaN};
}

BoundCertificate symmetrization_bound_min(const VelocityField& u, int n_delta, double delta_min) {
  if (n_delta < 2 || !(delta_min > 0 && delta_min < 0.5)) throw InvalidArgument("need n_delta >= 2, 0 < delta_min < 1/2");
  BoundCertificate best;
  best.value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_delta; ++i) {
    const double delta =
        i == n_delta - 1 ? 0.5 : std::exp(std::log(delta_min) + (std::log(0.5) - std::log(delta_min)) * i / (n_delta - 1));
    auto c = symmetrization_bound(u, delta);
    if (c.value < best.value) best = c;
  }
  return best;
}

SpectralConstraint spectral_constraint_M(const Profile& eta, double l_x, int modes, int basis) {
  validate(eta);
  if (!(l_x > 0) || modes < 1) throw InvalidArgument("need l_x > 0 and modes >= 1");
  if (basis < 4 || basis > 120) throw InvalidArgument("basis size must lie in [4, 120]");
  const int nb = basis;

  // psi_i = (1 - x^2)^2 P_i(x), x = 2z - 1, with z-derivatives
  auto eval = [nb](double z, Eigen::VectorXd& f0, Eigen::VectorXd& f1, Eigen::VectorXd& f2) {
    const double x = 2 * z - 1;
    const double b = std::pow(1 - x * x, 2), b1 = -4 * x * (1 - x * x), b2 = 12 * x * x - 4;
    std::vector<double> P(nb + 1), D(nb + 1), DD(nb + 1);
    P[0] = 1;
    D[0] = DD[0] = 0;
    if (nb > 1) {
      P[1] = x;
      D[1] = 1;
      DD[1] = 0;
    }
    for (int n = 1; n + 1 < nb; ++n) {
      P[n + 1] = ((2 * n + 1) * x * P[n] - n * P[n - 1]) / (n + 1);
      D[n + 1] = D[n - 1] + (2 * n + 1) * P[n];
      DD[n + 1] = DD[n - 1] + (2 * n + 1) * D[n];
    }
    f0.resize(nb);
    f1.resize(nb);
    f2.resize(nb);
    for (int i = 0; i < nb; ++i) {
      f0(i) = b * P[i];
      f1(i) = 2 * (b1 * P[i] + b * D[i]);
      f2(i) = 4 * (b2 * P[i] + 2 * b1 * D[i] + b * DD[i]);
    }
  };

  std::vector<double> gx, gw;
  gauss_legendre(24, gx, gw);
  Eigen::MatrixXd B0 = Eigen::MatrixXd::Zero(nb, nb), B1 = B0, B2 = B0;
  Eigen::VectorXd f0, f1, f2;
  const int panels = 32;
  for (int p = 0; p < panels; ++p)
    for (size_t g = 0; g < gx.size(); ++g) {
      const double z = (p + gx[g]) / panels, w = gw[g] / panels;
      eval(z, f0, f1, f2);
      B0 += w * f0 * f0.transpose();
      B1 += w * f1 * f1.transpose();
      B2 += w * f2 * f2.transpose();
    }

  const double kmax = 2 * M_PI * modes / l_x;
  PanelGreen pg(profile_panels(eta, {}, std::min(2 / kmax, 4.0 / (nb + 4))));
  const auto& z = pg.nodes();
  const auto& w = pg.weights();
  const int n = static_cast<int>(z.size());
  const auto s = node_slopes(eta, z);
  Eigen::MatrixXd F(n, nb);
  for (int i = 0; i < n; ++i) {
    eval(z[i], f0, f1, f2);
    F.row(i) = s[i] * f0.transpose();
  }
  Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(w.data(), n);

  double smax = 0;
  for (size_t i = 0; i + 1 < eta.z.size(); ++i) smax = std::max(smax, std::abs(slope(eta, i)));
  const double kt = 2 * M_PI * (modes + 1) / l_x;
  SpectralConstraint out{0, 0, {}, smax * smax * kt * kt / std::pow(kt * kt + M_PI * M_PI, 3)};
  for (int m = 1; m <= modes; ++m) {
    const double k = 2 * M_PI * m / l_x;
    Eigen::MatrixXd H(n, nb);
    for (int j = 0; j < nb; ++j) H.col(j) = pg.apply(k, F.col(j).cast<cplx>()).real();
    Eigen::MatrixXd A = k * k * F.transpose() * wv.asDiagonal() * H;
    A = 0.5 * (A + A.transpose()).eval();
    Eigen::MatrixXd B = B2 + 2 * k * k * B1 + std::pow(k, 4) * B0;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, B);
    if (es.info() != Eigen::Success)
      throw SolverFailure("generalized eigensolve failed for the spectral constraint", {static_cast<double>(m)});
    const double lam = es.eigenvalues().maxCoeff();
    out.per_k.push_back({k, lam});
    if (lam > out.value) {
      out.value = lam;
      out.k_max = k;
    }
  }
  return out;
}

BoundCertificate symmetrization_bound_pe(const Profile& eta, double pe, double l_x, int modes, int basis) {
  if (!(pe >= 0)) throw InvalidArgument("Pe must be nonnegative");
  const double M = spectral_constraint_M(eta, l_x, modes, basis).value;
  return {"symmetrization", profile_gradient_sq(eta) + pe * pe * M, eta, kNaN, M};
}

std::vector<DeltaConstraint> eta_delta_constraints(double l_x, int n_delta, double delta_min, int jobs) {
  if (n_delta < 2 || !(delta_min > 0 && delta_min < 0.5)) throw InvalidArgument("need n_delta >= 2, 0 < delta_min < 1/2");
  if (!(l_x > 0) || jobs < 1) throw InvalidArgument("need l_x > 0 and jobs >= 1");
  std::vector<DeltaConstraint> out(n_delta);
  for (int i = 0; i < n_delta; ++i)
    out[i].delta =
        i == n_delta - 1 ? 0.5 : std::exp(std::log(delta_min) + (std::log(0.5) - std::log(delta_min)) * i / (n_delta - 1));
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mutex;
  auto work = [&] {
    for (int i; (i = next++) < n_delta;) {
      try {
        const double d = out[i].delta;
        const int modes = static_cast<int>(std::ceil(4 / d * l_x / (2 * M_PI)));
        out[i].M = spectral_constraint_M(eta_delta_profile(d), l_x, std::max(modes, 4), d < 0.03 ? 60 : 40);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min(jobs, n_delta); ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
  return out;
}

BoundCertificate apriori_bound(const std::vector<DeltaConstraint>& table, double pe) {
  if (!(pe >= 0)) throw InvalidArgument("Pe must be nonnegative");
  if (table.empty()) throw InvalidArgument("empty constraint table");
  BoundCertificate best{"symmetrization", std::numeric_limits<double>::infinity(), {}, kNaN, kNaN};
  for (auto& t : table) {
    const double M = std::max(t.M.value, t.M.tail_bound);
    const double v = 1 / (2 * t.delta) + pe * pe * M;
    if (v < best.value) best = {"symmetrization", v, eta_delta_profile(t.delta), t.delta, M};
  }
  return best;
}

double howard_value(const VelocityField& u, const SpectralField& theta, double epsilon) {
  if (!(epsilon > 0)) throw InvalidArgument("epsilon must be positive");
  if (!u.domain().same_as(theta.domain())) throw InvalidArgument("u and theta live on different domains");
  if (std::abs(inner(u.u_z, theta) - 1) > 1e-8) throw InvalidArgument("net-flux constraint avg(w theta) = 1 violated");
  const int N = theta.domain().N_z();
  const double scale = std::max(1.0, theta.coeffs().cwiseAbs().maxCoeff());
  if (theta.coeffs().col(0).cwiseAbs().maxCoeff() > 1e-10 * scale ||
      theta.coeffs().col(N - 1).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw InvalidArgument("theta must vanish on the walls");
  Eigen::VectorXd p = mean_flux_profile(u, theta);
  const double deficit = integrate_profile(theta.domain(), (p.array() - 1).square().matrix());
  const double ens = enstrophy_norm(u);
  return deficit + epsilon * ens * ens * grad_inner(theta, theta);
}

BoundCertificate howard_lower_bound(double epsilon) {
  if (!(epsilon > 0)) throw InvalidArgument("epsilon must be positive");
  const double delta = std::min(0.5, std::cbrt(epsilon) / 2);
  const double v = delta / 4 + epsilon / (64 * delta * delta);
  return {"howard", std::min(0.125, v), {}, delta, kNaN};
}

std::pair<double, double> check_lingrowth(const SpectralField& w, const SpectralField& theta) {
  if (!w.domain().same_as(theta.domain())) throw InvalidArgument("w and theta live on different domains");
  const auto& d = w.domain();
  const double a = std::sqrt(inner(dz(w), dz(w))), b = std::sqrt(inner(dz(theta), dz(theta)));
  double ratio = 0;
  if (a * b > 0) {
    const auto& zg = d.z_grid();
    for (int j = 1; j + 1 < d.N_z(); ++j) {
      const double p = w.coeffs().col(j).conjugate().cwiseProduct(theta.coeffs().col(j)).sum().real();
      ratio = std::max(ratio, std::abs(p) / (std::min(zg(j), 1 - zg(j)) * a * b));
    }
  }
  return {ratio, 4.0};
}

}  // namespace w2w
