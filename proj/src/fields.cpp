#include "w2w/fields.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "json.hpp"

namespace w2w {

namespace detail {

struct DomainData {
  double l_x = 0;
  int M = 0;
  int N = 0;
  double stretch = 0;
  int nx = 0;

  Eigen::VectorXd s;     // reference nodes on [0,1]
  Eigen::VectorXd z;     // physical nodes
  Eigen::VectorXd dzds;  // map derivative at the nodes
  Eigen::VectorXd bary;  // barycentric weights on s
  Eigen::VectorXd w;     // quadrature weights, sum 1
  Eigen::MatrixXd D, D2;

  // interior Dirichlet d^2/dz^2 = V diag(mu) Vinv
  Eigen::VectorXd mu;
  Eigen::MatrixXd V, Vinv, D2int;

  fftw_plan c2r = nullptr;
  fftw_plan r2c = nullptr;

  ~DomainData() {
    if (c2r) fftw_destroy_plan(c2r);
    if (r2c) fftw_destroy_plan(r2c);
  }
};

}  // namespace detail

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

int fft_size(int n) {
  for (int k = n;; ++k) {
    int r = k;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1 && k % 2 == 0) return k;
  }
}

// Legendre-Gauss-Lobatto nodes on [-1,1], weights, and P_n at the nodes.
void lgl(int N, Eigen::VectorXd& x, Eigen::VectorXd& w, Eigen::VectorXd& pn) {
  const int n = N - 1;
  x.resize(N);
  for (int j = 0; j < N; ++j) x(j) = -std::cos(M_PI * j / n);
  Eigen::VectorXd pprev(N), pcur(N);
  for (int it = 0; it < 100; ++it) {
    double change = 0;
    for (int j = 0; j < N; ++j) {
      double p0 = 1, p1 = x(j);
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x(j) * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pprev(j) = p0;
      pcur(j) = p1;
      if (j == 0 || j == n) continue;
      double dx = (x(j) * p1 - p0) / (N * p1);
      x(j) -= dx;
      change = std::max(change, std::abs(dx));
    }
    if (change < 1e-16) break;
  }
  x(0) = -1;
  x(n) = 1;
  for (int j = 0; j < N; ++j) {
    double p0 = 1, p1 = x(j);
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2 * k - 1) * x(j) * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    pcur(j) = p1;
  }
  pn = pcur;
  w = (2.0 / (double(n) * (n + 1))) * pn.array().square().inverse();
}

Eigen::Map<Eigen::MatrixXd> real_view(Eigen::MatrixXcd& a) {
  return Eigen::Map<Eigen::MatrixXd>(reinterpret_cast<double*>(a.data()), 2 * a.rows(), a.cols());
}

Eigen::Map<const Eigen::MatrixXd> real_view(const Eigen::MatrixXcd& a) {
  return Eigen::Map<const Eigen::MatrixXd>(reinterpret_cast<const double*>(a.data()),
                                           2 * a.rows(), a.cols());
}

// Rows m >= 0 of c (modes by nodes) times A, mirrored onto m < 0 so the
// result is exactly Hermitian.
Eigen::MatrixXcd times_right(const Eigen::MatrixXcd& c, const Eigen::MatrixXd& A, int M) {
  Eigen::MatrixXcd half = c.bottomRows(M + 1);
  Eigen::MatrixXcd r(M + 1, A.cols());
  real_view(r).noalias() = real_view(half) * A;
  Eigen::MatrixXcd out(2 * M + 1, A.cols());
  out.bottomRows(M + 1) = r;
  out(M, Eigen::all) = r.row(0).real().cast<cplx>();
  for (int m = 1; m <= M; ++m) out.row(M - m) = r.row(m).conjugate();
  return out;
}

void check_same(const SpectralField& a, const SpectralField& b) {
  if (!a.domain().same_as(b.domain())) throw InvalidArgument("fields live on different domains");
}

}  // namespace

DomainSpec build_domain(double l_x, int M, int N_z, double stretch) {
  if (!(l_x > 0) || !std::isfinite(l_x)) throw InvalidArgument("l_x must be positive");
  if (M < 1) throw InvalidArgument("M must be at least 1");
  if (N_z < 8) throw InvalidArgument("N_z must be at least 8");
  if (!(stretch >= 0) || stretch > 20) throw InvalidArgument("stretch must lie in [0, 20]");

  auto d = std::make_shared<detail::DomainData>();
  d->l_x = l_x;
  d->M = M;
  d->N = N_z;
  d->stretch = stretch;
  d->nx = fft_size(3 * M + 2);

  const int N = N_z;
  Eigen::VectorXd x, wx, pn;
  lgl(N, x, wx, pn);
  d->s = 0.5 * (x.array() + 1.0);
  d->bary = pn.cwiseInverse();

  Eigen::MatrixXd Dx = Eigen::MatrixXd::Zero(N, N);
  for (int i = 0; i < N; ++i) {
    double sum = 0;
    for (int j = 0; j < N; ++j) {
      if (i == j) continue;
      Dx(i, j) = pn(i) / (pn(j) * (x(i) - x(j)));
      sum += Dx(i, j);
    }
    Dx(i, i) = -sum;
  }
  Eigen::MatrixXd Ds = 2.0 * Dx;

  d->z.resize(N);
  d->dzds.resize(N);
  if (stretch > 0) {
    const double a = stretch, ta = std::tanh(a);
    for (int j = 0; j < N; ++j) {
      double arg = a * (2 * d->s(j) - 1);
      double c = std::cosh(arg);
      d->z(j) = 0.5 + 0.5 * std::tanh(arg) / ta;
      d->dzds(j) = a / (c * c * ta);
    }
    d->z(0) = 0;
    d->z(N - 1) = 1;
  } else {
    d->z = d->s;
    d->dzds.setOnes();
  }
  d->w = 0.5 * wx.cwiseProduct(d->dzds);
  d->D = d->dzds.cwiseInverse().asDiagonal() * Ds;
  d->D2 = d->D * d->D;

  // The interior operator is self-adjoint in the quadrature inner product:
  // W (-D2) = D^T W D on interior rows and columns.
  const int n = N - 2;
  Eigen::MatrixXd K = d->D.transpose() * d->w.asDiagonal() * d->D;
  Eigen::MatrixXd Kint = K.block(1, 1, n, n);
  Eigen::VectorXd wi = d->w.segment(1, n);
  Eigen::VectorXd rs = wi.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd S = rs.asDiagonal() * Kint * rs.asDiagonal();
  S = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw SolverFailure("Helmholtz eigendecomposition failed", {});
  d->mu = -es.eigenvalues();
  d->V = rs.asDiagonal() * es.eigenvectors();
  d->Vinv = es.eigenvectors().transpose() * wi.cwiseSqrt().asDiagonal();
  d->D2int = d->D2.block(1, 1, n, n);

  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    const int nx = d->nx, nh = nx / 2 + 1;
    fftw_complex* cb = fftw_alloc_complex(size_t(nh) * N);
    double* rb = fftw_alloc_real(size_t(nx) * N);
    int len[1] = {nx};
    d->c2r = fftw_plan_many_dft_c2r(1, len, N, cb, nullptr, 1, nh, rb, nullptr, 1, nx,
                                    FFTW_ESTIMATE);
    d->r2c = fftw_plan_many_dft_r2c(1, len, N, rb, nullptr, 1, nx, cb, nullptr, 1, nh,
                                    FFTW_ESTIMATE);
    fftw_free(cb);
    fftw_free(rb);
  }

  DomainSpec out;
  out.d_ = d;
  return out;
}

double DomainSpec::l_x() const { return d_->l_x; }
int DomainSpec::M() const { return d_->M; }
int DomainSpec::N_z() const { return d_->N; }
double DomainSpec::stretch() const { return d_->stretch; }
int DomainSpec::nx() const { return d_->nx; }
const Eigen::VectorXd& DomainSpec::z_grid() const { return d_->z; }
const Eigen::VectorXd& DomainSpec::weights() const { return d_->w; }
const Eigen::MatrixXd& DomainSpec::D() const { return d_->D; }
const Eigen::MatrixXd& DomainSpec::D2() const { return d_->D2; }

double DomainSpec::wavenumber(int m) const { return 2 * M_PI * m / d_->l_x; }

bool DomainSpec::same_as(const DomainSpec& o) const {
  if (d_ == o.d_) return true;
  if (!d_ || !o.d_) return false;
  return d_->l_x == o.d_->l_x && d_->M == o.d_->M && d_->N == o.d_->N &&
         d_->stretch == o.d_->stretch;
}

Eigen::MatrixXcd DomainSpec::solve_helmholtz(const Eigen::MatrixXcd& f, int refine) const {
  const auto& d = *d_;
  const int M = d.M, R = M + 1, N = d.N, n = N - 2;
  Eigen::MatrixXcd rhs = f.block(M, 1, R, n);
  Eigen::VectorXd k2(R);
  for (int i = 0; i < R; ++i) k2(i) = std::pow(wavenumber(i), 2);

  auto apply_inverse = [&](const Eigen::MatrixXcd& r) {
    Eigen::MatrixXcd h(R, n);
    real_view(h).noalias() = real_view(r) * d.Vinv.transpose();
    for (int p = 0; p < n; ++p)
      for (int i = 0; i < R; ++i) h(i, p) /= (d.mu(p) - k2(i));
    Eigen::MatrixXcd g(R, n);
    real_view(g).noalias() = real_view(h) * d.V.transpose();
    return g;
  };

  Eigen::MatrixXcd g = apply_inverse(rhs);
  for (int it = 0; it < refine; ++it) {
    Eigen::MatrixXcd lg(R, n);
    real_view(lg).noalias() = real_view(g) * d.D2int.transpose();
    lg -= k2.asDiagonal() * g;
    g += apply_inverse(rhs - lg);
  }
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(2 * M + 1, N);
  out.block(M, 1, R, n) = g;
  out.block(M, 1, 1, n) = g.row(0).real().cast<cplx>();
  for (int m = 1; m <= M; ++m) out.block(M - m, 1, 1, n) = g.row(m).conjugate();
  return out;
}

Eigen::VectorXd DomainSpec::interpolation_row(double z) const {
  const auto& d = *d_;
  double s = z;
  if (d.stretch > 0) {
    double a = d.stretch;
    double arg = std::clamp((2 * z - 1) * std::tanh(a), -1.0, 1.0);
    s = 0.5 + std::atanh(arg) / (2 * a);
    if (!std::isfinite(s)) s = z < 0.5 ? 0.0 : 1.0;
  }
  Eigen::VectorXd row = Eigen::VectorXd::Zero(d.N);
  for (int j = 0; j < d.N; ++j)
    if (s == d.s(j)) {
      row(j) = 1;
      return row;
    }
  double den = 0;
  for (int j = 0; j < d.N; ++j) {
    row(j) = d.bary(j) / (s - d.s(j));
    den += row(j);
  }
  return row / den;
}

SpectralField::SpectralField(const DomainSpec& d)
    : dom_(d), c_(Eigen::MatrixXcd::Zero(d.modes(), d.N_z())) {}

SpectralField::SpectralField(const DomainSpec& d, Eigen::MatrixXcd coeffs)
    : dom_(d), c_(std::move(coeffs)) {
  if (c_.rows() != d.modes() || c_.cols() != d.N_z())
    throw InvalidArgument("coefficient array does not match the domain");
}

SpectralField SpectralField::from_function(const DomainSpec& d,
                                           const std::function<double(double, double)>& f) {
  const int nx = d.nx(), N = d.N_z();
  Eigen::MatrixXd p(nx, N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < nx; ++i) p(i, j) = f(d.l_x() * i / nx, d.z_grid()(j));
  return from_physical(d, p);
}

SpectralField SpectralField::from_profile(const DomainSpec& d, const Eigen::VectorXd& prof) {
  if (prof.size() != d.N_z()) throw InvalidArgument("profile length does not match N_z");
  SpectralField f(d);
  f.c_.row(d.M()) = prof.cast<cplx>().transpose();
  return f;
}

double SpectralField::eval(double x, double z) const {
  Eigen::VectorXd row = dom_.interpolation_row(z);
  double v = 0;
  for (int m = -dom_.M(); m <= dom_.M(); ++m) {
    cplx cm = c_.row(m + dom_.M()) * row.cast<cplx>();
    v += (cm * std::exp(cplx(0, dom_.wavenumber(m) * x))).real();
  }
  return v;
}

Eigen::VectorXd SpectralField::mean_profile() const { return c_.row(dom_.M()).real().transpose(); }

double SpectralField::hermitian_defect() const {
  const int M = dom_.M();
  double defect = 0, scale = 0;
  for (int m = 0; m <= M; ++m) {
    defect = std::max(defect, (c_.row(M + m) - c_.row(M - m).conjugate()).cwiseAbs().maxCoeff());
    scale = std::max(scale, c_.row(M + m).cwiseAbs().maxCoeff());
  }
  return scale > 0 ? defect / scale : defect;
}

void SpectralField::symmetrize() {
  const int M = dom_.M();
  c_.row(M) = c_.row(M).real().cast<cplx>();
  for (int m = 1; m <= M; ++m) {
    Eigen::RowVectorXcd a = 0.5 * (c_.row(M + m) + c_.row(M - m).conjugate());
    c_.row(M + m) = a;
    c_.row(M - m) = a.conjugate();
  }
}

void SpectralField::zero_walls() {
  c_.col(0).setZero();
  c_.col(c_.cols() - 1).setZero();
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
  check_same(*this, o);
  c_ += o.c_;
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
  check_same(*this, o);
  c_ -= o.c_;
  return *this;
}

SpectralField& SpectralField::operator*=(double s) {
  c_ *= s;
  return *this;
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }
SpectralField operator-(SpectralField a) { return a *= -1.0; }

SpectralField dx(const SpectralField& f) {
  const auto& d = f.domain();
  Eigen::MatrixXcd c = f.coeffs();
  for (int m = -d.M(); m <= d.M(); ++m) c.row(m + d.M()) *= cplx(0, d.wavenumber(m));
  return SpectralField(d, std::move(c));
}

SpectralField dz(const SpectralField& f) {
  const auto& d = f.domain();
  return SpectralField(d, times_right(f.coeffs(), d.D().transpose(), d.M()));
}

SpectralField laplacian(const SpectralField& f) {
  const auto& d = f.domain();
  Eigen::MatrixXcd c = times_right(f.coeffs(), d.D2().transpose(), d.M());
  for (int m = -d.M(); m <= d.M(); ++m)
    c.row(m + d.M()) -= std::pow(d.wavenumber(m), 2) * f.coeffs().row(m + d.M());
  return SpectralField(d, std::move(c));
}

Eigen::MatrixXd to_physical(const SpectralField& f) {
  const auto& d = f.domain();
  const auto& dd = d.data();
  const int nx = d.nx(), nh = nx / 2 + 1, N = d.N_z(), M = d.M();
  fftw_complex* cb = fftw_alloc_complex(size_t(nh) * N);
  Eigen::MatrixXd out(nx, N);
  double* rb = fftw_alloc_real(size_t(nx) * N);
  for (int j = 0; j < N; ++j) {
    fftw_complex* col = cb + size_t(j) * nh;
    for (int m = 0; m < nh; ++m) {
      cplx v = m <= M ? f.coeffs()(M + m, j) : cplx(0);
      col[m][0] = v.real();
      col[m][1] = v.imag();
    }
  }
  fftw_execute_dft_c2r(dd.c2r, cb, rb);
  std::copy(rb, rb + size_t(nx) * N, out.data());
  fftw_free(cb);
  fftw_free(rb);
  return out;
}

SpectralField from_physical(const DomainSpec& d, const Eigen::MatrixXd& p) {
  const auto& dd = d.data();
  const int nx = d.nx(), nh = nx / 2 + 1, N = d.N_z(), M = d.M();
  if (p.rows() != nx || p.cols() != N) throw InvalidArgument("physical array has wrong shape");
  double* rb = fftw_alloc_real(size_t(nx) * N);
  fftw_complex* cb = fftw_alloc_complex(size_t(nh) * N);
  std::copy(p.data(), p.data() + size_t(nx) * N, rb);
  fftw_execute_dft_r2c(dd.r2c, rb, cb);
  SpectralField f(d);
  for (int j = 0; j < N; ++j) {
    const fftw_complex* col = cb + size_t(j) * nh;
    f.coeffs()(M, j) = cplx(col[0][0] / nx, 0.0);
    for (int m = 1; m <= M; ++m) {
      cplx v(col[m][0] / nx, col[m][1] / nx);
      f.coeffs()(M + m, j) = v;
      f.coeffs()(M - m, j) = std::conj(v);
    }
  }
  fftw_free(rb);
  fftw_free(cb);
  return f;
}

SpectralField product(const SpectralField& f, const SpectralField& g) {
  check_same(f, g);
  Eigen::MatrixXd p = to_physical(f).cwiseProduct(to_physical(g));
  return from_physical(f.domain(), p);
}

double integrate_profile(const DomainSpec& d, const Eigen::VectorXd& prof) {
  return d.weights().dot(prof);
}

double inner(const SpectralField& f, const SpectralField& g) {
  check_same(f, g);
  const auto& w = f.domain().weights();
  double s = 0;
  for (int j = 0; j < w.size(); ++j)
    s += w(j) * (f.coeffs().col(j).conjugate().cwiseProduct(g.coeffs().col(j))).sum().real();
  return s;
}

double grad_inner(const SpectralField& f, const SpectralField& g) {
  return inner(dx(f), dx(g)) + inner(dz(f), dz(g));
}

double l2_norm(const SpectralField& f) { return std::sqrt(std::max(0.0, inner(f, f))); }

VelocityField VelocityField::scaled(double s) const { return {s * psi, s * u_x, s * u_z}; }

VelocityField streamfunction_to_velocity(const SpectralField& psi) {
  return {psi, -dz(psi), dx(psi)};
}

double divergence_residual(const VelocityField& u) {
  double scale = std::sqrt(inner(dx(u.u_x), dx(u.u_x)) + inner(dz(u.u_z), dz(u.u_z)));
  double r = l2_norm(dx(u.u_x) + dz(u.u_z));
  return scale > 0 ? r / scale : r;
}

double energy_norm(const VelocityField& u) {
  return std::sqrt(std::max(0.0, inner(u.u_x, u.u_x) + inner(u.u_z, u.u_z)));
}

double enstrophy_norm(const VelocityField& u) {
  return std::sqrt(std::max(0.0, grad_inner(u.u_x, u.u_x) + grad_inner(u.u_z, u.u_z)));
}

SpectralField random_field(const DomainSpec& d, std::mt19937_64& rng, int m_max, int degree,
                           int wall_power) {
  m_max = std::min(m_max, d.M());
  std::normal_distribution<double> g(0.0, 1.0);
  SpectralField f(d);
  const auto& z = d.z_grid();
  for (int m = 0; m <= m_max; ++m) {
    std::vector<cplx> a(degree + 1);
    for (auto& v : a) v = m == 0 ? cplx(g(rng), 0) : cplx(g(rng), g(rng)) / std::sqrt(2.0);
    for (int j = 0; j < d.N_z(); ++j) {
      double t = 2 * z(j) - 1, p0 = 1, p1 = t;
      cplx v = a[0];
      if (degree >= 1) v += a[1] * t;
      for (int k = 2; k <= degree; ++k) {
        double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
        v += a[k] * p2;
      }
      v *= std::pow(z(j) * (1 - z(j)), wall_power);
      f.coeff(m, j) = v;
      f.coeff(-m, j) = std::conj(v);
    }
  }
  return f;
}

std::string field_to_json(const SpectralField& f) {
  const auto& d = f.domain();
  nlohmann::json j;
  j["l_x"] = d.l_x();
  j["M"] = d.M();
  j["N_z"] = d.N_z();
  if (d.stretch() > 0) j["stretch"] = d.stretch();
  auto arr = nlohmann::json::array();
  for (int i = 0; i < d.modes(); ++i)
    for (int k = 0; k < d.N_z(); ++k) arr.push_back({f.coeffs()(i, k).real(), f.coeffs()(i, k).imag()});
  j["coeffs"] = std::move(arr);
  return j.dump();
}

SpectralField field_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw InvalidArgument(std::string("field JSON: ") + e.what());
  }
  for (const char* key : {"l_x", "M", "N_z", "coeffs"})
    if (!j.contains(key)) throw InvalidArgument(std::string("field JSON lacks '") + key + "'");
  DomainSpec d = build_domain(j["l_x"].get<double>(), j["M"].get<int>(), j["N_z"].get<int>(),
                              j.value("stretch", 0.0));
  const auto& arr = j["coeffs"];
  if (!arr.is_array() || int(arr.size()) != d.modes() * d.N_z())
    throw InvalidArgument("field JSON: coeffs has wrong length");
  SpectralField f(d);
  for (int i = 0; i < d.modes(); ++i)
    for (int k = 0; k < d.N_z(); ++k) {
      const auto& e = arr[size_t(i) * d.N_z() + k];
      f.coeffs()(i, k) = cplx(e.at(0).get<double>(), e.at(1).get<double>());
    }
  if (f.hermitian_defect() > 1e-12) throw InvalidArgument("field JSON: coefficients are not Hermitian");
  return f;
}

}  // namespace w2w
