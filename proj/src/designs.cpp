#include "w2w/designs.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "json.hpp"

namespace w2w {

namespace {

int mode_index(double l_x, double l, const char* what) {
  double m = l_x / (2 * M_PI * l);
  double r = std::round(m);
  if (r < 1 || std::abs(m - r) > 1e-9 * std::max(1.0, m))
    throw InvalidArgument(std::string(what) + ": width not commensurate with the period");
  return static_cast<int>(r);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

double cutoff_f(double t) {
  if (t <= 0) return 1;
  if (t >= 1) return 0;
  double x = (t - 0.5) / (t * t * (1 - t) * (1 - t));
  // 1/sqrt(1 + e^{2x}) without overflow
  if (x > 0) {
    double e = std::exp(-x);
    return e / std::sqrt(1 + e * e);
  }
  return 1 / std::sqrt(1 + std::exp(2 * x));
}

double cutoff_f_prime(double t) {
  if (t <= 0 || t >= 1) return 0;
  double q = t * t * (1 - t) * (1 - t);
  double x = (t - 0.5) / q;
  double dq = 2 * t * (1 - t) * (1 - 2 * t);
  double dx = (q - (t - 0.5) * dq) / (q * q);
  double sig = 1 / (1 + std::exp(-2 * x));
  double f = cutoff_f(t);
  if (f == 0) return 0;
  return -f * sig * dx;
}

double cutoff_g_prime(double t) {
  if (t <= 0 || t >= 1) return 0;
  return -0.5 * M_PI * std::sin(M_PI * t) + cutoff_g_gamma() * M_PI * std::sin(2 * M_PI * t);
}

double cutoff_f_second(double t) {
  if (t <= 0 || t >= 1) return 0;
  const double f = cutoff_f(t);
  if (f == 0) return 0;
  const double u = t - 0.5;
  const double q = t * t * (1 - t) * (1 - t);
  const double q1 = 2 * t * (1 - t) * (1 - 2 * t);
  const double q2 = 2 * (1 - 6 * t + 6 * t * t);
  const double x = u / q;
  const double x1 = 1 / q - u * q1 / (q * q);
  const double x2 = -2 * q1 / (q * q) - u * q2 / (q * q) + 2 * u * q1 * q1 / (q * q * q);
  const double sig = 1 / (1 + std::exp(-2 * x));
  const double f1 = -f * sig * x1;
  const double sig1 = 2 * sig * (1 - sig) * x1;
  return -(f1 * sig * x1 + f * sig1 * x1 + f * sig * x2);
}

double cutoff_g_second(double t) {
  if (t < 0 || t > 1) return 0;
  return -0.5 * M_PI * M_PI * std::cos(M_PI * t) + 2 * cutoff_g_gamma() * M_PI * M_PI * std::cos(2 * M_PI * t);
}

double cutoff_g_gamma() { return (-4 + std::sqrt(76.0)) / 6; }

double cutoff_g(double t) {
  if (t <= 0) return 1;
  if (t >= 1) return 0;
  double s = std::sin(M_PI * t);
  return 0.5 * (1 + std::cos(M_PI * t)) + cutoff_g_gamma() * s * s;
}

double roll_chi(double delta, double z) {
  double y = std::min(z, 1 - z);
  if (y >= delta) return 1;
  return cutoff_f(1 - y / delta);
}

double roll_chi_prime(double delta, double z) {
  if (z < 0.5) {
    if (z >= delta) return 0;
    return -cutoff_f_prime(1 - z / delta) / delta;
  }
  if (1 - z >= delta) return 0;
  return cutoff_f_prime(1 - (1 - z) / delta) / delta;
}

double roll_chi_second(double delta, double z) {
  const double y = std::min(z, 1 - z);
  if (y >= delta) return 0;
  return cutoff_f_second(1 - y / delta) / (delta * delta);
}

RollParams roll_optimal_params(double epsilon, double l_x) {
  if (!(epsilon > 0) || !(l_x > 0)) throw InvalidArgument("epsilon and l_x must be positive");
  double delta = std::sqrt(epsilon);
  if (delta > 0.5) throw Infeasible("epsilon too large for a roll: delta = sqrt(eps) exceeds 1/2");
  double target = std::sqrt(delta);
  int m0 = static_cast<int>(std::ceil(l_x / (2 * M_PI * target) - 1e-9));
  m0 = std::max(m0, 1);
  return {delta, l_x / (2 * M_PI * m0)};
}

RollParams roll_optimal_params(double epsilon, const DomainSpec& d) {
  return roll_optimal_params(epsilon, d.l_x());
}

Design build_roll(const RollParams& p, const DomainSpec& d) {
  if (!(p.delta > 0 && p.delta <= 0.5)) throw InvalidArgument("roll delta must lie in (0, 1/2]");
  if (!(p.l > 0)) throw InvalidArgument("roll width must be positive");
  int m0 = mode_index(d.l_x(), p.l, "roll");
  if (m0 > d.M()) throw ResolutionError("roll mode exceeds the mode cutoff M");
  SpectralField psi(d), xi(d);
  const double a = kPsiAmplitude * std::sqrt(p.l) / 2;
  for (int j = 0; j < d.N_z(); ++j) {
    double chi = roll_chi(p.delta, d.z_grid()(j));
    psi.coeff(m0, j) = a * chi;
    psi.coeff(-m0, j) = a * chi;
    xi.coeff(m0, j) = cplx(0, a * chi);
    xi.coeff(-m0, j) = cplx(0, -a * chi);
  }
  Design out{streamfunction_to_velocity(psi), xi, {}};
  out.xi *= 1 / inner(out.u.u_z, out.xi);
  return out;
}

DomainSpec roll_cell(const RollParams& p, int M, int N_z, double stretch) {
  return build_domain(2 * M_PI * p.l, M, N_z, stretch);
}

BranchingParams branching_params(double epsilon, double l_x) {
  if (!(epsilon > 0 && epsilon < 1)) throw InvalidArgument("epsilon must lie in (0, 1)");
  if (!(l_x > 0)) throw InvalidArgument("l_x must be positive");
  BranchingParams p;
  p.epsilon = epsilon;
  p.l_x = l_x;
  const double L = std::log(1 / epsilon);
  const double s6 = std::pow(epsilon * L, 1.0 / 6);
  const double s3 = s6 * s6;
  p.k_bulk = static_cast<int>(std::ceil(l_x / (M_PI * s6)));
  if (p.k_bulk < 1) throw Infeasible("k_bulk < 1");
  const double l_bulk = l_x / (2 * M_PI * p.k_bulk);
  p.c1 = std::pow(l_bulk / s6, 2);
  // n - 1 < log2(2 pi / (s3 k_bulk)) <= n
  p.n = std::max(1, static_cast<int>(std::ceil(std::log2(2 * M_PI / (s3 * p.k_bulk)))));
  for (int k = 1; k <= p.n; ++k) {
    p.l.push_back(l_bulk / std::pow(2.0, k - 1));
    p.z.push_back(1 - p.c1 / std::pow(4.0, k - 1));
  }
  return p;
}

std::vector<std::string> validate_branching(const BranchingParams& p) {
  constexpr double C = 8;  // implicit constant in the ~ and <~ relations
  std::vector<std::string> v;
  const int n = p.n;
  if (n < 1 || static_cast<int>(p.z.size()) != n || static_cast<int>(p.l.size()) != n) {
    v.push_back("shape: n must match the lengths of z and l");
    return v;
  }
  bool zok = p.z[0] > 0.5 && p.z[n - 1] < 1;
  for (int k = 0; k + 1 < n; ++k) zok = zok && p.z[k] < p.z[k + 1];
  if (!zok) v.push_back("zk_inequalities: need 1/2 < z_1 < ... < z_n < 1");
  bool lok = true;
  for (int k = 0; k + 1 < n; ++k) lok = lok && p.l[k] > p.l[k + 1];
  if (!lok) v.push_back("lk_inequalities: need l_1 > ... > l_n");
  for (int k = 0; k + 1 < n; ++k)
    if (std::abs(p.l[k + 1] - p.l[k] / 2) > 1e-12 * p.l[k])
      v.push_back("l_relations: l_" + std::to_string(k + 2) + " != l_" + std::to_string(k + 1) + "/2");
  if (p.l_x > 0)
    for (int k = 0; k < n; ++k) {
      double m = p.l_x / (2 * M_PI * p.l[k]);
      if (std::abs(m - std::round(m)) > 1e-9 * std::max(1.0, m) || std::round(m) < 1)
        v.push_back("admissible wavenumber: 1/l_" + std::to_string(k + 1) + " not in (2 pi/l_x) N");
    }
  if (zok) {
    std::vector<double> dl(n);
    for (int k = 0; k + 1 < n; ++k) dl[k] = p.z[k + 1] - p.z[k];
    dl[n - 1] = 1 - p.z[n - 1];
    for (int k = 0; k + 1 < n; ++k)
      if (dl[k + 1] > C * dl[k])
        v.push_back("assumption2-0: delta_" + std::to_string(k + 2) + " > C delta_" + std::to_string(k + 1));
    if (lok)
      for (int k = 0; k + 1 < n; ++k)
        if (p.l[k] > C * dl[k])
          v.push_back("assumption2-1: l_" + std::to_string(k + 1) + " > C delta_" + std::to_string(k + 1) +
                      " (" + fmt(p.l[k] / dl[k]) + ")");
    double r = dl[n - 1] / p.l[n - 1];
    if (r > C || r < 1 / C) v.push_back("assumption2-1: delta_n / l_n = " + fmt(r) + " not ~ 1");
    if (p.z[0] - 0.5 < 1 / C) v.push_back("assumption3: z_1 - 1/2 = " + fmt(p.z[0] - 0.5) + " not ~ 1");
  }
  if (lok && p.l_x > 0) {
    std::set<long> sum, diff;
    for (int k = 0; k + 1 < n; ++k) {
      long a = std::lround(p.l_x / (2 * M_PI * p.l[k])), b = std::lround(p.l_x / (2 * M_PI * p.l[k + 1]));
      sum.insert(a + b);
      diff.insert(b - a);
    }
    for (long s : sum)
      if (diff.count(s)) {
        v.push_back("nointerference: sum and difference wavenumbers coincide");
        break;
      }
  }
  return v;
}

double branching_chi(const BranchingParams& p, int j, double z) {
  const int n = p.n;
  if (j < 1 || j > n) throw InvalidArgument("layer index out of range");
  z = std::max(z, 1 - z);  // symmetric about 1/2
  const auto& Z = p.z;
  auto layer = [&](int k) { return Z[k] - Z[k - 1]; };  // delta_{k} for 1-based k = index
  // rising side on [z_{j-1}, z_j]
  if (j > 1 && z >= Z[j - 2] && z <= Z[j - 1]) return cutoff_f((Z[j - 1] - z) / layer(j - 1));
  if (j == 1 && z <= Z[0]) return 1;
  // falling side above z_j
  if (z >= Z[j - 1]) {
    if (j == n) return cutoff_g((z - Z[n - 1]) / (1 - Z[n - 1]));
    if (z <= Z[j]) return cutoff_f((z - Z[j - 1]) / layer(j));
  }
  return 0;
}

double branching_chi_prime(const BranchingParams& p, int j, double z) {
  const int n = p.n;
  if (j < 1 || j > n) throw InvalidArgument("layer index out of range");
  const double sgn = z < 0.5 ? -1 : 1;
  z = std::max(z, 1 - z);
  const auto& Z = p.z;
  auto layer = [&](int k) { return Z[k] - Z[k - 1]; };
  if (j > 1 && z >= Z[j - 2] && z <= Z[j - 1])
    return -sgn * cutoff_f_prime((Z[j - 1] - z) / layer(j - 1)) / layer(j - 1);
  if (j == 1 && z <= Z[0]) return 0;
  if (z >= Z[j - 1]) {
    if (j == n) return sgn * cutoff_g_prime((z - Z[n - 1]) / (1 - Z[n - 1])) / (1 - Z[n - 1]);
    if (z <= Z[j]) return sgn * cutoff_f_prime((z - Z[j - 1]) / layer(j)) / layer(j);
  }
  return 0;
}

double branching_chi_second(const BranchingParams& p, int j, double z) {
  const int n = p.n;
  if (j < 1 || j > n) throw InvalidArgument("layer index out of range");
  z = std::max(z, 1 - z);
  const auto& Z = p.z;
  auto layer = [&](int k) { return Z[k] - Z[k - 1]; };
  if (j > 1 && z >= Z[j - 2] && z <= Z[j - 1]) {
    const double h = layer(j - 1);
    return cutoff_f_second((Z[j - 1] - z) / h) / (h * h);
  }
  if (j == 1 && z <= Z[0]) return 0;
  if (z >= Z[j - 1]) {
    if (j == n) {
      const double h = 1 - Z[n - 1];
      return cutoff_g_second((z - Z[n - 1]) / h) / (h * h);
    }
    if (z <= Z[j]) {
      const double h = layer(j);
      return cutoff_f_second((z - Z[j - 1]) / h) / (h * h);
    }
  }
  return 0;
}

std::vector<int> branching_modes(const BranchingParams& p, const DomainSpec& d) {
  std::vector<int> m;
  for (double l : p.l) m.push_back(mode_index(d.l_x(), l, "branching"));
  return m;
}

std::vector<int> branching_sum_modes(const BranchingParams& p, const DomainSpec& d) {
  auto m = branching_modes(p, d);
  std::vector<int> s;
  for (size_t k = 0; k + 1 < m.size(); ++k) s.push_back(m[k] + m[k + 1]);
  return s;
}

std::vector<int> branching_diff_modes(const BranchingParams& p, const DomainSpec& d) {
  auto m = branching_modes(p, d);
  std::vector<int> s;
  for (size_t k = 0; k + 1 < m.size(); ++k) s.push_back(m[k + 1] - m[k]);
  return s;
}

BranchingDesign build_branching(const BranchingParams& p, const DomainSpec& d) {
  auto bad = validate_branching(p);
  BranchingDesign out;
  out.params = p;
  if (p.n < 1 || static_cast<int>(p.z.size()) != p.n || static_cast<int>(p.l.size()) != p.n)
    throw InvalidArgument("malformed branching parameters");
  for (auto& s : bad) out.warnings.push_back(s);
  if (p.n < 2) out.warnings.push_back("n < 2: degenerate branching, equivalent to a roll");
  auto m = branching_modes(p, d);
  int need = m.back();
  if (p.n >= 2) need = 2 * (m[p.n - 2] + m[p.n - 1]);
  if (need > d.M()) throw ResolutionError("mode cutoff M below twice the largest interaction mode");
  SpectralField psi(d);
  for (int j = 1; j <= p.n; ++j) {
    // psi_j = l_j c0 cos(x / l_j)
    const double a = p.l[j - 1] * kPsiAmplitude / 2;
    const int mj = m[j - 1];
    for (int i = 0; i < d.N_z(); ++i) {
      double c = a * branching_chi(p, j, d.z_grid()(i));
      psi.coeff(mj, i) += c;
      psi.coeff(-mj, i) += c;
    }
  }
  out.u = streamfunction_to_velocity(psi);
  out.xi = out.u.u_z;
  out.xi_scale = 1 / inner(out.u.u_z, out.xi);
  out.xi *= out.xi_scale;
  return out;
}

SpectralField branching_advection_exact(const BranchingDesign& des) {
  const auto& p = des.params;
  const auto& d = des.u.domain();
  const double c0 = kPsiAmplitude, s = des.xi_scale;
  const int nx = d.nx(), nz = d.N_z();
  Eigen::MatrixXd chi(p.n, nz), dchi(p.n, nz);
  for (int j = 0; j < p.n; ++j)
    for (int i = 0; i < nz; ++i) {
      chi(j, i) = branching_chi(p, j + 1, d.z_grid()(i));
      dchi(j, i) = branching_chi_prime(p, j + 1, d.z_grid()(i));
    }
  // psi_j = l_j c0 cos(x/l_j): u_x = -sum chi_j' l_j c0 cos, w = -sum chi_j c0 sin,
  // xi_x = -s sum chi_j (c0/l_j) cos, xi_z = -s sum chi_j' c0 sin
  Eigen::MatrixXd J(nx, nz);
  for (int a = 0; a < nx; ++a) {
    const double x = d.l_x() * a / nx;
    for (int i = 0; i < nz; ++i) {
      double ux = 0, w = 0, gx = 0, gz = 0;
      for (int j = 0; j < p.n; ++j) {
        const double c = std::cos(x / p.l[j]), sn = std::sin(x / p.l[j]);
        ux -= dchi(j, i) * p.l[j] * c0 * c;
        w -= chi(j, i) * c0 * sn;
        gx -= s * chi(j, i) * c0 / p.l[j] * c;
        gz -= s * dchi(j, i) * c0 * sn;
      }
      J(a, i) = ux * gx + w * gz;
    }
  }
  return from_physical(d, J);
}

BranchingDesign build_branching(double epsilon, const DomainSpec& d) {
  return build_branching(branching_params(epsilon, d.l_x()), d);
}

double branching_stretch(const BranchingParams& p) {
  return 0.5 * std::log(1 / (1 - p.z.back()));
}

DomainSpec branching_cell(const BranchingParams& p, int N_z, double stretch, int M) {
  const double lc = p.l_x / p.k_bulk;
  if (M <= 0) M = p.n >= 2 ? 2 * 3 * (1 << (p.n - 2)) : 1;
  return build_domain(lc, M, N_z, stretch);
}

namespace {

// psi = sum_j a_j chi_j(z) cos(x / l_j) with distinct l_j; xi = w / avg(w^2).
// Integrals over the upper half, doubled; panels split at the given edges.
struct Layer {
  double a, l;
  std::function<double(double)> chi, d1, d2;
};

DesignNorms layered_norms(const std::vector<Layer>& layers, std::vector<double> edges, int panels) {
  using G = boost::math::quadrature::gauss<double, 20>;
  edges.push_back(0.5);
  edges.push_back(1.0);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  double energy = 0, enstrophy = 0, wsq = 0, gradw = 0;
  for (const auto& L : layers) {
    const double k = 1 / L.l, a = L.a;
    auto integrand = [&](double z, int which) {
      const double c = L.chi(z), c1 = L.d1(z), c2 = L.d2(z);
      switch (which) {
        case 0:  // |u|^2: u_x = -a chi' cos, w = -a k chi sin
          return a * a * (c1 * c1 + k * k * c * c);
        case 1:  // |grad u|^2
          return a * a * (k * k * c1 * c1 + c2 * c2 + k * k * k * k * c * c + k * k * c1 * c1);
        case 2:
          return a * a * k * k * c * c;
        default:  // |grad w|^2
          return a * a * k * k * (k * k * c * c + c1 * c1);
      }
    };
    for (size_t e = 0; e + 1 < edges.size(); ++e) {
      const double lo = edges[e], hi = edges[e + 1];
      if (hi <= 0.5) continue;
      for (int q = 0; q < panels; ++q) {
        const double p0 = lo + (hi - lo) * q / panels, p1 = lo + (hi - lo) * (q + 1) / panels;
        energy += G::integrate([&](double z) { return integrand(z, 0); }, p0, p1);
        enstrophy += G::integrate([&](double z) { return integrand(z, 1); }, p0, p1);
        wsq += G::integrate([&](double z) { return integrand(z, 2); }, p0, p1);
        gradw += G::integrate([&](double z) { return integrand(z, 3); }, p0, p1);
      }
    }
  }
  // x-average of cos^2 is 1/2; the two halves double it back
  DesignNorms n{energy, enstrophy, wsq, 0};
  n.grad_xi = gradw / (wsq * wsq);
  return n;
}

}  // namespace

DesignNorms roll_norms_exact(const RollParams& p) {
  if (!(p.delta > 0 && p.delta <= 0.5) || !(p.l > 0)) throw InvalidArgument("invalid roll parameters");
  const double d = p.delta;
  Layer L{kPsiAmplitude * std::sqrt(p.l), p.l, [d](double z) { return roll_chi(d, z); },
          [d](double z) { return roll_chi_prime(d, z); }, [d](double z) { return roll_chi_second(d, z); }};
  return layered_norms({L}, {1 - d}, 64);
}

DesignNorms branching_norms_exact(const BranchingParams& p) {
  if (p.n < 1 || static_cast<int>(p.z.size()) != p.n || static_cast<int>(p.l.size()) != p.n)
    throw InvalidArgument("malformed branching parameters");
  std::vector<Layer> layers;
  for (int j = 1; j <= p.n; ++j)
    layers.push_back({kPsiAmplitude * p.l[j - 1], p.l[j - 1], [&p, j](double z) { return branching_chi(p, j, z); },
                      [&p, j](double z) { return branching_chi_prime(p, j, z); },
                      [&p, j](double z) { return branching_chi_second(p, j, z); }});
  return layered_norms(layers, p.z, 64);
}

std::string roll_params_to_json(const RollParams& p) {
  nlohmann::json j{{"type", "roll"}, {"delta", p.delta}, {"l", p.l}};
  return j.dump();
}

std::string branching_params_to_json(const BranchingParams& p) {
  nlohmann::json j{{"type", "branching"}, {"n", p.n},   {"z", p.z},
                   {"l", p.l},           {"k_bulk", p.k_bulk}, {"c1", p.c1},
                   {"epsilon", p.epsilon}, {"l_x", p.l_x}};
  return j.dump();
}

}  // namespace w2w
