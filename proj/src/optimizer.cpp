#include "w2w/optimizer.hpp"

#include <algorithm>
#include <cmath>
using std::isnan;  // pchip.hpp calls isnan unqualified
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <deque>
#include <functional>
#include <limits>
#include <random>

#include "w2w/advection.hpp"

namespace w2w {

namespace {

void check_pair(const VelocityField& u, const SpectralField& xi, double epsilon) {
  if (!(epsilon > 0)) throw InvalidArgument("epsilon must be positive");
  if (!u.domain().same_as(xi.domain())) throw InvalidArgument("u and xi live on different domains");
  const double flux = inner(u.u_z, xi);
  if (std::abs(flux - 1) > 1e-8) throw InvalidArgument("net-flux constraint avg(w xi) = 1 violated");
  const int N = xi.domain().N_z();
  const double scale = std::max(1.0, xi.coeffs().cwiseAbs().maxCoeff());
  if (xi.coeffs().col(0).cwiseAbs().maxCoeff() > 1e-10 * scale ||
      xi.coeffs().col(N - 1).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw InvalidArgument("xi must vanish on the walls");
}

EfficiencyReport efficiency(const VelocityField& u, const SpectralField& xi, double epsilon, double norm_u) {
  check_pair(u, xi, epsilon);
  EfficiencyReport r;
  r.epsilon = epsilon;
  r.advection = advection_term(u, xi);
  r.enstrophy_u = norm_u * norm_u;
  r.grad_xi = grad_inner(xi, xi);
  r.total_E = r.advection + epsilon * r.enstrophy_u * r.grad_xi;
  r.analytic_bound = std::numeric_limits<double>::quiet_NaN();
  r.constraint_residual = std::abs(inner(u.u_z, xi) - 1);
  r.pe = 1 / std::sqrt(epsilon);
  r.nu_lower = 1 + 1 / r.total_E;
  return r;
}

}  // namespace

EfficiencyReport efficiency_enstrophy(const VelocityField& u, const SpectralField& xi, double epsilon,
                                      const BranchingParams* params) {
  auto r = efficiency(u, xi, epsilon, enstrophy_norm(u));
  if (params) r.analytic_bound = analytic_branching_bound(*params, epsilon);
  return r;
}

EfficiencyReport efficiency_energy(const VelocityField& u, const SpectralField& xi, double epsilon) {
  return efficiency(u, xi, epsilon, energy_norm(u));
}

namespace {

EfficiencyReport efficiency_exact(const Design& des, const DesignNorms& n, double epsilon, bool enstrophy) {
  check_pair(des.u, des.xi, epsilon);
  EfficiencyReport r;
  r.epsilon = epsilon;
  r.advection = advection_term(des.u, des.xi);
  r.enstrophy_u = enstrophy ? n.enstrophy_u : n.energy_u;
  r.grad_xi = n.grad_xi;
  r.total_E = r.advection + epsilon * r.enstrophy_u * r.grad_xi;
  r.analytic_bound = std::numeric_limits<double>::quiet_NaN();
  r.constraint_residual = std::abs(inner(des.u.u_z, des.xi) - 1);
  r.pe = 1 / std::sqrt(epsilon);
  r.nu_lower = 1 + 1 / r.total_E;
  return r;
}

}  // namespace

EfficiencyReport efficiency_branching(const BranchingDesign& des, double epsilon) {
  auto r = efficiency_exact(des, branching_norms_exact(des.params), epsilon, true);
  r.analytic_bound = analytic_branching_bound(des.params, epsilon);
  return r;
}

EfficiencyReport efficiency_roll(const Design& des, const RollParams& p, double epsilon, bool enstrophy) {
  return efficiency_exact(des, roll_norms_exact(p), epsilon, enstrophy);
}

VelocityField rescale_to_pe(const VelocityField& u, double pe, bool enstrophy) {
  const double n = enstrophy ? enstrophy_norm(u) : energy_norm(u);
  if (!(n > 0)) throw InvalidArgument("cannot rescale a zero flow");
  return u.scaled(pe / n);
}

double analytic_branching_bound(const BranchingParams& p, double epsilon) {
  const int n = p.n;
  if (n < 1 || static_cast<int>(p.z.size()) != n || static_cast<int>(p.l.size()) != n)
    throw InvalidArgument("malformed branching parameters");
  const double l_bulk = p.l.front(), l_bl = p.l.back();
  double grad = 0, inv = 0;
  if (n >= 2) {
    std::function<double(double)> ell, dell;
    if (n >= 4) {
      auto spline = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(
          std::vector<double>(p.z), std::vector<double>(p.l));
      ell = [spline](double z) { return (*spline)(z); };
      dell = [spline](double z) { return spline->prime(z); };
    } else {
      auto seg = [&p](double z) {
        int k = 0;
        while (k + 2 < p.n && z > p.z[k + 1]) ++k;
        return k;
      };
      ell = [&p, seg](double z) {
        int k = seg(z);
        double t = (z - p.z[k]) / (p.z[k + 1] - p.z[k]);
        return p.l[k] + t * (p.l[k + 1] - p.l[k]);
      };
      dell = [&p, seg](double z) {
        int k = seg(z);
        return (p.l[k + 1] - p.l[k]) / (p.z[k + 1] - p.z[k]);
      };
    }
    using G = boost::math::quadrature::gauss<double, 20>;
    for (int k = 0; k + 1 < n; ++k) {
      grad += G::integrate([&](double z) { return dell(z) * dell(z); }, p.z[k], p.z[k + 1]);
      inv += G::integrate([&](double z) { return 1 / (ell(z) * ell(z)); }, p.z[k], p.z[k + 1]);
    }
  }
  const double s = 1 / (l_bulk * l_bulk) + inv + 1 / l_bl;
  return l_bl + grad + epsilon * s * s;
}

std::vector<double> lengthscale_grid(double z_bulk, double z_bl, int n_grid) {
  std::vector<double> g(n_grid);
  const double a = std::log(1 - z_bulk), b = std::log(1 - z_bl);
  for (int i = 0; i < n_grid; ++i) g[i] = 1 - std::exp(a + (b - a) * i / (n_grid - 1));
  g.front() = z_bulk;
  g.back() = z_bl;
  return g;
}

namespace {

// objective and gradient with respect to the nodal values of l
double lengthscale_eval(const std::vector<double>& z, const std::vector<double>& ell, double eps, bool busse,
                        std::vector<double>* grad) {
  const int n = static_cast<int>(z.size());
  double grad_term = 0, inv = 0;
  for (int i = 0; i + 1 < n; ++i) {
    const double h = z[i + 1] - z[i], d = ell[i + 1] - ell[i];
    if (!busse) grad_term += d * d / h;
    inv += h / (ell[i] * ell[i + 1]);  // exact for linear l
  }
  const double S = 1 / (ell[0] * ell[0]) + inv + 1 / ell[n - 1];
  const double F = ell[n - 1] + grad_term + eps * S * S;
  if (grad) {
    auto& g = *grad;
    g.assign(n, 0.0);
    g[n - 1] += 1;
    std::vector<double> dS(n, 0.0);
    dS[0] += -2 / (ell[0] * ell[0] * ell[0]);
    dS[n - 1] += -1 / (ell[n - 1] * ell[n - 1]);
    for (int i = 0; i + 1 < n; ++i) {
      const double h = z[i + 1] - z[i];
      dS[i] += -h / (ell[i] * ell[i] * ell[i + 1]);
      dS[i + 1] += -h / (ell[i] * ell[i + 1] * ell[i + 1]);
      if (!busse) {
        const double d = 2 * (ell[i + 1] - ell[i]) / h;
        g[i + 1] += d;
        g[i] -= d;
      }
    }
    for (int i = 0; i < n; ++i) g[i] += 2 * eps * S * dS[i];
  }
  return F;
}

struct SpgResult {
  std::vector<double> x;
  double f;
  int iterations;
  bool converged;
  std::vector<double> trace;
};

// Spectral projected gradient with nonmonotone line search on a box.
SpgResult spg(const std::function<double(const std::vector<double>&, std::vector<double>&)>& fg,
              std::vector<double> x, const std::vector<double>& lo, const std::vector<double>& hi, int max_iter,
              double tol) {
  const int n = static_cast<int>(x.size());
  auto project = [&](std::vector<double>& v) {
    for (int i = 0; i < n; ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
  };
  project(x);
  std::vector<double> g(n), xn(n), gn(n), d(n);
  double f = fg(x, g);
  std::deque<double> hist{f};
  SpgResult r;
  double alpha = 1e-6;
  auto pgnorm = [&]() {
    double m = 0;
    for (int i = 0; i < n; ++i) m = std::max(m, std::abs(std::clamp(x[i] - g[i], lo[i], hi[i]) - x[i]));
    return m;
  };
  double xscale = 0;
  for (double v : x) xscale = std::max(xscale, std::abs(v));
  for (int it = 0; it < max_iter; ++it) {
    r.trace.push_back(f);
    if (pgnorm() <= tol * std::max(xscale, 1e-12)) {
      r.converged = true;
      r.iterations = it;
      r.x = x;
      r.f = f;
      return r;
    }
    for (int i = 0; i < n; ++i) d[i] = std::clamp(x[i] - alpha * g[i], lo[i], hi[i]) - x[i];
    double gd = 0;
    for (int i = 0; i < n; ++i) gd += g[i] * d[i];
    const double fmax = *std::max_element(hist.begin(), hist.end());
    double lam = 1, fn = 0;
    for (int ls = 0; ls < 60; ++ls) {
      for (int i = 0; i < n; ++i) xn[i] = x[i] + lam * d[i];
      fn = fg(xn, gn);
      if (std::isfinite(fn) && fn <= fmax + 1e-4 * lam * gd) break;
      lam *= 0.5;
    }
    double ss = 0, sy = 0;
    for (int i = 0; i < n; ++i) {
      const double s = xn[i] - x[i], y = gn[i] - g[i];
      ss += s * s;
      sy += s * y;
    }
    x.swap(xn);
    g.swap(gn);
    f = fn;
    hist.push_back(f);
    if (hist.size() > 10) hist.pop_front();
    alpha = sy > 0 ? std::clamp(ss / sy, 1e-30, 1e30) : 1e30;
    xscale = 0;
    for (double v : x) xscale = std::max(xscale, std::abs(v));
  }
  r.converged = false;
  r.iterations = max_iter;
  r.x = x;
  r.f = f;
  return r;
}

}  // namespace

double lengthscale_objective(const std::vector<double>& grid, const std::vector<double>& ell, double epsilon,
                             bool busse) {
  if (grid.size() != ell.size() || grid.size() < 2) throw InvalidArgument("grid and profile sizes differ");
  return lengthscale_eval(grid, ell, epsilon, busse, nullptr);
}

LengthscaleProfile solve_1d_lengthscale(double epsilon, double z_bulk, double z_bl, int n_grid,
                                        const LengthscaleOptions& opt) {
  if (!(epsilon > 0)) throw InvalidArgument("epsilon must be positive");
  if (!(0.5 < z_bulk && z_bulk < z_bl && z_bl < 1)) throw InvalidArgument("need 1/2 < z_bulk < z_bl < 1");
  if (n_grid < 32) throw InvalidArgument("n_grid must be at least 32");
  const auto z = lengthscale_grid(z_bulk, z_bl, n_grid);
  const int n = n_grid;
  // unknowns: x[0] = l_bl, x[i] = l_{i-1} - l_i >= 0 (i = 1..n-1)
  std::vector<double> lo(n, 0.0), hi(n);
  lo[0] = 1e-12;
  hi[0] = 10;
  for (int i = 1; i < n; ++i) hi[i] = opt.max_slope * (z[i] - z[i - 1]);
  auto to_ell = [&](const std::vector<double>& x) {
    std::vector<double> ell(n);
    ell[n - 1] = x[0];
    for (int i = n - 2; i >= 0; --i) ell[i] = ell[i + 1] + x[i + 1];
    return ell;
  };
  std::vector<double> gl;
  auto fg = [&](const std::vector<double>& x, std::vector<double>& g) {
    auto ell = to_ell(x);
    double f = lengthscale_eval(z, ell, epsilon, opt.busse, &gl);
    // chain rule: dl_i/dx_0 = 1, dl_i/dx_j = 1 for i < j
    g.assign(n, 0.0);
    double acc = 0;
    for (int i = 0; i < n; ++i) {
      acc += gl[i];
      if (i + 1 < n) g[i + 1] = acc;
    }
    g[0] = acc;
    return f;
  };

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U(0, 1);
  std::vector<std::vector<double>> starts;
  {
    // power-law ansatz
    const double L = std::log(1 / epsilon);
    const double c = std::pow(epsilon * L, 1.0 / 6);
    std::vector<double> x(n);
    x[0] = c * std::sqrt(1 - z_bl);
    for (int i = 1; i < n; ++i) x[i] = c * (std::sqrt(1 - z[i - 1]) - std::sqrt(1 - z[i]));
    starts.push_back(x);
  }
  for (int r = 0; r < opt.restarts; ++r) {
    std::vector<double> x(n);
    x[0] = std::exp(std::log(1e-4) + U(rng) * (std::log(0.5) - std::log(1e-4)));
    const double frac = std::exp(std::log(1e-3) + U(rng) * (0 - std::log(1e-3)));
    for (int i = 1; i < n; ++i) x[i] = frac * U(rng) * hi[i];
    starts.push_back(x);
  }

  LengthscaleProfile best;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<double> best_trace;
  bool any = false;
  for (auto& x0 : starts) {
    auto res = spg(fg, x0, lo, hi, opt.max_iter, opt.tol);
    if (res.f < best.objective || best_trace.empty()) best_trace = res.trace;
    if (!res.converged) continue;
    if (!any || res.f < best.objective) {
      any = true;
      best.grid = z;
      best.ell = to_ell(res.x);
      best.objective = res.f;
      best.iterations = res.iterations;
    }
  }
  if (!any) throw OptimizerFailure("1D lengthscale problem did not converge from any start", best_trace);
  best.l_bulk = best.ell.front();
  best.l_bl = best.ell.back();
  for (int i = 0; i + 1 < n; ++i)
    best.max_slope = std::max(best.max_slope, (best.ell[i] - best.ell[i + 1]) / (z[i + 1] - z[i]));
  return best;
}

std::pair<double, double> power_law_fit(const std::vector<double>& grid, const std::vector<double>& ell,
                                        double power) {
  if (grid.size() != ell.size() || grid.size() < 2) throw InvalidArgument("grid and profile sizes differ");
  // trapezoid rule in z
  auto integrate = [&](const std::function<double(int)>& f) {
    double s = 0;
    for (size_t i = 0; i + 1 < grid.size(); ++i) s += 0.5 * (grid[i + 1] - grid[i]) * (f(i) + f(i + 1));
    return s;
  };
  auto phi = [&](int i) { return std::pow(1 - grid[i], power); };
  const double c = integrate([&](int i) { return ell[i] * phi(i); }) / integrate([&](int i) { return phi(i) * phi(i); });
  const double dev = integrate([&](int i) { return std::pow(ell[i] - c * phi(i), 2); });
  const double nrm = integrate([&](int i) { return ell[i] * ell[i]; });
  return {c, std::sqrt(dev / nrm)};
}

ScalingFit fit_scaling(const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 2) throw InvalidArgument("need at least two samples");
  double xmin = std::numeric_limits<double>::infinity(), xmax = 0;
  for (auto [x, y] : samples) {
    if (!(x > 0 && y > 0)) throw InvalidArgument("samples must be positive");
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
  }
  if (xmax < 10 * xmin * (1 - 1e-12)) throw InvalidArgument("samples must span at least one decade in x");
  const double n = static_cast<double>(samples.size());
  double sx = 0, sy = 0;
  for (auto [x, y] : samples) {
    sx += std::log(x);
    sy += std::log(y);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (auto [x, y] : samples) {
    const double a = std::log(x) - mx, b = std::log(y) - my;
    sxx += a * a;
    sxy += a * b;
    syy += b * b;
  }
  const double slope = sxy / sxx;
  const double res = syy - slope * sxy;
  const double r2 = syy > 0 ? 1 - std::max(0.0, res) / syy : 1.0;
  return {slope, std::exp(my - slope * mx), r2};
}

}  // namespace w2w
