#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "w2w/bounds.hpp"
#include "w2w/designs.hpp"

namespace w2w::cli {

using nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ordered_json num(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double parse_positive(const std::string& s) {
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("not a number: '" + s + "'");
  if (!(v > 0) || !std::isfinite(v)) throw ConfigError("grid values must be positive: '" + s + "'");
  return v;
}

struct Built {
  VelocityField u;  // rescaled to pe
  EfficiencyReport eff;
  double epsilon, pe;
  bool enstrophy;
  int n_layers;
  double l_bulk, l_bl;
  ordered_json design;
};

bool pick_enstrophy(const PointSpec& s, bool fallback) {
  if (s.norm == "auto") return fallback;
  if (s.norm == "enstrophy") return true;
  if (s.norm == "energy") return false;
  throw ConfigError("--norm must be auto, energy or enstrophy");
}

Built build(const PointSpec& s) {
  Built b;
  if ((s.epsilon > 0) == (s.pe > 0) && s.design != "file") throw ConfigError("give exactly one of epsilon, pe");
  b.epsilon = s.epsilon > 0 ? s.epsilon : (s.pe > 0 ? 1 / (s.pe * s.pe) : 0);
  b.pe = s.pe > 0 ? s.pe : (s.epsilon > 0 ? 1 / std::sqrt(s.epsilon) : 0);
  if (s.design == "roll") {
    b.enstrophy = pick_enstrophy(s, false);
    auto p = roll_optimal_params(b.epsilon, s.l_x);
    auto d = roll_cell(p, s.modes > 0 ? s.modes : 64, s.n_z > 0 ? s.n_z : 192, 0.5 * std::log(1 / p.delta) + 0.2);
    auto des = build_roll(p, d);
    b.eff = efficiency_roll(des, p, b.epsilon, b.enstrophy);
    b.u = rescale_to_pe(des.u, b.pe, b.enstrophy);
    b.n_layers = 1;
    b.l_bulk = b.l_bl = p.l;
    b.design = ordered_json::parse(roll_params_to_json(p));
  } else if (s.design == "branching") {
    b.enstrophy = pick_enstrophy(s, true);
    auto p = branching_params(b.epsilon, s.l_x);
    auto d = branching_cell(p, s.n_z > 0 ? s.n_z : 160, branching_stretch(p), s.modes);
    auto des = build_branching(p, d);
    b.eff = b.enstrophy ? efficiency_branching(des, b.epsilon) : efficiency_energy(des.u, des.xi, b.epsilon);
    b.u = rescale_to_pe(des.u, b.pe, b.enstrophy);
    b.n_layers = p.n;
    b.l_bulk = p.l.front();
    b.l_bl = p.l.back();
    b.design = ordered_json::parse(branching_params_to_json(p));
  } else if (s.design == "file") {
    if (s.file.empty()) throw ConfigError("--design file needs --file");
    b.enstrophy = pick_enstrophy(s, true);
    ordered_json j;
    try {
      j = ordered_json::parse(read_file(s.file));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(s.file + ": " + e.what());
    }
    if (!j.contains("psi")) throw ConfigError(s.file + ": missing \"psi\"");
    auto u = streamfunction_to_velocity(field_from_json(j["psi"].dump()));
    SpectralField xi = j.contains("xi") ? field_from_json(j["xi"].dump()) : (1 / inner(u.u_z, u.u_z)) * u.u_z;
    const double own = b.enstrophy ? enstrophy_norm(u) : energy_norm(u);
    if (b.pe == 0) {
      b.pe = own;
      b.epsilon = 1 / (own * own);
    }
    b.eff = b.enstrophy ? efficiency_enstrophy(u, xi, b.epsilon) : efficiency_energy(u, xi, b.epsilon);
    b.u = rescale_to_pe(u, b.pe, b.enstrophy);
    b.n_layers = 0;
    b.l_bulk = b.l_bl = kNaN;
    b.design = {{"type", "file"}, {"path", s.file}};
  } else {
    throw ConfigError("--design must be roll, branching or file");
  }
  return b;
}

ordered_json certificate_json(const BoundCertificate& c) {
  ordered_json j{{"kind", c.kind}, {"value", num(c.value)}, {"delta", num(c.delta)}, {"lambda", num(c.lambda)}};
  if (!c.profile.z.empty()) j["profile"] = {{"z", c.profile.z}, {"eta", c.profile.eta}};
  return j;
}

ordered_json fit_json(const std::vector<std::pair<double, double>>& s) {
  try {
    auto f = fit_scaling(s);
    return {{"exponent", f.exponent}, {"prefactor", f.prefactor}, {"r_squared", f.r_squared}, {"samples", s.size()}};
  } catch (const InvalidArgument& e) {
    return nullptr;
  }
}

// Runs f(i) for i < n on a pool of `jobs` threads; results stay indexed by
// input.  The first failure by index is rethrown.
template <class F>
void parallel_for(int n, int jobs, F f) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i; (i = next++) < n;) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min(jobs, n); ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  f << text;
}

}  // namespace

std::vector<double> parse_grid(const std::string& text, int points) {
  if (text.empty()) throw ConfigError("empty grid");
  std::vector<double> g;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const double lo = parse_positive(text.substr(0, dots)), hi = parse_positive(text.substr(dots + 2));
    if (points < 2) throw ConfigError("a range needs --points >= 2");
    if (!(hi > lo)) throw ConfigError("range must increase: " + text);
    for (int i = 0; i < points; ++i)
      g.push_back(i == 0 ? lo : i == points - 1 ? hi : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (points - 1)));
  } else {
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) g.push_back(parse_positive(item));
  }
  for (size_t i = 1; i < g.size(); ++i)
    if (!(g[i] > g[i - 1])) throw ConfigError("grid must increase strictly: " + text);
  return g;
}

PointResult evaluate_point(const PointSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  auto b = build(spec);
  PointResult r;
  r.epsilon = b.epsilon;
  r.pe = b.pe;
  r.norm = b.enstrophy ? "enstrophy" : "energy";
  r.n_layers = b.n_layers;
  r.l_bulk = b.l_bulk;
  r.l_bl = b.l_bl;
  r.design = b.design;
  r.efficiency = b.eff;
  SolverOptions opt;
  opt.tol = spec.tol;
  opt.max_iter = spec.max_iter;
  r.transport = transport_report(b.u, opt);
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string csv_row(const PointResult& r) {
  const auto& e = r.efficiency;
  const double prod = e.epsilon * e.enstrophy_u * e.grad_xi;
  std::string s;
  for (double v : {r.epsilon, r.pe, r.transport.nu_direct, r.transport.nu_primal, r.transport.nu_dual, e.total_E,
                   e.advection, prod})
    s += g17(v) + ",";
  s += std::to_string(r.n_layers) + "," + g17(r.l_bulk) + "," + g17(r.l_bl) + "," + g17(r.wall_time_s);
  return s;
}

std::vector<PointResult> read_csv(const std::string& path) {
  std::stringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ConfigError(path + ": header does not match the sweep schema");
  std::vector<PointResult> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) {
      try {
        v.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw ConfigError(path + ": bad value '" + c + "'");
      }
    }
    if (v.size() != 12) throw ConfigError(path + ": expected 12 columns");
    PointResult r;
    r.epsilon = v[0];
    r.pe = v[1];
    r.transport.nu_direct = v[2];
    r.transport.nu_primal = v[3];
    r.transport.nu_dual = v[4];
    r.efficiency.total_E = v[5];
    r.efficiency.advection = v[6];
    r.n_layers = static_cast<int>(v[8]);
    r.l_bulk = v[9];
    r.l_bl = v[10];
    r.wall_time_s = v[11];
    rows.push_back(r);
  }
  return rows;
}

ordered_json fit_rows(const std::vector<PointResult>& rows) {
  std::vector<std::pair<double, double>> nu, nu1, E;
  for (auto& r : rows) {
    nu.push_back({r.pe, r.transport.nu_direct});
    if (r.transport.nu_direct > 1) nu1.push_back({r.pe, r.transport.nu_direct - 1});
    E.push_back({r.epsilon, r.efficiency.total_E});
  }
  return {{"rows", rows.size()},
          {"nu_vs_pe", fit_json(nu)},
          {"nu_minus_one_vs_pe", fit_json(nu1)},
          {"E_vs_epsilon", fit_json(E)}};
}

ordered_json to_json(const PointResult& r) {
  const auto& t = r.transport;
  const auto& e = r.efficiency;
  return {{"design", r.design},
          {"norm", r.norm},
          {"epsilon", r.epsilon},
          {"pe", r.pe},
          {"transport",
           {{"nu_direct", t.nu_direct},
            {"nu_primal", t.nu_primal},
            {"nu_dual", t.nu_dual},
            {"pe_energy", t.pe_energy},
            {"pe_enstrophy", t.pe_enstrophy},
            {"res_direct", t.res_direct},
            {"res_primal", t.res_primal},
            {"res_dual", t.res_dual},
            {"nu_identity_defect", t.nu_identity_defect},
            {"max_principle_ok", t.max_principle_ok}}},
          {"efficiency",
           {{"epsilon", e.epsilon},
            {"advection", e.advection},
            {"enstrophy_u", e.enstrophy_u},
            {"grad_xi", e.grad_xi},
            {"total_E", e.total_E},
            {"product", e.epsilon * e.enstrophy_u * e.grad_xi},
            {"analytic_bound", num(e.analytic_bound)},
            {"constraint_residual", e.constraint_residual},
            {"nu_lower", e.nu_lower}}},
          {"n_layers", r.n_layers},
          {"l_bulk", num(r.l_bulk)},
          {"l_bl", num(r.l_bl)},
          {"wall_time_s", r.wall_time_s}};
}

int check_status(const std::vector<suite::CheckResult>& results, std::ostream& err) {
  for (auto& r : results)
    if (!r.pass) {
      err << "invariant failure: " << r.name << "\n";
      return kExitInvariant;
    }
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"wall-to-wall transport designs, bounds and sweeps", "w2w"};
  app.set_config("--config", "", "TOML/INI file with option values; flags override");
  app.require_subcommand(1);

  PointSpec spec;
  std::string eps_grid, pe_grid, out_path = "-", summary_path, in_path;
  int points = 5, jobs = 1;
  unsigned long seed = 7;
  app.add_option("--design", spec.design, "roll | branching | file")->check(CLI::IsMember({"roll", "branching", "file"}));
  app.add_option("--file", spec.file, "streamfunction JSON for --design file");
  app.add_option("--norm", spec.norm, "auto | energy | enstrophy")->check(CLI::IsMember({"auto", "energy", "enstrophy"}));
  auto* eo = app.add_option("--epsilon", eps_grid, "value, list a,b,c or log range lo..hi");
  auto* po = app.add_option("--pe", pe_grid, "value, list a,b,c or log range lo..hi");
  eo->excludes(po);
  app.add_option("--points", points, "points in a lo..hi range; samples per check for validate");
  app.add_option("--lx", spec.l_x, "horizontal period")->check(CLI::PositiveNumber);
  app.add_option("--modes", spec.modes, "Fourier modes M (0: design default)")->check(CLI::NonNegativeNumber);
  app.add_option("--nz", spec.n_z, "collocation nodes in z (0: design default)")->check(CLI::NonNegativeNumber);
  app.add_option("--tol", spec.tol, "Krylov tolerance")->check(CLI::PositiveNumber);
  app.add_option("--max-iter", spec.max_iter, "Krylov iteration cap (0: solver default)")->check(CLI::NonNegativeNumber);
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "seed for randomized checks");
  app.add_option("--out", out_path, "output path, - for stdout");

  auto* evaluate = app.add_subcommand("evaluate", "transport and efficiency report for one design")->fallthrough();
  auto* sweep = app.add_subcommand("sweep", "CSV over an epsilon or Pe grid plus fitted exponents")->fallthrough();
  sweep->add_option("--summary", summary_path, "summary JSON path (default <out>.summary.json)");
  auto* fit = app.add_subcommand("fit", "fit exponents in an existing sweep CSV")->fallthrough();
  fit->add_option("--in", in_path, "sweep CSV")->required();
  auto* validate = app.add_subcommand("validate", "run the invariant suite")->fallthrough();
  auto* bound = app.add_subcommand("bound", "upper-bound certificates for designs")->fallthrough();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    auto grid = [&]() -> std::vector<std::pair<double, double>> {
      std::vector<std::pair<double, double>> g;  // (epsilon, pe)
      if (!eps_grid.empty())
        for (double e : parse_grid(eps_grid, points)) g.push_back({e, 0});
      else if (!pe_grid.empty())
        for (double p : parse_grid(pe_grid, points)) g.push_back({0, p});
      else if (spec.design == "file")
        g.push_back({0, 0});
      else
        throw ConfigError("give --epsilon or --pe");
      return g;
    };
    auto points_for = [&](const std::vector<std::pair<double, double>>& g) {
      std::vector<PointSpec> v;
      for (auto [e, p] : g) {
        PointSpec s = spec;
        s.epsilon = e;
        s.pe = p;
        v.push_back(s);
      }
      return v;
    };

    if (*evaluate) {
      auto g = grid();
      if (g.size() != 1) throw ConfigError("evaluate takes a single epsilon or Pe");
      auto r = evaluate_point(points_for(g)[0]);
      emit(out_path, to_json(r).dump(2) + "\n", out);
      const double gap = std::abs(r.transport.nu_primal - r.transport.nu_dual);
      if (gap > 1e-6 * r.transport.nu_direct) {
        err << "invariant failure: duality_gap " << g17(gap / r.transport.nu_direct) << "\n";
        return kExitInvariant;
      }
    } else if (*sweep) {
      auto specs = points_for(grid());
      std::vector<PointResult> rows(specs.size());
      parallel_for(static_cast<int>(specs.size()), jobs, [&](int i) { rows[i] = evaluate_point(specs[i]); });
      std::string csv = std::string(kCsvHeader) + "\n";
      for (auto& r : rows) csv += csv_row(r) + "\n";
      emit(out_path, csv, out);
      ordered_json summary{{"design", spec.design}, {"norm", rows.front().norm}, {"fits", fit_rows(rows)}};
      std::string sp = !summary_path.empty() ? summary_path : (out_path == "-" ? "" : out_path + ".summary.json");
      if (!sp.empty()) emit(sp, summary.dump(2) + "\n", out);
    } else if (*fit) {
      emit(out_path, fit_rows(read_csv(in_path)).dump(2) + "\n", out);
    } else if (*validate) {
      if (points < 1) throw ConfigError("--points must be positive");
      auto results = suite::full_suite(seed, points);
      std::string text;
      for (auto& r : results) text += suite::format_result(r) + "\n";
      emit(out_path, text, out);
      if (const int code = check_status(results, err)) return code;
    } else if (*bound) {
      auto specs = points_for(grid());
      std::vector<Built> built(specs.size());
      std::vector<double> nu(specs.size());
      parallel_for(static_cast<int>(specs.size()), jobs, [&](int i) {
        built[i] = build(specs[i]);
        SolverOptions opt;
        opt.tol = spec.tol;
        opt.max_iter = spec.max_iter;
        nu[i] = nu_direct_full(built[i].u, opt).nu;
      });
      // one eta_delta table for every enstrophy-normalized point
      double pe_max = 0;
      for (auto& b : built)
        if (b.enstrophy) pe_max = std::max(pe_max, b.pe);
      std::vector<DeltaConstraint> table;
      if (pe_max > 0) {
        const double dmin = std::clamp(0.5 * std::cbrt(200 / (pe_max * pe_max)), 1e-3, 0.25);
        table = eta_delta_constraints(spec.l_x, 16, dmin, jobs);
      }
      ordered_json all = ordered_json::array();
      for (size_t i = 0; i < built.size(); ++i) {
        auto& b = built[i];
        ordered_json certs = ordered_json::array();
        certs.push_back(certificate_json(energy_certificate(b.u)));
        certs.push_back(certificate_json(symmetrization_bound_min(b.u, 24)));
        if (b.enstrophy) {
          auto a = certificate_json(apriori_bound(table, b.pe));
          a["kind"] = "symmetrization_apriori";
          certs.push_back(a);
        }
        auto h = certificate_json(howard_lower_bound(b.epsilon));
        h["kind"] = "howard_lower";
        certs.push_back(h);
        all.push_back({{"design", b.design},
                       {"norm", b.enstrophy ? "enstrophy" : "energy"},
                       {"epsilon", b.epsilon},
                       {"pe", b.pe},
                       {"nu_direct", nu[i]},
                       {"certificates", certs}});
      }
      emit(out_path, all.dump(2) + "\n", out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Infeasible& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ResolutionError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const OptimizerFailure& e) {
    err << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitOk;
}

}  // namespace w2w::cli
