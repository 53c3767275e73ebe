#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "invariants.hpp"
#include "json.hpp"
#include "w2w/optimizer.hpp"
#include "w2w/transport.hpp"

namespace w2w::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitInvariant = 4;

inline constexpr const char* kCsvHeader =
    "epsilon,pe,nu_direct,nu_primal,nu_dual,E_total,E_advection,E_product,n_layers,l_bulk,l_bl,wall_time_s";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One sweep point.  Exactly one of epsilon, pe is positive; the other
// follows from pe = eps^{-1/2}.  Zero for modes / n_z picks the design default.
struct PointSpec {
  std::string design = "roll";  // roll | branching | file
  std::string file;             // JSON {"psi": field, "xi": field (optional)}
  std::string norm = "auto";    // auto | energy | enstrophy
  double epsilon = 0, pe = 0;
  double l_x = 2 * M_PI;
  int modes = 0, n_z = 0;
  double tol = 1e-10;
  int max_iter = 0;  // Krylov cap, 0: solver default
};

struct PointResult {
  double epsilon = 0, pe = 0;
  std::string norm;
  int n_layers = 0;
  double l_bulk = 0, l_bl = 0;
  TransportReport transport{};
  EfficiencyReport efficiency{};
  nlohmann::ordered_json design;
  double wall_time_s = 0;
};

// "lo..hi" (points log-spaced values), "a,b,c", or a single value.
std::vector<double> parse_grid(const std::string& text, int points);

PointResult evaluate_point(const PointSpec& spec);

// CSV line in kCsvHeader order, 17 significant digits.
std::string csv_row(const PointResult& r);

// Log-log fits of nu_direct, nu_direct - 1 against pe and E_total against
// epsilon; null entries where the samples do not support a fit.
nlohmann::ordered_json fit_rows(const std::vector<PointResult>& rows);
std::vector<PointResult> read_csv(const std::string& path);

nlohmann::ordered_json to_json(const PointResult& r);

// kExitInvariant, naming the first failed check on err, when any check fails.
int check_status(const std::vector<suite::CheckResult>& results, std::ostream& err);

// Runs the command line (without the program name).  Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace w2w::cli
