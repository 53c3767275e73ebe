#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "w2w/designs.hpp"

using namespace w2w;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  static fs::path dir = [] {
    auto p = fs::temp_directory_path() / ("w2w_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::stringstream ss(text);
  for (std::string l; std::getline(ss, l);) v.push_back(l);
  return v;
}

// drop the trailing wall_time_s column
std::string strip_time(const std::string& csv) {
  std::string out;
  for (auto& l : lines(csv)) out += l.substr(0, l.rfind(',')) + "\n";
  return out;
}

const std::vector<std::string> kSmallRoll = {"--design", "roll", "--modes", "8", "--nz", "48"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("grid parsing") {
  auto g = cli::parse_grid("1e2..1e4", 5);
  REQUIRE(g.size() == 5);
  CHECK(g.front() == 100.0);
  CHECK(g.back() == 10000.0);
  CHECK(g[2] == doctest::Approx(1000).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(std::pow(10.0, 2.5)).epsilon(1e-14));
  CHECK(cli::parse_grid("0.5", 3) == std::vector<double>{0.5});
  CHECK(cli::parse_grid("1,2,5", 0) == std::vector<double>{1, 2, 5});
  CHECK_THROWS_AS(cli::parse_grid("1e4..1e2", 5), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_grid("1..2", 1), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_grid("2,1", 0), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_grid("1,1", 0), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_grid("0..1", 3), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_grid("-1", 1), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_grid("abc", 1), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_grid("1e2x", 1), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_grid("", 1), cli::ConfigError);
}

TEST_CASE("sweep CSV header matches the golden file") {
  const auto csv = scratch() / "golden.csv";
  auto r = run(cat({"sweep", "--epsilon", "1e-2..1e-1", "--points", "3", "--out", csv.string()}, kSmallRoll));
  REQUIRE(r.code == 0);
  const auto golden = slurp(fs::path(W2W_TEST_DIR) / "golden" / "sweep_header.csv");
  auto got = lines(slurp(csv));
  REQUIRE(got.size() == 4);
  CHECK(got[0] + "\n" == golden);
  CHECK(got[0] == cli::kCsvHeader);
  // 17 significant digits: every float survives a text round trip
  auto rows = cli::read_csv(csv.string());
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].epsilon == 1e-2);
  CHECK(rows[2].epsilon == 1e-1);
  CHECK(rows[1].n_layers == 1);
  CHECK(cli::csv_row(rows[0]).substr(0, 40) == got[1].substr(0, 40));

  auto summary = nlohmann::json::parse(slurp(csv.string() + ".summary.json"));
  CHECK(summary["design"] == "roll");
  CHECK(summary["fits"]["rows"] == 3);
  for (auto key : {"nu_vs_pe", "nu_minus_one_vs_pe", "E_vs_epsilon"}) CHECK(summary["fits"].contains(key));
  CHECK(summary["fits"]["E_vs_epsilon"]["exponent"].is_number());
}

TEST_CASE("sweep output is deterministic and ordered under a worker pool") {
  const auto a = scratch() / "a.csv", b = scratch() / "b.csv";
  auto base = cat({"sweep", "--pe", "3,10,30,100"}, kSmallRoll);
  REQUIRE(run(cat(base, {"--out", a.string(), "--jobs", "1"})).code == 0);
  REQUIRE(run(cat(base, {"--out", b.string(), "--jobs", "3"})).code == 0);
  CHECK(strip_time(slurp(a)) == strip_time(slurp(b)));
  auto rows = cli::read_csv(b.string());
  REQUIRE(rows.size() == 4);
  for (size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].pe > rows[i - 1].pe);
  for (auto& r : rows) CHECK(r.transport.nu_direct <= 1 + r.pe / 2);

  // fit reproduces the sweep summary
  auto f = run({"fit", "--in", a.string()});
  REQUIRE(f.code == 0);
  auto fj = nlohmann::json::parse(f.out);
  auto sj = nlohmann::json::parse(slurp(a.string() + ".summary.json"));
  CHECK(fj == sj["fits"]);
}

TEST_CASE("validate is reproducible under a fixed seed") {
  auto a = run({"validate", "--seed", "7", "--points", "2"});
  auto b = run({"validate", "--seed", "7", "--points", "2"});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("FAIL") == std::string::npos);
  CHECK(lines(a.out).size() >= 20);
  auto c = run({"validate", "--seed", "8", "--points", "2"});
  CHECK(c.code == 0);
  CHECK(c.out != a.out);
}

TEST_CASE("evaluate reports and the duality gap") {
  auto r = run({"evaluate", "--design", "branching", "--epsilon", "1e-6"});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  const double nu = j["transport"]["nu_direct"], p = j["transport"]["nu_primal"], d = j["transport"]["nu_dual"];
  CHECK(std::abs(p - d) <= 1e-6 * nu);
  CHECK(j["pe"] == doctest::Approx(1000).epsilon(1e-12));
  CHECK(j["norm"] == "enstrophy");
  CHECK(j["design"]["type"] == "branching");
  CHECK(j["n_layers"] == j["design"]["n"]);
  const double E = j["efficiency"]["total_E"], adv = j["efficiency"]["advection"], prod = j["efficiency"]["product"];
  CHECK(E == doctest::Approx(adv + prod).epsilon(1e-12));

  auto roll = run(cat({"evaluate", "--pe", "50"}, kSmallRoll));
  REQUIRE(roll.code == 0);
  auto rj = nlohmann::json::parse(roll.out);
  CHECK(rj["norm"] == "energy");
  CHECK(rj["transport"]["pe_energy"] == doctest::Approx(50).epsilon(1e-10));
}

TEST_CASE("file designs, config files and flag precedence") {
  auto d = build_domain(2 * M_PI, 4, 32);
  auto psi = SpectralField::from_function(d, [](double x, double z) {
    const double s = std::sin(M_PI * z);
    return s * s * std::cos(x);
  });
  const auto path = scratch() / "flow.json";
  std::ofstream(path) << "{\"psi\": " << field_to_json(psi) << "}";
  auto r = run({"evaluate", "--design", "file", "--file", path.string(), "--pe", "20"});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["transport"]["pe_enstrophy"] == doctest::Approx(20).epsilon(1e-10));
  CHECK(j["efficiency"]["constraint_residual"].get<double>() <= 1e-12);
  // without a Pe the flow keeps its own intensity
  auto own = nlohmann::json::parse(run({"evaluate", "--design", "file", "--file", path.string()}).out);
  CHECK(own["pe"] == doctest::Approx(enstrophy_norm(streamfunction_to_velocity(psi))).epsilon(1e-12));

  const auto cfg = scratch() / "run.toml";
  std::ofstream(cfg) << "design = \"roll\"\nepsilon = \"1e-2\"\nmodes = 8\nnz = 48\n";
  auto c1 = nlohmann::json::parse(run({"evaluate", "--config", cfg.string()}).out);
  CHECK(c1["epsilon"] == doctest::Approx(1e-2));
  auto c2 = nlohmann::json::parse(run({"evaluate", "--config", cfg.string(), "--epsilon", "2e-2"}).out);
  CHECK(c2["epsilon"] == doctest::Approx(2e-2));
}

TEST_CASE("bound certificates") {
  auto r = run(cat({"bound", "--epsilon", "1e-2", "--norm", "enstrophy"}, kSmallRoll));
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  REQUIRE(j.size() == 1);
  const double nu = j[0]["nu_direct"];
  std::vector<std::string> kinds;
  for (auto& c : j[0]["certificates"]) {
    kinds.push_back(c["kind"]);
    if (c["kind"] != "howard_lower") CHECK(c["value"].get<double>() >= nu * (1 - 1e-8));
  }
  CHECK(kinds == std::vector<std::string>{"energy", "symmetrization", "symmetrization_apriori", "howard_lower"});
  CHECK(j[0]["certificates"][1]["profile"]["z"].size() >= 3);

  // energy-normalized flows get no a priori certificate
  auto e = nlohmann::json::parse(run(cat({"bound", "--epsilon", "1e-2"}, kSmallRoll)).out);
  CHECK(e[0]["certificates"].size() == 3);
}

TEST_CASE("exit codes") {
  CHECK(run({}).code == cli::kExitConfig);
  CHECK(run({"bogus"}).code == cli::kExitConfig);
  CHECK(run({"evaluate", "--design", "cube", "--epsilon", "1e-2"}).code == cli::kExitConfig);
  CHECK(run({"evaluate", "--design", "roll"}).code == cli::kExitConfig);
  CHECK(run({"evaluate", "--epsilon", "1e-2", "--pe", "10"}).code == cli::kExitConfig);
  CHECK(run({"evaluate", "--epsilon", "1e-3..1e-2", "--points", "3"}).code == cli::kExitConfig);
  CHECK(run({"evaluate", "--epsilon", "0"}).code == cli::kExitConfig);
  CHECK(run({"evaluate", "--design", "roll", "--epsilon", "0.9"}).code == cli::kExitConfig);  // delta > 1/2
  CHECK(run({"evaluate", "--design", "file", "--file", "/nonexistent.json"}).code == cli::kExitConfig);
  CHECK(run({"fit", "--in", "/nonexistent.csv"}).code == cli::kExitConfig);
  const auto bad = scratch() / "bad.csv";
  std::ofstream(bad) << "a,b\n1,2\n";
  auto fb = run({"fit", "--in", bad.string()});
  CHECK(fb.code == cli::kExitConfig);
  CHECK(fb.err.find("header") != std::string::npos);
  CHECK(run({"--help"}).code == 0);

  auto s = run(cat({"evaluate", "--epsilon", "1e-2", "--max-iter", "2"}, kSmallRoll));
  CHECK(s.code == cli::kExitSolver);
  CHECK(s.err.find("solver failure") != std::string::npos);

  std::vector<suite::CheckResult> ok{{"a", true, 0, 1, 1, ""}}, failed{{"a", true, 0, 1, 1, ""}, {"b", false, 2, 1, 1, ""}};
  std::ostringstream err;
  CHECK(cli::check_status(ok, err) == cli::kExitOk);
  CHECK(cli::check_status(failed, err) == cli::kExitInvariant);
  CHECK(err.str() == "invariant failure: b\n");
}
