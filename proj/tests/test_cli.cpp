#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gci/cli.hpp"
#include "gci/error.hpp"
#include "gci/io.hpp"

using namespace gci;
using io::json;

namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(GCI_SOURCE_DIR) / "configs";

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "gci_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int run_main(std::vector<std::string> args) {
  args.insert(args.begin(), "gci");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("FNV-1a reference values") {
  CHECK(io::fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(io::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(io::hex64(0xabcull) == "0000000000000abc");
}

TEST_CASE("number formatting") {
  CHECK(io::format_number(0.0197680123, {}) == "0.019768");
  CHECK(io::format_number(1234567.0, {}) == "1.23457e+06");
  CHECK(io::format_number(0.1, {true}) == "0.10000000000000001");
  CHECK(io::format_number(std::nan(""), {}) == "NA");
  CHECK(io::number(std::numeric_limits<double>::infinity(), {}).is_null());
  CHECK(io::number(0.0197680123, {}).get<double>() == 0.019768);
}

TEST_CASE("rate grid CSV round trip") {
  RateGrid g;
  g.theta_axis = {0.5, 1.0};
  g.gamma_axis = {1.0, 2.0, 3.0};
  g.rho = {{0.1, 0.2, std::nan("")}, {0.4, 0.5, 0.6}};
  std::stringstream ss;
  io::write_rate_grid_csv(ss, g, {"contour", 1, 2}, {true});
  CHECK(ss.str().rfind("# gci", 0) == 0);
  const auto back = io::read_rate_grid_csv(ss);
  CHECK(back.theta_axis == g.theta_axis);
  CHECK(back.gamma_axis == g.gamma_axis);
  CHECK(std::isnan(back.rho[0][2]));
  CHECK(back.rho[1] == g.rho[1]);
}

TEST_CASE("config validation") {
  const json ok = json::parse(R"({"null": {"family": "gaussian", "point": 0},
                                  "alternative": {"family": "gaussian", "point": 1}})");
  const auto out = cli::run_command("index", ok);
  CHECK(out.result["rho"].get<double>() == doctest::Approx(0.125).epsilon(1e-6));
  CHECK(out.result["mode"] == "pairwise");

  json bad = ok;
  bad["gird_points"] = 10;
  CHECK_THROWS_AS(cli::run_command("index", bad), ConfigError);
  bad = ok;
  bad["null"]["famliy"] = "gaussian";
  CHECK_THROWS_AS(cli::run_command("index", bad), ConfigError);
  bad = ok;
  bad["null"]["family"] = "weibull";
  CHECK_THROWS_AS(cli::run_command("index", bad), ConfigError);
  CHECK_THROWS_AS(cli::run_command("frobnicate", ok), ConfigError);
  CHECK_THROWS_AS(cli::run_command("index", json::array()), ConfigError);
}

TEST_CASE("omitted bounds keep the default truncation") {
  auto cfg = cli::load_config(kConfigs / "example2.json");
  const auto out = cli::run_command("index", cfg);
  // Poisson lower bound was given: closed; upper omitted: default, open.
  CHECK(out.result["null"]["box"] == "[1, 50)");
  CHECK(out.result["alternative"]["box"] == "(0.5, 50)");
  CHECK(out.result["rho"].get<double>() == doctest::Approx(0.0227351).epsilon(1e-5));
}

TEST_CASE("provenance hash follows the effective config") {
  const json a = json::parse(R"({"null": {"family": "gaussian", "point": 0},
                                 "alternative": {"family": "gaussian", "point": 1}})");
  json b = a;
  b["threads"] = 4;
  CHECK(cli::config_hash("index", a) == cli::config_hash("index", b));
  CHECK(cli::config_hash("index", a) != cli::config_hash("contour", a));
  b["null"]["point"] = 0.5;
  CHECK(cli::config_hash("index", a) != cli::config_hash("index", b));
  const auto out = cli::run_command("index", a);
  CHECK(out.provenance.config_hash == cli::config_hash("index", a));
  CHECK(out.provenance.version == "0.1.0");
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit");
  CHECK(run_main({}) == 2);
  CHECK(run_main({"index"}) == 2);
  CHECK(run_main({"index", "--config", (dir / "missing.json").string()}) == 2);
  write(dir / "broken.json", "{ not json");
  CHECK(run_main({"index", "--config", (dir / "broken.json").string()}) == 2);
  write(dir / "unknown.json", R"({"null": {"family": "gaussian", "point": 0}, "alternative": {"family": "gaussian", "point": 1}, "x": 1})");
  CHECK(run_main({"index", "--config", (dir / "unknown.json").string()}) == 2);
  write(dir / "ok.json", R"({"null": {"family": "gaussian", "point": 0}, "alternative": {"family": "gaussian", "point": 1}})");
  CHECK(run_main({"index", "--config", (dir / "ok.json").string(), "--threads", "0"}) == 2);
  CHECK(run_main({"index", "--config", (dir / "ok.json").string(), "--out", (dir / "ok_out.json").string()}) == 0);
  CHECK(json::parse(slurp(dir / "ok_out.json"))["rho"].get<double>() == 0.125);
  // Feasibility fails for a threshold below the attainable mean log-ratio.
  write(dir / "infeasible.json", R"({"model": "families", "null": {"family": "lognormal"},
      "alternative": {"family": "exponential"}, "theta0": [1.28], "b": -5})");
  CHECK(run_main({"nonsep", "--config", (dir / "infeasible.json").string(), "--out", (dir / "x.json").string()}) == 2);
}

TEST_CASE("raw duplicates and thread independence of artifacts") {
  const auto dir = scratch("raw");
  const auto cfg = (kConfigs / "example1_contour.json").string();
  const auto p1 = dir / "c1.csv", p4 = dir / "c4.csv";
  REQUIRE(run_main({"contour", "--config", cfg, "--out", p1.string(), "--threads", "1", "--raw"}) == 0);
  REQUIRE(run_main({"contour", "--config", cfg, "--out", p4.string(), "--threads", "4"}) == 0);
  CHECK(fs::exists(dir / "c1.raw.csv"));
  CHECK_FALSE(fs::exists(dir / "c4.raw.csv"));
  CHECK(slurp(p1) == slurp(p4));

  std::ifstream in(dir / "c1.raw.csv");
  const auto grid = io::read_rate_grid_csv(in);
  CHECK(grid.theta_axis.size() == 36);
  CHECK(grid.rho.size() == 36);
}

TEST_CASE("simulate writes a curve and a fit record deterministically") {
  const auto dir = scratch("sim");
  write(dir / "sim.json", R"({"null": {"family": "lognormal"}, "alternative": {"family": "exponential"},
      "side": "type-I", "method": "tilted", "n_list": [50, 100, 150], "reps": 4000, "seed": 5})");
  const auto a = dir / "a.csv", b = dir / "b.csv";
  REQUIRE(run_main({"simulate", "--config", (dir / "sim.json").string(), "--out", a.string(), "--threads", "1"}) == 0);
  REQUIRE(run_main({"simulate", "--config", (dir / "sim.json").string(), "--out", b.string(), "--threads", "4"}) == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(dir / "a.fit.json") == slurp(dir / "b.fit.json"));
  const auto fit = json::parse(slurp(dir / "a.fit.json"));
  CHECK(fit["points_used"] == 3);
  CHECK(fit["slope"].get<double>() < 0.0);
  const auto text = slurp(a);
  CHECK(text.find("n,p_hat,std_err,ess,method") != std::string::npos);

  // A different seed changes the estimates.
  REQUIRE(run_main({"simulate", "--config", (dir / "sim.json").string(), "--out", (dir / "c.csv").string(), "--seed", "6"}) == 0);
  CHECK(slurp(a) != slurp(dir / "c.csv"));
}
