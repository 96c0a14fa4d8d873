#include "optosync/commands.hpp"
#include "optosync/covariance.hpp"
#include "optosync/discord.hpp"
#include "optosync/metrics.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

using namespace optosync;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("optosync_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

KeyValueConfig config(const std::string& text) { return KeyValueConfig::parse_string(text); }

int run(const std::string& command, const std::string& text, const fs::path& out) {
  std::ostringstream log;
  return run_command(command, config(text), out, log);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string header_of(const fs::path& p) {
  const std::string text = slurp(p);
  return text.substr(0, text.find('\n'));
}

std::vector<std::vector<std::string>> rows_of(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

nlohmann::json summary(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "summary.json")); }

const std::string kCovarianceHeaderStart = "t,V_qm_qm,V_qm_pm,";

}  // namespace

TEST_CASE("key registry") {
  for (const std::string cmd : {"simulate", "variance", "sweep", "oracle"}) {
    const auto keys = keys_for(cmd);
    CHECK(keys.count("eta") == 1);
    CHECK(keys.count("horizon") == 1);
  }
  CHECK(keys_for("sweep").count("eta_grid") == 1);
  CHECK(keys_for("simulate").count("eta_grid") == 0);
  CHECK(keys_for("oracle").count("n_traj") == 1);
  for (const auto& k : documented_keys()) CHECK_FALSE(k.commands.empty());
  std::ostringstream table;
  print_key_reference(table);
  CHECK(table.str().find("zero_initial_covariance  ") != std::string::npos);
}

TEST_CASE("configuration problems exit with 2") {
  TempDir dir("config");
  CHECK(run("simulate", "no_such_key = 1", dir.path) == exit_code::config);
  CHECK(run("simulate", "kappa = -1", dir.path) == exit_code::config);
  CHECK(run("sweep", "eta_grid = 3000, 2000", dir.path) == exit_code::config);
  CHECK(run("variance", "temperatures = 0, 0.01\nn_bar = 2", dir.path) == exit_code::config);
  CHECK(run("oracle", "n_traj = 50", dir.path) == exit_code::config);
  CHECK(run("frobnicate", "", dir.path) == exit_code::config);
}

TEST_CASE("numerical failures exit with 3") {
  TempDir dir("numerical");
  CHECK(run("simulate", "method = rk4\nstep = 5\nstride = 5\nhorizon = 5000\nwindow = 1000", dir.path) ==
        exit_code::numerical);
}

TEST_CASE("simulate writes its files and detects locking") {
  TempDir dir("simulate");
  REQUIRE(run("simulate", "horizon = 20000\nwindow = 5000", dir.path) == exit_code::ok);
  CHECK(header_of(dir.path / "trajectory.csv") == "t,q_c,p_c,q_m,p_m,q_d,p_d");
  CHECK(header_of(dir.path / "phases.csv") ==
        "t,phi_m,phi_d,sum,diff,sin_sum,sin_diff,n_m,n_d,var_phase_sum,S_p,S_a");
  const auto j = summary(dir.path);
  CHECK(j["command"] == "simulate");
  CHECK(j["samples"] == 80001);
  CHECK(j["oscillating"] == true);
  CHECK(j["locked"] == true);
  CHECK(j["trailing_std"].get<double>() < 0.1);
  CHECK(j["sin_diff_peak_to_peak"].get<double>() > 1.5);
  CHECK(rows_of(dir.path / "phases.csv").size() == 80001);
}

TEST_CASE("simulate: output decimation") {
  TempDir dir("decimate");
  REQUIRE(run("simulate", "horizon = 1000\nwindow = 200\noutput_every = 10", dir.path) == exit_code::ok);
  CHECK(rows_of(dir.path / "trajectory.csv").size() == 401);
}

TEST_CASE("without atom coupling there is no phase locking") {
  TempDir dir("nolock");
  REQUIRE(run("simulate", "g_d = 0\nhorizon = 3000\nwindow = 1000", dir.path) == exit_code::ok);
  CHECK(summary(dir.path)["locked"] == false);
}

TEST_CASE("without drive there is no oscillation") {
  TempDir dir("nodrive");
  REQUIRE(run("simulate", "eta = 0\nhorizon = 3000\nwindow = 1000", dir.path) == exit_code::ok);
  CHECK(summary(dir.path)["oscillating"] == false);
}

TEST_CASE("variance: files, determinism and temperature ordering") {
  TempDir a("variance_a"), b("variance_b");
  const std::string cfg = "horizon = 400\ntransient = 100";
  REQUIRE(run("variance", cfg, a.path) == exit_code::ok);
  REQUIRE(run("variance", cfg, b.path) == exit_code::ok);
  for (const char* name : {"covariance_T0.csv", "covariance_T1.csv", "variance_T0.csv", "variance_T1.csv"}) {
    CHECK(slurp(a.path / name) == slurp(b.path / name));
  }
  CHECK(header_of(a.path / "covariance_T0.csv").rfind(kCovarianceHeaderStart, 0) == 0);
  CHECK(header_of(a.path / "variance_T1.csv") ==
        "t,phi_m,phi_d,sum,diff,sin_sum,sin_diff,n_m,n_d,var_phase_sum,S_p,S_a");
  const auto j = summary(a.path);
  CHECK(j["temperature_count"] == 2);
  CHECK(j["T1_n_bar"].get<double>() == doctest::Approx(130.42).epsilon(1e-4));
  CHECK(j["T0_worst_min_uncertainty_eigenvalue"].get<double>() >= -1e-8);
  CHECK(j["fraction_T0_le_T1"].get<double>() == 1.0);
}

TEST_CASE("variance: a single temperature writes unsuffixed files") {
  TempDir dir("variance_single");
  REQUIRE(run("variance", "temperature = 0.01\nhorizon = 200\ntransient = 50", dir.path) == exit_code::ok);
  CHECK(fs::exists(dir.path / "covariance.csv"));
  CHECK(fs::exists(dir.path / "variance.csv"));
  CHECK_FALSE(fs::exists(dir.path / "covariance_T0.csv"));
}

TEST_CASE("variance: no noise and no initial fluctuations give zero variance") {
  TempDir dir("variance_zero");
  REQUIRE(run("variance",
              "temperature = 0\nhorizon = 300\ntransient = 100\nzero_diffusion = true\n"
              "zero_initial_covariance = true",
              dir.path) == exit_code::ok);
  const auto rows = rows_of(dir.path / "variance.csv");
  REQUIRE(rows.size() == 301);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][9]) == 0.0);
  for (const auto& r : rows_of(dir.path / "covariance.csv")) {
    for (std::size_t c = 1; c < r.size(); ++c) CHECK(std::stod(r[c]) == 0.0);
  }
}

TEST_CASE("single-point sweep matches a direct joint run plus discord") {
  TempDir dir("sweep_single");
  REQUIRE(run("sweep", "eta_grid = 3000\nhorizon = 2000\nwindow = 500", dir.path) == exit_code::ok);
  CHECK(header_of(dir.path / "sweep.csv") == "eta,locked_phase_sum,D_G,S_p,S_a,var_phase_sum");
  const auto rows = rows_of(dir.path / "sweep.csv");
  REQUIRE(rows.size() == 1);

  const SystemParams p = SystemParams::baseline();
  const auto js = propagate_joint(p, {}, initial_covariance(p.n_bar), 2000.0);
  const auto records = phase_records(js.trajectory);
  const auto lock = detect_locking(records, 500.0);
  const auto m = fluctuation_measures(js.covariance.back(), records.back());
  CHECK(std::stod(rows[0][0]) == 3000.0);
  CHECK(std::stod(rows[0][1]) == lock.locked_value);
  CHECK(std::stod(rows[0][2]) == gaussian_discord(js.covariance.back()));
  CHECK(std::stod(rows[0][3]) == m.S_p);
  CHECK(std::stod(rows[0][4]) == m.S_a);
  CHECK(std::stod(rows[0][5]) == m.var_phase_sum);
  CHECK(std::stod(rows[0][2]) >= 0.0);
}

TEST_CASE("sweep: failed points become NaN rows and exit 3") {
  TempDir dir("sweep_fail");
  // A 50-unit window at stride 1 holds too few samples for the locking test.
  CHECK(run("sweep", "eta_grid = 2000, 3000\nhorizon = 200\nwindow = 50", dir.path) == exit_code::numerical);
  const auto rows = rows_of(dir.path / "sweep.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][1] == "nan");
  CHECK(summary(dir.path)["failed_points"] == 2);
}

TEST_CASE("oracle: agreement and detection of a wrong drift") {
  TempDir ok("oracle_ok"), bad("oracle_bad");
  REQUIRE(run("oracle", "n_traj = 200\nhorizon = 1\nmc_step = 1e-3\nreport_times = 0.5, 1", ok.path) ==
          exit_code::ok);
  const std::string header = header_of(ok.path / "oracle.csv");
  CHECK(header.rfind("t,V_qm_qm,", 0) == 0);
  CHECK(header.find("SE_pc_pc") != std::string::npos);
  CHECK(rows_of(ok.path / "oracle.csv").size() == 2);
  CHECK(header_of(ok.path / "oracle_lyapunov.csv").rfind(kCovarianceHeaderStart, 0) == 0);
  const auto j = summary(ok.path);
  CHECK(j["pass"] == true);
  CHECK(j["max_z"].get<double>() <= 4.0);

  CHECK(run("oracle", "g_d = 1\nn_traj = 400\nhorizon = 5\nmc_step = 1e-3\nmc_drift_mode = paper", bad.path) ==
        exit_code::oracle_failure);
  CHECK(summary(bad.path)["pass"] == false);
}

TEST_CASE("command-line front end") {
  TempDir dir("frontend");
  const std::string base = std::string(OPTOSYNC_CLI_PATH) + " oracle --out " + dir.path.string() +
                           " --set n_traj=100 --set horizon=0.5 --set mc_step=1e-3";
  const int status = std::system((base + " --seed 7 > /dev/null 2>&1").c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(summary(dir.path)["seed"] == 7);

  const fs::path cfg = dir.path / "run.cfg";
  std::ofstream(cfg) << "horizon = 0.5\nbogus = 3\n";
  const int bad = std::system((std::string(OPTOSYNC_CLI_PATH) + " oracle --config " + cfg.string() + " --out " +
                               dir.path.string() + " > /dev/null 2>&1")
                                  .c_str());
  REQUIRE(WIFEXITED(bad));
  CHECK(WEXITSTATUS(bad) == exit_code::config);
}

TEST_CASE("rank correlation") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 1, 0, -5}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3, 4}, {1, 4, 9, 16.5}) == doctest::Approx(1.0));
  // Ties share their average rank: ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4).
  CHECK(spearman({1, 2, 2, 3}, {1, 2, 3, 4}) == doctest::Approx(4.5 / std::sqrt(4.5 * 5.0)));
  CHECK(std::isnan(spearman({1, 1, 1}, {1, 2, 3})));
  CHECK(std::isnan(spearman({1}, {1})));
}
