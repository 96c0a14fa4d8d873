#include "optosync/commands.hpp"

#include "optosync/covariance.hpp"
#include "optosync/csv.hpp"
#include "optosync/discord.hpp"
#include "optosync/meanfield.hpp"
#include "optosync/metrics.hpp"
#include "optosync/stochastic.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

namespace optosync {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::set<std::string> kAll{"simulate", "variance", "sweep", "oracle"};

std::vector<KeyDoc> build_registry() {
  std::vector<KeyDoc> keys = {
      {"omega_m", "1e7", "mechanical angular frequency [rad/s]; sets the time unit and n_bar", kAll},
      {"kappa", "1", "cavity decay rate / omega_m", kAll},
      {"gamma", "5e-6", "mechanical damping / omega_m", kAll},
      {"Gamma_a", "5e-6", "atomic decay rate / omega_m", kAll},
      {"Delta", "-1", "effective cavity detuning / omega_m", kAll},
      {"omega_sigma", "1", "atomic transition frequency / omega_m", kAll},
      {"g_m", "1e-5", "optomechanical coupling / omega_m", kAll},
      {"g_d", "1e-5", "atom-cavity coupling / omega_m", kAll},
      {"eta", "3000", "drive amplitude / omega_m", kAll},
      {"temperature", "0", "bath temperature [K]", kAll},
      {"n_bar", "derived", "thermal phonon number; derived from omega_m and temperature unless set", kAll},
      {"occupancy_convention", "bose_einstein", "bose_einstein: 1/(exp(x)-1); paper_literal: exp(-x)", kAll},
      {"initial_q_c", "0", "initial cavity amplitude quadrature", kAll},
      {"initial_p_c", "0", "initial cavity phase quadrature", kAll},
      {"initial_q_m", "0", "initial mechanical position", kAll},
      {"initial_p_m", "0", "initial mechanical momentum", kAll},
      {"initial_q_d", "0", "initial atomic quadrature q", kAll},
      {"initial_p_d", "0", "initial atomic quadrature p", kAll},
      {"method", "rk45 (simulate), rk8 (others)", "integrator: rk4, rk45 (adaptive Dormand-Prince) or rk8 (fixed-step DOP853)", kAll},
      {"step", "1e-3 (simulate), 0.02 (others)", "fixed step, or initial step for rk45", kAll},
      {"rtol", "1e-9", "relative tolerance (rk45)", kAll},
      {"atol", "1e-9", "absolute tolerance (rk45)", kAll},
      {"stride", "0.25 (simulate), 1 (others)", "output sampling interval", kAll},
      {"max_samples", "1e6", "cap on stored samples; the grid is decimated to fit", kAll},
      {"horizon", "2e5 (oracle: 50)", "end of the run in units of 1/omega_m", kAll},
      {"window", "1e4", "trailing window for locking and limit-cycle analysis", {"simulate", "sweep"}},
      {"lock_threshold", "0.1", "circular standard deviation [rad] below which the phase sum is locked", {"simulate", "sweep"}},
      {"drift_threshold", "1e-3", "relative per-period amplitude drift accepted as a limit cycle", {"simulate"}},
      {"output_every", "1", "write every k-th sample to the time-series CSVs", {"simulate", "variance"}},
      {"temperatures", "0,0.01", "list of temperatures [K]; one covariance run each (default when temperature is unset)", {"variance"}},
      {"transient", "5e4", "start of the post-transient interval for the variance summary", {"variance"}},
      {"drift_mode", "corrected", "drift matrix coupling: corrected (-sqrt2 g_d) or paper (-sqrt2 g_m)", {"variance", "sweep", "oracle"}},
      {"zero_diffusion", "false", "diagnostic: drop the noise term", {"variance"}},
      {"zero_initial_covariance", "false", "diagnostic: start from V0 = 0 (disables physicality checks)", {"variance"}},
      {"check_physicality", "true", "stop with an error when a stored covariance is unphysical", {"variance", "sweep"}},
      {"eta_grid", "1000:250:5000", "sweep values of eta, list or start:step:stop", {"sweep"}},
      {"readout_time", "horizon", "time at which discord and fluctuation measures are read", {"sweep"}},
      {"threads", "0", "worker threads, 0 = hardware concurrency", {"sweep", "oracle"}},
      {"discord_log_base", "2", "logarithm base of the discord: 2 or e", {"sweep"}},
      {"discord_sign", "standard", "standard (+f(sqrt eps)) or negative (-f(sqrt eps))", {"sweep"}},
      {"n_traj", "1e4", "Monte Carlo trajectories", {"oracle"}},
      {"seed", "1", "Monte Carlo seed", {"oracle"}},
      {"mc_step", "2.5e-4", "Euler-Maruyama step", {"oracle"}},
      {"mc_drift_mode", "corrected", "drift matrix used by the Monte Carlo ensemble", {"oracle"}},
      {"report_times", "horizon", "times at which the ensemble is compared", {"oracle"}},
      {"z_threshold", "4", "largest accepted |V_lyap - V_mc| / stderr", {"oracle"}},
  };
  return keys;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  return out;
}

void write_json(const fs::path& path, const Json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

// JSON has no representation for non-finite numbers; they are written as strings.
Json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

void add_params(Json& j, const SystemParams& p) {
  j["omega_m"] = p.omega_m;
  j["kappa"] = p.kappa;
  j["gamma"] = p.gamma;
  j["Gamma_a"] = p.Gamma_a;
  j["Delta"] = p.Delta;
  j["omega_sigma"] = p.omega_sigma;
  j["g_m"] = p.g_m;
  j["g_d"] = p.g_d;
  j["eta"] = p.eta;
  j["temperature"] = p.temperature;
  j["n_bar"] = p.n_bar;
  j["occupancy_convention"] = std::string(to_string(p.occupancy_convention));
}

void add_solver(Json& j, const SolverStats& s, const std::string& prefix = "solver_") {
  j[prefix + "method"] = s.method;
  j[prefix + "step"] = s.step;
  j[prefix + "rtol"] = s.rtol;
  j[prefix + "atol"] = s.atol;
  j[prefix + "stride"] = s.stride;
  j[prefix + "accepted_steps"] = s.accepted;
  j[prefix + "rejected_steps"] = s.rejected;
  j[prefix + "rhs_evaluations"] = s.rhs_evaluations;
}

std::size_t read_count(KeyValueConfig& cfg, const std::string& key, std::size_t fallback) {
  const auto v = cfg.get_uint(key, fallback);
  if (v == 0) throw ConfigError(key + " must be positive");
  return static_cast<std::size_t>(v);
}

double read_positive(KeyValueConfig& cfg, const std::string& key, double fallback) {
  const double v = cfg.get_double(key, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key + " must be positive and finite");
  return v;
}

unsigned resolve_threads(std::uint64_t requested) {
  if (requested == 0) return std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(requested);
}

template <typename T>
std::vector<T> every_kth(const std::vector<T>& v, std::size_t k) {
  if (k <= 1) return v;
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); i += k) out.push_back(v[i]);
  if (!v.empty() && (v.size() - 1) % k != 0) out.push_back(v.back());
  return out;
}

std::string indexed(const std::string& stem, std::size_t i, std::size_t count) {
  return count == 1 ? stem + ".csv" : stem + "_T" + std::to_string(i) + ".csv";
}

// Index of the stored sample closest to `t`, which must lie within half a stride.
std::size_t sample_at(const std::vector<double>& times, double t, double stride) {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  std::size_t best = times.size();
  double best_gap = std::numeric_limits<double>::infinity();
  for (auto c : {it, it == times.begin() ? it : std::prev(it)}) {
    if (c == times.end()) continue;
    const double gap = std::abs(*c - t);
    if (gap < best_gap) {
      best_gap = gap;
      best = static_cast<std::size_t>(c - times.begin());
    }
  }
  if (best == times.size() || best_gap > 0.5 * stride + 1e-9 * std::max(1.0, std::abs(t))) {
    throw ConfigError("time " + format_double(t) + " is not covered by the stored samples");
  }
  return best;
}

JointConfig joint_from_config(KeyValueConfig& cfg) {
  JointConfig jc;
  jc.solver = solver_from_config(cfg, JointConfig::default_solver());
  jc.drift = parse_drift_convention(cfg.get_string("drift_mode", "corrected"));
  return jc;
}

DiscordOptions discord_from_config(KeyValueConfig& cfg) {
  DiscordOptions opts;
  const auto base = cfg.get_string("discord_log_base", "2");
  if (base == "2") {
    opts.base = LogBase::Two;
  } else if (base == "e") {
    opts.base = LogBase::E;
  } else {
    throw ConfigError("discord_log_base must be 2 or e");
  }
  const auto sign = cfg.get_string("discord_sign", "standard");
  if (sign == "standard") {
    opts.negative_conditional_term = false;
  } else if (sign == "negative") {
    opts.negative_conditional_term = true;
  } else {
    throw ConfigError("discord_sign must be standard or negative");
  }
  return opts;
}

}  // namespace

const std::vector<KeyDoc>& documented_keys() {
  static const std::vector<KeyDoc> registry = build_registry();
  return registry;
}

std::set<std::string> keys_for(const std::string& command) {
  std::set<std::string> out;
  for (const auto& k : documented_keys()) {
    if (k.commands.count(command)) out.insert(k.name);
  }
  return out;
}

void print_key_reference(std::ostream& out) {
  std::size_t name_width = 0, default_width = 0;
  for (const auto& k : documented_keys()) {
    name_width = std::max(name_width, k.name.size());
    default_width = std::max(default_width, k.default_value.size());
  }
  for (const auto& k : documented_keys()) {
    std::string cmds;
    for (const auto& c : k.commands) cmds += (cmds.empty() ? "" : ",") + c;
    out << std::left << std::setw(static_cast<int>(name_width + 2)) << k.name
        << std::setw(static_cast<int>(default_width + 2)) << k.default_value << k.description << "  [" << cmds
        << "]\n";
  }
}

MeanFieldState<double> initial_state_from_config(KeyValueConfig& cfg) {
  MeanFieldState<double> s;
  s.x[mf::q_c] = cfg.get_double("initial_q_c", 0.0);
  s.x[mf::p_c] = cfg.get_double("initial_p_c", 0.0);
  s.x[mf::q_m] = cfg.get_double("initial_q_m", 0.0);
  s.x[mf::p_m] = cfg.get_double("initial_p_m", 0.0);
  s.x[mf::q_d] = cfg.get_double("initial_q_d", 0.0);
  s.x[mf::p_d] = cfg.get_double("initial_p_d", 0.0);
  if (!s.x.allFinite()) throw ConfigError("initial state must be finite");
  return s;
}

SolverConfig solver_from_config(KeyValueConfig& cfg, const SolverConfig& defaults) {
  SolverConfig s = defaults;
  s.method = parse_method(cfg.get_string("method", std::string(to_string(defaults.method))));
  s.step = read_positive(cfg, "step", defaults.step);
  s.rtol = read_positive(cfg, "rtol", defaults.rtol);
  s.atol = read_positive(cfg, "atol", defaults.atol);
  s.stride = read_positive(cfg, "stride", defaults.stride);
  s.max_samples = read_count(cfg, "max_samples", defaults.max_samples);
  return s;
}

int cmd_simulate(KeyValueConfig cfg, const fs::path& out_dir, std::ostream& log) {
  const SystemParams p = params_from_config(cfg);
  const auto initial = initial_state_from_config(cfg);
  SolverConfig defaults;
  defaults.method = Method::RK45;
  defaults.rtol = defaults.atol = 1e-9;
  defaults.stride = 0.25;
  const SolverConfig solver = solver_from_config(cfg, defaults);
  const double horizon = read_positive(cfg, "horizon", 2e5);
  const double window = read_positive(cfg, "window", 1e4);
  const double lock_threshold = read_positive(cfg, "lock_threshold", 0.1);
  const double drift_threshold = read_positive(cfg, "drift_threshold", 1e-3);
  const std::size_t every = read_count(cfg, "output_every", 1);
  cfg.ensure_known(keys_for("simulate"));
  ensure_directory(out_dir);

  log << "simulate: integrating to t = " << horizon << " with " << to_string(solver.method) << '\n';
  const TrajectorySeries series = integrate(p, initial, horizon, solver);
  const auto records = phase_records(series);
  const LockingReport lock = detect_locking(records, window, lock_threshold);
  const LimitCycleReport cycle = detect_limit_cycle(series, window, drift_threshold);
  const double diff_p2p = trailing_peak_to_peak_sin(records, window, false);
  const double sum_p2p = trailing_peak_to_peak_sin(records, window, true);

  {
    TrajectorySeries out = series;
    out.t = every_kth(series.t, every);
    out.x = every_kth(series.x, every);
    auto f = open_output(out_dir / "trajectory.csv");
    write_trajectory_csv(f, out);
  }
  {
    auto f = open_output(out_dir / "phases.csv");
    write_phase_csv(f, every_kth(records, every));
  }

  Json j;
  j["command"] = "simulate";
  add_params(j, p);
  j["horizon"] = horizon;
  j["window"] = window;
  j["samples"] = series.size();
  j["locked"] = lock.locked;
  j["locked_value"] = number(lock.locked_value);
  j["trailing_std"] = number(lock.trailing_std);
  j["lock_threshold"] = lock_threshold;
  j["sin_diff_peak_to_peak"] = diff_p2p;
  j["sin_sum_peak_to_peak"] = sum_p2p;
  j["oscillating"] = cycle.oscillating;
  j["limit_cycle_converged"] = cycle.converged;
  j["relative_drift"] = number(cycle.relative_drift);
  j["relative_drift_m"] = number(cycle.relative_drift_m);
  j["relative_drift_d"] = number(cycle.relative_drift_d);
  j["amplitude_m"] = cycle.amplitude_m;
  j["amplitude_d"] = cycle.amplitude_d;
  j["period_estimate"] = number(cycle.period_estimate);
  j["periods"] = cycle.periods;
  add_solver(j, series.solver);
  write_json(out_dir / "summary.json", j);

  log << "simulate: locked = " << (lock.locked ? "true" : "false") << ", locked_value = " << lock.locked_value
      << ", trailing_std = " << lock.trailing_std << ", drift = " << cycle.relative_drift << '\n';
  return exit_code::ok;
}

int cmd_variance(KeyValueConfig cfg, const fs::path& out_dir, std::ostream& log) {
  const bool explicit_n_bar = cfg.contains("n_bar");
  const bool use_list = cfg.contains("temperatures") || !cfg.contains("temperature");
  const SystemParams base = params_from_config(cfg);
  const auto initial = initial_state_from_config(cfg);
  JointConfig jc = joint_from_config(cfg);
  const double horizon = read_positive(cfg, "horizon", 2e5);
  const double transient = cfg.get_double("transient", 5e4);
  const std::size_t every = read_count(cfg, "output_every", 1);
  jc.zero_diffusion = cfg.get_bool("zero_diffusion", false);
  const bool zero_v0 = cfg.get_bool("zero_initial_covariance", false);
  jc.check_physicality = cfg.get_bool("check_physicality", true) && !zero_v0;
  const std::vector<double> temperatures =
      use_list ? cfg.get_list("temperatures", {0.0, 0.01}) : std::vector<double>{base.temperature};
  cfg.ensure_known(keys_for("variance"));
  if (temperatures.empty()) throw ConfigError("temperatures must not be empty");
  if (explicit_n_bar && temperatures.size() > 1) {
    throw ConfigError("n_bar cannot be fixed explicitly when several temperatures are requested");
  }
  if (!(transient >= 0.0 && transient < horizon)) throw ConfigError("transient must lie in [0, horizon)");
  ensure_directory(out_dir);

  Json j;
  j["command"] = "variance";
  add_params(j, base);
  j["horizon"] = horizon;
  j["transient"] = transient;
  j["drift_mode"] = std::string(to_string(jc.drift));
  j["zero_diffusion"] = jc.zero_diffusion;
  j["zero_initial_covariance"] = zero_v0;
  j["temperature_count"] = temperatures.size();

  std::vector<std::vector<double>> post_variance(temperatures.size());
  for (std::size_t i = 0; i < temperatures.size(); ++i) {
    const SystemParams p = explicit_n_bar ? base : base.with_temperature(temperatures[i]);
    validate(p);
    const CovMatrix6 V0 = zero_v0 ? CovMatrix6::Zero() : initial_covariance(p.n_bar);
    log << "variance: T = " << p.temperature << " K (n_bar = " << p.n_bar << "), propagating to t = " << horizon
        << '\n';
    const JointSeries js = propagate_joint(p, initial, V0, horizon, jc);
    const auto records = phase_records(js.trajectory);
    std::vector<FluctuationMeasures> measures(records.size());
    double post_max = 0.0, post_min = std::numeric_limits<double>::infinity();
    bool post_finite = true;
    for (std::size_t k = 0; k < records.size(); ++k) {
      measures[k] = fluctuation_measures(js.covariance[k], records[k]);
      if (records[k].t >= transient) {
        const double v = measures[k].var_phase_sum;
        post_variance[i].push_back(v);
        post_finite = post_finite && std::isfinite(v);
        if (std::isfinite(v)) {
          post_max = std::max(post_max, v);
          post_min = std::min(post_min, v);
        }
      }
    }
    {
      auto f = open_output(out_dir / indexed("covariance", i, temperatures.size()));
      write_covariance_csv(f, every_kth(js.trajectory.t, every), every_kth(js.covariance, every));
    }
    {
      auto f = open_output(out_dir / indexed("variance", i, temperatures.size()));
      write_phase_csv(f, every_kth(records, every), every_kth(measures, every));
    }
    const std::string key = "T" + std::to_string(i) + "_";
    j[key + "temperature"] = p.temperature;
    j[key + "n_bar"] = p.n_bar;
    j[key + "post_transient_samples"] = post_variance[i].size();
    j[key + "post_transient_all_finite"] = post_finite;
    j[key + "post_transient_max_variance"] = number(post_max);
    j[key + "post_transient_min_variance"] = number(post_min);
    j[key + "final_variance"] = number(measures.back().var_phase_sum);
    j[key + "worst_min_uncertainty_eigenvalue"] = number(js.worst_min_eigenvalue);
    j[key + "worst_relative_symmetry_defect"] = js.worst_relative_symmetry;
    add_solver(j, js.trajectory.solver, key + "solver_");
  }
  if (temperatures.size() >= 2) {
    const auto& a = post_variance[0];
    const auto& b = post_variance[1];
    std::size_t n = std::min(a.size(), b.size()), le = 0;
    for (std::size_t k = 0; k < n; ++k) le += a[k] <= b[k] ? 1 : 0;
    j["fraction_T0_le_T1"] = n ? static_cast<double>(le) / static_cast<double>(n) : kNaN;
  }
  write_json(out_dir / "summary.json", j);
  return exit_code::ok;
}

namespace {

struct SweepRow {
  double eta = kNaN;
  double locked_phase_sum = kNaN;
  double D_G = kNaN;
  double S_p = kNaN;
  double S_a = kNaN;
  double var_phase_sum = kNaN;
  bool locked = false;
  double trailing_std = kNaN;
  std::string error;
};

}  // namespace

int cmd_sweep(KeyValueConfig cfg, const fs::path& out_dir, std::ostream& log) {
  const SystemParams base = params_from_config(cfg);
  const auto initial = initial_state_from_config(cfg);
  const JointConfig jc = joint_from_config(cfg);
  const double horizon = read_positive(cfg, "horizon", 2e5);
  const double window = read_positive(cfg, "window", 1e4);
  const double lock_threshold = read_positive(cfg, "lock_threshold", 0.1);
  const double readout = cfg.get_double("readout_time", horizon);
  const unsigned threads = resolve_threads(cfg.get_uint("threads", 0));
  const DiscordOptions discord = discord_from_config(cfg);
  JointConfig point_cfg = jc;
  point_cfg.check_physicality = cfg.get_bool("check_physicality", true);
  std::vector<double> grid;
  {
    // The eta grid default spans 1000..5000 in steps of 250.
    std::vector<double> fallback;
    for (int k = 0; k <= 16; ++k) fallback.push_back(1000.0 + 250.0 * k);
    grid = cfg.get_list("eta_grid", fallback);
  }
  cfg.ensure_known(keys_for("sweep"));
  if (grid.empty()) throw ConfigError("eta_grid must not be empty");
  if (grid.size() < 5) log << "sweep: warning: fewer than 5 grid points, the rank correlation is not meaningful\n";
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw ConfigError("eta_grid must be strictly increasing");
  }
  if (!(readout > 0.0 && readout <= horizon)) throw ConfigError("readout_time must lie in (0, horizon]");
  ensure_directory(out_dir);

  std::vector<SweepRow> rows(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      SweepRow& row = rows[i];
      row.eta = grid[i];
      try {
        SystemParams p = base;
        p.eta = grid[i];
        validate(p);
        const JointSeries js = propagate_joint(p, initial, initial_covariance(p.n_bar), horizon, point_cfg);
        const auto records = phase_records(js.trajectory);
        const LockingReport lock = detect_locking(records, window, lock_threshold);
        row.locked = lock.locked;
        row.locked_phase_sum = lock.locked_value;
        row.trailing_std = lock.trailing_std;
        const std::size_t k = sample_at(js.trajectory.t, readout, point_cfg.solver.stride);
        const auto m = fluctuation_measures(js.covariance[k], records[k]);
        row.S_p = m.S_p;
        row.S_a = m.S_a;
        row.var_phase_sum = m.var_phase_sum;
        row.D_G = gaussian_discord(js.covariance[k], discord);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  log << "sweep: " << grid.size() << " points on " << threads << " thread(s)\n";
  {
    const unsigned n = std::min<unsigned>(threads, static_cast<unsigned>(grid.size()));
    if (n <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    }
  }

  {
    auto f = open_output(out_dir / "sweep.csv");
    CsvWriter csv(f, {"eta", "locked_phase_sum", "D_G", "S_p", "S_a", "var_phase_sum"});
    for (const auto& r : rows) {
      csv << r.eta << r.locked_phase_sum << r.D_G << r.S_p << r.S_a << r.var_phase_sum;
      csv.end_row();
    }
  }

  std::vector<double> xs, ys;
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) ++failed;
    if (std::isfinite(r.locked_phase_sum) && std::isfinite(r.D_G)) {
      xs.push_back(r.locked_phase_sum);
      ys.push_back(r.D_G);
    }
  }
  const double rho = spearman(xs, ys);
  const bool advisory_pass = std::isfinite(rho) && std::abs(rho) >= 0.7;

  Json j;
  j["command"] = "sweep";
  add_params(j, base);
  j["horizon"] = horizon;
  j["window"] = window;
  j["readout_time"] = readout;
  j["drift_mode"] = std::string(to_string(jc.drift));
  j["discord_log_base"] = discord.base == LogBase::Two ? "2" : "e";
  j["discord_sign"] = discord.negative_conditional_term ? "negative" : "standard";
  j["points"] = grid.size();
  j["failed_points"] = failed;
  j["spearman_points"] = xs.size();
  j["spearman_rho"] = number(rho);
  j["spearman_advisory_threshold"] = 0.7;
  j["spearman_advisory_pass"] = advisory_pass;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string key = "point" + std::to_string(i) + "_";
    j[key + "eta"] = rows[i].eta;
    j[key + "locked"] = rows[i].locked;
    j[key + "trailing_std"] = number(rows[i].trailing_std);
    if (!rows[i].error.empty()) j[key + "error"] = rows[i].error;
  }
  write_json(out_dir / "summary.json", j);

  if (!advisory_pass) {
    log << "sweep: warning: |spearman(locked_phase_sum, D_G)| = " << std::abs(rho)
        << " is below the advisory 0.7\n";
  }
  if (failed > 0) {
    log << "sweep: " << failed << " point(s) failed, see summary.json\n";
    return exit_code::numerical;
  }
  return exit_code::ok;
}

int cmd_oracle(KeyValueConfig cfg, const fs::path& out_dir, std::ostream& log) {
  const SystemParams p = params_from_config(cfg);
  const auto initial = initial_state_from_config(cfg);
  JointConfig jc = joint_from_config(cfg);
  const double horizon = read_positive(cfg, "horizon", 50.0);
  EnsembleConfig ec;
  ec.n_traj = read_count(cfg, "n_traj", 10'000);
  ec.seed = cfg.get_uint("seed", 1);
  ec.step = read_positive(cfg, "mc_step", 2.5e-4);
  ec.threads = resolve_threads(cfg.get_uint("threads", 0));
  ec.report_times = cfg.get_list("report_times", {horizon});
  const DriftConvention mc_drift = parse_drift_convention(cfg.get_string("mc_drift_mode", "corrected"));
  const double z_threshold = read_positive(cfg, "z_threshold", 4.0);
  cfg.ensure_known(keys_for("oracle"));
  for (double t : ec.report_times) {
    if (!(t > initial.t && t <= horizon)) throw ConfigError("report_times must lie in (0, horizon]");
  }
  ensure_directory(out_dir);

  // Lyapunov reference, sampled exactly at the report times.
  for (double t : ec.report_times) jc.solver.windows.push_back({t, t, 1.0});
  const CovMatrix6 V0 = initial_covariance(p.n_bar);
  log << "oracle: Lyapunov propagation to t = " << horizon << '\n';
  const JointSeries js = propagate_joint(p, initial, V0, horizon, jc);

  SolverConfig mf_cfg;
  mf_cfg.method = Method::RK4;
  mf_cfg.step = ec.step;
  mf_cfg.stride = ec.step;
  mf_cfg.max_samples = static_cast<std::size_t>(std::ceil((horizon - initial.t) / ec.step)) + 2;
  const TrajectorySeries mf_series = integrate(p, initial, horizon, mf_cfg);
  log << "oracle: " << ec.n_traj << " Euler-Maruyama trajectories, step " << ec.step << ", seed " << ec.seed << '\n';
  const auto estimates = simulate_ensemble(p, mf_series, V0, ec, mc_drift);

  std::vector<CovMatrix6> reference;
  double max_z = 0.0;
  std::string worst_entry;
  const auto names = covariance_entry_names("");
  Json j;
  j["command"] = "oracle";
  add_params(j, p);
  for (std::size_t r = 0; r < estimates.size(); ++r) {
    const std::size_t k = sample_at(js.trajectory.t, estimates[r].t, 1e-12);
    reference.push_back(js.covariance[k]);
    const CovMatrix6 z = z_scores(js.covariance[k], estimates[r]);
    const auto tri = upper_triangle(z);
    const auto worst = static_cast<std::size_t>(std::max_element(tri.begin(), tri.end()) - tri.begin());
    const std::string key = "report" + std::to_string(r) + "_";
    j[key + "t"] = estimates[r].t;
    j[key + "max_z"] = number(tri[worst]);
    j[key + "worst_entry"] = names[worst];
    if (!(tri[worst] <= max_z)) {
      max_z = tri[worst];
      worst_entry = names[worst];
    }
  }
  {
    auto f = open_output(out_dir / "oracle.csv");
    write_ensemble_csv(f, estimates);
  }
  {
    std::vector<double> t;
    for (const auto& e : estimates) t.push_back(e.t);
    auto f = open_output(out_dir / "oracle_lyapunov.csv");
    write_covariance_csv(f, t, reference);
  }
  const bool pass = max_z <= z_threshold;
  j["horizon"] = horizon;
  j["n_traj"] = ec.n_traj;
  j["n_completed"] = estimates.back().n_traj;
  j["n_failed"] = estimates.back().n_failed;
  j["seed"] = ec.seed;
  j["mc_step"] = ec.step;
  j["drift_mode"] = std::string(to_string(jc.drift));
  j["mc_drift_mode"] = std::string(to_string(mc_drift));
  j["max_z"] = number(max_z);
  j["worst_entry"] = worst_entry;
  j["z_threshold"] = z_threshold;
  j["pass"] = pass;
  write_json(out_dir / "summary.json", j);

  log << "oracle: max z = " << max_z << " (" << worst_entry << "), " << (pass ? "pass" : "FAIL") << '\n';
  return pass ? exit_code::ok : exit_code::oracle_failure;
}

int run_command(const std::string& name, const KeyValueConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  try {
    if (name == "simulate") return cmd_simulate(cfg, out_dir, log);
    if (name == "variance") return cmd_variance(cfg, out_dir, log);
    if (name == "sweep") return cmd_sweep(cfg, out_dir, log);
    if (name == "oracle") return cmd_oracle(cfg, out_dir, log);
    log << "unknown command '" << name << "'\n";
    return exit_code::config;
  } catch (const ConfigError& e) {
    log << "configuration error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const std::invalid_argument& e) {
    log << "configuration error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const NumericalError& e) {
    log << "numerical failure: " << e.what() << '\n';
    return exit_code::numerical;
  } catch (const DiscordError& e) {
    log << "numerical failure: " << e.what() << '\n';
    return exit_code::numerical;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::unexpected;
  }
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return kNaN;
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return kNaN;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace optosync
