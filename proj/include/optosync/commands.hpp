#pragma once

// Batch commands behind the command-line front end. Each command reads a flat
// key/value configuration, writes its CSV files plus a flat summary.json into
// an output directory and returns a process exit code.

#include "optosync/config.hpp"
#include "optosync/model.hpp"
#include "optosync/ode.hpp"

#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace optosync {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int unexpected = 1;
inline constexpr int config = 2;
inline constexpr int numerical = 3;
inline constexpr int oracle_failure = 4;
}  // namespace exit_code

struct KeyDoc {
  std::string name;
  std::string default_value;
  std::string description;
  std::set<std::string> commands;  ///< commands that read the key
};

/// Every configuration key any command reads, with its default.
const std::vector<KeyDoc>& documented_keys();

/// Keys accepted by one command.
std::set<std::string> keys_for(const std::string& command);

/// Prints the key reference as an aligned table.
void print_key_reference(std::ostream& out);

/// Mean-field initial state from `initial_q_c` ... `initial_p_d` (t = 0).
MeanFieldState<double> initial_state_from_config(KeyValueConfig& cfg);

/// Solver settings from `method`, `step`, `rtol`, `atol`, `stride`, `max_samples`.
SolverConfig solver_from_config(KeyValueConfig& cfg, const SolverConfig& defaults);

int cmd_simulate(KeyValueConfig cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_variance(KeyValueConfig cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_sweep(KeyValueConfig cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_oracle(KeyValueConfig cfg, const std::filesystem::path& out_dir, std::ostream& log);

/// Dispatches by name and maps exceptions onto exit codes: configuration
/// problems 2, numerical failures 3, anything else 1.
int run_command(const std::string& name, const KeyValueConfig& cfg, const std::filesystem::path& out_dir,
                std::ostream& log);

/// Spearman rank correlation (average ranks for ties). NaN when fewer than
/// two points or a constant series.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace optosync
