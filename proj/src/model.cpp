#include "optosync/model.hpp"

#include "optosync/config.hpp"

#include <cmath>
#include <sstream>

namespace optosync {

std::string_view to_string(OccupancyConvention c) {
  switch (c) {
    case OccupancyConvention::BoseEinstein: return "bose_einstein";
    case OccupancyConvention::PaperLiteral: return "paper_literal";
  }
  return "?";
}

OccupancyConvention parse_occupancy_convention(std::string_view s) {
  if (s == "bose_einstein") return OccupancyConvention::BoseEinstein;
  if (s == "paper_literal") return OccupancyConvention::PaperLiteral;
  throw ConfigError("occupancy_convention must be bose_einstein or paper_literal, got '" +
                    std::string(s) + "'");
}

double thermal_occupancy(double omega_m, double temperature, OccupancyConvention convention) {
  if (!std::isfinite(omega_m) || !std::isfinite(temperature)) {
    throw std::invalid_argument("thermal_occupancy: non-finite input");
  }
  if (omega_m <= 0.0) throw std::invalid_argument("thermal_occupancy: omega_m must be > 0");
  if (temperature < 0.0) throw std::invalid_argument("thermal_occupancy: T must be >= 0");
  if (temperature == 0.0) return 0.0;
  const double x = constants::hbar * omega_m / (constants::k_B * temperature);
  switch (convention) {
    case OccupancyConvention::BoseEinstein: return 1.0 / std::expm1(x);
    case OccupancyConvention::PaperLiteral: return std::exp(-x);
  }
  return 0.0;
}

namespace {

std::string describe(const std::vector<Violation>& violations) {
  std::ostringstream os;
  os << "invalid parameters:";
  for (const auto& v : violations) os << "\n  " << v.field << ": " << v.message;
  return os.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : ConfigError(describe(violations)), violations_(std::move(violations)) {}

std::vector<Violation> check(const SystemParams& p) {
  std::vector<Violation> out;
  const std::pair<const char*, double> fields[] = {
      {"omega_m", p.omega_m},   {"kappa", p.kappa},   {"gamma", p.gamma},
      {"Gamma_a", p.Gamma_a},   {"Delta", p.Delta},   {"omega_sigma", p.omega_sigma},
      {"g_m", p.g_m},           {"g_d", p.g_d},       {"eta", p.eta},
      {"temperature", p.temperature}, {"n_bar", p.n_bar}};
  bool all_finite = true;
  for (const auto& [name, value] : fields) {
    if (!std::isfinite(value)) {
      out.push_back({name, "must be finite"});
      all_finite = false;
    }
  }
  const std::pair<const char*, double> non_negative[] = {
      {"kappa", p.kappa}, {"gamma", p.gamma}, {"Gamma_a", p.Gamma_a},
      {"omega_sigma", p.omega_sigma}, {"n_bar", p.n_bar}, {"temperature", p.temperature}};
  for (const auto& [name, value] : non_negative) {
    if (value < 0.0) out.push_back({name, "must be >= 0"});
  }
  if (p.omega_m <= 0.0) out.push_back({"omega_m", "must be > 0"});

  if (all_finite && p.omega_m > 0.0 && p.temperature >= 0.0) {
    const double expected = thermal_occupancy(p.omega_m, p.temperature, p.occupancy_convention);
    if (std::abs(p.n_bar - expected) > 1e-12 * std::max(1.0, std::abs(expected))) {
      std::ostringstream os;
      os.precision(17);
      os << "cached value " << p.n_bar << " disagrees with " << expected << " from temperature "
         << p.temperature << " K (" << to_string(p.occupancy_convention) << ")";
      out.push_back({"n_bar", os.str()});
    }
  }
  return out;
}

SystemParams validate(const SystemParams& p) {
  auto violations = check(p);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return p;
}

SystemParams params_from_config(KeyValueConfig& cfg) {
  SystemParams p = SystemParams::baseline();
  p.omega_m = cfg.get_double("omega_m", p.omega_m);
  p.kappa = cfg.get_double("kappa", p.kappa);
  p.gamma = cfg.get_double("gamma", p.gamma);
  p.Gamma_a = cfg.get_double("Gamma_a", p.Gamma_a);
  p.Delta = cfg.get_double("Delta", p.Delta);
  p.omega_sigma = cfg.get_double("omega_sigma", p.omega_sigma);
  p.g_m = cfg.get_double("g_m", p.g_m);
  p.g_d = cfg.get_double("g_d", p.g_d);
  p.eta = cfg.get_double("eta", p.eta);
  p.temperature = cfg.get_double("temperature", p.temperature);
  p.occupancy_convention = parse_occupancy_convention(
      cfg.get_string("occupancy_convention", std::string(to_string(p.occupancy_convention))));
  if (auto n_bar = cfg.get_optional_double("n_bar")) {
    p.n_bar = *n_bar;
  } else if (p.omega_m > 0.0 && p.temperature >= 0.0) {
    p.n_bar = thermal_occupancy(p.omega_m, p.temperature, p.occupancy_convention);
  }
  return validate(p);
}

}  // namespace optosync
