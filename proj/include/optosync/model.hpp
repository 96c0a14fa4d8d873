#pragma once

#include "optosync/types.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace optosync {

class KeyValueConfig;

enum class OccupancyConvention {
  BoseEinstein,  ///< 1 / (exp(x) - 1)
  PaperLiteral,  ///< exp(-x), the "-1"-less reading
};

std::string_view to_string(OccupancyConvention c);
OccupancyConvention parse_occupancy_convention(std::string_view s);

namespace constants {
inline constexpr double hbar = 1.054571817e-34;  // J s
inline constexpr double k_B = 1.380649e-23;      // J / K
}  // namespace constants

/// Mean thermal phonon number at angular frequency omega_m [rad/s] and temperature T [K].
double thermal_occupancy(double omega_m, double temperature, OccupancyConvention convention);

/// Physical parameters of the hybrid system. Every rate is a dimensionless
/// ratio to omega_m except omega_m itself (rad/s) and the temperature (K).
struct SystemParams {
  double omega_m = 1.0e7;
  double kappa = 1.0;
  double gamma = 5.0e-6;
  double Gamma_a = 5.0e-6;
  double Delta = -1.0;
  double omega_sigma = 1.0;
  double g_m = 1.0e-5;
  double g_d = 1.0e-5;
  double eta = 3000.0;
  double temperature = 0.0;
  double n_bar = 0.0;
  OccupancyConvention occupancy_convention = OccupancyConvention::BoseEinstein;

  /// Parameter set of the anti-synchronization baseline at T = 0.
  static SystemParams baseline() { return SystemParams{}; }

  /// Copy with a new temperature and a recomputed n_bar.
  SystemParams with_temperature(double T) const {
    SystemParams p = *this;
    p.temperature = T;
    p.n_bar = thermal_occupancy(p.omega_m, T, p.occupancy_convention);
    return p;
  }

  /// Copy with n_bar recomputed from (omega_m, temperature, convention).
  SystemParams refreshed() const { return with_temperature(temperature); }
};

struct Violation {
  std::string field;
  std::string message;
};

class ValidationError : public ConfigError {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// All invariant violations of `p`; empty when valid.
std::vector<Violation> check(const SystemParams& p);

/// Returns `p` when valid, throws ValidationError listing every violation otherwise.
SystemParams validate(const SystemParams& p);

/// Reads the SystemParams keys out of `cfg` (marking them consumed). Missing
/// keys keep the baseline values; n_bar is derived unless given explicitly,
/// in which case it must agree with the temperature.
SystemParams params_from_config(KeyValueConfig& cfg);

/// Mean-field state at a single time point, quadratures ordered
/// (q_c, p_c, q_m, p_m, q_d, p_d).
template <typename Scalar>
struct MeanFieldState {
  Scalar t{0};
  Vector6<Scalar> x = Vector6<Scalar>::Zero();

  Scalar q_c() const { return x[mf::q_c]; }
  Scalar p_c() const { return x[mf::p_c]; }
  Scalar q_m() const { return x[mf::q_m]; }
  Scalar p_m() const { return x[mf::p_m]; }
  Scalar q_d() const { return x[mf::q_d]; }
  Scalar p_d() const { return x[mf::p_d]; }
};

/// H / (hbar omega_m) of the interaction-picture Hamiltonian with every
/// operator replaced by its mean value; vacuum constants dropped.
template <typename Derived>
typename Derived::Scalar energy(const Eigen::MatrixBase<Derived>& x, const SystemParams& p) {
  using Scalar = typename Derived::Scalar;
  using std::sqrt;
  const Scalar sqrt2 = sqrt(Scalar(2));
  const Scalar qc = x[mf::q_c], pc = x[mf::p_c];
  const Scalar qm = x[mf::q_m], pm = x[mf::p_m];
  const Scalar qd = x[mf::q_d], pd = x[mf::p_d];
  const Scalar photons = (qc * qc + pc * pc) / Scalar(2);
  return Scalar(p.Delta) * photons + (qm * qm + pm * pm) / Scalar(2) -
         Scalar(p.omega_sigma) * (qd * qd + pd * pd) / Scalar(2) + Scalar(p.g_m) * qm * photons +
         sqrt2 * Scalar(p.g_d) * qc * qd + sqrt2 * Scalar(p.eta) * pc;
}

template <typename Scalar>
Scalar energy(const MeanFieldState<Scalar>& s, const SystemParams& p) {
  return energy(s.x, p);
}

}  // namespace optosync
