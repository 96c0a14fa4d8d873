#pragma once

#include "optosync/model.hpp"
#include "optosync/ode.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace optosync {

/// Time derivative of the mean-field quadratures with respect to omega_m t.
template <typename Derived>
Vector6<typename Derived::Scalar> rhs(const Eigen::MatrixBase<Derived>& x, const SystemParams& p) {
  using Scalar = typename Derived::Scalar;
  using std::sqrt;
  const Scalar sqrt2 = sqrt(Scalar(2));
  const Scalar qc = x[mf::q_c], pc = x[mf::p_c];
  const Scalar qm = x[mf::q_m], pm = x[mf::p_m];
  const Scalar qd = x[mf::q_d], pd = x[mf::p_d];
  const Scalar kappa(p.kappa), Delta(p.Delta), g_m(p.g_m), g_d(p.g_d);
  const Scalar w_s(p.omega_sigma), Gamma(p.Gamma_a);

  Vector6<Scalar> dx;
  dx[mf::q_c] = -kappa * qc + Delta * pc + g_m * qm * pc + sqrt2 * Scalar(p.eta);
  dx[mf::p_c] = -Delta * qc - g_m * qm * qc - sqrt2 * g_d * qd - kappa * pc;
  dx[mf::q_m] = pm;
  dx[mf::p_m] = -qm - g_m * (pc * pc + qc * qc) / Scalar(2) - Scalar(p.gamma) * pm;
  dx[mf::q_d] = -w_s * pd - Gamma * qd;
  dx[mf::p_d] = w_s * qd - sqrt2 * g_d * qc - Gamma * pd;
  return dx;
}

/// Sampled mean-field trajectory.
struct TrajectorySeries {
  std::vector<double> t;
  std::vector<Vector6d> x;
  SolverStats solver;

  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }
  MeanFieldState<double> state(std::size_t i) const { return {t[i], x[i]}; }
  const MeanFieldState<double> back() const { return state(size() - 1); }
  /// One quadrature (mean-field index, see `mf::`) as a contiguous series.
  std::vector<double> component(Eigen::Index index) const;
};

/// Integrates the mean field from `initial` to `t_end` (dimensionless time).
/// Throws NumericalError on blow-up or (adaptive) step-size underflow.
TrajectorySeries integrate(const SystemParams& params, const MeanFieldState<double>& initial,
                           double t_end, const SolverConfig& cfg);

struct LimitCycleReport {
  bool oscillating = false;  ///< at least two upward zero crossings of q_m in the window
  bool converged = false;
  double amplitude_m = 0.0;
  double amplitude_d = 0.0;
  double period_estimate = 0.0;  ///< NaN when not oscillating
  double relative_drift = 0.0;   ///< per-period relative amplitude change, max over both modes
  double relative_drift_m = 0.0;
  double relative_drift_d = 0.0;
  std::size_t periods = 0;
};

/// Amplitude/period analysis over the trailing `window` of the series.
/// Requires the series to span at least three windows.
LimitCycleReport detect_limit_cycle(std::span<const double> t, std::span<const double> q_m,
                                    std::span<const double> q_d, double window,
                                    double drift_threshold = 1e-3);
LimitCycleReport detect_limit_cycle(const TrajectorySeries& series, double window,
                                    double drift_threshold = 1e-3);

/// CSV with header `t,q_c,p_c,q_m,p_m,q_d,p_d`.
void write_trajectory_csv(std::ostream& out, const TrajectorySeries& series);

}  // namespace optosync
