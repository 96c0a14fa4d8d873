#pragma once

// Monte Carlo cross-check of the covariance propagation: Euler-Maruyama
// sampling of the linearized fluctuation equations du = A(t) u dt + sqrt(D) dW.
//
// The input noise is sampled as classical Gaussian white noise with the
// symmetrized strengths of the quantum correlators. That reproduces exactly the
// second moments the Lyapunov equation propagates, and nothing beyond them, so
// this is a check of the covariance integrator rather than of quantum
// statistics.

#include "optosync/covariance.hpp"
#include "optosync/philox.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace optosync {

struct EnsembleEstimate {
  double t = 0.0;
  CovMatrix6 covariance = CovMatrix6::Zero();      ///< sample second moments
  CovMatrix6 standard_error = CovMatrix6::Zero();  ///< per-entry standard errors
  std::size_t n_traj = 0;                          ///< trajectories that finished
  std::size_t n_failed = 0;                        ///< trajectories aborted as non-finite
  std::uint64_t seed = 0;
  double horizon = 0.0;
};

struct EnsembleConfig {
  std::size_t n_traj = 10'000;
  double step = 1e-3;
  std::uint64_t seed = 1;
  std::vector<double> report_times;  ///< empty: horizon only
  unsigned threads = 0;              ///< 0: hardware concurrency
  std::size_t block_size = 64;       ///< trajectories per accumulation block
  bool allow_small_ensembles = false;  ///< permit n_traj < 100 (tests only)
};

/// Drift matrices per Euler-Maruyama step: either one matrix (time
/// independent) or exactly one per step.
using DriftSchedule = std::vector<Matrix6d>;

/// Euler-Maruyama path of a single trajectory. Returns the state after
/// `n_steps` steps, or a non-finite vector if it blew up.
Vector6d euler_maruyama_path(const DriftSchedule& drifts, const Vector6d& noise_amplitude,
                             Vector6d u0, double step, std::size_t n_steps, PhiloxStream& stream);

/// Ensemble of linear SDE trajectories starting at t0 with u(t0) ~ N(0, V0).
std::vector<EnsembleEstimate> simulate_linear_sde(const DriftSchedule& drifts, const Matrix6d& D,
                                                  const CovMatrix6& V0, double t0,
                                                  std::size_t n_steps, const EnsembleConfig& cfg);

/// Ensemble around a mean-field trajectory sampled every `cfg.step`
/// (e.g. from `integrate` with an RK4 step and stride equal to `cfg.step`).
std::vector<EnsembleEstimate> simulate_ensemble(const SystemParams& params,
                                                const TrajectorySeries& mf_series,
                                                const CovMatrix6& V0, const EnsembleConfig& cfg,
                                                DriftConvention drift = DriftConvention::Corrected);

/// Entrywise |V_lyap - V_mc| / stderr over the upper triangle. Entries with a
/// standard error below 1e-15 count as 0 when they agree to 1e-12, +inf otherwise.
CovMatrix6 z_scores(const CovMatrix6& V_lyap, const EnsembleEstimate& est);

/// Largest z-score; throws std::invalid_argument if the time stamps differ.
double compare(const CovMatrix6& V_lyap, double t_lyap, const EnsembleEstimate& est);

/// CSV: `t`, 21 covariance entries, 21 standard errors.
void write_ensemble_csv(std::ostream& out, const std::vector<EnsembleEstimate>& estimates);

}  // namespace optosync
