#include "optosync/stochastic.hpp"

#include "optosync/csv.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

namespace optosync {

namespace {

// Runs one path, calling report(k, u) whenever step index k is a report step.
// Returns false as soon as the state stops being finite.
template <typename Report>
bool run_path(const DriftSchedule& drifts, const Vector6d& amplitude, Vector6d& u, double step,
              std::size_t n_steps, PhiloxStream& stream, Report&& report) {
  const double sqrt_step = std::sqrt(step);
  const bool constant = drifts.size() == 1;
  report(std::size_t{0}, u);
  for (std::size_t k = 0; k < n_steps; ++k) {
    const Matrix6d& A = constant ? drifts.front() : drifts[k];
    Vector6d dw;
    for (int i = 0; i < 6; ++i) {
      // Components without noise do not consume random numbers.
      dw[i] = amplitude[i] == 0.0 ? 0.0 : amplitude[i] * sqrt_step * stream.normal();
    }
    u += step * (A * u) + dw;
    if (!u.allFinite()) return false;
    report(k + 1, u);
  }
  return true;
}

Matrix6d symmetric_sqrt(const CovMatrix6& V) {
  const Matrix6d S = 0.5 * (V + V.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix6d> eig(S);
  Vector6d lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -1e-12 * scale) {
    throw std::invalid_argument("initial covariance is not positive semidefinite");
  }
  lambda = lambda.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

struct Moments {
  std::vector<Matrix6d> sum;
  std::vector<Matrix6d> sum_sq;
  std::size_t count = 0;
  std::size_t failed = 0;

  explicit Moments(std::size_t reports)
      : sum(reports, Matrix6d::Zero()), sum_sq(reports, Matrix6d::Zero()) {}

  void merge(const Moments& other) {
    for (std::size_t r = 0; r < sum.size(); ++r) {
      sum[r] += other.sum[r];
      sum_sq[r] += other.sum_sq[r];
    }
    count += other.count;
    failed += other.failed;
  }
};

}  // namespace

Vector6d euler_maruyama_path(const DriftSchedule& drifts, const Vector6d& noise_amplitude,
                             Vector6d u0, double step, std::size_t n_steps, PhiloxStream& stream) {
  if (drifts.size() != 1 && drifts.size() != n_steps) {
    throw std::invalid_argument("euler_maruyama_path: drift schedule length mismatch");
  }
  if (!run_path(drifts, noise_amplitude, u0, step, n_steps, stream, [](std::size_t, const Vector6d&) {})) {
    return Vector6d::Constant(std::numeric_limits<double>::quiet_NaN());
  }
  return u0;
}

std::vector<EnsembleEstimate> simulate_linear_sde(const DriftSchedule& drifts, const Matrix6d& D,
                                                  const CovMatrix6& V0, double t0,
                                                  std::size_t n_steps, const EnsembleConfig& cfg) {
  if (!(cfg.step > 0.0) || !std::isfinite(cfg.step)) throw std::invalid_argument("ensemble step must be positive");
  if (cfg.n_traj == 0 || (cfg.n_traj < 100 && !cfg.allow_small_ensembles)) {
    throw std::invalid_argument("ensemble needs n_traj >= 100");
  }
  if (drifts.empty() || (drifts.size() != 1 && drifts.size() != n_steps)) {
    throw std::invalid_argument("drift schedule must hold one matrix or one per step");
  }
  if (!D.isDiagonal(0.0) || (D.diagonal().array() < 0.0).any()) {
    throw std::invalid_argument("diffusion matrix must be diagonal and non-negative");
  }
  if (cfg.block_size == 0) throw std::invalid_argument("block_size must be positive");

  // Map report times onto step indices.
  const double t_end = t0 + static_cast<double>(n_steps) * cfg.step;
  std::vector<double> report_times = cfg.report_times;
  if (report_times.empty()) report_times.push_back(t_end);
  std::vector<std::size_t> report_steps;
  for (double t : report_times) {
    const double k = std::round((t - t0) / cfg.step);
    if (k < 0.0 || k > static_cast<double>(n_steps) ||
        std::abs(t0 + k * cfg.step - t) > 1e-9 * std::max(1.0, std::abs(t))) {
      throw std::invalid_argument("report time " + format_double(t) + " is not on the ensemble grid");
    }
    const auto ks = static_cast<std::size_t>(k);
    if (!report_steps.empty() && ks <= report_steps.back()) {
      throw std::invalid_argument("report times must be strictly increasing");
    }
    report_steps.push_back(ks);
  }
  const std::size_t n_reports = report_steps.size();

  const Matrix6d L = symmetric_sqrt(V0);
  const Vector6d amplitude = D.diagonal().cwiseSqrt();

  const std::size_t n_blocks = (cfg.n_traj + cfg.block_size - 1) / cfg.block_size;
  std::vector<Moments> blocks(n_blocks, Moments(n_reports));
  std::atomic<std::size_t> next_block{0};

  auto worker = [&]() {
    std::vector<Vector6d> snapshots(n_reports);
    for (std::size_t b = next_block++; b < n_blocks; b = next_block++) {
      Moments& m = blocks[b];
      const std::size_t first = b * cfg.block_size;
      const std::size_t last = std::min(cfg.n_traj, first + cfg.block_size);
      for (std::size_t j = first; j < last; ++j) {
        PhiloxStream stream(cfg.seed, j);
        Vector6d z;
        for (int i = 0; i < 6; ++i) z[i] = stream.normal();
        Vector6d u = L * z;
        std::size_t r = 0;
        const bool ok = run_path(drifts, amplitude, u, cfg.step, n_steps, stream,
                                 [&](std::size_t k, const Vector6d& state) {
                                   if (r < n_reports && k == report_steps[r]) snapshots[r++] = state;
                                 });
        if (!ok) {
          ++m.failed;
          continue;
        }
        for (std::size_t q = 0; q < n_reports; ++q) {
          const Matrix6d outer = snapshots[q] * snapshots[q].transpose();
          m.sum[q] += outer;
          m.sum_sq[q] += outer.cwiseAbs2();
        }
        ++m.count;
      }
    }
  };

  unsigned threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_blocks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  // Merge in block order so the floating-point sums do not depend on scheduling.
  Moments total(n_reports);
  for (const auto& m : blocks) total.merge(m);

  std::vector<EnsembleEstimate> out;
  const auto n = static_cast<double>(total.count);
  for (std::size_t q = 0; q < n_reports; ++q) {
    EnsembleEstimate est;
    est.t = report_times[q];
    est.n_traj = total.count;
    est.n_failed = total.failed;
    est.seed = cfg.seed;
    est.horizon = t_end;
    if (total.count >= 2) {
      // The process has zero mean by construction, so the uncentered second
      // moment is the covariance estimator.
      est.covariance = total.sum[q] / n;
      const Matrix6d var = (total.sum_sq[q] / n - est.covariance.cwiseAbs2()).cwiseMax(0.0);
      est.standard_error = (var / (n - 1.0)).cwiseSqrt();
    } else {
      est.covariance.setConstant(std::numeric_limits<double>::quiet_NaN());
      est.standard_error.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    out.push_back(est);
  }
  return out;
}

std::vector<EnsembleEstimate> simulate_ensemble(const SystemParams& params,
                                                const TrajectorySeries& mf_series,
                                                const CovMatrix6& V0, const EnsembleConfig& cfg,
                                                DriftConvention drift) {
  validate(params);
  if (mf_series.size() < 2) throw std::invalid_argument("simulate_ensemble: mean-field series too short");
  const double t0 = mf_series.t.front();
  const std::size_t n_steps = mf_series.size() - 1;
  for (std::size_t k = 0; k <= n_steps; ++k) {
    const double expected = t0 + static_cast<double>(k) * cfg.step;
    if (std::abs(mf_series.t[k] - expected) > 1e-9 * std::max(1.0, std::abs(expected))) {
      throw std::invalid_argument("simulate_ensemble: mean-field series must be sampled every ensemble step");
    }
  }
  DriftSchedule drifts;
  drifts.reserve(n_steps);
  double max_entry = 0.0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    drifts.push_back(drift_matrix(mf_series.x[k], params, drift));
    max_entry = std::max(max_entry, drifts.back().cwiseAbs().maxCoeff());
  }
  if (cfg.step * max_entry >= 0.1) {
    throw std::invalid_argument("simulate_ensemble: step too large for the drift (step * max|A| >= 0.1)");
  }
  return simulate_linear_sde(drifts, diffusion_matrix(params), V0, t0, n_steps, cfg);
}

CovMatrix6 z_scores(const CovMatrix6& V_lyap, const EnsembleEstimate& est) {
  CovMatrix6 z = CovMatrix6::Zero();
  for (int i = 0; i < 6; ++i) {
    for (int j = i; j < 6; ++j) {
      const double diff = std::abs(V_lyap(i, j) - est.covariance(i, j));
      const double se = est.standard_error(i, j);
      double value;
      if (std::isnan(diff) || std::isnan(se)) {
        value = std::numeric_limits<double>::infinity();
      } else if (se < 1e-15) {
        value = diff <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
      } else {
        value = diff / se;
      }
      z(i, j) = z(j, i) = value;
    }
  }
  return z;
}

double compare(const CovMatrix6& V_lyap, double t_lyap, const EnsembleEstimate& est) {
  if (std::abs(t_lyap - est.t) > 1e-9 * std::max(1.0, std::abs(est.t))) {
    throw std::invalid_argument("compare: time stamps differ (" + format_double(t_lyap) + " vs " +
                                format_double(est.t) + ")");
  }
  return z_scores(V_lyap, est).maxCoeff();
}

void write_ensemble_csv(std::ostream& out, const std::vector<EnsembleEstimate>& estimates) {
  auto header = covariance_entry_names("V_");
  const auto se = covariance_entry_names("SE_");
  header.insert(header.begin(), "t");
  header.insert(header.end(), se.begin(), se.end());
  CsvWriter csv(out, header);
  for (const auto& e : estimates) {
    csv << e.t;
    for (double v : upper_triangle(e.covariance)) csv << v;
    for (double v : upper_triangle(e.standard_error)) csv << v;
    csv.end_row();
  }
}

}  // namespace optosync
