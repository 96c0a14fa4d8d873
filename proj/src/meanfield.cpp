#include "optosync/meanfield.hpp"

#include "optosync/csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace optosync {

std::vector<double> TrajectorySeries::component(Eigen::Index index) const {
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [index](const Vector6d& v) { return v[index]; });
  return out;
}

TrajectorySeries integrate(const SystemParams& params, const MeanFieldState<double>& initial,
                           double t_end, const SolverConfig& cfg) {
  validate(params);
  if (!(t_end > initial.t)) throw std::invalid_argument("integrate: t_end must exceed initial time");
  if (!initial.x.allFinite()) throw NumericalError("non-finite initial mean field", initial.t);

  TrajectorySeries series;
  auto f = [&params](double, const Vector6d& x) -> Vector6d { return rhs(x, params); };
  series.solver = integrate_ode(f, initial.t, initial.x, t_end, cfg,
                                [&series](double t, const Vector6d& x) {
                                  series.t.push_back(t);
                                  series.x.push_back(x);
                                });
  return series;
}

namespace {

// Peak of y over [first, last] refined by a parabola through the largest
// sample and its neighbours.
double refined_peak(std::span<const double> y, std::size_t first, std::size_t last) {
  std::size_t k = first;
  for (std::size_t i = first; i <= last; ++i) {
    if (y[i] > y[k]) k = i;
  }
  if (k == 0 || k + 1 >= y.size()) return y[k];
  const double a = y[k - 1], b = y[k], c = y[k + 1];
  const double denom = a - 2.0 * b + c;
  if (denom >= 0.0) return b;
  const double offset = 0.5 * (a - c) / denom;
  if (std::abs(offset) > 1.0) return b;
  return b - 0.25 * (a - c) * offset;
}

// Least-squares slope of the per-period peaks, relative to their mean.
double relative_slope(const std::vector<double>& peaks) {
  const std::size_t n = peaks.size();
  if (n < 2) return std::numeric_limits<double>::infinity();
  const double mean = std::accumulate(peaks.begin(), peaks.end(), 0.0) / static_cast<double>(n);
  const double k_mean = 0.5 * static_cast<double>(n - 1);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dk = static_cast<double>(k) - k_mean;
    num += dk * (peaks[k] - mean);
    den += dk * dk;
  }
  if (mean == 0.0) return std::numeric_limits<double>::infinity();
  return std::abs(num / den) / std::abs(mean);
}

}  // namespace

LimitCycleReport detect_limit_cycle(std::span<const double> t, std::span<const double> q_m,
                                    std::span<const double> q_d, double window,
                                    double drift_threshold) {
  if (t.size() != q_m.size() || t.size() != q_d.size()) {
    throw std::invalid_argument("detect_limit_cycle: series lengths differ");
  }
  if (!(window > 0.0) || t.size() < 2) {
    throw std::invalid_argument("detect_limit_cycle: need a positive window and >= 2 samples");
  }
  const double t_end = t.back();
  if (t_end - t.front() < 3.0 * window * (1.0 - 1e-12)) {
    throw std::invalid_argument("detect_limit_cycle: series must cover at least three windows");
  }
  const double t_begin = t_end - window;
  const auto first = static_cast<std::size_t>(
      std::lower_bound(t.begin(), t.end(), t_begin) - t.begin());

  LimitCycleReport report;
  for (std::size_t i = first; i < t.size(); ++i) {
    report.amplitude_m = std::max(report.amplitude_m, std::abs(q_m[i]));
    report.amplitude_d = std::max(report.amplitude_d, std::abs(q_d[i]));
  }

  // Upward zero crossings of q_m, linearly interpolated.
  std::vector<double> crossings;
  std::vector<std::size_t> crossing_index;
  for (std::size_t i = first + 1; i < t.size(); ++i) {
    if (q_m[i - 1] < 0.0 && q_m[i] >= 0.0) {
      const double frac = -q_m[i - 1] / (q_m[i] - q_m[i - 1]);
      crossings.push_back(t[i - 1] + frac * (t[i] - t[i - 1]));
      crossing_index.push_back(i);
    }
  }
  if (crossings.size() < 2) {
    report.period_estimate = std::numeric_limits<double>::quiet_NaN();
    report.relative_drift = std::numeric_limits<double>::infinity();
    report.relative_drift_m = report.relative_drift_d = report.relative_drift;
    return report;
  }
  report.oscillating = true;
  report.periods = crossings.size() - 1;
  report.period_estimate = (crossings.back() - crossings.front()) / static_cast<double>(report.periods);

  std::vector<double> peaks_m, peaks_d;
  for (std::size_t k = 0; k + 1 < crossing_index.size(); ++k) {
    const std::size_t a = crossing_index[k];
    const std::size_t b = crossing_index[k + 1] - 1;
    peaks_m.push_back(refined_peak(q_m, a, b));
    peaks_d.push_back(refined_peak(q_d, a, b));
  }
  report.amplitude_m = std::max(report.amplitude_m, *std::max_element(peaks_m.begin(), peaks_m.end()));
  report.amplitude_d = std::max(report.amplitude_d, *std::max_element(peaks_d.begin(), peaks_d.end()));
  report.relative_drift_m = relative_slope(peaks_m);
  report.relative_drift_d = relative_slope(peaks_d);
  report.relative_drift = std::max(report.relative_drift_m, report.relative_drift_d);
  report.converged = report.relative_drift < drift_threshold;
  return report;
}

LimitCycleReport detect_limit_cycle(const TrajectorySeries& series, double window,
                                    double drift_threshold) {
  const auto q_m = series.component(mf::q_m);
  const auto q_d = series.component(mf::q_d);
  return detect_limit_cycle(series.t, q_m, q_d, window, drift_threshold);
}

void write_trajectory_csv(std::ostream& out, const TrajectorySeries& series) {
  CsvWriter csv(out, {"t", "q_c", "p_c", "q_m", "p_m", "q_d", "p_d"});
  for (std::size_t i = 0; i < series.size(); ++i) {
    csv << series.t[i];
    for (Eigen::Index k = 0; k < 6; ++k) csv << series.x[i][k];
    csv.end_row();
  }
}

}  // namespace optosync
