#include "optosync/metrics.hpp"

#include "optosync/csv.hpp"

#include <algorithm>
#include <complex>
#include <numbers>
#include <ostream>

namespace optosync {

PhaseSeries phase_series(std::span<const double> t, std::span<const double> q, std::span<const double> p) {
  if (t.size() != q.size() || t.size() != p.size()) throw std::invalid_argument("phase_series: length mismatch");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  PhaseSeries out;
  out.t.assign(t.begin(), t.end());
  out.phi.resize(t.size());
  out.n.resize(t.size());
  double previous = 0.0;
  bool have_previous = false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    out.n[i] = 0.5 * (q[i] * q[i] + p[i] * p[i]);
    if (q[i] == 0.0 && p[i] == 0.0) {
      out.undefined.push_back(i);
      out.phi[i] = previous;
      continue;
    }
    double phi = std::atan2(p[i], q[i]);
    if (have_previous) {
      // Shift by whole turns to land within pi of the previous sample.
      phi += two_pi * std::round((previous - phi) / two_pi);
    }
    out.phi[i] = previous = phi;
    have_previous = true;
  }
  return out;
}

PhaseSeries phase_series(const TrajectorySeries& series, Mode mode) {
  const bool mech = mode == Mode::Mechanical;
  const auto q = series.component(mech ? mf::q_m : mf::q_d);
  const auto p = series.component(mech ? mf::p_m : mf::p_d);
  return phase_series(series.t, q, p);
}

std::vector<PhaseRecord> phase_records(const TrajectorySeries& series) {
  const auto m = phase_series(series, Mode::Mechanical);
  const auto d = phase_series(series, Mode::Atomic);
  std::vector<PhaseRecord> out(series.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {series.t[i], m.phi[i], d.phi[i], m.n[i], d.n[i], m.phi[i] + d.phi[i], m.phi[i] - d.phi[i]};
  }
  return out;
}

LockingReport detect_locking(std::span<const double> t, std::span<const double> phase_sum, double window,
                             double threshold) {
  if (t.size() != phase_sum.size()) throw std::invalid_argument("detect_locking: length mismatch");
  if (t.empty() || !(window > 0.0)) throw std::invalid_argument("detect_locking: empty series or bad window");
  const auto first = static_cast<std::size_t>(
      std::lower_bound(t.begin(), t.end(), t.back() - window) - t.begin());
  LockingReport report;
  report.samples = t.size() - first;
  if (report.samples < 100) {
    throw std::invalid_argument("detect_locking: trailing window holds fewer than 100 samples");
  }
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t i = first; i < t.size(); ++i) acc += std::polar(1.0, phase_sum[i]);
  acc /= static_cast<double>(report.samples);
  const double R = std::min(1.0, std::abs(acc));
  report.trailing_std = R > 0.0 ? std::sqrt(-2.0 * std::log(R)) : std::numeric_limits<double>::infinity();
  double mean = std::arg(acc);
  if (mean <= -std::numbers::pi) mean = std::numbers::pi;
  report.locked_value = mean;
  report.locked = report.trailing_std < threshold;
  return report;
}

LockingReport detect_locking(const std::vector<PhaseRecord>& records, double window, double threshold) {
  std::vector<double> t(records.size()), sum(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    t[i] = records[i].t;
    sum[i] = records[i].sum;
  }
  return detect_locking(t, sum, window, threshold);
}

double trailing_peak_to_peak_sin(const std::vector<PhaseRecord>& records, double window, bool use_sum) {
  if (records.empty()) return 0.0;
  const double t_begin = records.back().t - window;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : records) {
    if (r.t < t_begin) continue;
    const double s = std::sin(use_sum ? r.sum : r.diff);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return hi - lo;
}

FluctuationMeasures fluctuation_measures(const CovMatrix6& V, const PhaseRecord& r) {
  FluctuationMeasures out;
  try {
    out.var_phase_sum = phase_sum_variance(V, r);
  } catch (const UndefinedVariance&) {
    out.var_phase_sum = std::numeric_limits<double>::quiet_NaN();
  }
  const auto s = sync_measures(V, r.phi_m, r.phi_d);
  out.S_p = s.S_p;
  out.S_a = s.S_a;
  return out;
}

void write_phase_csv(std::ostream& out, const std::vector<PhaseRecord>& records,
                     const std::vector<FluctuationMeasures>& measures) {
  if (!measures.empty() && measures.size() != records.size()) {
    throw std::invalid_argument("write_phase_csv: measures and records differ in length");
  }
  CsvWriter csv(out, {"t", "phi_m", "phi_d", "sum", "diff", "sin_sum", "sin_diff", "n_m", "n_d",
                      "var_phase_sum", "S_p", "S_a"});
  const FluctuationMeasures none;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto& m = measures.empty() ? none : measures[i];
    csv << r.t << r.phi_m << r.phi_d << r.sum << r.diff << std::sin(r.sum) << std::sin(r.diff) << r.n_m
        << r.n_d << m.var_phase_sum << m.S_p << m.S_a;
    csv.end_row();
  }
}

}  // namespace optosync
