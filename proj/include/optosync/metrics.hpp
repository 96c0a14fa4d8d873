#pragma once

#include "optosync/covariance.hpp"

#include <cmath>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

namespace optosync {

enum class Mode { Mechanical, Atomic };

/// Unwrapped phase and n = (q^2 + p^2)/2 of one oscillator.
struct PhaseSeries {
  std::vector<double> t;
  std::vector<double> phi;
  std::vector<double> n;
  std::vector<std::size_t> undefined;  ///< samples where (q, p) = (0, 0); phase carried over
};

/// Phase via atan2(p, q), unwrapped so adjacent samples differ by less than pi.
PhaseSeries phase_series(const TrajectorySeries& series, Mode mode);
PhaseSeries phase_series(std::span<const double> t, std::span<const double> q, std::span<const double> p);

struct PhaseRecord {
  double t = 0.0;
  double phi_m = 0.0, phi_d = 0.0;
  double n_m = 0.0, n_d = 0.0;
  double sum = 0.0, diff = 0.0;
};

std::vector<PhaseRecord> phase_records(const TrajectorySeries& series);

struct LockingReport {
  bool locked = false;
  double locked_value = 0.0;   ///< circular mean in (-pi, pi]
  double trailing_std = 0.0;   ///< circular standard deviation sqrt(-2 ln R)
  std::size_t samples = 0;
};

/// Circular statistics of the phase sum over the trailing window.
/// Throws std::invalid_argument when the window holds fewer than 100 samples.
LockingReport detect_locking(std::span<const double> t, std::span<const double> phase_sum,
                             double window, double threshold = 0.1);
LockingReport detect_locking(const std::vector<PhaseRecord>& records, double window,
                             double threshold = 0.1);

/// max - min of sin(sum) or sin(diff) over the trailing window.
double trailing_peak_to_peak_sin(const std::vector<PhaseRecord>& records, double window, bool use_sum);

/// Raised when an amplitude is too small for the phase fluctuation to be defined.
class UndefinedVariance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Weight vector of the phase-sum fluctuation in the covariance ordering.
template <typename Scalar>
Vector6<Scalar> phase_sum_weights(Scalar phi_m, Scalar phi_d, Scalar n_m, Scalar n_d) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Scalar am = sqrt(Scalar(2) * n_m), ad = sqrt(Scalar(2) * n_d);
  Vector6<Scalar> w = Vector6<Scalar>::Zero();
  w[fl::q_m] = -sin(phi_m) / am;
  w[fl::p_m] = cos(phi_m) / am;
  w[fl::q_d] = -sin(phi_d) / ad;
  w[fl::p_d] = cos(phi_d) / ad;
  return w;
}

/// <(d phi_m + d phi_d)^2> as w^T V w.
template <typename Derived>
typename Derived::Scalar phase_sum_variance(const Eigen::MatrixBase<Derived>& V, const PhaseRecord& r,
                                            double amplitude_floor = 1e-12) {
  using Scalar = typename Derived::Scalar;
  if (!(r.n_m > amplitude_floor) || !(r.n_d > amplitude_floor)) {
    throw UndefinedVariance("phase-sum variance undefined: amplitude at or below floor", r.t);
  }
  const Vector6<Scalar> w = phase_sum_weights<Scalar>(Scalar(r.phi_m), Scalar(r.phi_d), Scalar(r.n_m),
                                                      Scalar(r.n_d));
  return w.dot(V * w);
}

struct SyncMeasures {
  double S_p = 0.0;
  double S_a = 0.0;
};

/// Weight vector of dp'_m -/+ dp'_d: `sign = -1` for S_p, `+1` for S_a.
template <typename Scalar>
Vector6<Scalar> rotated_quadrature_weights(Scalar phi_m, Scalar phi_d, int sign) {
  using std::cos;
  using std::sin;
  Vector6<Scalar> w = Vector6<Scalar>::Zero();
  w[fl::q_m] = -sin(phi_m);
  w[fl::p_m] = cos(phi_m);
  w[fl::q_d] = -Scalar(sign) * sin(phi_d);
  w[fl::p_d] = Scalar(sign) * cos(phi_d);
  return w;
}

/// S = 1 / (2 <dp'^2>) for the difference (S_p) and sum (S_a) of the rotated
/// momenta; a vanishing quadratic form gives +inf.
template <typename Derived>
SyncMeasures sync_measures(const Eigen::MatrixBase<Derived>& V, double phi_m, double phi_d) {
  auto measure = [&](int sign) {
    const Vector6d w = rotated_quadrature_weights(phi_m, phi_d, sign);
    const double q = w.dot(V.template cast<double>() * w);
    return q == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / (2.0 * q);
  };
  return {measure(-1), measure(+1)};
}

struct FluctuationMeasures {
  double var_phase_sum = std::numeric_limits<double>::quiet_NaN();
  double S_p = std::numeric_limits<double>::quiet_NaN();
  double S_a = std::numeric_limits<double>::quiet_NaN();
};

/// Variance and S_p/S_a for one covariance sample; the variance is NaN when
/// undefined instead of throwing.
FluctuationMeasures fluctuation_measures(const CovMatrix6& V, const PhaseRecord& r);

/// CSV `t,phi_m,phi_d,sum,diff,sin_sum,sin_diff,n_m,n_d,var_phase_sum,S_p,S_a`.
/// `measures` may be empty (NaN columns) or match `records` in length.
void write_phase_csv(std::ostream& out, const std::vector<PhaseRecord>& records,
                     const std::vector<FluctuationMeasures>& measures = {});

}  // namespace optosync
