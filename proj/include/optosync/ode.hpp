#pragma once

// Explicit Runge-Kutta integrators for small fixed-size Eigen state vectors.
//
//   RK4   classical fourth order, fixed step
//   RK45  Dormand-Prince 5(4), adaptive step with mixed abs/rel error control
//   RK8   Dormand-Prince 8(5,3) propagation formula used with a fixed step
//
// All steppers are templates over the state vector type so the same code
// drives the 6-dimensional mean field and the 42-dimensional joint
// mean-field + covariance system.

#include "optosync/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace optosync {

enum class Method { RK4, RK45, RK8 };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::RK4: return "rk4";
    case Method::RK45: return "rk45";
    case Method::RK8: return "rk8";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "rk4") return Method::RK4;
  if (s == "rk45") return Method::RK45;
  if (s == "rk8") return Method::RK8;
  throw ConfigError("method must be rk4, rk45 or rk8, got '" + std::string(s) + "'");
}

/// Extra output samples at `stride` spacing inside [begin, end].
struct SamplingWindow {
  double begin = 0.0;
  double end = 0.0;
  double stride = 0.0;
};

struct SolverConfig {
  Method method = Method::RK45;
  double step = 1e-3;  ///< fixed step (RK4, RK8) or initial trial step (RK45)
  double rtol = 1e-9;
  double atol = 1e-9;
  double stride = 0.25;  ///< output sampling stride in dimensionless time
  std::size_t max_samples = 1'000'000;
  double min_step = 1e-12;
  std::vector<SamplingWindow> windows;
};

struct SolverStats {
  std::string method;
  double rtol = 0.0;
  double atol = 0.0;
  double step = 0.0;    ///< configured fixed step, or last accepted adaptive step
  double stride = 0.0;  ///< stride actually used after decimation
  std::uint64_t accepted = 0;
  std::uint64_t rejected = 0;
  std::uint64_t rhs_evaluations = 0;
};

/// Sorted, strictly increasing sample times in [t0, t_end] (t_end always
/// included). The main grid is decimated so it holds at most
/// `cfg.max_samples` points; window grids are added on top.
inline std::vector<double> output_times(double t0, double t_end, const SolverConfig& cfg,
                                        double* stride_used = nullptr) {
  if (!(t_end > t0)) throw std::invalid_argument("output_times: t_end must exceed t0");
  if (!(cfg.stride > 0.0)) throw std::invalid_argument("output_times: stride must be > 0");
  const double span = t_end - t0;
  double stride = cfg.stride;
  if (cfg.max_samples > 1 && span / stride > static_cast<double>(cfg.max_samples - 1)) {
    stride = span / static_cast<double>(cfg.max_samples - 1);
  }
  if (stride_used) *stride_used = stride;

  std::vector<double> times;
  // The small offset keeps grid points that land on t_end up to rounding.
  const auto n = static_cast<std::int64_t>(std::floor(span / stride + 1e-9));
  times.reserve(static_cast<std::size_t>(n) + 2);
  for (std::int64_t k = 0; k <= n; ++k) times.push_back(t0 + static_cast<double>(k) * stride);
  double finest = stride;
  for (const auto& w : cfg.windows) {
    if (!(w.stride > 0.0) || !(w.end >= w.begin)) {
      throw std::invalid_argument("output_times: malformed sampling window");
    }
    finest = std::min(finest, w.stride);
    const double b = std::max(w.begin, t0);
    const double e = std::min(w.end, t_end);
    if (e < b) continue;
    const auto m = static_cast<std::int64_t>(std::floor((e - b) / w.stride + 1e-9));
    for (std::int64_t k = 0; k <= m; ++k) times.push_back(b + static_cast<double>(k) * w.stride);
  }
  times.push_back(t_end);
  std::sort(times.begin(), times.end());
  const double merge_tol = 1e-9 * finest;
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    if (t > t_end) continue;
    if (out.empty() || t - out.back() > merge_tol) out.push_back(t);
  }
  if (t_end - out.back() <= merge_tol) out.back() = t_end;
  return out;
}

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DP45 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // b - b_hat (fifth minus embedded fourth order weights)
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

// DOP853 propagation coefficients (Hairer, Norsett & Wanner).
struct DP853 {
  static constexpr double c2 = 0.526001519587677318785587544488e-01;
  static constexpr double c3 = 0.789002279381515978178381316732e-01;
  static constexpr double c4 = 0.118350341907227396726757197510e+00;
  static constexpr double c5 = 0.281649658092772603273242802490e+00;
  static constexpr double c6 = 0.333333333333333333333333333333e+00;
  static constexpr double c7 = 0.25e+00;
  static constexpr double c8 = 0.307692307692307692307692307692e+00;
  static constexpr double c9 = 0.651282051282051282051282051282e+00;
  static constexpr double c10 = 0.6e+00;
  static constexpr double c11 = 0.857142857142857142857142857142e+00;

  static constexpr double a21 = 5.26001519587677318785587544488e-2;
  static constexpr double a31 = 1.97250569845378994544595329183e-2;
  static constexpr double a32 = 5.91751709536136983633785987549e-2;
  static constexpr double a41 = 2.95875854768068491816892993775e-2;
  static constexpr double a43 = 8.87627564304205475450678981324e-2;
  static constexpr double a51 = 2.41365134159266685502369798665e-1;
  static constexpr double a53 = -8.84549479328286085344864962717e-1;
  static constexpr double a54 = 9.24834003261792003115737966543e-1;
  static constexpr double a61 = 3.7037037037037037037037037037e-2;
  static constexpr double a64 = 1.70828608729473871279604482173e-1;
  static constexpr double a65 = 1.25467687566822425016691814123e-1;
  static constexpr double a71 = 3.7109375e-2;
  static constexpr double a74 = 1.70252211019544039314978060272e-1;
  static constexpr double a75 = 6.02165389804559606850219397283e-2;
  static constexpr double a76 = -1.7578125e-2;
  static constexpr double a81 = 3.70920001185047927108779319836e-2;
  static constexpr double a84 = 1.70383925712239993810214054705e-1;
  static constexpr double a85 = 1.07262030446373284651809199168e-1;
  static constexpr double a86 = -1.53194377486244017527936158236e-2;
  static constexpr double a87 = 8.27378916381402288758473766002e-3;
  static constexpr double a91 = 6.24110958716075717114429577812e-1;
  static constexpr double a94 = -3.36089262944694129406857109825e0;
  static constexpr double a95 = -8.68219346841726006818189891453e-1;
  static constexpr double a96 = 2.75920996994467083049415600797e1;
  static constexpr double a97 = 2.01540675504778934086186788979e1;
  static constexpr double a98 = -4.34898841810699588477366255144e1;
  static constexpr double a101 = 4.77662536438264365890433908527e-1;
  static constexpr double a104 = -2.48811461997166764192642586468e0;
  static constexpr double a105 = -5.90290826836842996371446475743e-1;
  static constexpr double a106 = 2.12300514481811942347288949897e1;
  static constexpr double a107 = 1.52792336328824235832596922938e1;
  static constexpr double a108 = -3.32882109689848629194453265587e1;
  static constexpr double a109 = -2.03312017085086261358222928593e-2;
  static constexpr double a111 = -9.3714243008598732571704021658e-1;
  static constexpr double a114 = 5.18637242884406370830023853209e0;
  static constexpr double a115 = 1.09143734899672957818500254654e0;
  static constexpr double a116 = -8.14978701074692612513997267357e0;
  static constexpr double a117 = -1.85200656599969598641566180701e1;
  static constexpr double a118 = 2.27394870993505042818970056734e1;
  static constexpr double a119 = 2.49360555267965238987089396762e0;
  static constexpr double a1110 = -3.0467644718982195003823669022e0;
  static constexpr double a121 = 2.27331014751653820792359768449e0;
  static constexpr double a124 = -1.05344954667372501984066689879e1;
  static constexpr double a125 = -2.00087205822486249909675718444e0;
  static constexpr double a126 = -1.79589318631187989172765950534e1;
  static constexpr double a127 = 2.79488845294199600508499808837e1;
  static constexpr double a128 = -2.85899827713502369474065508674e0;
  static constexpr double a129 = -8.87285693353062954433549289258e0;
  static constexpr double a1210 = 1.23605671757943030647266201528e1;
  static constexpr double a1211 = 6.43392746015763530355970484046e-1;

  static constexpr double b1 = 5.42937341165687622380535766363e-2;
  static constexpr double b6 = 4.45031289275240888144113950566e0;
  static constexpr double b7 = 1.89151789931450038304281599044e0;
  static constexpr double b8 = -5.8012039600105847814672114227e0;
  static constexpr double b9 = 3.1116436695781989440891606237e-1;
  static constexpr double b10 = -1.52160949662516078556178806805e-1;
  static constexpr double b11 = 2.01365400804030348374776537501e-1;
  static constexpr double b12 = 4.47106157277725905176885569043e-2;
};

}  // namespace detail

template <typename Vec, typename F>
Vec rk4_step(F& f, double t, const Vec& y, double h) {
  const Vec k1 = f(t, y);
  const Vec k2 = f(t + 0.5 * h, (y + (0.5 * h) * k1).eval());
  const Vec k3 = f(t + 0.5 * h, (y + (0.5 * h) * k2).eval());
  const Vec k4 = f(t + h, (y + h * k3).eval());
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <typename Vec, typename F>
Vec rk8_step(F& f, double t, const Vec& y, double h) {
  using T = detail::DP853;
  const Vec k1 = f(t, y);
  const Vec k2 = f(t + T::c2 * h, (y + h * T::a21 * k1).eval());
  const Vec k3 = f(t + T::c3 * h, (y + h * (T::a31 * k1 + T::a32 * k2)).eval());
  const Vec k4 = f(t + T::c4 * h, (y + h * (T::a41 * k1 + T::a43 * k3)).eval());
  const Vec k5 = f(t + T::c5 * h, (y + h * (T::a51 * k1 + T::a53 * k3 + T::a54 * k4)).eval());
  const Vec k6 = f(t + T::c6 * h, (y + h * (T::a61 * k1 + T::a64 * k4 + T::a65 * k5)).eval());
  const Vec k7 =
      f(t + T::c7 * h, (y + h * (T::a71 * k1 + T::a74 * k4 + T::a75 * k5 + T::a76 * k6)).eval());
  const Vec k8 = f(t + T::c8 * h, (y + h * (T::a81 * k1 + T::a84 * k4 + T::a85 * k5 +
                                            T::a86 * k6 + T::a87 * k7))
                                      .eval());
  const Vec k9 = f(t + T::c9 * h, (y + h * (T::a91 * k1 + T::a94 * k4 + T::a95 * k5 +
                                            T::a96 * k6 + T::a97 * k7 + T::a98 * k8))
                                      .eval());
  const Vec k10 = f(t + T::c10 * h, (y + h * (T::a101 * k1 + T::a104 * k4 + T::a105 * k5 +
                                              T::a106 * k6 + T::a107 * k7 + T::a108 * k8 +
                                              T::a109 * k9))
                                        .eval());
  const Vec k11 = f(t + T::c11 * h, (y + h * (T::a111 * k1 + T::a114 * k4 + T::a115 * k5 +
                                              T::a116 * k6 + T::a117 * k7 + T::a118 * k8 +
                                              T::a119 * k9 + T::a1110 * k10))
                                        .eval());
  const Vec k12 = f(t + h, (y + h * (T::a121 * k1 + T::a124 * k4 + T::a125 * k5 + T::a126 * k6 +
                                     T::a127 * k7 + T::a128 * k8 + T::a129 * k9 +
                                     T::a1210 * k10 + T::a1211 * k11))
                               .eval());
  return y + h * (T::b1 * k1 + T::b6 * k6 + T::b7 * k7 + T::b8 * k8 + T::b9 * k9 +
                  T::b10 * k10 + T::b11 * k11 + T::b12 * k12);
}

/// One Dormand-Prince 5(4) step; writes the local error estimate to `err`.
template <typename Vec, typename F>
Vec dopri5_step(F& f, double t, const Vec& y, double h, Vec& err) {
  using T = detail::DP45;
  const Vec k1 = f(t, y);
  const Vec k2 = f(t + T::c2 * h, (y + h * T::a21 * k1).eval());
  const Vec k3 = f(t + T::c3 * h, (y + h * (T::a31 * k1 + T::a32 * k2)).eval());
  const Vec k4 = f(t + T::c4 * h, (y + h * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3)).eval());
  const Vec k5 = f(t + T::c5 * h,
                   (y + h * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4)).eval());
  const Vec k6 = f(t + h, (y + h * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 +
                                    T::a65 * k5))
                              .eval());
  const Vec y_new =
      y + h * (T::b1 * k1 + T::b3 * k3 + T::b4 * k4 + T::b5 * k5 + T::b6 * k6);
  const Vec k7 = f(t + h, y_new);
  err = h * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);
  return y_new;
}

/// Integrates y' = f(t, y) from t0 to t_end. `observe(t, y)` is called at
/// every output time (including t0); `post_step(y)` runs after each accepted
/// step and may project the state (e.g. re-symmetrize a matrix block).
template <typename Vec, typename F, typename Observer, typename PostStep>
SolverStats integrate_ode(F&& f, double t0, Vec y, double t_end, const SolverConfig& cfg,
                          Observer&& observe, PostStep&& post_step) {
  if (!(cfg.step > 0.0)) throw std::invalid_argument("integrate: step must be > 0");
  if (cfg.method == Method::RK45 && !(cfg.rtol > 0.0 && cfg.atol > 0.0)) {
    throw std::invalid_argument("integrate: tolerances must be positive");
  }
  SolverStats stats;
  stats.method = std::string(to_string(cfg.method));
  stats.rtol = cfg.rtol;
  stats.atol = cfg.atol;
  stats.step = cfg.step;
  const std::vector<double> times = output_times(t0, t_end, cfg, &stats.stride);

  std::uint64_t evaluations = 0;
  auto rhs = [&](double t, const Vec& state) -> Vec {
    ++evaluations;
    return f(t, state);
  };

  if (!y.allFinite()) throw NumericalError("non-finite initial state", t0);
  double t = t0;
  observe(t, y);
  double h = cfg.step;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double target = times[i];
    while (t < target) {
      double remaining = target - t;
      if (cfg.method == Method::RK45) {
        const bool clamped = h >= remaining * (1.0 - 1e-12);
        const double h_try = clamped ? remaining : h;
        if (h_try < cfg.min_step) throw NumericalError("step size underflow", t);
        Vec err;
        Vec y_new = dopri5_step(rhs, t, y, h_try, err);
        const auto scale = (cfg.atol + cfg.rtol * y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array());
        const double norm = std::sqrt((err.array() / scale).square().mean());
        if (!std::isfinite(norm) || norm > 1.0) {
          ++stats.rejected;
          const double factor = std::isfinite(norm) ? std::max(0.2, 0.9 * std::pow(norm, -0.2)) : 0.2;
          h = h_try * factor;
          continue;
        }
        ++stats.accepted;
        const double factor = norm == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(norm, -0.2)));
        h = clamped ? std::max(h, h_try * factor) : h_try * factor;
        t = clamped ? target : t + h_try;
        y = std::move(y_new);
        stats.step = h_try;
      } else {
        // Snap to the output time rather than leave a sliver step behind.
        const double h_try = remaining <= cfg.step * (1.0 + 1e-9) ? remaining : cfg.step;
        y = cfg.method == Method::RK4 ? rk4_step(rhs, t, y, h_try) : rk8_step(rhs, t, y, h_try);
        ++stats.accepted;
        t = h_try == remaining ? target : t + h_try;
      }
      post_step(y);
      if (!y.allFinite()) throw NumericalError("non-finite state (blow-up)", t);
    }
    observe(t, y);
  }
  stats.rhs_evaluations = evaluations;
  return stats;
}

template <typename Vec, typename F, typename Observer>
SolverStats integrate_ode(F&& f, double t0, Vec y, double t_end, const SolverConfig& cfg,
                          Observer&& observe) {
  return integrate_ode(std::forward<F>(f), t0, std::move(y), t_end, cfg,
                       std::forward<Observer>(observe), [](Vec&) {});
}

}  // namespace optosync
