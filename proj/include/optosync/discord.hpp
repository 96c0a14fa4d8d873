#pragma once

// Gaussian quantum discord between the mechanical mode (block A) and the atomic
// mode (block B), from the reduced 4x4 covariance matrix. The Gaussian
// measurement acts on B, whose determinant beta enters f(sqrt beta).
//
// The dynamics use vacuum variance 1/2. The entropy function f below expects
// symplectic eigenvalues >= 1, so inputs are rescaled by 2 first.

#include "optosync/covariance.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string_view>

namespace optosync {

enum class VacuumConvention { HalfVacuum, UnitVacuum };

/// Covariance over (dq_m, dp_m, dq_d, dp_d) with its vacuum convention.
template <typename Scalar>
struct CovMatrix4 {
  Matrix4<Scalar> V;
  VacuumConvention convention = VacuumConvention::HalfVacuum;
};

class DiscordError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Mechanical and atomic rows/columns of a 6x6 covariance (half vacuum).
template <typename Derived>
CovMatrix4<typename Derived::Scalar> reduce(const Eigen::MatrixBase<Derived>& V) {
  static_assert(Derived::RowsAtCompileTime == 6 && Derived::ColsAtCompileTime == 6, "reduce expects 6x6");
  static_assert(fl::q_m == 0 && fl::p_d == 3, "mechanical and atomic modes lead the ordering");
  return {V.template topLeftCorner<4, 4>(), VacuumConvention::HalfVacuum};
}

template <typename Scalar>
CovMatrix4<Scalar> rescale_to_unit_vacuum(const CovMatrix4<Scalar>& v) {
  if (v.convention != VacuumConvention::HalfVacuum) {
    throw std::invalid_argument("covariance is already in the unit-vacuum convention");
  }
  return {Scalar(2) * v.V, VacuumConvention::UnitVacuum};
}

template <typename Scalar>
CovMatrix4<Scalar> as_unit_vacuum(const CovMatrix4<Scalar>& v) {
  return v.convention == VacuumConvention::UnitVacuum ? v : rescale_to_unit_vacuum(v);
}

/// alpha = det A, beta = det B, gamma = det C, delta = det V for V = [[A, C], [C^T, B]].
template <typename Scalar>
struct LocalInvariants {
  Scalar alpha, beta, gamma, delta;
};

template <typename Scalar>
struct SymplecticSpectrum {
  Scalar nu_plus, nu_minus;
};

namespace detail {

// The closed forms take square roots of differences that vanish on common
// states (Sigma^2 = 4 det V whenever nu+ = nu-), so rounding in the inputs of
// the square root is amplified to its square root. Double inputs are therefore
// evaluated in a wider type.
#ifdef __SIZEOF_FLOAT128__
__extension__ typedef __float128 Quad;
#else
typedef long double Quad;
#endif

template <typename Scalar>
struct Wide {
  using type = Scalar;
};
template <>
struct Wide<double> {
  using type = Quad;
};
template <typename Scalar>
using wide_t = typename Wide<Scalar>::type;

template <typename T>
T sqrt_of(const T& x) {
  using std::sqrt;
  return sqrt(x);
}

#ifdef __SIZEOF_FLOAT128__
// Double-precision seed refined by one Newton step; avoids libquadmath.
inline Quad sqrt_of(const Quad& x) {
  if (!(x > 0)) return Quad(0);
  Quad s = std::sqrt(static_cast<double>(x));
  s += (x - s * s) / (2 * s);
  return s;
}
#endif

template <typename T>
T abs_of(const T& x) {
  return x < T(0) ? -x : x;
}

template <typename T>
T det2(const T& a, const T& b, const T& c, const T& d) {
  return a * d - b * c;
}

template <typename T, typename Derived>
LocalInvariants<T> invariants_as(const Eigen::MatrixBase<Derived>& V) {
  T m[4][4];
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) m[i][j] = T(V(i, j));
  }
  // det V by expansion in complementary 2x2 minors of the first two rows.
  const T delta = det2(m[0][0], m[0][1], m[1][0], m[1][1]) * det2(m[2][2], m[2][3], m[3][2], m[3][3]) -
                  det2(m[0][0], m[0][2], m[1][0], m[1][2]) * det2(m[2][1], m[2][3], m[3][1], m[3][3]) +
                  det2(m[0][0], m[0][3], m[1][0], m[1][3]) * det2(m[2][1], m[2][2], m[3][1], m[3][2]) +
                  det2(m[0][1], m[0][2], m[1][1], m[1][2]) * det2(m[2][0], m[2][3], m[3][0], m[3][3]) -
                  det2(m[0][1], m[0][3], m[1][1], m[1][3]) * det2(m[2][0], m[2][2], m[3][0], m[3][2]) +
                  det2(m[0][2], m[0][3], m[1][2], m[1][3]) * det2(m[2][0], m[2][1], m[3][0], m[3][1]);
  return {det2(m[0][0], m[0][1], m[1][0], m[1][1]), det2(m[2][2], m[2][3], m[3][2], m[3][3]),
          det2(m[0][2], m[0][3], m[1][2], m[1][3]), delta};
}

template <typename T>
SymplecticSpectrum<T> spectrum(const LocalInvariants<T>& inv, double radicand_rel_tol) {
  const T sigma = inv.alpha + inv.beta + T(2) * inv.gamma;
  T radicand = sigma * sigma - T(4) * inv.delta;
  if (radicand < T(0)) {
    if (radicand < -T(radicand_rel_tol) * sigma * sigma) {
      throw DiscordError("symplectic eigenvalues: negative radicand beyond tolerance");
    }
    radicand = T(0);
  }
  const T root = sqrt_of(radicand);
  const T lower = (sigma - root) / T(2);
  if (lower < T(0)) throw DiscordError("symplectic eigenvalues: covariance is not positive");
  return {sqrt_of((sigma + root) / T(2)), sqrt_of(lower)};
}

template <typename T>
T epsilon(const LocalInvariants<T>& inv) {
  const auto [alpha, beta, gamma, delta] = inv;
  const T g2 = gamma * gamma;
  const T lhs = (delta - alpha * beta) * (delta - alpha * beta);
  const T rhs = (beta + T(1)) * g2 * (alpha + delta);
  // beta = 1 means the measured mode is pure, hence a product state; the
  // second branch handles that without dividing by (beta - 1)^2.
  if (lhs <= rhs && beta != T(1)) {
    const T inner = g2 + (beta - T(1)) * (delta - alpha);
    const T root = sqrt_of(inner < T(0) ? T(0) : inner);
    return (T(2) * g2 + (beta - T(1)) * (delta - alpha) + T(2) * abs_of(gamma) * root) /
           ((beta - T(1)) * (beta - T(1)));
  }
  T radicand = g2 * g2 + lhs - T(2) * g2 * (delta + alpha * beta);
  if (radicand < T(0)) radicand = T(0);
  return (alpha * beta - g2 + delta - sqrt_of(radicand)) / (T(2) * beta);
}

template <typename Scalar, typename T>
LocalInvariants<Scalar> narrow(const LocalInvariants<T>& w) {
  return {Scalar(w.alpha), Scalar(w.beta), Scalar(w.gamma), Scalar(w.delta)};
}

}  // namespace detail

template <typename Scalar>
LocalInvariants<Scalar> local_invariants(const Matrix4<Scalar>& V) {
  return detail::narrow<Scalar>(detail::invariants_as<detail::wide_t<Scalar>>(V));
}

/// Closed-form symplectic eigenvalues of a unit-vacuum two-mode covariance.
/// A slightly negative inner radicand (relative to Sigma^2) is clamped to 0.
template <typename Scalar>
SymplecticSpectrum<Scalar> symplectic_eigenvalues(const CovMatrix4<Scalar>& v,
                                                  double radicand_rel_tol = 1e-12) {
  if (v.convention != VacuumConvention::UnitVacuum) {
    throw std::invalid_argument("symplectic_eigenvalues expects a unit-vacuum covariance");
  }
  using W = detail::wide_t<Scalar>;
  const auto s = detail::spectrum(detail::invariants_as<W>(v.V), radicand_rel_tol);
  return {Scalar(s.nu_plus), Scalar(s.nu_minus)};
}

/// Symplectic eigenvalues as the moduli of the eigenvalues of i Omega V, sorted
/// descending. Independent of the determinant formula above.
inline SymplecticSpectrum<double> symplectic_eigenvalues_direct(const Matrix4d& V) {
  const Matrix4d M = symplectic_form<double, 4>() * V;
  Eigen::EigenSolver<Matrix4d> solver(M, false);
  Eigen::Vector4d moduli = solver.eigenvalues().cwiseAbs();
  std::sort(moduli.data(), moduli.data() + 4);
  // Eigenvalues come in +/- i nu pairs.
  return {0.5 * (moduli[2] + moduli[3]), 0.5 * (moduli[0] + moduli[1])};
}

enum class LogBase { Two, E };

/// f(x) = ((x+1)/2) log((x+1)/2) - ((x-1)/2) log((x-1)/2), f(1) = 0.
template <typename Scalar>
Scalar entropy_f(const Scalar& x, LogBase base = LogBase::Two) {
  using std::log;
  const Scalar plus = (x + Scalar(1)) / Scalar(2);
  const Scalar minus = (x - Scalar(1)) / Scalar(2);
  Scalar value = plus * log(plus);
  if (minus > Scalar(0)) value -= minus * log(minus);
  if (base == LogBase::Two) value /= log(Scalar(2));
  return value;
}

/// The minimized conditional term of the discord formula, from the local invariants.
template <typename Scalar>
Scalar discord_epsilon(const LocalInvariants<Scalar>& inv) {
  using W = detail::wide_t<Scalar>;
  return Scalar(detail::epsilon(LocalInvariants<W>{W(inv.alpha), W(inv.beta), W(inv.gamma), W(inv.delta)}));
}

struct DiscordOptions {
  LogBase base = LogBase::Two;
  /// false: D = f(sqrt b) - f(nu-) - f(nu+) + f(sqrt eps), zero on product states.
  /// true: the conditional term enters with a minus sign.
  bool negative_conditional_term = false;
  double physicality_tol = 1e-8;  ///< allowed undershoot of nu- below 1
};

/// Gaussian discord of a two-mode state. Half-vacuum inputs are rescaled.
template <typename Scalar>
Scalar gaussian_discord(const CovMatrix4<Scalar>& input, const DiscordOptions& opts = {}) {
  const CovMatrix4<Scalar> v = as_unit_vacuum(input);
  if (v.V.template topRightCorner<2, 2>().isZero(0.0)) return Scalar(0);

  using W = detail::wide_t<Scalar>;
  const auto inv = detail::invariants_as<W>(v.V);
  const auto spectrum = detail::spectrum(inv, 1e-12);
  auto at_least_one = [&](Scalar x, const char* what) {
    if (x < Scalar(1)) {
      if (x < Scalar(1) - Scalar(opts.physicality_tol)) {
        throw DiscordError(std::string("covariance is not physical (") + what + " < 1)");
      }
      return Scalar(1);
    }
    return x;
  };
  const Scalar nu_minus = at_least_one(Scalar(spectrum.nu_minus), "nu-");
  const Scalar nu_plus = at_least_one(Scalar(spectrum.nu_plus), "nu+");
  const Scalar sqrt_beta = at_least_one(Scalar(detail::sqrt_of(inv.beta)), "sqrt(beta)");
  const Scalar sqrt_eps = at_least_one(Scalar(detail::sqrt_of(detail::epsilon(inv))), "sqrt(epsilon)");

  const Scalar conditional = entropy_f(sqrt_eps, opts.base);
  Scalar d = entropy_f(sqrt_beta, opts.base) - entropy_f(nu_minus, opts.base) -
             entropy_f(nu_plus, opts.base);
  d += opts.negative_conditional_term ? -conditional : conditional;
  if (d < Scalar(0) && d > Scalar(-1e-10)) d = Scalar(0);
  return d;
}

/// Discord of the mechanical-atomic block of a 6x6 half-vacuum covariance.
template <typename Derived>
typename Derived::Scalar gaussian_discord(const Eigen::MatrixBase<Derived>& V6, const DiscordOptions& opts = {}) {
  return gaussian_discord(reduce(V6), opts);
}

}  // namespace optosync
