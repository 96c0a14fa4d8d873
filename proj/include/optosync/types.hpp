#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace optosync {

template <typename Scalar>
using Vector6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using Matrix6 = Eigen::Matrix<Scalar, 6, 6>;
template <typename Scalar>
using Vector4 = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;

using Vector6d = Vector6<double>;
using Matrix6d = Matrix6<double>;
using Matrix4d = Matrix4<double>;

/// Index of each quadrature inside a mean-field vector (q_c, p_c, q_m, p_m, q_d, p_d).
namespace mf {
inline constexpr Eigen::Index q_c = 0;
inline constexpr Eigen::Index p_c = 1;
inline constexpr Eigen::Index q_m = 2;
inline constexpr Eigen::Index p_m = 3;
inline constexpr Eigen::Index q_d = 4;
inline constexpr Eigen::Index p_d = 5;
}  // namespace mf

/// Index of each fluctuation quadrature in the covariance ordering
/// u = (dq_m, dp_m, dq_d, dp_d, dq_c, dp_c).
namespace fl {
inline constexpr Eigen::Index q_m = 0;
inline constexpr Eigen::Index p_m = 1;
inline constexpr Eigen::Index q_d = 2;
inline constexpr Eigen::Index p_d = 3;
inline constexpr Eigen::Index q_c = 4;
inline constexpr Eigen::Index p_c = 5;
}  // namespace fl

/// Maps mean-field index -> fluctuation index.
inline constexpr Eigen::Index kMeanFieldToFluctuation[6] = {fl::q_c, fl::p_c, fl::q_m,
                                                            fl::p_m, fl::q_d, fl::p_d};

/// Reorders a mean-field-ordered vector into the covariance ordering.
template <typename Derived>
Vector6<typename Derived::Scalar> to_fluctuation_order(const Eigen::MatrixBase<Derived>& x) {
  Vector6<typename Derived::Scalar> u;
  for (Eigen::Index i = 0; i < 6; ++i) u[kMeanFieldToFluctuation[i]] = x[i];
  return u;
}

// Error hierarchy. The CLI maps each family onto a distinct exit code.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double time)
      : std::runtime_error(what + " (t = " + std::to_string(time) + ")"), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace optosync
