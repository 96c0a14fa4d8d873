#pragma once

#include "optosync/meanfield.hpp"

#include <array>
#include <complex>
#include <iosfwd>
#include <vector>

namespace optosync {

/// 6x6 covariance of the fluctuation quadratures in the ordering
/// u = (dq_m, dp_m, dq_d, dp_d, dq_c, dp_c); vacuum variance is 1/2.
using CovMatrix6 = Matrix6d;

/// How the atom-cavity coupling enters the drift matrix.
enum class DriftConvention {
  Corrected,     ///< -sqrt(2) g_d, the linearization of the Langevin equations
  PaperLiteral,  ///< -sqrt(2) g_m, as printed in the published drift matrix
};

std::string_view to_string(DriftConvention c);
DriftConvention parse_drift_convention(std::string_view s);

/// Block-diagonal symplectic form with one [[0, 1], [-1, 0]] block per mode.
template <typename Scalar, int N>
Eigen::Matrix<Scalar, N, N> symplectic_form() {
  static_assert(N % 2 == 0, "symplectic form needs an even dimension");
  Eigen::Matrix<Scalar, N, N> omega = Eigen::Matrix<Scalar, N, N>::Zero();
  for (int k = 0; k < N / 2; ++k) {
    omega(2 * k, 2 * k + 1) = Scalar(1);
    omega(2 * k + 1, 2 * k) = Scalar(-1);
  }
  return omega;
}

/// Drift matrix of the linearized fluctuations around the mean field `x`
/// (mean-field ordering), returned in the fluctuation ordering.
template <typename Derived>
Matrix6<typename Derived::Scalar> drift_matrix(const Eigen::MatrixBase<Derived>& x,
                                               const SystemParams& p,
                                               DriftConvention convention = DriftConvention::Corrected) {
  using Scalar = typename Derived::Scalar;
  using std::sqrt;
  const Scalar qc = x[mf::q_c], pc = x[mf::p_c], qm = x[mf::q_m];
  const Scalar g_m(p.g_m);
  const Scalar atom_cavity = sqrt(Scalar(2)) *
                             Scalar(convention == DriftConvention::Corrected ? p.g_d : p.g_m);
  const Scalar detuning = Scalar(p.Delta) + g_m * qm;

  Matrix6<Scalar> A = Matrix6<Scalar>::Zero();
  A(fl::q_m, fl::p_m) = Scalar(1);

  A(fl::p_m, fl::q_m) = Scalar(-1);
  A(fl::p_m, fl::p_m) = -Scalar(p.gamma);
  A(fl::p_m, fl::q_c) = -g_m * qc;
  A(fl::p_m, fl::p_c) = -g_m * pc;

  A(fl::q_d, fl::q_d) = -Scalar(p.Gamma_a);
  A(fl::q_d, fl::p_d) = -Scalar(p.omega_sigma);

  A(fl::p_d, fl::q_d) = Scalar(p.omega_sigma);
  A(fl::p_d, fl::p_d) = -Scalar(p.Gamma_a);
  A(fl::p_d, fl::q_c) = -atom_cavity;

  A(fl::q_c, fl::q_m) = g_m * pc;
  A(fl::q_c, fl::q_c) = -Scalar(p.kappa);
  A(fl::q_c, fl::p_c) = detuning;

  A(fl::p_c, fl::q_m) = -g_m * qc;
  A(fl::p_c, fl::q_d) = -atom_cavity;
  A(fl::p_c, fl::q_c) = -detuning;
  A(fl::p_c, fl::p_c) = -Scalar(p.kappa);
  return A;
}

/// diag(0, gamma (2 n_bar + 1), Gamma, Gamma, kappa, kappa).
Matrix6d diffusion_matrix(const SystemParams& p);

/// Mechanical thermal state at occupancy n_bar, atoms and cavity in vacuum.
CovMatrix6 initial_covariance(double n_bar);

struct PhysicalityReport {
  double symmetric_defect = 0.0;  ///< max |V - V^T|
  double scale = 0.0;             ///< max |V|
  double min_uncertainty_eigenvalue = 0.0;  ///< smallest eigenvalue of V + (i/2) Omega

  bool symmetric(double rel_tol = 1e-9) const { return symmetric_defect <= rel_tol * scale; }
  bool physical(double tol = 1e-8) const { return min_uncertainty_eigenvalue >= -tol; }
  bool ok(double rel_sym_tol = 1e-9, double tol = 1e-8) const {
    return symmetric(rel_sym_tol) && physical(tol);
  }
};

/// Symmetry defect and the Heisenberg-bound eigenvalue of a 2n x 2n covariance
/// (half-vacuum convention).
template <typename Derived>
PhysicalityReport check_physicality(const Eigen::MatrixBase<Derived>& V) {
  constexpr int N = Derived::RowsAtCompileTime;
  static_assert(N != Eigen::Dynamic, "check_physicality expects a fixed-size matrix");
  // Eigenvalues come out with an absolute error of about eps * max|V|. The
  // fluctuations grow to |V| ~ 1e10 along the free phase direction, where a
  // double-precision solver can no longer resolve the 1e-8 tolerance, so the
  // bound is evaluated in extended precision.
  using Real = long double;
  using Complex = std::complex<Real>;
  using HermitianMatrix = Eigen::Matrix<Complex, N, N>;
  PhysicalityReport report;
  const Eigen::Matrix<double, N, N> M = V.template cast<double>();
  report.symmetric_defect = (M - M.transpose()).cwiseAbs().maxCoeff();
  report.scale = M.cwiseAbs().maxCoeff();
  // The eigen-solver reads the lower triangle only, so symmetrize first.
  const Eigen::Matrix<Real, N, N> S = Real(0.5) * (M.template cast<Real>() + M.transpose().template cast<Real>());
  const HermitianMatrix H = S.template cast<Complex>() +
                            Complex(0.0, 0.5) * symplectic_form<double, N>().template cast<Complex>();
  Eigen::SelfAdjointEigenSolver<HermitianMatrix> solver(H, Eigen::EigenvaluesOnly);
  report.min_uncertainty_eigenvalue = static_cast<double>(solver.eigenvalues().minCoeff());
  return report;
}

class PhysicalityError : public NumericalError {
 public:
  PhysicalityError(const std::string& what, double time, PhysicalityReport report)
      : NumericalError(what, time), report_(report) {}
  const PhysicalityReport& report() const noexcept { return report_; }

 private:
  PhysicalityReport report_;
};

struct JointConfig {
  SolverConfig solver = default_solver();
  DriftConvention drift = DriftConvention::Corrected;
  bool check_physicality = true;
  double physicality_tol = 1e-8;
  double symmetry_rel_tol = 1e-9;
  bool zero_diffusion = false;  ///< diagnostic: drop the noise term entirely

  static SolverConfig default_solver() {
    SolverConfig s;
    s.method = Method::RK8;
    s.step = 0.02;
    s.stride = 1.0;
    return s;
  }
};

/// Mean field and covariance sampled on a shared time grid.
struct JointSeries {
  TrajectorySeries trajectory;
  std::vector<CovMatrix6> covariance;
  double worst_min_eigenvalue = 0.0;      ///< over stored samples (when checked)
  double worst_relative_symmetry = 0.0;   ///< max |V - V^T| / max |V| over stored samples
};

/// Co-integrates the mean field and dV/dt = A V + V A^T + D with a single
/// stepper; V is re-symmetrized after each step. Throws PhysicalityError at
/// the first stored sample that violates the configured tolerances.
JointSeries propagate_joint(const SystemParams& params, const MeanFieldState<double>& initial,
                            const CovMatrix6& V0, double t_end, const JointConfig& cfg = {});

/// 21 upper-triangle entries, row-major.
std::array<double, 21> upper_triangle(const CovMatrix6& V);

/// CSV with `t` followed by the 21 upper-triangle entries (`V_qm_qm, V_qm_pm, ...`).
void write_covariance_csv(std::ostream& out, const std::vector<double>& t,
                          const std::vector<CovMatrix6>& covariance);

}  // namespace optosync
