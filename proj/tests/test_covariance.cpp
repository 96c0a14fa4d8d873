#include "optosync/covariance.hpp"

#include <doctest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <random>
#include <sstream>

using namespace optosync;

namespace {

Vector6d random_state(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Vector6d x;
  for (int i = 0; i < 6; ++i) x[i] = g(rng);
  return x;
}

// Finite-difference Jacobian of the mean-field rhs, permuted into the
// fluctuation ordering.
Matrix6d jacobian_fd(const Vector6d& x, const SystemParams& p) {
  Matrix6d J_mf;
  for (int j = 0; j < 6; ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
    Vector6d up = x, down = x;
    up[j] += h;
    down[j] -= h;
    J_mf.col(j) = (rhs(up, p) - rhs(down, p)) / (2.0 * h);
  }
  Matrix6d J;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) J(kMeanFieldToFluctuation[i], kMeanFieldToFluctuation[j]) = J_mf(i, j);
  }
  return J;
}

// Covariance after time t under constant drift, via the block exponential
// exp([[-A, D], [0, A^T]] t) (Van Loan).
Matrix6d van_loan(const Matrix6d& A, const Matrix6d& D, const Matrix6d& V0, double t) {
  Eigen::Matrix<double, 12, 12> M = Eigen::Matrix<double, 12, 12>::Zero();
  M.topLeftCorner<6, 6>() = -A * t;
  M.topRightCorner<6, 6>() = D * t;
  M.bottomRightCorner<6, 6>() = A.transpose() * t;
  const Eigen::Matrix<double, 12, 12> E = M.exp();
  const Matrix6d phi = E.bottomRightCorner<6, 6>().transpose();
  const Matrix6d Q = phi * E.topRightCorner<6, 6>();
  return phi * V0 * phi.transpose() + Q;
}

// Steady state of A V + V A^T + D = 0 from the 21 independent entries.
Matrix6d lyapunov_fixed_point(const Matrix6d& A, const Matrix6d& D) {
  std::vector<std::pair<int, int>> idx;
  for (int i = 0; i < 6; ++i) {
    for (int j = i; j < 6; ++j) idx.emplace_back(i, j);
  }
  auto unknown = [&idx](int i, int j) {
    if (i > j) std::swap(i, j);
    return static_cast<int>(std::find(idx.begin(), idx.end(), std::make_pair(i, j)) - idx.begin());
  };
  Eigen::Matrix<double, 21, 21> L = Eigen::Matrix<double, 21, 21>::Zero();
  Eigen::Matrix<double, 21, 1> rhs_vec;
  for (int e = 0; e < 21; ++e) {
    const auto [i, j] = idx[e];
    for (int k = 0; k < 6; ++k) {
      L(e, unknown(k, j)) += A(i, k);
      L(e, unknown(i, k)) += A(j, k);
    }
    rhs_vec[e] = -D(i, j);
  }
  const Eigen::Matrix<double, 21, 1> v = L.fullPivLu().solve(rhs_vec);
  Matrix6d V;
  for (int e = 0; e < 21; ++e) {
    V(idx[e].first, idx[e].second) = V(idx[e].second, idx[e].first) = v[e];
  }
  return V;
}

SystemParams damped_params() {
  SystemParams p = SystemParams::baseline();
  p.eta = 0.0;  // zero mean field keeps the drift constant
  p.gamma = 0.2;
  p.Gamma_a = 0.3;
  p.g_d = 0.1;
  p.g_m = 0.05;
  p.temperature = 0.01;
  return p.refreshed();
}

}  // namespace

TEST_CASE("symplectic form") {
  const auto omega = symplectic_form<double, 4>();
  CHECK(omega(0, 1) == 1.0);
  CHECK(omega(1, 0) == -1.0);
  CHECK(omega(2, 3) == 1.0);
  CHECK(omega(0, 2) == 0.0);
  CHECK((omega * omega).isApprox(-Matrix4d::Identity()));
}

TEST_CASE("drift matrix is the Jacobian of the mean-field equations") {
  std::mt19937_64 rng(11);
  SystemParams p = SystemParams::baseline();
  p.g_m = 3e-3;
  p.g_d = 8e-3;
  for (int trial = 0; trial < 20; ++trial) {
    const Vector6d x = random_state(rng, 100.0);
    const Matrix6d A = drift_matrix(x, p);
    const Matrix6d J = jacobian_fd(x, p);
    CHECK((A - J).cwiseAbs().maxCoeff() < 1e-7);

    const Matrix6d literal = drift_matrix(x, p, DriftConvention::PaperLiteral);
    Matrix6d diff = (literal - A).cwiseAbs();
    const double expected = std::sqrt(2.0) * std::abs(p.g_m - p.g_d);
    CHECK(diff(fl::p_d, fl::q_c) == doctest::Approx(expected));
    CHECK(diff(fl::p_c, fl::q_d) == doctest::Approx(expected));
    diff(fl::p_d, fl::q_c) = diff(fl::p_c, fl::q_d) = 0.0;
    CHECK(diff.maxCoeff() == 0.0);
  }
  CHECK(parse_drift_convention("paper") == DriftConvention::PaperLiteral);
  CHECK(parse_drift_convention(to_string(DriftConvention::Corrected)) == DriftConvention::Corrected);
  CHECK_THROWS_AS(parse_drift_convention("strict"), ConfigError);
}

TEST_CASE("diffusion and initial covariance") {
  SystemParams p = SystemParams::baseline().with_temperature(0.01);
  const Matrix6d D = diffusion_matrix(p);
  CHECK(D.isDiagonal());
  CHECK(D(fl::q_m, fl::q_m) == 0.0);
  CHECK(D(fl::p_m, fl::p_m) == doctest::Approx(p.gamma * (2.0 * p.n_bar + 1.0)));
  CHECK(D(fl::q_d, fl::q_d) == p.Gamma_a);
  CHECK(D(fl::p_c, fl::p_c) == p.kappa);
  const CovMatrix6 V0 = initial_covariance(2.0);
  CHECK(V0(fl::q_m, fl::q_m) == 2.5);
  CHECK(V0(fl::p_m, fl::p_m) == 2.5);
  CHECK(V0(fl::q_c, fl::q_c) == 0.5);
  CHECK_THROWS_AS(initial_covariance(-1.0), std::invalid_argument);
}

TEST_CASE("physicality check") {
  SUBCASE("vacuum sits on the boundary") {
    const auto r = check_physicality(CovMatrix6(0.5 * CovMatrix6::Identity()));
    CHECK(r.min_uncertainty_eigenvalue == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
    CHECK(r.ok());
  }
  SUBCASE("squeezed vacuum is pure") {
    CovMatrix6 V = 0.5 * CovMatrix6::Identity();
    V(0, 0) = 0.5 * std::exp(2.0);
    V(1, 1) = 0.5 * std::exp(-2.0);
    const auto r = check_physicality(V);
    CHECK(std::abs(r.min_uncertainty_eigenvalue) < 1e-12);
    CHECK(r.ok());
  }
  SUBCASE("sub-vacuum noise violates the uncertainty relation") {
    const auto r = check_physicality(CovMatrix6(0.4 * CovMatrix6::Identity()));
    CHECK(r.min_uncertainty_eigenvalue == doctest::Approx(-0.1));
    CHECK_FALSE(r.physical());
  }
  SUBCASE("pure state far from the vacuum scale") {
    // Integer shears are symplectic and keep every entry exact in double:
    // a local shear of size 2^16 and a quantum-nondemolition coupling.
    Matrix6d S = Matrix6d::Identity();
    S(fl::q_m, fl::p_m) = 65536.0;
    Matrix6d Q = Matrix6d::Identity();
    Q(fl::q_d, fl::q_m) = 3.0;
    Q(fl::p_m, fl::p_d) = -3.0;
    const Matrix6d T = Q * S;
    const CovMatrix6 V = T * (0.5 * CovMatrix6::Identity()) * T.transpose();
    REQUIRE(V.cwiseAbs().maxCoeff() > 1e10);
    const auto r = check_physicality(V);
    CHECK(std::abs(r.min_uncertainty_eigenvalue) <= 1e-8);
    CHECK(r.ok());
  }
  SUBCASE("asymmetry is detected") {
    CovMatrix6 V = CovMatrix6::Identity();
    V(0, 1) = 1e-6;
    CHECK_FALSE(check_physicality(V).symmetric());
  }
}

TEST_CASE("constant drift: propagation matches the block-exponential solution") {
  const SystemParams p = damped_params();
  const Matrix6d A = drift_matrix(Vector6d::Zero().eval(), p);
  const Matrix6d D = diffusion_matrix(p);
  const CovMatrix6 V0 = initial_covariance(p.n_bar);
  const auto js = propagate_joint(p, {}, V0, 20.0);
  for (std::size_t i = 0; i < js.covariance.size(); i += 5) {
    const Matrix6d exact = van_loan(A, D, V0, js.trajectory.t[i]);
    CHECK((js.covariance[i] - exact).cwiseAbs().maxCoeff() <= 1e-10 * exact.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("constant stable drift relaxes to the algebraic Lyapunov fixed point") {
  const SystemParams p = damped_params();
  const Matrix6d A = drift_matrix(Vector6d::Zero().eval(), p);
  const Matrix6d V_inf = lyapunov_fixed_point(A, diffusion_matrix(p));
  JointConfig cfg;
  cfg.solver.stride = 50.0;
  const auto js = propagate_joint(p, {}, initial_covariance(0.0), 300.0, cfg);
  CHECK((js.covariance.back() - V_inf).cwiseAbs().maxCoeff() <= 1e-9 * V_inf.cwiseAbs().maxCoeff());
}

TEST_CASE("without noise or damping the phase-space volume is conserved") {
  SystemParams p = SystemParams::baseline();
  p.eta = 0.0;
  p.kappa = p.gamma = p.Gamma_a = 0.0;
  p.g_d = 0.1;
  JointConfig cfg;
  cfg.zero_diffusion = true;
  cfg.solver.stride = 5.0;
  CovMatrix6 V0 = 3.0 * initial_covariance(1.5);
  V0(fl::q_m, fl::q_c) = V0(fl::q_c, fl::q_m) = 0.3;
  const double det0 = V0.determinant();
  const auto js = propagate_joint(p, {}, V0, 100.0, cfg);
  for (const auto& V : js.covariance) CHECK(V.determinant() == doctest::Approx(det0).epsilon(1e-9));
}

TEST_CASE("baseline covariance stays physical (short horizon)") {
  const auto p = SystemParams::baseline().with_temperature(0.01);
  const auto js = propagate_joint(p, {}, initial_covariance(p.n_bar), 2000.0);
  CHECK(js.worst_min_eigenvalue >= -1e-8);
  CHECK(js.worst_relative_symmetry <= 1e-9);
  CHECK(js.covariance.size() == js.trajectory.size());
}

TEST_CASE("unphysical initial covariance is rejected") {
  const auto p = SystemParams::baseline();
  CHECK_THROWS_AS(propagate_joint(p, {}, CovMatrix6(0.1 * CovMatrix6::Identity()), 10.0), PhysicalityError);
  JointConfig unchecked;
  unchecked.check_physicality = false;
  CHECK_NOTHROW(propagate_joint(p, {}, CovMatrix6::Zero(), 10.0, unchecked));
}

TEST_CASE("covariance CSV layout") {
  std::ostringstream out;
  write_covariance_csv(out, {0.0}, {CovMatrix6(0.5 * CovMatrix6::Identity())});
  const std::string text = out.str();
  const std::string header = text.substr(0, text.find('\n'));
  CHECK(header.rfind("t,V_qm_qm,V_qm_pm,V_qm_qd,V_qm_pd,V_qm_qc,V_qm_pc,V_pm_pm,", 0) == 0);
  const std::string tail = "V_qc_qc,V_qc_pc,V_pc_pc";
  CHECK(header.substr(header.size() - tail.size()) == tail);
  CHECK(std::count(header.begin(), header.end(), ',') == 21);
  const auto tri = upper_triangle(CovMatrix6(0.5 * CovMatrix6::Identity()));
  CHECK(tri[0] == 0.5);
  CHECK(tri[1] == 0.0);
  CHECK(tri[20] == 0.5);
  CHECK_THROWS_AS(write_covariance_csv(out, {0.0, 1.0}, {CovMatrix6::Zero()}), std::invalid_argument);
}
