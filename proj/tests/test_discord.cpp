#include "optosync/discord.hpp"

#include "discord_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace optosync;
using testing::Real;

namespace {

CovMatrix4<double> unit(const Matrix4d& V) { return {V, VacuumConvention::UnitVacuum}; }

Matrix4d two_mode_squeezed_thermal(double r, double n) {
  Matrix4d V;
  testing::squeezed_thermal_reference(Real(r), Real(n), &V);
  return V;
}

}  // namespace

TEST_CASE("mode selection and vacuum convention") {
  CovMatrix6 V6 = CovMatrix6::Zero();
  Matrix4d blocks;
  blocks << 1, 2, 3, 4, 2, 5, 6, 7, 3, 6, 8, 9, 4, 7, 9, 10;
  V6.topLeftCorner<4, 4>() = blocks;
  V6(fl::q_c, fl::q_c) = V6(fl::p_c, fl::p_c) = 99.0;
  V6(fl::q_m, fl::q_c) = V6(fl::q_c, fl::q_m) = 42.0;
  const auto v = reduce(V6);
  CHECK(v.V == blocks);
  CHECK(v.convention == VacuumConvention::HalfVacuum);
  CHECK(reduce(CovMatrix6(0.5 * CovMatrix6::Identity())).V == 0.5 * Matrix4d::Identity());

  const auto u = rescale_to_unit_vacuum(CovMatrix4<double>{0.5 * Matrix4d::Identity()});
  CHECK(u.V == Matrix4d::Identity());
  CHECK(u.convention == VacuumConvention::UnitVacuum);
  CHECK_THROWS_AS(rescale_to_unit_vacuum(u), std::invalid_argument);
  CHECK(as_unit_vacuum(u).V == u.V);
}

TEST_CASE("symplectic eigenvalue examples") {
  SUBCASE("vacuum") {
    const auto s = symplectic_eigenvalues(unit(Matrix4d::Identity()));
    CHECK(s.nu_plus == doctest::Approx(1.0));
    CHECK(s.nu_minus == doctest::Approx(1.0));
  }
  SUBCASE("thermal times vacuum") {
    const auto s = symplectic_eigenvalues(unit(Eigen::Vector4d(3, 3, 1, 1).asDiagonal()));
    CHECK(s.nu_plus == doctest::Approx(3.0));
    CHECK(s.nu_minus == doctest::Approx(1.0));
  }
  SUBCASE("two-mode squeezed vacuum is pure") {
    const Matrix4d V = two_mode_squeezed_thermal(0.5, 0.0);
    CHECK(V.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    const auto s = symplectic_eigenvalues(unit(V));
    const auto d = symplectic_eigenvalues_direct(V);
    CHECK(s.nu_plus == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.nu_minus == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.nu_plus == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(d.nu_minus == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("half-vacuum input is rejected") {
    CHECK_THROWS_AS(symplectic_eigenvalues(CovMatrix4<double>{Matrix4d::Identity()}), std::invalid_argument);
  }
  SUBCASE("radicand far below zero is an error") {
    Matrix4d V = Matrix4d::Identity();
    V(0, 2) = V(2, 0) = 3.0;  // not positive
    CHECK_THROWS_AS(symplectic_eigenvalues(unit(V)), DiscordError);
  }
}

TEST_CASE("determinant formula agrees with the eigenvalues of Omega V") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    double nu_plus = 0.0, nu_minus = 0.0;
    const Matrix4d V = testing::random_physical_state(rng, &nu_plus, &nu_minus);
    const auto formula = symplectic_eigenvalues(unit(V));
    const auto direct = symplectic_eigenvalues_direct(V);
    CHECK(std::abs(formula.nu_plus - direct.nu_plus) <= 1e-10 * nu_plus);
    CHECK(std::abs(formula.nu_minus - direct.nu_minus) <= 1e-10 * nu_plus);
    CHECK(direct.nu_plus == doctest::Approx(nu_plus).epsilon(1e-9));
    CHECK(direct.nu_minus == doctest::Approx(nu_minus).epsilon(1e-9));
  }
}

TEST_CASE("entropy function") {
  CHECK(entropy_f(1.0) == 0.0);
  CHECK(entropy_f(1.0, LogBase::E) == 0.0);
  CHECK(entropy_f(3.0) == doctest::Approx(2.0 * std::log2(2.0) - 1.0 * std::log2(1.0)));
  CHECK(entropy_f(5.0, LogBase::E) == doctest::Approx(3.0 * std::log(3.0) - 2.0 * std::log(2.0)));
  CHECK(entropy_f(2.0) == doctest::Approx(entropy_f(2.0, LogBase::E) / std::log(2.0)));
  double previous = 0.0;
  for (double x = 1.0 + 1e-6; x < 50.0; x *= 1.1) {
    const double v = entropy_f(x);
    CHECK(v > previous);
    previous = v;
  }
}

TEST_CASE("product states carry no discord") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix4d V = testing::random_product_state(rng);
    CHECK(std::abs(gaussian_discord(unit(V))) <= 1e-10);
  }
  CHECK(gaussian_discord(unit(Matrix4d::Identity())) == 0.0);
  CHECK(gaussian_discord(CovMatrix6(0.5 * CovMatrix6::Identity())) == 0.0);
}

TEST_CASE("the conditional term enters with a plus sign") {
  // Nearly uncorrelated states go through the full formula. With the plus sign
  // the discord tends to 0; with the minus sign it tends to -2 f(sqrt(det A)).
  std::mt19937_64 rng(6);
  DiscordOptions minus;
  minus.negative_conditional_term = true;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix4d V = testing::random_product_state(rng);
    V(0, 2) = V(2, 0) = 1e-7;
    V(1, 3) = V(3, 1) = -2e-7;
    const double expected_minus = -2.0 * entropy_f(std::sqrt(V.topLeftCorner<2, 2>().determinant()));
    CHECK(std::abs(gaussian_discord(unit(V))) < 1e-8);
    CHECK(gaussian_discord(unit(V), minus) == doctest::Approx(expected_minus).epsilon(1e-6));
  }
}

TEST_CASE("two-mode squeezed thermal states against the extended-precision reference") {
  int count = 0;
  for (double r : {0.1, 0.3, 0.5, 0.8, 1.2}) {
    for (double n : {0.0, 0.1, 0.5, 2.0}) {
      Matrix4d V;
      const Real reference = testing::squeezed_thermal_reference(Real(r), Real(n), &V);
      const double d = gaussian_discord(unit(V));
      CHECK(std::abs(d - static_cast<double>(reference)) <= 1e-8);
      CHECK(d >= -1e-10);
      ++count;
    }
  }
  CHECK(count == 20);
}

TEST_CASE("pure two-mode squeezed state: discord equals the entanglement entropy") {
  for (double r : {0.2, 0.5, 1.0}) {
    const double d = gaussian_discord(unit(two_mode_squeezed_thermal(r, 0.0)));
    CHECK(d == doctest::Approx(entropy_f(std::cosh(2.0 * r))).epsilon(1e-10));
  }
}

TEST_CASE("other scalar types") {
  const Matrix4d V = two_mode_squeezed_thermal(0.7, 0.2);
  const CovMatrix4<long double> wide{V.cast<long double>(), VacuumConvention::UnitVacuum};
  CHECK(static_cast<double>(gaussian_discord(wide)) == doctest::Approx(gaussian_discord(unit(V))).epsilon(1e-9));
}

TEST_CASE("random physical states against the reference") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix4d V = testing::random_physical_state(rng);
    const double d = gaussian_discord(unit(V));
    CHECK(d >= -1e-10);
    CHECK(d == doctest::Approx(static_cast<double>(testing::discord_reference(V))).epsilon(1e-8).scale(1.0));
  }
}

TEST_CASE("classically correlated state with a rank-one correlation block") {
  // det V_C = 0 but V_C != 0: correlated only in q, discord still positive.
  Matrix4d V = Matrix4d::Zero();
  V.diagonal() << 3.0, 3.0, 2.0, 2.0;
  V(0, 2) = V(2, 0) = 1.5;
  REQUIRE(V.topRightCorner<2, 2>().determinant() == 0.0);
  const double d = gaussian_discord(unit(V));
  CHECK(d > 1e-4);
  CHECK(d == doctest::Approx(static_cast<double>(testing::discord_reference(V))).epsilon(1e-10));
}

TEST_CASE("invariance under local symplectic operations") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> angle(-3.0, 3.0), squeeze(-0.8, 0.8);
  const Matrix4d V = testing::random_physical_state(rng);
  const double d0 = gaussian_discord(unit(V));
  for (int trial = 0; trial < 20; ++trial) {
    Matrix4d L = Matrix4d::Zero();
    const double r = squeeze(rng);
    L.topLeftCorner<2, 2>() = testing::rotation2(angle(rng)) *
                              Eigen::Vector2d(std::exp(r), std::exp(-r)).asDiagonal();
    L.bottomRightCorner<2, 2>() = testing::rotation2(angle(rng));
    CHECK(gaussian_discord(unit(L * V * L.transpose())) == doctest::Approx(d0).epsilon(1e-9));
  }
}

TEST_CASE("half-vacuum covariance from the dynamics is rescaled") {
  const Matrix4d V = two_mode_squeezed_thermal(0.4, 0.3);
  const double from_unit = gaussian_discord(unit(V));
  const double from_half = gaussian_discord(CovMatrix4<double>{0.5 * V});
  CHECK(from_half == doctest::Approx(from_unit).epsilon(1e-14));
  CovMatrix6 V6 = 0.5 * CovMatrix6::Identity();
  V6.topLeftCorner<4, 4>() = 0.5 * V;
  CHECK(gaussian_discord(V6) == doctest::Approx(from_unit).epsilon(1e-14));
  DiscordOptions nats;
  nats.base = LogBase::E;
  CHECK(gaussian_discord(unit(V), nats) == doctest::Approx(from_unit * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("unphysical input is rejected") {
  Matrix4d V = Matrix4d::Identity() * 0.9;
  V(0, 2) = V(2, 0) = 0.1;
  CHECK_THROWS_AS(gaussian_discord(unit(V)), DiscordError);
}
