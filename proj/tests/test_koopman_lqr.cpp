#include <cmath>
#include <random>

#include "disko/edmd_solver.hpp"
#include "disko/errors.hpp"
#include "disko/koopman_lqr.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace disko;
using disko_test::random_matrix;
using disko_test::random_vector;
using disko_test::random_with_radius;

TEST_CASE("scalar golden solution: a = b = q = r = 1") {
  // P = q + P - P^2 b^2/(r + b^2 P) reduces to P^2 - P - 1 = 0 => golden ratio.
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  LQRWeights w;
  w.Q = one;
  w.R = one;
  const LQRSolution sol = solve_infinite_lqr(one, one, w);
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  REQUIRE(sol.converged);
  CHECK(std::abs(sol.P(0, 0) - phi) <= 1e-8);
  CHECK(std::abs(sol.law.K(0, 0) - 2.0 / (1.0 + std::sqrt(5.0))) <= 1e-8);
}

TEST_CASE("riccati fixed point verified by direct substitution") {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 4;
    const int m = 1 + trial % 2;
    const Eigen::MatrixXd A = random_with_radius(n, rng, 0.8 + 0.1 * (trial % 5));
    const Eigen::MatrixXd B = random_matrix(n, m, rng);
    LQRWeights w;
    w.Q = Eigen::MatrixXd::Identity(n, n);
    w.R = Eigen::MatrixXd::Identity(m, m) * 0.5;

    const LQRSolution sol = solve_infinite_lqr(A, B, w);
    REQUIRE(sol.converged);

    const Eigen::MatrixXd& P = sol.P;
    const Eigen::MatrixXd rhs =
        w.Q + A.transpose() *
                  (P - P * B * (w.R + B.transpose() * P * B).inverse() *
                           B.transpose() * P) *
                  A;
    CHECK((P - rhs).norm() <= 1e-8 * std::max(1.0, P.norm()));
    CHECK((P - P.transpose()).norm() <= 1e-10 * P.norm());
    CHECK(sol.riccati_residual <= 1e-9);

    // Gain consistency: K = (R + B^T P B)^{-1} B^T P A.
    const Eigen::MatrixXd K_expect =
        (w.R + B.transpose() * P * B).inverse() * B.transpose() * P * A;
    CHECK((sol.law.K - K_expect).norm() <= 1e-8 * std::max(1.0, K_expect.norm()));

    CHECK(spectral_radius(A - B * sol.law.K) < 1.0);
  }
}

TEST_CASE("closed loop is stabilizing even for unstable open-loop systems") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 3;
    const Eigen::MatrixXd A = random_with_radius(n, rng, 1.4);
    const Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);  // fully actuated
    LQRWeights w;
    w.Q = Eigen::MatrixXd::Identity(n, n);
    w.R = Eigen::MatrixXd::Identity(n, n);
    const LQRSolution sol = solve_infinite_lqr(A, B, w);
    REQUIRE(sol.converged);
    CHECK(spectral_radius(A - B * sol.law.K) < 1.0);
  }
}

TEST_CASE("finite-horizon recursion: hand-checked one-step gain and convergence") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd A = random_with_radius(3, rng, 0.9);
  const Eigen::MatrixXd B = random_matrix(3, 1, rng);
  LQRWeights w;
  w.Q = Eigen::MatrixXd::Identity(3, 3);
  w.R = Eigen::MatrixXd::Identity(1, 1);

  SUBCASE("horizon one") {
    const auto gains = solve_finite_lqr(A, B, w, 1, w.Q);
    REQUIRE(gains.size() == 1);
    const Eigen::MatrixXd K0 =
        (w.R + B.transpose() * w.Q * B).inverse() * B.transpose() * w.Q * A;
    CHECK((gains[0] - K0).norm() <= 1e-12 * std::max(1.0, K0.norm()));
  }

  SUBCASE("long horizon approaches the stationary gain") {
    const LQRSolution inf = solve_infinite_lqr(A, B, w);
    const auto gains = solve_finite_lqr(A, B, w, 300, w.Q);
    REQUIRE(gains.size() == 300);
    CHECK((gains.front() - inf.law.K).norm() <= 1e-6);
  }
}

TEST_CASE("lift_cost_matrix embeds the state cost in the leading block") {
  Eigen::MatrixXd Qs(2, 2);
  Qs << 3.0, 1.0, 1.0, 2.0;
  const Eigen::MatrixXd Q = lift_cost_matrix(Qs, 6);
  REQUIRE(Q.rows() == 6);
  REQUIRE(Q.cols() == 6);
  CHECK((Q.topLeftCorner(2, 2) - Qs).norm() == 0.0);
  CHECK(Q.bottomRightCorner(4, 4).norm() == 0.0);
  CHECK(Q.topRightCorner(2, 4).norm() == 0.0);
}

TEST_CASE("closed_loop_step applies u = -K (psi - psi_target)") {
  std::mt19937_64 rng(10);
  KoopmanModel model;
  model.dictionary =
      std::make_shared<const BasisDictionary>(BasisDictionary::pendulum8());
  model.A = random_matrix(8, 8, rng, 0.3);
  model.B = random_matrix(8, 1, rng);
  model.dt = 0.02;

  FeedbackLaw law;
  law.K = random_matrix(1, 8, rng);
  law.target_basis = Eigen::VectorXd::Zero(8);

  const Eigen::Vector2d s(0.3, -0.2);
  const auto [u, next] = closed_loop_step(model, law, s);
  const Eigen::VectorXd psi = model.dictionary->evaluate_state(s);
  const Eigen::VectorXd u_expect = -law.K * psi;
  REQUIRE(u.size() == 1);
  CHECK((u - u_expect).norm() <= 1e-14);
  CHECK((next - (model.A * psi + model.B * u)).norm() <= 1e-14);
}

TEST_CASE("weight and shape validation") {
  const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd B = Eigen::MatrixXd::Identity(2, 1);
  LQRWeights w;
  w.R = Eigen::MatrixXd::Identity(1, 1);
  w.Q = Eigen::MatrixXd::Identity(3, 3);  // shape mismatch
  CHECK_THROWS_AS((void)solve_infinite_lqr(I2 * 0.5, B, w), config_error);
  w.Q = I2;
  w.R = Eigen::MatrixXd::Identity(2, 2);  // input-width mismatch
  CHECK_THROWS_AS((void)solve_infinite_lqr(I2 * 0.5, B, w), config_error);
  CHECK_THROWS_AS((void)solve_finite_lqr(I2 * 0.5, B, w, 0, I2), config_error);
  CHECK_THROWS_AS((void)lift_cost_matrix(I2, 1), config_error);
}
