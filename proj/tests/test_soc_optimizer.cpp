#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "disko/basis_dictionary.hpp"
#include "disko/edmd_solver.hpp"
#include "disko/errors.hpp"
#include "disko/snapshot_pipeline.hpp"
#include "disko/soc_optimizer.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace disko;
using disko_test::random_matrix;

namespace {

// Central finite differences of the objective with respect to every entry of
// one factor matrix, compared against the analytic gradient in Frobenius norm.
double fd_relative_error(SOCState state, const AccumulatorSet& acc,
                         Eigen::MatrixXd SOCState::*factor,
                         const Eigen::MatrixXd& analytic) {
  Eigen::MatrixXd& M = state.*factor;
  Eigen::MatrixXd fd(M.rows(), M.cols());
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      const double save = M(r, c);
      const double h = 1e-6 * std::max(1.0, std::abs(save));
      M(r, c) = save + h;
      const double fp = soc_objective(state, acc);
      M(r, c) = save - h;
      const double fm = soc_objective(state, acc);
      M(r, c) = save;
      fd(r, c) = (fp - fm) / (2.0 * h);
    }
  }
  return (fd - analytic).norm() / std::max(1.0, analytic.norm());
}

SOCState random_feasible_state(int w_s, int w_u, std::mt19937_64& rng) {
  SOCState st;
  st.S = Eigen::MatrixXd::Identity(w_s, w_s) + 0.2 * random_matrix(w_s, w_s, rng);
  const auto [O, C] =
      project_factors(random_matrix(w_s, w_s, rng), random_matrix(w_s, w_s, rng), 1.0);
  st.O = O;
  st.C = C;
  st.B = random_matrix(w_s, w_u, rng);
  return st;
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences on 24 instances") {
  int instance = 0;
  for (std::uint64_t seed = 1; seed <= 24; ++seed) {
    std::mt19937_64 rng(seed);
    const int w_s = 2 + static_cast<int>(seed % 7);  // 2 .. 8
    const int w_u = static_cast<int>(seed % 3);      // 0 .. 2
    const int pairs = 5 * w_s;
    const Eigen::MatrixXd X = random_matrix(w_s, pairs, rng, 2.0);
    const Eigen::MatrixXd Y = random_matrix(w_s, pairs, rng, 3.0);
    const Eigen::MatrixXd U = random_matrix(w_u, pairs, rng);
    const AccumulatorSet acc = w_u > 0 ? accumulate(X, Y, U) : accumulate(X, Y);

    SOCState st = random_feasible_state(w_s, w_u, rng);
    const SOCGradients g = soc_gradients(st, acc);

    CHECK(fd_relative_error(st, acc, &SOCState::S, g.S) <= 1e-5);
    CHECK(fd_relative_error(st, acc, &SOCState::O, g.O) <= 1e-5);
    CHECK(fd_relative_error(st, acc, &SOCState::C, g.C) <= 1e-5);
    if (w_u > 0) CHECK(fd_relative_error(st, acc, &SOCState::B, g.B) <= 1e-5);
    ++instance;
  }
  CHECK(instance >= 20);
}

TEST_CASE("scalar fit_stable equals the clamped least-squares coefficient") {
  for (const double rho : {0.5, 1.0}) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      std::mt19937_64 rng(900 + seed);
      std::uniform_real_distribution<double> mag(0.2, 2.2);
      const int pairs = 12;
      const double a_true = (seed % 2 == 0 ? 1.0 : -1.0) * mag(rng);
      Eigen::MatrixXd X = random_matrix(1, pairs, rng, 1.5);
      Eigen::MatrixXd noise = random_matrix(1, pairs, rng, 0.1);
      Eigen::MatrixXd Y = a_true * X + noise;

      const double a_ls = (X.row(0).dot(Y.row(0))) / X.row(0).squaredNorm();
      const double expected = std::clamp(a_ls, -rho, rho);

      SOCConfig cfg;
      cfg.rho = rho;
      const auto [model, state] = fit_stable(accumulate(X, Y), 1.0, nullptr, cfg);
      REQUIRE(model.A.rows() == 1);
      CHECK(model.A(0, 0) == doctest::Approx(expected).epsilon(1e-6));
    }
  }
}

TEST_CASE("project_factors returns an orthogonal factor and a clamped contraction") {
  std::mt19937_64 rng(4);
  for (const double rho : {0.35, 1.0}) {
    const Eigen::MatrixXd rawO = random_matrix(5, 5, rng);
    const Eigen::MatrixXd rawC = random_matrix(5, 5, rng, 2.0);
    const auto [O, C] = project_factors(rawO, rawC, rho);

    CHECK((O.transpose() * O - Eigen::MatrixXd::Identity(5, 5)).norm() <= 1e-12);
    CHECK((C - C.transpose()).norm() <= 1e-12);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    CHECK(es.eigenvalues().maxCoeff() <= rho + 1e-12);

    // Polar factor is the closest orthogonal matrix: compare against a few
    // random orthogonal candidates.
    const double d_star = (rawO - O).norm();
    for (int trial = 0; trial < 10; ++trial) {
      const auto [Q, ignored] =
          project_factors(random_matrix(5, 5, rng), rawC, 1.0);
      CHECK(d_star <= (rawO - Q).norm() + 1e-9);
    }
  }
}

TEST_CASE("fit_stable output is Schur stable with the requested rho") {
  std::mt19937_64 rng(12);
  // Expanding data so the unconstrained optimum is well outside the stable set.
  const Eigen::MatrixXd X = random_matrix(4, 50, rng);
  const Eigen::MatrixXd Y = 1.6 * X + random_matrix(4, 50, rng, 0.2);
  const AccumulatorSet acc = accumulate(X, Y);

  for (const double rho : {0.9, 1.0}) {
    SOCConfig cfg;
    cfg.rho = rho;
    cfg.max_iter = 4000;
    const auto [model, state] = fit_stable(acc, 1.0, nullptr, cfg);
    CHECK(spectral_radius(model.A) <= rho + 1e-8);
    CHECK(state.objective == doctest::Approx(reconstruction_error(model.A, model.B, acc))
                                 .epsilon(1e-9));
    CHECK((state.stop_reason == "stalled" || state.stop_reason == "max_iter" ||
           state.stop_reason == "step_collapsed"));
  }
}

TEST_CASE("fit_stable never exceeds the least-squares objective by construction") {
  std::mt19937_64 rng(31);
  const Eigen::MatrixXd X = random_matrix(5, 60, rng);
  const Eigen::MatrixXd Y = random_matrix(5, 60, rng);
  const AccumulatorSet acc = accumulate(X, Y);
  const KoopmanModel ls = fit_least_squares(acc, 1.0);
  const double f_ls = reconstruction_error(ls.A, ls.B, acc);
  const auto [model, state] = fit_stable(acc, 1.0);
  CHECK(state.objective >= f_ls - 1e-9);  // constrained optimum cannot beat LS
  CHECK(spectral_radius(model.A) <= 1.0 + 1e-8);
}

TEST_CASE("fit_stable is deterministic for a fixed config and seed") {
  std::mt19937_64 rng(77);
  const Eigen::MatrixXd X = random_matrix(3, 25, rng);
  const Eigen::MatrixXd Y = 1.3 * X + random_matrix(3, 25, rng, 0.3);
  const AccumulatorSet acc = accumulate(X, Y);
  SOCConfig cfg;
  cfg.max_iter = 1500;
  cfg.restarts = 3;
  cfg.seed = 5;
  const auto [m1, s1] = fit_stable(acc, 1.0, nullptr, cfg);
  const auto [m2, s2] = fit_stable(acc, 1.0, nullptr, cfg);
  CHECK((m1.A - m2.A).norm() == 0.0);
  CHECK(s1.objective == s2.objective);
  CHECK(s1.stop_reason == s2.stop_reason);
}

TEST_CASE("warm start from a previous model is accepted and feasible") {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd X = random_matrix(3, 30, rng);
  const Eigen::MatrixXd Y = 1.2 * X + random_matrix(3, 30, rng, 0.2);
  const AccumulatorSet acc = accumulate(X, Y);
  const auto [first, s1] = fit_stable(acc, 1.0);
  const auto [second, s2] = fit_stable(acc, 1.0, nullptr, {}, &first);
  CHECK(spectral_radius(second.A) <= 1.0 + 1e-8);
  CHECK(s2.objective <= s1.objective + 1e-6);  // warm start cannot end up worse
}

TEST_CASE("project_nearest_stable leaves a stable matrix essentially unchanged") {
  std::mt19937_64 rng(2);
  // sigma_max < 1, so K is representable exactly inside the parameterization.
  Eigen::MatrixXd K = random_matrix(4, 4, rng);
  K *= 0.7 / K.jacobiSvd().singularValues()(0);
  const Eigen::MatrixXd A = project_nearest_stable(K);
  CHECK((A - K).norm() <= 1e-6 * K.norm());
  CHECK(0.5 * (A - K).squaredNorm() <= 1e-10);
}

TEST_CASE("project_nearest_stable moves an unstable matrix to the stable set") {
  Eigen::MatrixXd K(2, 2);
  K << 1.4, 0.0, 0.0, 0.2;
  const Eigen::MatrixXd A = project_nearest_stable(K);
  CHECK(spectral_radius(A) <= 1.0 + 1e-8);
  // Nearest stable point for a diagonal expansion clamps the expanding mode.
  CHECK(A(0, 0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(A(1, 1) == doctest::Approx(0.2).epsilon(1e-3));
}

TEST_CASE("config validation") {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd X = random_matrix(2, 10, rng);
  const AccumulatorSet acc = accumulate(X, X);
  SOCConfig cfg;
  cfg.rho = 0.0;
  CHECK_THROWS_AS((void)fit_stable(acc, 1.0, nullptr, cfg), config_error);
  cfg.rho = 1.5;
  CHECK_THROWS_AS((void)fit_stable(acc, 1.0, nullptr, cfg), config_error);
}
