#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "disko/edmd_solver.hpp"
#include "disko/errors.hpp"
#include "disko/rollout_analysis.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace disko;
using disko_test::random_matrix;
using disko_test::random_vector;
using disko_test::random_with_radius;

namespace {

KoopmanModel bare_model(const Eigen::MatrixXd& A, double dt = 0.1) {
  KoopmanModel m;
  m.A = A;
  m.B = Eigen::MatrixXd::Zero(A.rows(), 0);
  m.dt = dt;
  m.stability = classify_stability(A).stability;
  return m;
}

}  // namespace

TEST_CASE("rollout reproduces the hand-iterated linear recursion") {
  std::mt19937_64 rng(1);
  KoopmanModel m;
  m.A = random_matrix(4, 4, rng, 0.4);
  m.B = random_matrix(4, 2, rng);
  m.dt = 0.05;
  const Eigen::VectorXd psi0 = random_vector(4, rng);
  std::vector<Eigen::VectorXd> inputs;
  for (int k = 0; k < 12; ++k) inputs.push_back(random_vector(2, rng));

  const RolloutResult rr = rollout(m, psi0, &inputs, 12);
  REQUIRE(rr.basis.size() == 13);
  Eigen::VectorXd psi = psi0;
  for (int k = 0; k < 12; ++k) {
    psi = m.A * psi + m.B * inputs[static_cast<size_t>(k)];
    CHECK((rr.basis[static_cast<size_t>(k + 1)] - psi).norm() == 0.0);
  }
  CHECK(rr.horizon == 12);
}

TEST_CASE("global error equals the weighted sum of local errors (10 instances)") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(400 + seed);
    const int w = 5, n = 100;
    const Eigen::MatrixXd A = random_with_radius(w, rng, seed % 2 ? 0.95 : 1.05);
    const KoopmanModel model = bare_model(A);

    // True observables follow psi_{k+1} = A psi_k + e_{k+1} with known e.
    std::vector<Eigen::VectorXd> psi(1, random_vector(w, rng));
    std::vector<Eigen::VectorXd> e(1, Eigen::VectorXd::Zero(w));  // e_0 unused
    for (int k = 1; k <= n; ++k) {
      e.push_back(random_vector(w, rng, 1e-3));
      psi.push_back(A * psi.back() + e.back());
    }

    const ErrorProfile prof = error_profile(model, psi);
    REQUIRE(prof.local_errors.size() == static_cast<size_t>(n));
    REQUIRE(prof.global_errors.size() == static_cast<size_t>(n));

    // Local errors must recover the injected disturbances exactly.
    for (int k = 1; k <= n; ++k)
      CHECK((prof.local_errors[static_cast<size_t>(k - 1)] - e[static_cast<size_t>(k)])
                .norm() <= 1e-12);

    // Independent evaluation of E_n = sum_{i=0}^{n-1} A^i e_{n-i} via explicit
    // matrix powers, compared at every fifth step to keep the test quick.
    Eigen::MatrixXd Ai = Eigen::MatrixXd::Identity(w, w);
    std::vector<Eigen::MatrixXd> powers(1, Ai);
    for (int i = 1; i < n; ++i) {
      Ai = Ai * A;
      powers.push_back(Ai);
    }
    for (int k = 5; k <= n; k += 5) {
      Eigen::VectorXd expected = Eigen::VectorXd::Zero(w);
      for (int i = 0; i < k; ++i)
        expected += powers[static_cast<size_t>(i)] * e[static_cast<size_t>(k - i)];
      const Eigen::VectorXd& got = prof.global_errors[static_cast<size_t>(k - 1)];
      CHECK((got - expected).norm() <= 1e-8 * std::max(1.0, expected.norm()));
    }
    CHECK(prof.identity_residual <= 1e-8);

    // The error bound dominates every measured global error for k <= 100.
    double a_norm = 0.0;
    {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
      a_norm = svd.singularValues()(0);
    }
    double emax = 0.0;
    for (const auto& ek : prof.local_errors) emax = std::max(emax, ek.norm());
    CHECK(prof.e_max_norm == doctest::Approx(emax).epsilon(1e-12));
    double geo = 0.0, pow_i = 1.0;
    for (int k = 1; k <= n; ++k) {
      geo += pow_i;  // sum_{i=0}^{k-1} ||A||^i
      pow_i *= a_norm;
      const double bound = emax * geo;
      CHECK(prof.global_errors[static_cast<size_t>(k - 1)].norm() <=
            bound * (1.0 + 1e-9) + 1e-12);
      CHECK(prof.bound[static_cast<size_t>(k - 1)] ==
            doctest::Approx(bound).epsilon(1e-9));
    }
  }
}

TEST_CASE("error_bound uses the frobenius norm when asked") {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd A = random_matrix(3, 3, rng);
  const KoopmanModel model = bare_model(A);
  const std::vector<double> bf = error_bound(model, 2.0, 4, NormKind::frobenius);
  const double nf = A.norm();
  REQUIRE(bf.size() == 4);
  CHECK(bf[0] == doctest::Approx(2.0));
  CHECK(bf[3] == doctest::Approx(2.0 * (1.0 + nf + nf * nf + nf * nf * nf)));
}

TEST_CASE("to_continuous inverts the matrix exponential") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 6; ++trial) {
    // Hurwitz generator with spectrum away from the negative real axis of exp.
    Eigen::MatrixXd M = random_matrix(4, 4, rng);
    const double shift = M.eigenvalues().real().maxCoeff() + 0.5;
    const Eigen::MatrixXd G = M - shift * Eigen::MatrixXd::Identity(4, 4);
    const double dt = 0.05;
    const KoopmanModel model = bare_model((G * dt).exp(), dt);

    const ContinuousOperator cop = to_continuous(model);
    CHECK((cop.K - G).norm() <= 1e-8 * std::max(1.0, G.norm()));
    CHECK(cop.hurwitz);
    CHECK(cop.roundtrip_residual <= 1e-10);
  }
}

TEST_CASE("to_continuous refuses eigenvalues on the closed negative real axis") {
  Eigen::MatrixXd A(2, 2);
  A << -0.5, 0.0, 0.0, 0.4;
  CHECK_THROWS_AS((void)to_continuous(bare_model(A)), log_inadmissible_error);

  Eigen::MatrixXd singular(2, 2);
  singular << 0.0, 0.0, 0.0, 0.4;
  CHECK_THROWS_AS((void)to_continuous(bare_model(singular)), log_inadmissible_error);
}

TEST_CASE("transient growth is flagged for non-normal stable operators") {
  Eigen::MatrixXd nonnormal(2, 2);
  nonnormal << 0.9, 5.0, 0.0, 0.9;  // spectral radius 0.9, sigma_max >> 1
  const ContinuousOperator warned = to_continuous(bare_model(nonnormal));
  CHECK(warned.transient_growth_warning);

  Eigen::MatrixXd normal = Eigen::MatrixXd::Identity(2, 2) * 0.9;
  const ContinuousOperator calm = to_continuous(bare_model(normal));
  CHECK_FALSE(calm.transient_growth_warning);
}

TEST_CASE("error CSV holds one row per step plus a header") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd A = random_matrix(2, 2, rng, 0.4);
  const KoopmanModel model = bare_model(A);
  std::vector<Eigen::VectorXd> psi(1, random_vector(2, rng));
  for (int k = 0; k < 6; ++k) psi.push_back(A * psi.back() + random_vector(2, rng, 0.01));
  const ErrorProfile prof = error_profile(model, psi);
  const RolloutResult rr = rollout(model, psi.front(), nullptr, 6);
  std::ostringstream out;
  write_error_csv(out, rr, prof);
  int lines = 0;
  for (char ch : out.str())
    if (ch == '\n') ++lines;
  CHECK(lines == 7);  // header + 6 steps
  CHECK(out.str().rfind("step,", 0) == 0);
}
