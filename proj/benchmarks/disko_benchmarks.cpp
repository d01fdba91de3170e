// Microbenchmarks for the hot paths: accumulator ingestion, the least-squares
// solve, SOC descent iterations, model rollout, and the Lyapunov solve.
#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "disko/edmd_solver.hpp"
#include "disko/lyapunov_cert.hpp"
#include "disko/rollout_analysis.hpp"
#include "disko/snapshot_pipeline.hpp"
#include "disko/soc_optimizer.hpp"

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng,
                              double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd M(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) M(r, c) = scale * gauss(rng);
  return M;
}

struct Problem {
  Eigen::MatrixXd X, Y, U;
  disko::AccumulatorSet acc;
};

Problem make_problem(int w_s, int w_u, int pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Problem p;
  p.X = random_matrix(w_s, pairs, rng);
  p.Y = 0.9 * p.X + random_matrix(w_s, pairs, rng, 0.1);
  p.U = random_matrix(w_u, pairs, rng);
  p.acc = w_u > 0 ? disko::accumulate(p.X, p.Y, p.U) : disko::accumulate(p.X, p.Y);
  return p;
}

void BM_ingest_pair(benchmark::State& state) {
  const int w_s = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  const Eigen::VectorXd pre = random_matrix(w_s, 1, rng).col(0);
  const Eigen::VectorXd post = random_matrix(w_s, 1, rng).col(0);
  const Eigen::VectorXd u = random_matrix(1, 1, rng).col(0);
  disko::AccumulatorSet acc(w_s, 1);
  for (auto _ : state) {
    disko::ingest_pair(acc, pre, post, u);
    benchmark::DoNotOptimize(acc.G.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ingest_pair)->Arg(8)->Arg(20);

void BM_fit_least_squares(benchmark::State& state) {
  const int w_s = static_cast<int>(state.range(0));
  const Problem p = make_problem(w_s, 1, 500, 2);
  for (auto _ : state) {
    const disko::KoopmanModel model = disko::fit_least_squares(p.acc, 0.02);
    benchmark::DoNotOptimize(model.A.data());
  }
}
BENCHMARK(BM_fit_least_squares)->Arg(8)->Arg(20);

void BM_soc_descent_100_iterations(benchmark::State& state) {
  const int w_s = static_cast<int>(state.range(0));
  const Problem p = make_problem(w_s, 0, 500, 3);
  disko::SOCConfig cfg;
  cfg.max_iter = 100;
  for (auto _ : state) {
    const auto fitted = disko::fit_stable(p.acc, 0.02, nullptr, cfg);
    benchmark::DoNotOptimize(fitted.second.objective);
  }
}
BENCHMARK(BM_soc_descent_100_iterations)->Arg(8)->Arg(20);

void BM_rollout_300_steps(benchmark::State& state) {
  const int w_s = static_cast<int>(state.range(0));
  std::mt19937_64 rng(4);
  disko::KoopmanModel model;
  model.A = random_matrix(w_s, w_s, rng);
  model.A *= 0.95 / model.A.eigenvalues().cwiseAbs().maxCoeff();
  model.B = Eigen::MatrixXd(w_s, 0);
  model.dt = 0.02;
  model.stability = disko::classify_stability(model.A).stability;
  const Eigen::VectorXd psi0 = random_matrix(w_s, 1, rng).col(0);
  for (auto _ : state) {
    const disko::RolloutResult rr = disko::rollout(model, psi0, nullptr, 300);
    benchmark::DoNotOptimize(rr.basis.back().data());
  }
}
BENCHMARK(BM_rollout_300_steps)->Arg(8)->Arg(20);

void BM_lyapunov_solve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd M = random_matrix(n, n, rng);
  const Eigen::MatrixXd Kc =
      M - (M.eigenvalues().real().maxCoeff() + 1.0) * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
  for (auto _ : state) {
    const Eigen::MatrixXd P = disko::solve_lyapunov(Kc, Q);
    benchmark::DoNotOptimize(P.data());
  }
}
BENCHMARK(BM_lyapunov_solve)->Arg(8)->Arg(16);

}  // namespace

BENCHMARK_MAIN();
