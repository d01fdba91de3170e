#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "disko/bench_systems.hpp"
#include "disko/edmd_solver.hpp"
#include "disko/koopman_lqr.hpp"
#include "disko/lyapunov_cert.hpp"
#include "disko/rollout_analysis.hpp"
#include "disko/snapshot_pipeline.hpp"
#include "disko/soc_optimizer.hpp"

namespace disko {

// ---------------------------------------------------------------------------
// Built-in 3x5 snapshot example with the two published stable solutions.
// ---------------------------------------------------------------------------
struct WorkedExampleData {
  Eigen::MatrixXd X, Y;         // 3x5 snapshot matrices
  Eigen::MatrixXd K_projected;  // published nearest-stable projection
  Eigen::MatrixXd K_soc;        // published SOC solution
};
WorkedExampleData worked_example_data();

struct MatrixReport {
  double reconstruction = 0.0;  // 0.5 ||Y - K X||_F^2
  double distance = 0.0;        // 0.5 ||K_ls - K||_F^2
  Eigen::VectorXd eig_real_sorted;
  double spectral_radius = 0.0;
};
MatrixReport report_against(const Eigen::MatrixXd& K, const Eigen::MatrixXd& K_ls,
                            const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

struct WorkedExampleReport {
  Eigen::MatrixXd K_ls;
  MatrixReport published_projection;  // published projection matrix vs data
  MatrixReport published_soc;         // published SOC matrix vs data
  KoopmanModel soc_model;             // our stable fit on the same data
  SOCState soc_state;
  Eigen::MatrixXd projection;         // our nearest-stable projection of K_ls
  double projection_objective = 0.0;  // 0.5 ||Y - projection X||_F^2
};
WorkedExampleReport run_worked_example(const SOCConfig& soc = {});

// ---------------------------------------------------------------------------
// Pendulum prediction study: LS vs stable fits across training-set sizes.
// ---------------------------------------------------------------------------
struct PendulumPredictionConfig {
  PendulumParams plant{};  // +9.81, beta = 0, dt = 0.02
  std::vector<int> training_sizes{5, 10, 20, 50, 100, 200, 500};
  int eval_rollouts = 300;
  double horizon_seconds = 3.0;
  std::array<std::pair<double, double>, 2> train_ranges{
      {{-3.14159265358979323846, 3.14159265358979323846}, {-1.0, 1.0}}};
  std::array<std::pair<double, double>, 2> eval_ranges{
      {{-6.28318530717958647692, 6.28318530717958647692}, {-2.5, 2.5}}};
  std::uint64_t train_seed = 11;
  std::uint64_t eval_seed = 999;
  SOCConfig soc{};
};

struct PendulumSweepPoint {
  int pairs = 0;
  double ls_mean_error = 0.0, ls_std_error = 0.0;
  double soc_mean_error = 0.0, soc_std_error = 0.0;
  double ls_spectral_radius = 0.0, soc_spectral_radius = 0.0;
  StabilityClass ls_class = StabilityClass::unstable;
  StabilityClass soc_class = StabilityClass::unstable;
  double soc_max_abs_basis = 0.0;  // sup |psi_i| over all stable-model rollouts
  double soc_objective = 0.0;
};

PendulumSweepPoint run_pendulum_point(const PendulumPredictionConfig& cfg, int pairs,
                                      std::uint64_t train_seed);
std::vector<PendulumSweepPoint> run_pendulum_sweep(const PendulumPredictionConfig& cfg);
void write_sweep_csv(std::ostream& out, const std::vector<PendulumSweepPoint>& points);

struct DampedStabilityOutcome {
  int trials = 0;
  int ls_unstable = 0;
  int soc_stable = 0;
  std::vector<double> ls_radii, soc_radii;
};
DampedStabilityOutcome run_damped_stability(const PendulumPredictionConfig& cfg,
                                            int trials, int pairs, double beta,
                                            std::uint64_t seed0);

// ---------------------------------------------------------------------------
// LQR + Lyapunov certification experiment on the hanging pendulum.
// ---------------------------------------------------------------------------
struct LyapunovExperimentConfig {
  double gravity = -9.81;  // hanging convention: origin is the stable equilibrium
  double beta = 0.0;
  double dt_control = 0.02;  // zero-order-hold feedback rate
  double dt_measure = 0.1;   // measurement rate (5 control substeps)
  double horizon_seconds = 6.0;
  double theta0 = 3.14159265358979323846;
  double omega0 = 5.0;
  double r_weight = 0.01;
  // gain synthesis: identity-lift model from an iid excitation box
  int gain_pairs = 4000;
  double gain_theta = 3.14159265358979323846;
  double gain_omega = 8.0;
  double gain_torque = 12.0;
  // closed-loop ensemble for the stable 8-term fit
  int small_count = 30, small_steps = 30;
  double small_theta = 0.4, small_omega = 0.8;
  int release_count = 8, release_steps = 12;
  double release_lo = 1.7, release_hi = 1.9, release_omega = 0.2;
  int spin_count = 8, spin_steps = 12;
  double spin_lo = 1.35, spin_hi = 1.65, spin_theta = 0.2;
  double torque_guard = 1e4;
  std::uint64_t seed = 0;
  SOCConfig soc{};
};

struct LyapunovExperimentResult {
  KoopmanModel gain_model;  // identity-lift controlled model behind the gain
  LQRSolution lqr;
  KoopmanModel soc_model;  // stable 8-term fit of the autonomous closed loop
  SOCState soc_state;
  LyapunovCertificate cert;
  TrajectoryData nominal;  // measured states + sampled feedback, at dt_measure
  bool discrete_fallback = false;
  std::string notice;
};
LyapunovExperimentResult run_lyapunov_experiment(const LyapunovExperimentConfig& cfg);

// Residual-free synthetic check: forward-Euler flow of a Hurwitz generator makes
// the forward-difference residual vanish identically.
LyapunovCertificate run_synthetic_lyapunov(int dim, double dt, int steps,
                                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Random-data benchmark grid: SOC vs nearest-stable projection baseline.
// ---------------------------------------------------------------------------
struct BenchRandomConfig {
  std::vector<int> sizes{2, 5, 10, 20, 40};  // grid for both W and P
  int soc_max_iter = 2000;
  double cell_timeout_seconds = 10.0;
  std::uint64_t seed = 0;
};

struct BenchRandomCell {
  int W = 0, P = 0;
  double soc_objective = 0.0;         // 0.5 ||Y - A X||_F^2 on the cell data
  double projection_objective = 0.0;  // same, for the projected LS solution
  double soc_normalized = 0.0;        // objective / (W * P)
  double projection_normalized = 0.0;
  double soc_seconds = 0.0, projection_seconds = 0.0;
  long soc_iterations = 0;
  std::string soc_stop_reason;
  bool soc_stable = false;
  bool timeout = false;  // cell exceeded the wall-clock budget (recorded, not fatal)
};
std::vector<BenchRandomCell> run_bench_random(const BenchRandomConfig& cfg);

// Deterministic payload (no wall-clock columns): identical across runs for a
// fixed seed. Timings go to the companion writer.
void write_bench_csv(std::ostream& out, const std::vector<BenchRandomCell>& cells);
void write_bench_timings_csv(std::ostream& out, const std::vector<BenchRandomCell>& cells);

}  // namespace disko
