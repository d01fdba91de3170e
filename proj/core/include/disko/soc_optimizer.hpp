#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#include "disko/edmd_solver.hpp"
#include "disko/snapshot_pipeline.hpp"

namespace disko {

struct SOCConfig {
  double rho = 1.0;          // spectral bound in (0, 1]
  int max_iter = 20000;
  double step_init = 1e-3;
  int max_halvings = 50;
  double rel_tol = 1e-9;     // on relative objective improvement
  int restarts = 1;          // total descent runs (1 = no perturbed re-runs)
  std::uint64_t seed = 0;
  std::ostream* diagnostics = nullptr;  // per-iteration CSV when set
};

// Factored stable parameterization A = S^{-1} O C S.
struct SOCState {
  Eigen::MatrixXd S, O, C, B;
  double objective = std::numeric_limits<double>::infinity();
  long iter = 0;
  double step = 0.0;
  std::string stop_reason;

  Eigen::MatrixXd A() const;  // S^{-1} O C S
};

struct SOCGradients {
  Eigen::MatrixXd S, O, C, B;
};

// 0.5 * ||Y - AX - BU||_F^2 evaluated through the accumulators.
double soc_objective(const SOCState& state, const AccumulatorSet& acc);

// Gradients of the objective w.r.t. (S, O, C, B):
//   V  = Amat - A G - B X_U^T
//   dS = S^{-T} (V A^T - A^T V)
//   dO = -S^{-T} V S^T C^T
//   dC = -O^T S^{-T} V S^T
//   dB = -Y_U + A X_U + B U_U
SOCGradients soc_gradients(const SOCState& state, const AccumulatorSet& acc);

// O -> polar orthogonal factor; C -> symmetrized with eigenvalues clamped to [0, rho].
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> project_factors(const Eigen::MatrixXd& O,
                                                            const Eigen::MatrixXd& C,
                                                            double rho);

// Projected gradient descent on (S, O, C, B) with a shared backtracking step.
// Initialization: S = I, polar(A_ls) = O0 H0, C = clamp(H0), B = B_ls,
// optionally overridden by `init`.
std::pair<KoopmanModel, SOCState> fit_stable(
    const AccumulatorSet& acc, double dt,
    std::shared_ptr<const BasisDictionary> dict = nullptr,
    const SOCConfig& config = {}, const KoopmanModel* init = nullptr);

// Nearest-stable baseline: fit_stable on synthetic data X = I, Y = K_star,
// i.e. minimize 0.5 * ||K_star - A||_F^2 over the stable set.
Eigen::MatrixXd project_nearest_stable(const Eigen::MatrixXd& K_star,
                                       const SOCConfig& config = {});

}  // namespace disko
