#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "disko/edmd_solver.hpp"

namespace disko {

struct LQRWeights {
  Eigen::MatrixXd Q;  // W_s x W_s symmetric PSD
  Eigen::MatrixXd R;  // W_u x W_u symmetric PD
};

struct FeedbackLaw {
  Eigen::MatrixXd K;                       // W_u x W_s
  std::vector<Eigen::MatrixXd> schedule;   // finite-horizon gain sequence (optional)
  Eigen::VectorXd target_basis;            // Psi_s(s_des)
};

struct LQRSolution {
  FeedbackLaw law;
  Eigen::MatrixXd P;
  int iterations = 0;
  bool converged = false;
  double riccati_residual = 0.0;  // relative residual of the fixed point
};

// Infinite-horizon discrete LQR via Riccati fixed-point iteration:
//   P <- Q + A^T (P - P B (R + B^T P B)^{-1} B^T P) A
// stopping at ||P_{k+1} - P_k||_F <= tol * ||P_k||_F.
LQRSolution solve_infinite_lqr(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               const LQRWeights& weights, double tol = 1e-10,
                               int max_iter = 10000);

// Backward Riccati recursion; returns gains K_0 .. K_{n-1}.
std::vector<Eigen::MatrixXd> solve_finite_lqr(const Eigen::MatrixXd& A,
                                              const Eigen::MatrixXd& B,
                                              const LQRWeights& weights, int horizon,
                                              const Eigen::MatrixXd& terminal_weight);

// Embeds a state-space cost into the first N x N block of the W_s-dim lifted cost.
Eigen::MatrixXd lift_cost_matrix(const Eigen::MatrixXd& Q_state, int w_s);

// u = -K (Psi_s(s) - Psi_s(s_des)); returns (u, predicted next psi).
std::pair<Eigen::VectorXd, Eigen::VectorXd> closed_loop_step(const KoopmanModel& model,
                                                             const FeedbackLaw& law,
                                                             const Eigen::VectorXd& s);

}  // namespace disko
