#include "disko/koopman_lqr.hpp"

#include <cmath>

#include "disko/errors.hpp"

namespace disko {

namespace {

void check_lqr_shapes(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                      const LQRWeights& w) {
  if (A.rows() != A.cols() || A.rows() == 0)
    throw config_error("LQR needs a square nonempty A");
  if (B.rows() != A.rows() || B.cols() == 0)
    throw config_error("LQR needs B with matching rows and at least one input");
  if (w.Q.rows() != A.rows() || w.Q.cols() != A.cols())
    throw config_error("LQR weight Q must match the state dimension");
  if (w.R.rows() != B.cols() || w.R.cols() != B.cols())
    throw config_error("LQR weight R must match the input dimension");
}

Eigen::MatrixXd riccati_map(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                            const LQRWeights& w, const Eigen::MatrixXd& P) {
  Eigen::MatrixXd BtP = B.transpose() * P;
  Eigen::MatrixXd gain_denom = w.R + BtP * B;
  Eigen::MatrixXd next =
      w.Q + A.transpose() * (P - BtP.transpose() * gain_denom.ldlt().solve(BtP)) * A;
  return 0.5 * (next + next.transpose());
}

}  // namespace

LQRSolution solve_infinite_lqr(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               const LQRWeights& weights, double tol, int max_iter) {
  check_lqr_shapes(A, B, weights);
  LQRSolution sol;
  Eigen::MatrixXd P = 0.5 * (weights.Q + weights.Q.transpose());
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd next = riccati_map(A, B, weights, P);
    double delta = (next - P).norm();
    P = std::move(next);
    sol.iterations = it + 1;
    if (delta <= tol * std::max(P.norm(), 1e-300)) {
      sol.converged = true;
      break;
    }
  }
  if (!P.allFinite())
    throw numerical_error("Riccati iteration diverged to non-finite values");
  sol.P = P;
  sol.riccati_residual =
      (riccati_map(A, B, weights, P) - P).norm() / std::max(P.norm(), 1e-300);
  Eigen::MatrixXd BtP = B.transpose() * P;
  sol.law.K = (weights.R + BtP * B).ldlt().solve(BtP * A);
  sol.law.target_basis = Eigen::VectorXd::Zero(A.rows());
  return sol;
}

std::vector<Eigen::MatrixXd> solve_finite_lqr(const Eigen::MatrixXd& A,
                                              const Eigen::MatrixXd& B,
                                              const LQRWeights& weights, int horizon,
                                              const Eigen::MatrixXd& terminal_weight) {
  check_lqr_shapes(A, B, weights);
  if (horizon <= 0) throw config_error("finite LQR horizon must be positive");
  if (terminal_weight.rows() != A.rows() || terminal_weight.cols() != A.cols())
    throw config_error("terminal weight must match the state dimension");
  std::vector<Eigen::MatrixXd> gains(horizon);
  Eigen::MatrixXd P = 0.5 * (terminal_weight + terminal_weight.transpose());
  for (int k = horizon - 1; k >= 0; --k) {
    Eigen::MatrixXd BtP = B.transpose() * P;
    Eigen::MatrixXd K = (weights.R + BtP * B).ldlt().solve(BtP * A);
    Eigen::MatrixXd next = weights.Q + A.transpose() * P * (A - B * K);
    P = 0.5 * (next + next.transpose());
    gains[k] = std::move(K);
  }
  return gains;
}

Eigen::MatrixXd lift_cost_matrix(const Eigen::MatrixXd& Q_state, int w_s) {
  if (Q_state.rows() != Q_state.cols())
    throw config_error("state cost matrix must be square");
  if (w_s < Q_state.rows())
    throw config_error("lifted width is smaller than the state dimension");
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(w_s, w_s);
  Q.topLeftCorner(Q_state.rows(), Q_state.cols()) = Q_state;
  return Q;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> closed_loop_step(
    const KoopmanModel& model, const FeedbackLaw& law, const Eigen::VectorXd& s) {
  if (!model.dictionary)
    throw config_error("closed-loop stepping needs a model with a dictionary");
  if (model.w_u() == 0)
    throw config_error("closed-loop stepping needs an actuated model");
  Eigen::VectorXd psi = model.dictionary->evaluate_state(s);
  if (law.K.cols() != psi.size())
    throw config_error("feedback gain width does not match the lifted state");
  Eigen::VectorXd ref = law.target_basis.size()
                            ? law.target_basis
                            : Eigen::VectorXd::Zero(psi.size());
  if (ref.size() != psi.size())
    throw config_error("target basis width does not match the lifted state");
  Eigen::VectorXd u = -law.K * (psi - ref);
  Eigen::VectorXd psi_next = model.A * psi + model.B * model.dictionary->evaluate_input(u);
  return {std::move(u), std::move(psi_next)};
}

}  // namespace disko
