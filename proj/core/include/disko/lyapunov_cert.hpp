#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "disko/basis_dictionary.hpp"
#include "disko/edmd_solver.hpp"

namespace disko {

enum class LyapunovPath { continuous, discrete };

struct LyapunovSample {
  double t = 0.0;
  double V = 0.0;
  double dV = 0.0;        // central difference (one-sided at the ends)
  double eps_norm = 0.0;  // ||eps_k||_2
  double psi_norm = 0.0;  // ||Psi_k||_2 (floored at 1e-12 in the ratio)
  double alpha_lower = 0.0;
  bool valid = false;
};

struct LyapunovCertificate {
  Eigen::MatrixXd P;
  Eigen::MatrixXd Q_K;
  double alpha_upper = 0.0;  // lambda_min(Q_K) / (2 lambda_max(P))
  LyapunovPath path = LyapunovPath::continuous;
  std::vector<LyapunovSample> samples;  // one per residual sample (n-1 rows)
  double equation_residual = 0.0;       // Lyapunov-equation residual, Frobenius
  bool equilibrium_consistent = false;  // all dictionary terms vanish at the equilibrium
  std::vector<int> nonvanishing_terms;

  int longest_valid_suffix() const;
  bool v_strictly_decreasing(int suffix_len) const;
};

// Continuous Lyapunov equation Kc^T P + P Kc + Q = 0 via the Kronecker-sum
// linear system; requires Kc Hurwitz (throws not_hurwitz_error).
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& Kc, const Eigen::MatrixXd& Q);

// Discrete Lyapunov equation A^T P A - P + Q = 0; requires spectral radius < 1.
Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& A,
                                        const Eigen::MatrixXd& Q);

// Evaluates the certificate along a measured trajectory.
// Continuous path: eps_k = (Psi_{k+1} - Psi_k)/dt - Kc Psi_k with Kc = log(A)/dt;
// discrete path:   eps_k = Psi_{k+1} - A Psi_k - B u_k.
// P must solve the matching Lyapunov equation for Q_K.
LyapunovCertificate certify_trajectory(const KoopmanModel& model,
                                       const Eigen::MatrixXd& P,
                                       const Eigen::MatrixXd& Q_K,
                                       const std::vector<Eigen::VectorXd>& states,
                                       const std::vector<Eigen::VectorXd>& inputs,
                                       double dt,
                                       LyapunovPath path = LyapunovPath::continuous,
                                       const Eigen::VectorXd* equilibrium = nullptr);

// Certificate CSV: t, V, dV, ||eps||, ||Psi||, alpha_lower, alpha_upper, valid,
// followed by a summary block with the longest valid suffix window.
void write_certificate_csv(std::ostream& out, const LyapunovCertificate& cert);
void write_certificate_csv(const std::string& path, const LyapunovCertificate& cert);

}  // namespace disko
