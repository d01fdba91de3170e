#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "disko/edmd_solver.hpp"

namespace disko {

struct RolloutResult {
  std::vector<Eigen::VectorXd> basis;   // psi_0 .. psi_n
  std::vector<Eigen::VectorXd> states;  // first N components of each psi
  int horizon = 0;
  double dt = 0.0;
};

// psi_{k+1} = A psi_k + B u_k (u = 0 when inputs is null).
RolloutResult rollout(const KoopmanModel& model, const Eigen::VectorXd& psi0,
                      const std::vector<Eigen::VectorXd>* inputs, int horizon);

enum class NormKind { spectral, frobenius };

struct ErrorProfile {
  std::vector<Eigen::VectorXd> local_errors;   // e_1 .. e_n
  std::vector<Eigen::VectorXd> global_errors;  // E_1 .. E_n
  std::vector<double> bound;                   // Eq-style bound per step
  double operator_norm = 0.0;
  double e_max_norm = 0.0;
  NormKind norm = NormKind::spectral;
  // Residual of the identity E_n = sum_i A^i e_{n-i} (recorded; must be tiny).
  double identity_residual = 0.0;
};

// e_k = psi_k - A psi_{k-1} - B u_{k-1}; E_k = psi_k - (model rollout from psi_0).
ErrorProfile error_profile(const KoopmanModel& model,
                           const std::vector<Eigen::VectorXd>& true_basis,
                           const std::vector<Eigen::VectorXd>* inputs = nullptr,
                           NormKind norm = NormKind::spectral);

// bound(k) = e_max_norm * sum_{i=0}^{k-1} ||A||^i.
std::vector<double> error_bound(const KoopmanModel& model, double e_max_norm,
                                int horizon, NormKind norm = NormKind::spectral);

struct ContinuousOperator {
  Eigen::MatrixXd K;  // log(A) / dt
  Eigen::VectorXcd eigenvalues;
  StabilityClass stability = StabilityClass::unstable;  // continuous-time classes
  bool hurwitz = false;
  double roundtrip_residual = 0.0;  // ||exp(K dt) - A||_F / ||A||_F
  bool transient_growth_warning = false;  // ||A||_2 > 1 despite spectral radius <= 1
};

// Principal matrix logarithm; throws log_inadmissible_error when A has an
// eigenvalue on the closed negative real axis (tolerance 1e-10).
ContinuousOperator to_continuous(const KoopmanModel& model);

// CSV: step, t, per-coordinate prediction, ||e||, ||E||, bound.
void write_error_csv(std::ostream& out, const RolloutResult& rollout,
                     const ErrorProfile& profile);
void write_error_csv(const std::string& path, const RolloutResult& rollout,
                     const ErrorProfile& profile);

}  // namespace disko
