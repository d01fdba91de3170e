#include "disko/lyapunov_cert.hpp"

#include <cmath>
#include <fstream>

#include "disko/errors.hpp"
#include "disko/rollout_analysis.hpp"

namespace disko {

namespace {

Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

void check_square_pair(const Eigen::MatrixXd& M, const Eigen::MatrixXd& Q,
                       const char* what) {
  if (M.rows() != M.cols() || M.rows() == 0)
    throw config_error(std::string(what) + " needs a square nonempty operator");
  if (Q.rows() != M.rows() || Q.cols() != M.cols())
    throw config_error(std::string(what) + " needs Q with matching shape");
}

}  // namespace

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& Kc, const Eigen::MatrixXd& Q) {
  check_square_pair(Kc, Q, "the continuous Lyapunov solve");
  Eigen::EigenSolver<Eigen::MatrixXd> es(Kc, /*computeEigenvectors=*/false);
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i].real() >= 0.0)
      throw not_hurwitz_error(
          "continuous operator is not Hurwitz; the Lyapunov equation has no "
          "positive-definite solution");
  const Eigen::Index n = Kc.rows();
  // vec(Kc^T P + P Kc) = (I (x) Kc^T + Kc^T (x) I) vec(P)
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd lhs = kron(I, Kc.transpose()) + kron(Kc.transpose(), I);
  Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(Q.data(), Q.size());
  Eigen::VectorXd vecp = lhs.partialPivLu().solve(rhs);
  Eigen::MatrixXd P = Eigen::Map<const Eigen::MatrixXd>(vecp.data(), n, n);
  P = 0.5 * (P + P.transpose());
  if (!P.allFinite()) throw numerical_error("Lyapunov solve produced non-finite entries");
  return P;
}

Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& A,
                                        const Eigen::MatrixXd& Q) {
  check_square_pair(A, Q, "the discrete Lyapunov solve");
  if (spectral_radius(A) >= 1.0)
    throw not_hurwitz_error(
        "discrete operator has spectral radius >= 1; the Lyapunov equation has "
        "no positive-definite solution");
  const Eigen::Index n = A.rows();
  // vec(A^T P A - P) = (A^T (x) A^T - I) vec(P)
  Eigen::MatrixXd lhs = kron(A.transpose(), A.transpose()) -
                        Eigen::MatrixXd::Identity(n * n, n * n);
  Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(Q.data(), Q.size());
  Eigen::VectorXd vecp = lhs.partialPivLu().solve(rhs);
  Eigen::MatrixXd P = Eigen::Map<const Eigen::MatrixXd>(vecp.data(), n, n);
  P = 0.5 * (P + P.transpose());
  if (!P.allFinite()) throw numerical_error("Lyapunov solve produced non-finite entries");
  return P;
}

int LyapunovCertificate::longest_valid_suffix() const {
  int run = 0;
  for (auto it = samples.rbegin(); it != samples.rend() && it->valid; ++it) ++run;
  return run;
}

bool LyapunovCertificate::v_strictly_decreasing(int suffix_len) const {
  if (suffix_len <= 1) return true;
  if (suffix_len > static_cast<int>(samples.size())) return false;
  size_t start = samples.size() - static_cast<size_t>(suffix_len);
  for (size_t k = start; k + 1 < samples.size(); ++k)
    if (!(samples[k + 1].V < samples[k].V)) return false;
  return true;
}

LyapunovCertificate certify_trajectory(const KoopmanModel& model,
                                       const Eigen::MatrixXd& P,
                                       const Eigen::MatrixXd& Q_K,
                                       const std::vector<Eigen::VectorXd>& states,
                                       const std::vector<Eigen::VectorXd>& inputs,
                                       double dt, LyapunovPath path,
                                       const Eigen::VectorXd* equilibrium) {
  if (states.size() < 3)
    throw config_error("certification needs at least three trajectory samples");
  if (!(dt > 0.0)) throw config_error("sampling interval must be positive");
  const Eigen::Index w = model.A.rows();
  if (P.rows() != w || P.cols() != w || Q_K.rows() != w || Q_K.cols() != w)
    throw config_error("P and Q_K must match the operator width");

  LyapunovCertificate cert;
  cert.P = P;
  cert.Q_K = Q_K;
  cert.path = path;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(P), eq(Q_K);
  double lam_max_p = ep.eigenvalues().maxCoeff();
  double lam_min_q = eq.eigenvalues().minCoeff();
  if (lam_max_p <= 0.0)
    throw numerical_error("certificate matrix P is not positive definite");
  cert.alpha_upper = lam_min_q / (2.0 * lam_max_p);

  // Lift the trajectory (or accept pre-lifted samples when no dictionary).
  std::vector<Eigen::VectorXd> psi;
  psi.reserve(states.size());
  for (const auto& s : states) {
    if (model.dictionary && s.size() == model.dictionary->state_dim())
      psi.push_back(model.dictionary->evaluate_state(s));
    else if (s.size() == w)
      psi.push_back(s);
    else
      throw config_error("trajectory sample width matches neither the state nor the basis");
  }

  Eigen::MatrixXd Kc;
  if (path == LyapunovPath::continuous) {
    Kc = to_continuous(model).K;  // throws log_inadmissible_error when no log exists
    cert.equation_residual =
        (Kc.transpose() * P + P * Kc + Q_K).norm();
  } else {
    cert.equation_residual =
        (model.A.transpose() * P * model.A - P + Q_K).norm();
  }

  const size_t n_res = psi.size() - 1;
  cert.samples.resize(n_res);
  std::vector<double> V(n_res);
  for (size_t k = 0; k < n_res; ++k) {
    Eigen::VectorXd eps;
    if (path == LyapunovPath::continuous) {
      eps = (psi[k + 1] - psi[k]) / dt - Kc * psi[k];
    } else {
      eps = psi[k + 1] - model.A * psi[k];
      if (model.w_u() > 0 && k < inputs.size())
        eps -= model.B * (model.dictionary
                              ? model.dictionary->evaluate_input(inputs[k])
                              : inputs[k]);
    }
    LyapunovSample& row = cert.samples[k];
    row.t = static_cast<double>(k) * dt;
    row.V = psi[k].dot(P * psi[k]);
    V[k] = row.V;
    row.eps_norm = eps.norm();
    row.psi_norm = psi[k].norm();
    row.alpha_lower = row.eps_norm / std::max(row.psi_norm, 1e-12);
    row.valid = row.alpha_lower <= cert.alpha_upper;
  }
  for (size_t k = 0; k < n_res; ++k) {
    if (n_res == 1)
      cert.samples[k].dV = 0.0;
    else if (k == 0)
      cert.samples[k].dV = (V[1] - V[0]) / dt;
    else if (k + 1 == n_res)
      cert.samples[k].dV = (V[k] - V[k - 1]) / dt;
    else
      cert.samples[k].dV = (V[k + 1] - V[k - 1]) / (2.0 * dt);
  }

  if (equilibrium && model.dictionary) {
    auto reports =
        check_equilibrium_consistency(*model.dictionary, {*equilibrium});
    cert.equilibrium_consistent = reports[0].all_vanish;
    cert.nonvanishing_terms = reports[0].nonvanishing_indices;
  }
  return cert;
}

void write_certificate_csv(std::ostream& out, const LyapunovCertificate& cert) {
  out << "t,V,dV,eps_norm,psi_norm,alpha_lower,alpha_upper,valid\n";
  char buf[32];
  auto put = [&](double v, bool lead_comma = true) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    if (lead_comma) out << ",";
    out << buf;
  };
  for (const auto& row : cert.samples) {
    put(row.t, false);
    put(row.V);
    put(row.dV);
    put(row.eps_norm);
    put(row.psi_norm);
    put(row.alpha_lower);
    put(cert.alpha_upper);
    out << "," << (row.valid ? 1 : 0) << "\n";
  }
  int suffix = cert.longest_valid_suffix();
  double window = 0.0;
  if (suffix > 0 && cert.samples.size() >= 2)
    window = suffix * (cert.samples[1].t - cert.samples[0].t);
  out << "# path=" << (cert.path == LyapunovPath::continuous ? "continuous" : "discrete")
      << " alpha_upper=" << cert.alpha_upper
      << " equation_residual=" << cert.equation_residual
      << " longest_valid_suffix=" << suffix << " valid_window_seconds=" << window
      << " v_strictly_decreasing=" << (cert.v_strictly_decreasing(suffix) ? 1 : 0)
      << "\n";
}

void write_certificate_csv(const std::string& path, const LyapunovCertificate& cert) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open '" + path + "' for writing");
  write_certificate_csv(out, cert);
}

}  // namespace disko
