#include "disko/rollout_analysis.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "disko/errors.hpp"

namespace disko {

namespace {

Eigen::VectorXd lifted_input(const KoopmanModel& model, const Eigen::VectorXd& u) {
  if (model.dictionary && model.dictionary->input_dim() > 0)
    return model.dictionary->evaluate_input(u);
  return u;
}

double operator_norm_of(const Eigen::MatrixXd& A, NormKind norm) {
  if (norm == NormKind::frobenius) return A.norm();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

}  // namespace

RolloutResult rollout(const KoopmanModel& model, const Eigen::VectorXd& psi0,
                      const std::vector<Eigen::VectorXd>* inputs, int horizon) {
  if (psi0.size() != model.A.rows())
    throw config_error("initial basis vector does not match the operator width");
  if (horizon < 0) throw config_error("rollout horizon must be nonnegative");
  if (inputs && model.w_u() > 0 && static_cast<int>(inputs->size()) < horizon)
    throw config_error("rollout needs one input per step");

  RolloutResult res;
  res.horizon = horizon;
  res.dt = model.dt;
  res.basis.reserve(horizon + 1);
  res.basis.push_back(psi0);
  for (int k = 0; k < horizon; ++k) {
    Eigen::VectorXd next = model.A * res.basis.back();
    if (inputs && model.w_u() > 0)
      next += model.B * lifted_input(model, (*inputs)[k]);
    res.basis.push_back(std::move(next));
  }
  int n_state = model.dictionary ? model.dictionary->state_dim()
                                 : static_cast<int>(model.A.rows());
  res.states.reserve(res.basis.size());
  for (const auto& psi : res.basis) res.states.push_back(psi.head(n_state));
  return res;
}

ErrorProfile error_profile(const KoopmanModel& model,
                           const std::vector<Eigen::VectorXd>& true_basis,
                           const std::vector<Eigen::VectorXd>* inputs,
                           NormKind norm) {
  if (true_basis.size() < 2)
    throw config_error("error profile needs at least two basis samples");
  const int n = static_cast<int>(true_basis.size()) - 1;
  for (const auto& psi : true_basis)
    if (psi.size() != model.A.rows())
      throw config_error("basis sample width does not match the operator");
  if (inputs && model.w_u() > 0 && static_cast<int>(inputs->size()) < n)
    throw config_error("error profile needs one input per transition");

  ErrorProfile prof;
  prof.norm = norm;
  prof.operator_norm = operator_norm_of(model.A, norm);

  RolloutResult pred = rollout(model, true_basis[0], inputs, n);

  prof.local_errors.reserve(n);
  prof.global_errors.reserve(n);
  Eigen::VectorXd chained = Eigen::VectorXd::Zero(model.A.rows());
  double identity_residual = 0.0;
  for (int k = 1; k <= n; ++k) {
    Eigen::VectorXd e = true_basis[k] - model.A * true_basis[k - 1];
    if (inputs && model.w_u() > 0)
      e -= model.B * lifted_input(model, (*inputs)[k - 1]);
    Eigen::VectorXd E = true_basis[k] - pred.basis[k];
    // E_k satisfies E_k = A E_{k-1} + e_k; track the recursion independently
    // and record the gap as a wiring check.
    chained = model.A * chained + e;
    identity_residual =
        std::max(identity_residual,
                 (E - chained).norm() / std::max(1.0, E.norm()));
    prof.e_max_norm = std::max(prof.e_max_norm, e.norm());
    prof.local_errors.push_back(std::move(e));
    prof.global_errors.push_back(std::move(E));
  }
  prof.identity_residual = identity_residual;
  prof.bound = error_bound(model, prof.e_max_norm, n, norm);
  return prof;
}

std::vector<double> error_bound(const KoopmanModel& model, double e_max_norm,
                                int horizon, NormKind norm) {
  if (horizon < 0) throw config_error("bound horizon must be nonnegative");
  double q = operator_norm_of(model.A, norm);
  std::vector<double> bound;
  bound.reserve(horizon);
  double partial = 0.0, power = 1.0;
  for (int k = 1; k <= horizon; ++k) {
    partial += power;  // sum_{i=0}^{k-1} q^i
    power *= q;
    bound.push_back(e_max_norm * partial);
  }
  return bound;
}

ContinuousOperator to_continuous(const KoopmanModel& model) {
  if (model.A.rows() != model.A.cols() || model.A.rows() == 0)
    throw config_error("continuous-time conversion needs a square operator");
  if (!(model.dt > 0.0))
    throw config_error("continuous-time conversion needs a positive dt");

  Eigen::EigenSolver<Eigen::MatrixXd> es(model.A, /*computeEigenvectors=*/false);
  Eigen::VectorXcd lam = es.eigenvalues();
  constexpr double axis_tol = 1e-10;
  for (int i = 0; i < lam.size(); ++i) {
    if (std::abs(lam[i].imag()) <= axis_tol && lam[i].real() <= axis_tol)
      throw log_inadmissible_error(
          "operator has an eigenvalue on the closed negative real axis; the "
          "principal matrix logarithm does not exist");
  }

  ContinuousOperator cont;
  cont.K = model.A.log() / model.dt;
  if (!cont.K.allFinite())
    throw log_inadmissible_error("matrix logarithm produced non-finite entries");

  Eigen::EigenSolver<Eigen::MatrixXd> ek(cont.K, /*computeEigenvectors=*/false);
  cont.eigenvalues = ek.eigenvalues();
  double max_re = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < cont.eigenvalues.size(); ++i)
    max_re = std::max(max_re, cont.eigenvalues[i].real());
  cont.hurwitz = max_re < 0.0;
  constexpr double tol = 1e-8;
  if (max_re < -tol)
    cont.stability = StabilityClass::asymptotically_stable;
  else if (max_re > tol)
    cont.stability = StabilityClass::unstable;
  else
    cont.stability = StabilityClass::marginally_stable;

  Eigen::MatrixXd roundtrip = (cont.K * model.dt).exp();
  cont.roundtrip_residual =
      (roundtrip - model.A).norm() / std::max(model.A.norm(), 1e-300);

  double op2 = operator_norm_of(model.A, NormKind::spectral);
  cont.transient_growth_warning = op2 > 1.0 && spectral_radius(model.A) <= 1.0;
  return cont;
}

void write_error_csv(std::ostream& out, const RolloutResult& roll,
                     const ErrorProfile& profile) {
  int n_state = roll.states.empty() ? 0 : static_cast<int>(roll.states[0].size());
  out << "step,t";
  for (int i = 0; i < n_state; ++i) out << ",pred" << i;
  out << ",local_error,global_error,bound\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << "," << buf;
  };
  for (size_t k = 0; k < roll.states.size(); ++k) {
    out << k;
    put(k * roll.dt);
    for (int i = 0; i < n_state; ++i) put(roll.states[k][i]);
    if (k == 0) {
      put(0.0);
      put(0.0);
      put(0.0);
    } else {
      size_t j = k - 1;
      put(j < profile.local_errors.size() ? profile.local_errors[j].norm() : 0.0);
      put(j < profile.global_errors.size() ? profile.global_errors[j].norm() : 0.0);
      put(j < profile.bound.size() ? profile.bound[j] : 0.0);
    }
    out << "\n";
  }
}

void write_error_csv(const std::string& path, const RolloutResult& roll,
                     const ErrorProfile& profile) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open '" + path + "' for writing");
  write_error_csv(out, roll, profile);
}

}  // namespace disko
