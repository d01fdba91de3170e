#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <memory>
#include <string>

#include "disko/basis_dictionary.hpp"
#include "disko/snapshot_pipeline.hpp"

namespace disko {

enum class StabilityClass { asymptotically_stable, marginally_stable, unstable };

const char* to_string(StabilityClass c);

struct SpectrumReport {
  StabilityClass stability = StabilityClass::unstable;
  Eigen::VectorXcd eigenvalues;
};

struct KoopmanModel {
  Eigen::MatrixXd A;  // W_s x W_s
  Eigen::MatrixXd B;  // W_s x W_u (zero columns when no input)
  double dt = 0.0;
  std::shared_ptr<const BasisDictionary> dictionary;  // may be null
  StabilityClass stability = StabilityClass::unstable;

  int w_s() const { return static_cast<int>(A.rows()); }
  int w_u() const { return static_cast<int>(B.cols()); }
};

// Moore-Penrose pseudoinverse; singular values below
// sigma_max * max(rows, cols) * machine-eps are treated as zero.
Eigen::MatrixXd pinv(const Eigen::MatrixXd& M);

// Joint least squares [A B] = [Amat Y_U] * pinv([[G, X_U], [X_U^T, U_U]]).
KoopmanModel fit_least_squares(const AccumulatorSet& acc, double dt,
                               std::shared_ptr<const BasisDictionary> dict = nullptr);

// Discrete-time classification: asymptotically stable iff all |lambda| < 1 - tol,
// unstable iff some |lambda| > 1 + tol or a modulus-one eigenvalue is defective,
// marginal otherwise.
SpectrumReport classify_stability(const Eigen::MatrixXd& A, double tol_class = 1e-8);

double spectral_radius(const Eigen::MatrixXd& A);

// 0.5 * ||Y - AX - BU||_F^2, from raw snapshots or from accumulators
// (trace identity; requires the tr(YY^T) scalar).
double reconstruction_error(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                            const SnapshotSet& snap);
double reconstruction_error(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                            const AccumulatorSet& acc);

// Text model container; matrices at 17 significant digits (round-trips exactly).
void save_model(std::ostream& out, const KoopmanModel& model);
void save_model(const std::string& path, const KoopmanModel& model);
KoopmanModel load_model(std::istream& in);
KoopmanModel load_model(const std::string& path);

}  // namespace disko
