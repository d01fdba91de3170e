#include "disko/edmd_solver.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "disko/errors.hpp"

namespace disko {

const char* to_string(StabilityClass c) {
  switch (c) {
    case StabilityClass::asymptotically_stable: return "asymptotically_stable";
    case StabilityClass::marginally_stable: return "marginally_stable";
    case StabilityClass::unstable: return "unstable";
  }
  return "unknown";
}

Eigen::MatrixXd pinv(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return Eigen::MatrixXd(M.cols(), M.rows());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double cutoff = sv.size() ? sv[0] * std::max(M.rows(), M.cols()) *
                                  std::numeric_limits<double>::epsilon()
                            : 0.0;
  Eigen::VectorXd inv_sv(sv.size());
  for (int i = 0; i < sv.size(); ++i) inv_sv[i] = sv[i] > cutoff ? 1.0 / sv[i] : 0.0;
  return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

double spectral_radius(const Eigen::MatrixXd& A) {
  if (A.rows() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

SpectrumReport classify_stability(const Eigen::MatrixXd& A, double tol_class) {
  SpectrumReport rep;
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  rep.eigenvalues = es.eigenvalues();
  double rho = rep.eigenvalues.size() ? rep.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  if (rho < 1.0 - tol_class) {
    rep.stability = StabilityClass::asymptotically_stable;
    return rep;
  }
  if (rho > 1.0 + tol_class) {
    rep.stability = StabilityClass::unstable;
    return rep;
  }
  // Unit-modulus eigenvalues: marginal only if every such eigenvalue is
  // semisimple. Cluster nearby eigenvalues, then compare the algebraic
  // multiplicity against the nullity of (A - lambda I); a shortfall means a
  // Jordan block on the unit circle.
  const int n = static_cast<int>(A.rows());
  const double cluster_tol =
      std::sqrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, A.norm());
  std::vector<bool> visited(n, false);
  for (int i = 0; i < n; ++i) {
    if (visited[i]) continue;
    std::complex<double> lam = rep.eigenvalues[i];
    if (std::abs(std::abs(lam) - 1.0) > tol_class) continue;
    int mult = 0;
    for (int j = 0; j < n; ++j)
      if (std::abs(rep.eigenvalues[j] - lam) <= cluster_tol) {
        ++mult;
        visited[j] = true;
      }
    Eigen::MatrixXcd shifted = A.cast<std::complex<double>>() -
                               lam * Eigen::MatrixXcd::Identity(n, n);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted);
    const auto& sv = svd.singularValues();
    double rank_tol = sv.size() ? sv[0] * n * std::numeric_limits<double>::epsilon()
                                : 0.0;
    int nullity = 0;
    for (int k = 0; k < sv.size(); ++k)
      if (sv[k] <= std::max(rank_tol, cluster_tol)) ++nullity;
    if (nullity < mult) {
      rep.stability = StabilityClass::unstable;  // defective on the unit circle
      return rep;
    }
  }
  rep.stability = StabilityClass::marginally_stable;
  return rep;
}

KoopmanModel fit_least_squares(const AccumulatorSet& acc, double dt,
                               std::shared_ptr<const BasisDictionary> dict) {
  if (acc.count == 0) throw numerical_error("cannot fit from an empty accumulator");
  if (!(dt > 0.0)) throw config_error("sampling interval must be positive");
  const int n = acc.w_s();
  const int m = acc.w_u();
  KoopmanModel model;
  model.dt = dt;
  model.dictionary = std::move(dict);
  if (m == 0) {
    model.A = acc.Amat * pinv(acc.G);
    model.B = Eigen::MatrixXd(n, 0);
  } else {
    Eigen::MatrixXd lhs(n, n + m);
    lhs << acc.Amat, acc.Y_U;
    Eigen::MatrixXd gram(n + m, n + m);
    gram << acc.G, acc.X_U, acc.X_U.transpose(), acc.U_U;
    Eigen::MatrixXd sol = lhs * pinv(gram);
    model.A = sol.leftCols(n);
    model.B = sol.rightCols(m);
  }
  if (!model.A.allFinite() || !model.B.allFinite())
    throw numerical_error("least-squares fit produced non-finite entries");
  model.stability = classify_stability(model.A).stability;
  return model;
}

double reconstruction_error(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                            const AccumulatorSet& acc) {
  if (!acc.tr_valid)
    throw numerical_error(
        "accumulator lacks tr(Y Y^T); reconstruction error is unavailable");
  // ||Y - A X - B U||_F^2 expanded through the second-moment accumulators.
  double val = acc.tr_YY - 2.0 * (A * acc.Amat.transpose()).trace() +
               (A * acc.G * A.transpose()).trace();
  if (acc.w_u() > 0 && B.cols() > 0) {
    val += -2.0 * (B * acc.Y_U.transpose()).trace() +
           2.0 * (A * acc.X_U * B.transpose()).trace() +
           (B * acc.U_U * B.transpose()).trace();
  }
  return 0.5 * std::max(val, 0.0);
}

double reconstruction_error(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                            const SnapshotSet& set) {
  Eigen::MatrixXd resid = set.Y - A * set.X;
  if (set.U.rows() > 0 && B.cols() > 0) resid -= B * set.U;
  return 0.5 * resid.squaredNorm();
}

namespace {

void write_matrix(std::ostream& out, const std::string& name,
                  const Eigen::MatrixXd& M) {
  out << name << " " << M.rows() << " " << M.cols() << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", M(i, j));
      out << (j ? " " : "") << buf;
    }
    out << "\n";
  }
}

Eigen::MatrixXd read_matrix(std::istream& in, const std::string& expect) {
  std::string name;
  long rows = -1, cols = -1;
  if (!(in >> name >> rows >> cols) || name != expect || rows < 0 || cols < 0)
    throw config_error("model file is malformed near block '" + expect + "'");
  Eigen::MatrixXd M(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j)
      if (!(in >> M(i, j)))
        throw config_error("model file is truncated inside block '" + expect + "'");
  return M;
}

}  // namespace

void save_model(std::ostream& out, const KoopmanModel& model) {
  out << "disko-model 1\n";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", model.dt);
  out << "dt " << buf << "\n";
  out << "stability " << to_string(model.stability) << "\n";
  write_matrix(out, "A", model.A);
  write_matrix(out, "B", model.B);
  if (model.dictionary) {
    out << "dictionary " << model.dictionary->state_dim() << " "
        << model.dictionary->input_dim() << " "
        << model.dictionary->num_state_terms() << "\n";
    out << model.dictionary->serialize();
  } else {
    out << "dictionary 0 0 0\n";
  }
}

void save_model(const std::string& path, const KoopmanModel& model) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open '" + path + "' for writing");
  save_model(out, model);
}

KoopmanModel load_model(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "disko-model" || version != 1)
    throw config_error("not a disko model file (bad header)");
  KoopmanModel model;
  std::string key;
  if (!(in >> key >> model.dt) || key != "dt" || !(model.dt > 0.0))
    throw config_error("model file is missing a valid dt entry");
  std::string stab;
  if (!(in >> key >> stab) || key != "stability")
    throw config_error("model file is missing the stability entry");
  model.A = read_matrix(in, "A");
  model.B = read_matrix(in, "B");
  if (model.B.rows() != model.A.rows() || model.A.rows() != model.A.cols())
    throw config_error("model file holds inconsistent operator shapes");
  long sd = 0, id = 0, nterms = 0;
  if (!(in >> key >> sd >> id >> nterms) || key != "dictionary")
    throw config_error("model file is missing the dictionary block");
  if (nterms > 0) {
    if (nterms != model.A.rows())
      throw config_error("dictionary size disagrees with the operator width");
    in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    std::ostringstream body;
    std::string line;
    for (long i = 0; i < nterms && std::getline(in, line); ++i) body << line << "\n";
    model.dictionary = std::make_shared<BasisDictionary>(
        BasisDictionary::parse(body.str(), static_cast<int>(sd), static_cast<int>(id)));
    if (model.dictionary->num_state_terms() != model.A.rows())
      throw config_error("model file dictionary block is truncated");
  }
  // The stored label is informational; recomputing keeps loaded models honest.
  model.stability = classify_stability(model.A).stability;
  return model;
}

KoopmanModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open model file '" + path + "'");
  return load_model(in);
}

}  // namespace disko
