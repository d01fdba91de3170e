#include "disko/snapshot_pipeline.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "disko/errors.hpp"

namespace disko {

AccumulatorSet::AccumulatorSet(int w_s, int w_u)
    : G(Eigen::MatrixXd::Zero(w_s, w_s)),
      Amat(Eigen::MatrixXd::Zero(w_s, w_s)),
      X_U(Eigen::MatrixXd::Zero(w_s, std::max(w_u, 0))),
      Y_U(Eigen::MatrixXd::Zero(w_s, std::max(w_u, 0))),
      U_U(Eigen::MatrixXd::Zero(std::max(w_u, 0), std::max(w_u, 0))) {
  if (w_s <= 0) throw config_error("accumulator state width must be positive");
  if (w_u < 0) throw config_error("accumulator input width must be nonnegative");
}

void ingest_pair(AccumulatorSet& acc, const Eigen::VectorXd& pre,
                 const Eigen::VectorXd& post, const Eigen::VectorXd& u,
                 SnapshotSet* retain) {
  if (pre.size() != acc.w_s() || post.size() != acc.w_s())
    throw config_error("snapshot width does not match the accumulator");
  if (u.size() != acc.w_u())
    throw config_error("input width does not match the accumulator");
  acc.G.noalias() += pre * pre.transpose();
  acc.Amat.noalias() += post * pre.transpose();
  acc.tr_YY += post.squaredNorm();
  if (acc.w_u() > 0) {
    acc.X_U.noalias() += pre * u.transpose();
    acc.Y_U.noalias() += post * u.transpose();
    acc.U_U.noalias() += u * u.transpose();
  }
  acc.count += 1;
  if (retain) {
    long k = retain->X.cols();
    retain->X.conservativeResize(acc.w_s(), k + 1);
    retain->Y.conservativeResize(acc.w_s(), k + 1);
    retain->X.col(k) = pre;
    retain->Y.col(k) = post;
    if (acc.w_u() > 0) {
      retain->U.conservativeResize(acc.w_u(), k + 1);
      retain->U.col(k) = u;
    }
  }
}

AccumulatorSet accumulate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                          const Eigen::MatrixXd& U) {
  if (Y.rows() != X.rows() || Y.cols() != X.cols())
    throw config_error("snapshot matrices X and Y must have identical shape");
  if (U.cols() != 0 && U.cols() != X.cols())
    throw config_error("input snapshot count does not match the state snapshots");
  AccumulatorSet acc(static_cast<int>(X.rows()), static_cast<int>(U.rows()));
  acc.G = X * X.transpose();
  acc.Amat = Y * X.transpose();
  acc.tr_YY = Y.squaredNorm();
  if (U.rows() > 0) {
    acc.X_U = X * U.transpose();
    acc.Y_U = Y * U.transpose();
    acc.U_U = U * U.transpose();
  }
  acc.count = X.cols();
  return acc;
}

AccumulatorSet accumulate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  return accumulate(X, Y, Eigen::MatrixXd(0, 0));
}

std::pair<SnapshotSet, AccumulatorSet> build_from_trajectory(
    const BasisDictionary& dict, const std::vector<Eigen::VectorXd>& states,
    const std::vector<Eigen::VectorXd>& inputs, double dt) {
  if (states.size() < 2)
    throw config_error("a trajectory needs at least two states to form one pair");
  bool with_inputs = dict.input_dim() > 0;
  if (with_inputs && inputs.size() + 1 < states.size())
    throw config_error("trajectory provides fewer inputs than transitions");
  if (!(dt > 0.0)) throw config_error("sampling interval must be positive");

  SnapshotSet set;
  set.dt = dt;
  AccumulatorSet acc(dict.num_state_terms(), with_inputs ? dict.num_input_terms() : 0);
  Eigen::VectorXd prev = dict.evaluate_state(states[0]);
  for (size_t k = 0; k + 1 < states.size(); ++k) {
    Eigen::VectorXd next = dict.evaluate_state(states[k + 1]);
    Eigen::VectorXd u(0);
    if (with_inputs) u = dict.evaluate_input(inputs[k]);
    ingest_pair(acc, prev, next, u, &set);
    prev = std::move(next);
  }
  return {std::move(set), std::move(acc)};
}

TrajectoryData read_trajectory_csv(std::istream& in, int state_dim, int input_dim) {
  TrajectoryData traj;
  std::string line;
  bool have_prev_t = false;
  double prev_t = 0.0, first_dt = 0.0;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    if (row == 1 && line.find("t,") == 0) continue;  // header
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw config_error("trajectory row " + std::to_string(row) +
                           ": cannot parse '" + cell + "' as a number");
      }
    }
    if (static_cast<int>(vals.size()) != 1 + state_dim + input_dim &&
        static_cast<int>(vals.size()) != 1 + state_dim)
      throw config_error("trajectory row " + std::to_string(row) + " has " +
                         std::to_string(vals.size()) + " columns, expected " +
                         std::to_string(1 + state_dim + input_dim));
    double t = vals[0];
    if (have_prev_t) {
      double dt = t - prev_t;
      if (!(dt > 0.0))
        throw config_error("trajectory timestamps must increase (row " +
                           std::to_string(row) + ")");
      if (first_dt == 0.0) {
        first_dt = dt;
        traj.dt = dt;
      } else if (std::abs(dt - first_dt) > 1e-9 * std::max(1.0, std::abs(first_dt))) {
        throw config_error("trajectory is not uniformly sampled near row " +
                           std::to_string(row));
      }
    }
    prev_t = t;
    have_prev_t = true;
    traj.states.emplace_back(Eigen::Map<const Eigen::VectorXd>(vals.data() + 1, state_dim));
    if (static_cast<int>(vals.size()) == 1 + state_dim + input_dim && input_dim > 0)
      traj.inputs.emplace_back(
          Eigen::Map<const Eigen::VectorXd>(vals.data() + 1 + state_dim, input_dim));
  }
  if (traj.states.size() < 2)
    throw config_error("trajectory file holds fewer than two samples");
  return traj;
}

TrajectoryData read_trajectory_csv(const std::string& path, int state_dim,
                                   int input_dim) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open trajectory file '" + path + "'");
  return read_trajectory_csv(in, state_dim, input_dim);
}

void write_trajectory_csv(std::ostream& out, const TrajectoryData& traj) {
  int n = traj.states.empty() ? 0 : static_cast<int>(traj.states[0].size());
  int m = traj.inputs.empty() ? 0 : static_cast<int>(traj.inputs[0].size());
  out << "t";
  for (int i = 0; i < n; ++i) out << ",s" << i;
  for (int j = 0; j < m; ++j) out << ",u" << j;
  out << "\n";
  char buf[32];
  for (size_t k = 0; k < traj.states.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", k * traj.dt);
    out << buf;
    for (int i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", traj.states[k][i]);
      out << "," << buf;
    }
    if (k < traj.inputs.size())
      for (int j = 0; j < m; ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", traj.inputs[k][j]);
        out << "," << buf;
      }
    else
      for (int j = 0; j < m; ++j) out << ",0";
    out << "\n";
  }
}

void write_trajectory_csv(const std::string& path, const TrajectoryData& traj) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open '" + path + "' for writing");
  write_trajectory_csv(out, traj);
}

}  // namespace disko
