#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "disko/basis_dictionary.hpp"

namespace disko {

struct SnapshotSet {
  Eigen::MatrixXd X;  // W_s x P pre-step basis columns
  Eigen::MatrixXd Y;  // W_s x P post-step basis columns
  Eigen::MatrixXd U;  // W_u x P input basis columns
  double dt = 0.0;

  int pairs() const { return static_cast<int>(X.cols()); }
};

// Running sums G = X X^T, Amat = Y X^T, X_U = X U^T, Y_U = Y U^T, U_U = U U^T,
// plus tr(Y Y^T) so objectives are computable without retaining Y.
struct AccumulatorSet {
  Eigen::MatrixXd G, Amat, X_U, Y_U, U_U;
  double tr_YY = 0.0;
  bool tr_valid = true;
  long long count = 0;

  AccumulatorSet() = default;
  AccumulatorSet(int w_s, int w_u);

  int w_s() const { return static_cast<int>(G.rows()); }
  int w_u() const { return static_cast<int>(U_U.rows()); }
};

// Rank-one update; optionally retains the raw columns in `retain`.
void ingest_pair(AccumulatorSet& acc, const Eigen::VectorXd& psi_pre,
                 const Eigen::VectorXd& psi_post, const Eigen::VectorXd& psi_u,
                 SnapshotSet* retain = nullptr);

std::pair<SnapshotSet, AccumulatorSet> build_from_trajectory(
    const BasisDictionary& dict, const std::vector<Eigen::VectorXd>& states,
    const std::vector<Eigen::VectorXd>& inputs, double dt);

// Convenience for batch matrices already in lifted form.
AccumulatorSet accumulate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                          const Eigen::MatrixXd& U);
AccumulatorSet accumulate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

struct TrajectoryData {
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> inputs;
  double dt = 0.0;
};

// CSV format: header `t,s0..s{N-1},u0..u{M-1}`, uniformly spaced strictly
// increasing t (validated to 1e-9 relative).
TrajectoryData read_trajectory_csv(std::istream& in, int state_dim, int input_dim);
TrajectoryData read_trajectory_csv(const std::string& path, int state_dim, int input_dim);
void write_trajectory_csv(std::ostream& out, const TrajectoryData& traj);
void write_trajectory_csv(const std::string& path, const TrajectoryData& traj);

}  // namespace disko
