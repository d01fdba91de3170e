#include "experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <utility>

#include <unsupported/Eigen/MatrixFunctions>

#include "disko/errors.hpp"

namespace disko {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double population_std(const std::vector<double>& v, double mean) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

// Rolls psi forward under A, clamping entries to +-1e12 (divergent models must
// still yield a finite, comparable error figure), and returns the mean wrapped
// angle error against the true states. Coordinate 0 is the angle.
double clamped_angle_error(const Eigen::MatrixXd& A, Eigen::VectorXd psi,
                           const std::vector<Eigen::VectorXd>& truth,
                           double* max_abs_basis) {
  constexpr double clip = 1e12;
  const int n = static_cast<int>(truth.size()) - 1;
  if (n < 1) return 0.0;
  double total = 0.0;
  for (int k = 1; k <= n; ++k) {
    psi = A * psi;
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
      double& e = psi(i);
      if (!std::isfinite(e))
        e = clip;
      else
        e = std::clamp(e, -clip, clip);
    }
    if (max_abs_basis)
      *max_abs_basis = std::max(*max_abs_basis, psi.cwiseAbs().maxCoeff());
    total += std::abs(wrap_angle(psi(0) - truth[static_cast<size_t>(k)](0)));
  }
  return total / n;
}

Eigen::Vector2d wrap_state(const Eigen::Vector2d& s) {
  return {wrap_angle(s(0)), s(1)};
}

double seconds_between(std::chrono::steady_clock::time_point a,
                       std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace

WorkedExampleData worked_example_data() {
  WorkedExampleData d;
  d.X.resize(3, 5);
  d.X << 0.1419, 0.4218, 0.9157, 0.7922, 0.9595,  //
      0.6557, 0.0357, 0.8491, 0.9340, 0.6787,     //
      0.7577, 0.7431, 0.3922, 0.6555, 0.1712;
  d.Y.resize(3, 5);
  d.Y << 8.1472, 9.0579, 1.2699, 9.1338, 6.3236,  //
      0.9754, 2.7850, 5.4688, 9.5751, 9.6489,     //
      1.5761, 9.7059, 9.5717, 4.8538, 8.0028;
  d.K_projected.resize(3, 3);
  d.K_projected << 0.0041, -6.6031, 5.1709,  //
      10.3449, -1.9480, -0.0590,             //
      11.7192, -6.7149, 3.4609;
  d.K_soc.resize(3, 3);
  d.K_soc << 5.6337, -8.2334, 11.5883,  //
      14.4877, -5.0863, 1.9636,         //
      8.3346, -2.8916, 1.0662;
  return d;
}

MatrixReport report_against(const Eigen::MatrixXd& K, const Eigen::MatrixXd& K_ls,
                            const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  MatrixReport r;
  r.reconstruction = 0.5 * (Y - K * X).squaredNorm();
  r.distance = 0.5 * (K_ls - K).squaredNorm();
  Eigen::EigenSolver<Eigen::MatrixXd> es(K);
  Eigen::VectorXd re = es.eigenvalues().real();
  std::sort(re.data(), re.data() + re.size());
  r.eig_real_sorted = re;
  r.spectral_radius = es.eigenvalues().cwiseAbs().maxCoeff();
  return r;
}

WorkedExampleReport run_worked_example(const SOCConfig& soc) {
  const WorkedExampleData data = worked_example_data();
  const AccumulatorSet acc = accumulate(data.X, data.Y);

  WorkedExampleReport rep;
  rep.K_ls = fit_least_squares(acc, 1.0).A;
  rep.published_projection = report_against(data.K_projected, rep.K_ls, data.X, data.Y);
  rep.published_soc = report_against(data.K_soc, rep.K_ls, data.X, data.Y);

  auto fitted = fit_stable(acc, 1.0, nullptr, soc);
  rep.soc_model = std::move(fitted.first);
  rep.soc_state = std::move(fitted.second);

  rep.projection = project_nearest_stable(rep.K_ls, soc);
  SnapshotSet snap;
  snap.X = data.X;
  snap.Y = data.Y;
  snap.U.resize(0, data.X.cols());
  snap.dt = 1.0;
  rep.projection_objective =
      reconstruction_error(rep.projection, Eigen::MatrixXd::Zero(3, 0), snap);
  return rep;
}

PendulumSweepPoint run_pendulum_point(const PendulumPredictionConfig& cfg, int pairs,
                                      std::uint64_t train_seed) {
  if (pairs < 1) throw config_error("training size must be positive");
  auto dict = std::make_shared<const BasisDictionary>(BasisDictionary::pendulum6());

  const TrainingPairs tp =
      sample_training_set(cfg.plant, pairs, cfg.train_ranges, cfg.plant.dt, train_seed);
  AccumulatorSet acc(dict->num_state_terms(), 0);
  const Eigen::VectorXd no_input(0);
  for (size_t i = 0; i < tp.pre.size(); ++i)
    ingest_pair(acc, dict->evaluate_state(tp.pre[i]), dict->evaluate_state(tp.post[i]),
                no_input);

  const KoopmanModel ls = fit_least_squares(acc, cfg.plant.dt, dict);
  auto fitted = fit_stable(acc, cfg.plant.dt, dict, cfg.soc);
  const KoopmanModel& stable_model = fitted.first;

  const int steps = static_cast<int>(std::lround(cfg.horizon_seconds / cfg.plant.dt));
  std::mt19937_64 rng(cfg.eval_seed);
  std::uniform_real_distribution<double> dth(cfg.eval_ranges[0].first,
                                             cfg.eval_ranges[0].second);
  std::uniform_real_distribution<double> dom(cfg.eval_ranges[1].first,
                                             cfg.eval_ranges[1].second);
  const auto deriv = [&cfg](const Eigen::VectorXd& s) -> Eigen::VectorXd {
    return pendulum_derivative(cfg.plant, Eigen::Vector2d(s));
  };

  std::vector<double> ls_errors, soc_errors;
  ls_errors.reserve(cfg.eval_rollouts);
  soc_errors.reserve(cfg.eval_rollouts);
  double max_abs_basis = 0.0;
  for (int r = 0; r < cfg.eval_rollouts; ++r) {
    const double th = dth(rng);
    const double om = dom(rng);
    const IntegrationResult truth =
        integrate_rk4(deriv, Eigen::Vector2d(th, om), cfg.plant.dt, steps);
    if (truth.states.size() < 2) continue;
    const Eigen::VectorXd psi0 = dict->evaluate_state(Eigen::Vector2d(th, om));
    ls_errors.push_back(clamped_angle_error(ls.A, psi0, truth.states, nullptr));
    soc_errors.push_back(
        clamped_angle_error(stable_model.A, psi0, truth.states, &max_abs_basis));
  }

  PendulumSweepPoint pt;
  pt.pairs = pairs;
  pt.ls_mean_error = mean_of(ls_errors);
  pt.ls_std_error = population_std(ls_errors, pt.ls_mean_error);
  pt.soc_mean_error = mean_of(soc_errors);
  pt.soc_std_error = population_std(soc_errors, pt.soc_mean_error);
  pt.ls_spectral_radius = spectral_radius(ls.A);
  pt.soc_spectral_radius = spectral_radius(stable_model.A);
  pt.ls_class = ls.stability;
  pt.soc_class = stable_model.stability;
  pt.soc_max_abs_basis = max_abs_basis;
  pt.soc_objective = fitted.second.objective;
  return pt;
}

std::vector<PendulumSweepPoint> run_pendulum_sweep(const PendulumPredictionConfig& cfg) {
  std::vector<PendulumSweepPoint> points;
  points.reserve(cfg.training_sizes.size());
  for (int n : cfg.training_sizes)
    points.push_back(
        run_pendulum_point(cfg, n, cfg.train_seed + static_cast<std::uint64_t>(n)));
  return points;
}

void write_sweep_csv(std::ostream& out, const std::vector<PendulumSweepPoint>& points) {
  out << "pairs,ls_mean_error,ls_std_error,soc_mean_error,soc_std_error,"
         "ls_spectral_radius,soc_spectral_radius,ls_stability,soc_stability,"
         "soc_max_abs_basis,soc_objective\n";
  for (const PendulumSweepPoint& p : points) {
    out << p.pairs << ',' << fmt17(p.ls_mean_error) << ',' << fmt17(p.ls_std_error)
        << ',' << fmt17(p.soc_mean_error) << ',' << fmt17(p.soc_std_error) << ','
        << fmt17(p.ls_spectral_radius) << ',' << fmt17(p.soc_spectral_radius) << ','
        << to_string(p.ls_class) << ',' << to_string(p.soc_class) << ','
        << fmt17(p.soc_max_abs_basis) << ',' << fmt17(p.soc_objective) << '\n';
  }
}

DampedStabilityOutcome run_damped_stability(const PendulumPredictionConfig& cfg,
                                            int trials, int pairs, double beta,
                                            std::uint64_t seed0) {
  if (trials < 1 || pairs < 1) throw config_error("trials and pairs must be positive");
  DampedStabilityOutcome out;
  out.trials = trials;
  PendulumParams plant = cfg.plant;
  plant.beta = beta;
  auto dict = std::make_shared<const BasisDictionary>(BasisDictionary::pendulum6());
  const Eigen::VectorXd no_input(0);
  for (int t = 0; t < trials; ++t) {
    const TrainingPairs tp = sample_training_set(plant, pairs, cfg.train_ranges,
                                                 plant.dt, seed0 + static_cast<std::uint64_t>(t));
    AccumulatorSet acc(dict->num_state_terms(), 0);
    for (size_t i = 0; i < tp.pre.size(); ++i)
      ingest_pair(acc, dict->evaluate_state(tp.pre[i]), dict->evaluate_state(tp.post[i]),
                  no_input);
    const KoopmanModel ls = fit_least_squares(acc, plant.dt, dict);
    const KoopmanModel stable_model = fit_stable(acc, plant.dt, dict, cfg.soc).first;
    out.ls_radii.push_back(spectral_radius(ls.A));
    out.soc_radii.push_back(spectral_radius(stable_model.A));
    if (ls.stability == StabilityClass::unstable) ++out.ls_unstable;
    if (stable_model.stability != StabilityClass::unstable) ++out.soc_stable;
  }
  return out;
}

LyapunovExperimentResult run_lyapunov_experiment(const LyapunovExperimentConfig& cfg) {
  if (cfg.dt_control <= 0.0 || cfg.dt_measure <= 0.0)
    throw config_error("time steps must be positive");
  const double ratio = cfg.dt_measure / cfg.dt_control;
  const int substeps = static_cast<int>(std::lround(ratio));
  if (substeps < 1 || std::abs(ratio - substeps) > 1e-9 * ratio)
    throw config_error("dt_measure must be an integer multiple of dt_control");
  if (cfg.horizon_seconds <= 0.0) throw config_error("horizon must be positive");

  PendulumParams plant;
  plant.g = cfg.gravity;
  plant.beta = cfg.beta;
  plant.dt = cfg.dt_control;

  LyapunovExperimentResult res;
  std::mt19937_64 rng(cfg.seed);

  // Feedback gain from an identity-lift model excited over the energy corridor
  // the nominal trajectory traverses.
  {
    auto dict2 = std::make_shared<const BasisDictionary>(BasisDictionary::state_identity(2, 1));
    std::uniform_real_distribution<double> dth(-cfg.gain_theta, cfg.gain_theta);
    std::uniform_real_distribution<double> dom(-cfg.gain_omega, cfg.gain_omega);
    std::uniform_real_distribution<double> dtq(-cfg.gain_torque, cfg.gain_torque);
    AccumulatorSet acc2(2, 1);
    for (int i = 0; i < cfg.gain_pairs; ++i) {
      const double th = dth(rng);
      const double om = dom(rng);
      const double u = dtq(rng);
      const Eigen::Vector2d s(th, om);
      const auto deriv = [&plant, u](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return pendulum_derivative(plant, Eigen::Vector2d(x), u);
      };
      const Eigen::VectorXd nxt = rk4_step(deriv, s, cfg.dt_control);
      ingest_pair(acc2, s, nxt, Eigen::VectorXd::Constant(1, u));
    }
    res.gain_model = fit_least_squares(acc2, cfg.dt_control, dict2);
    LQRWeights weights;
    weights.Q = lift_cost_matrix(Eigen::Matrix2d::Identity(), 2);
    weights.R = Eigen::MatrixXd::Constant(1, 1, cfg.r_weight);
    res.lqr = solve_infinite_lqr(res.gain_model.A, res.gain_model.B, weights);
  }
  const Eigen::MatrixXd& K = res.lqr.law.K;  // 1 x 2

  // One measurement interval of the closed loop: feedback on the wrapped state
  // at every control substep, raw propagation target.
  const auto advance = [&](Eigen::Vector2d s, double* u_first) -> Eigen::Vector2d {
    for (int j = 0; j < substeps; ++j) {
      const Eigen::Vector2d w = wrap_state(s);
      const double u = -(K * w)(0);
      if (!(std::abs(u) <= cfg.torque_guard))
        throw numerical_error("closed-loop control diverged: |u| exceeded the guard");
      if (j == 0 && u_first) *u_first = u;
      const auto deriv = [&plant, u](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return pendulum_derivative(plant, Eigen::Vector2d(x), u);
      };
      s = Eigen::Vector2d(rk4_step(deriv, s, cfg.dt_control));
    }
    return s;
  };

  // Nominal measured trajectory for the certificate.
  const int intervals = static_cast<int>(std::lround(cfg.horizon_seconds / cfg.dt_measure));
  res.nominal.dt = cfg.dt_measure;
  {
    Eigen::Vector2d s = wrap_state(Eigen::Vector2d(cfg.theta0, cfg.omega0));
    res.nominal.states.push_back(s);
    for (int k = 0; k < intervals; ++k) {
      double u0 = 0.0;
      const Eigen::Vector2d raw = advance(s, &u0);
      res.nominal.inputs.push_back(Eigen::VectorXd::Constant(1, u0));
      s = wrap_state(raw);
      res.nominal.states.push_back(s);
    }
  }

  // Closed-loop ensemble exciting the 8-dimensional lift: small-amplitude bulk
  // plus large-release and fast-spin anchors. Wrapped sources, raw targets.
  auto dict8 = std::make_shared<const BasisDictionary>(
      BasisDictionary::parse(BasisDictionary::pendulum8().serialize(), 2, 0));
  AccumulatorSet acc8(dict8->num_state_terms(), 0);
  const Eigen::VectorXd no_input(0);
  const auto run_chain = [&](const Eigen::Vector2d& ic, int steps) {
    Eigen::Vector2d cur = wrap_state(ic);
    for (int k = 0; k < steps; ++k) {
      const Eigen::Vector2d tgt = advance(cur, nullptr);
      ingest_pair(acc8, dict8->evaluate_state(cur), dict8->evaluate_state(tgt), no_input);
      cur = wrap_state(tgt);
    }
  };
  {
    std::uniform_real_distribution<double> dth(-cfg.small_theta, cfg.small_theta);
    std::uniform_real_distribution<double> dom(-cfg.small_omega, cfg.small_omega);
    for (int i = 0; i < cfg.small_count; ++i) {
      const double th = dth(rng);
      const double om = dom(rng);
      run_chain(Eigen::Vector2d(th, om), cfg.small_steps);
    }
  }
  {
    std::uniform_real_distribution<double> amp(cfg.release_lo, cfg.release_hi);
    std::uniform_real_distribution<double> dom(-cfg.release_omega, cfg.release_omega);
    for (int i = 0; i < cfg.release_count; ++i) {
      const double a = amp(rng);
      const double om = dom(rng);
      const double sgn = (i % 2 == 0) ? 1.0 : -1.0;
      run_chain(Eigen::Vector2d(sgn * a, om), cfg.release_steps);
    }
  }
  {
    std::uniform_real_distribution<double> dth(-cfg.spin_theta, cfg.spin_theta);
    std::uniform_real_distribution<double> amp(cfg.spin_lo, cfg.spin_hi);
    for (int i = 0; i < cfg.spin_count; ++i) {
      const double th = dth(rng);
      const double a = amp(rng);
      const double sgn = (i % 2 == 0) ? 1.0 : -1.0;
      run_chain(Eigen::Vector2d(th, sgn * a), cfg.spin_steps);
    }
  }

  auto fitted = fit_stable(acc8, cfg.dt_measure, dict8, cfg.soc);
  res.soc_model = std::move(fitted.first);
  res.soc_state = std::move(fitted.second);

  const int w = dict8->num_state_terms();
  const Eigen::MatrixXd Q_K = Eigen::MatrixXd::Identity(w, w);
  const Eigen::VectorXd equilibrium = Eigen::Vector2d::Zero();
  const std::vector<Eigen::VectorXd> no_inputs;
  try {
    const ContinuousOperator cop = to_continuous(res.soc_model);
    const Eigen::MatrixXd P = solve_lyapunov(cop.K, Q_K);
    res.cert = certify_trajectory(res.soc_model, P, Q_K, res.nominal.states, no_inputs,
                                  cfg.dt_measure, LyapunovPath::continuous, &equilibrium);
  } catch (const log_inadmissible_error& e) {
    const Eigen::MatrixXd P = solve_discrete_lyapunov(res.soc_model.A, Q_K);
    res.cert = certify_trajectory(res.soc_model, P, Q_K, res.nominal.states, no_inputs,
                                  cfg.dt_measure, LyapunovPath::discrete, &equilibrium);
    res.discrete_fallback = true;
    res.notice = std::string("continuous-time construction unavailable (") + e.what() +
                 "); certified via the discrete-time difference form";
  } catch (const not_hurwitz_error& e) {
    const Eigen::MatrixXd P = solve_discrete_lyapunov(res.soc_model.A, Q_K);
    res.cert = certify_trajectory(res.soc_model, P, Q_K, res.nominal.states, no_inputs,
                                  cfg.dt_measure, LyapunovPath::discrete, &equilibrium);
    res.discrete_fallback = true;
    res.notice = std::string("continuous-time construction unavailable (") + e.what() +
                 "); certified via the discrete-time difference form";
  }
  return res;
}

LyapunovCertificate run_synthetic_lyapunov(int dim, double dt, int steps,
                                           std::uint64_t seed) {
  if (dim < 1 || dt <= 0.0 || steps < 2)
    throw config_error("synthetic certificate needs dim >= 1, dt > 0, steps >= 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::MatrixXd M(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) M(i, j) = gauss(rng);
  const Eigen::EigenSolver<Eigen::MatrixXd> es(M);
  const double max_re = es.eigenvalues().real().maxCoeff();
  const Eigen::MatrixXd G =
      M - (max_re + 1.0) * Eigen::MatrixXd::Identity(dim, dim);  // Hurwitz by shift
  const Eigen::MatrixXd A = (G * dt).exp();

  KoopmanModel model;
  model.A = A;
  model.B = Eigen::MatrixXd::Zero(dim, 0);
  model.dt = dt;
  model.stability = classify_stability(A).stability;

  const ContinuousOperator cop = to_continuous(model);
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(dim, dim);
  const Eigen::MatrixXd P = solve_lyapunov(cop.K, Q);

  // Forward-Euler flow of the recovered generator: the forward-difference
  // residual vanishes identically on this data.
  const Eigen::MatrixXd step_map =
      Eigen::MatrixXd::Identity(dim, dim) + dt * cop.K;
  Eigen::VectorXd psi(dim);
  for (int i = 0; i < dim; ++i) psi(i) = gauss(rng);
  std::vector<Eigen::VectorXd> states;
  states.reserve(static_cast<size_t>(steps) + 1);
  states.push_back(psi);
  for (int k = 0; k < steps; ++k) {
    psi = step_map * psi;
    states.push_back(psi);
  }
  const std::vector<Eigen::VectorXd> no_inputs;
  return certify_trajectory(model, P, Q, states, no_inputs, dt,
                            LyapunovPath::continuous);
}

std::vector<BenchRandomCell> run_bench_random(const BenchRandomConfig& cfg) {
  if (cfg.sizes.empty()) throw config_error("benchmark grid is empty");
  for (int s : cfg.sizes)
    if (s < 2) throw config_error("benchmark grid sizes must be >= 2");

  std::vector<BenchRandomCell> cells;
  cells.reserve(cfg.sizes.size() * cfg.sizes.size());
  for (int W : cfg.sizes) {
    for (int P : cfg.sizes) {
      RandomDataSpec spec;
      spec.W = W;
      spec.P = P;
      spec.seed = cfg.seed + 1000003ull * static_cast<std::uint64_t>(W) +
                  static_cast<std::uint64_t>(P);
      const auto [X, Y] = random_snapshots(spec);
      const AccumulatorSet acc = accumulate(X, Y);
      SnapshotSet snap;
      snap.X = X;
      snap.Y = Y;
      snap.U.resize(0, P);
      snap.dt = 1.0;
      const Eigen::MatrixXd no_b = Eigen::MatrixXd::Zero(W, 0);

      SOCConfig sc;
      sc.max_iter = cfg.soc_max_iter;
      sc.seed = spec.seed;

      BenchRandomCell cell;
      cell.W = W;
      cell.P = P;

      const auto t0 = std::chrono::steady_clock::now();
      const auto fitted = fit_stable(acc, 1.0, nullptr, sc);
      const auto t1 = std::chrono::steady_clock::now();
      cell.soc_seconds = seconds_between(t0, t1);
      cell.soc_objective = reconstruction_error(fitted.first.A, no_b, snap);
      cell.soc_iterations = fitted.second.iter;
      cell.soc_stop_reason = fitted.second.stop_reason;
      cell.soc_stable = fitted.first.stability != StabilityClass::unstable;

      const KoopmanModel ls = fit_least_squares(acc, 1.0);
      const auto t2 = std::chrono::steady_clock::now();
      const Eigen::MatrixXd proj = project_nearest_stable(ls.A, sc);
      const auto t3 = std::chrono::steady_clock::now();
      cell.projection_seconds = seconds_between(t2, t3);
      cell.projection_objective = reconstruction_error(proj, no_b, snap);

      const double wp = static_cast<double>(W) * static_cast<double>(P);
      cell.soc_normalized = cell.soc_objective / wp;
      cell.projection_normalized = cell.projection_objective / wp;
      cell.timeout = cell.soc_seconds > cfg.cell_timeout_seconds ||
                     cell.projection_seconds > cfg.cell_timeout_seconds;
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRandomCell>& cells) {
  out << "W,P,soc_objective,soc_normalized,soc_iterations,soc_stop_reason,soc_stable,"
         "projection_objective,projection_normalized\n";
  for (const BenchRandomCell& c : cells) {
    out << c.W << ',' << c.P << ',' << fmt17(c.soc_objective) << ','
        << fmt17(c.soc_normalized) << ',' << c.soc_iterations << ',' << c.soc_stop_reason
        << ',' << (c.soc_stable ? 1 : 0) << ',' << fmt17(c.projection_objective) << ','
        << fmt17(c.projection_normalized) << '\n';
  }
}

void write_bench_timings_csv(std::ostream& out,
                             const std::vector<BenchRandomCell>& cells) {
  out << "W,P,soc_seconds,projection_seconds,timeout\n";
  for (const BenchRandomCell& c : cells) {
    out << c.W << ',' << c.P << ',' << fmt17(c.soc_seconds) << ','
        << fmt17(c.projection_seconds) << ',' << (c.timeout ? 1 : 0) << '\n';
  }
}

}  // namespace disko
