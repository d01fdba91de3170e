#include "disko/soc_optimizer.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include "disko/errors.hpp"

namespace disko {

namespace {

struct Factors {
  Eigen::MatrixXd S, O, C, B;
};

// polar(M) = (O, H) with M = O H, O orthogonal, H symmetric PSD.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> polar(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd O = svd.matrixU() * svd.matrixV().transpose();
  Eigen::MatrixXd H = svd.matrixV() * svd.singularValues().asDiagonal() *
                      svd.matrixV().transpose();
  return {std::move(O), std::move(H)};
}

Eigen::MatrixXd proj_orth(const Eigen::MatrixXd& O) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(O, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

Eigen::MatrixXd proj_cone(const Eigen::MatrixXd& C, double rho) {
  Eigen::MatrixXd Cs = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Cs);
  Eigen::VectorXd w = es.eigenvalues();
  for (int i = 0; i < w.size(); ++i) w[i] = std::min(std::max(w[i], 0.0), rho);
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
}

double cond2(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  double smin = sv[sv.size() - 1];
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return sv[0] / smin;
}

Eigen::MatrixXd compose_A(const Factors& f) {
  return f.S.partialPivLu().solve(f.O * f.C * f.S);
}

double objective_of(const Factors& f, const AccumulatorSet& acc) {
  Eigen::MatrixXd A = compose_A(f);
  double t = acc.tr_YY - 2.0 * (A * acc.Amat.transpose()).trace() +
             (A * acc.G * A.transpose()).trace();
  if (f.B.cols() > 0) {
    t += -2.0 * (f.B * acc.Y_U.transpose()).trace() +
         2.0 * (A * acc.X_U * f.B.transpose()).trace() +
         (f.B * acc.U_U * f.B.transpose()).trace();
  }
  return 0.5 * t;
}

Factors gradients_of(const Factors& f, const AccumulatorSet& acc) {
  Eigen::MatrixXd Sinv = f.S.partialPivLu().inverse();
  Eigen::MatrixXd A = Sinv * f.O * f.C * f.S;
  Eigen::MatrixXd V = acc.Amat - A * acc.G;
  if (f.B.cols() > 0) V -= f.B * acc.X_U.transpose();
  Eigen::MatrixXd SinvT = Sinv.transpose();
  Factors g;
  g.S = SinvT * (V * A.transpose() - A.transpose() * V);
  g.O = -SinvT * V * f.S.transpose() * f.C.transpose();
  g.C = -f.O.transpose() * SinvT * V * f.S.transpose();
  if (f.B.cols() > 0)
    g.B = -acc.Y_U + A * acc.X_U + f.B * acc.U_U;
  else
    g.B = Eigen::MatrixXd(f.B.rows(), 0);
  return g;
}

Eigen::VectorXd pack(const Factors& f) {
  Eigen::Index n = f.S.size() + f.O.size() + f.C.size() + f.B.size();
  Eigen::VectorXd v(n);
  Eigen::Index at = 0;
  for (const Eigen::MatrixXd* M : {&f.S, &f.O, &f.C, &f.B}) {
    v.segment(at, M->size()) = Eigen::Map<const Eigen::VectorXd>(M->data(), M->size());
    at += M->size();
  }
  return v;
}

struct RunResult {
  Factors f;
  double objective = std::numeric_limits<double>::infinity();
  long iter = 0;
  double step = 0.0;
  std::string stop_reason;
};

RunResult descend(Factors f, const AccumulatorSet& acc, const SOCConfig& cfg,
                  std::ostream* diag) {
  RunResult res;
  double obj = objective_of(f, acc);
  double step = cfg.step_init;
  int stall = 0;
  bool have_prev = false;
  Eigen::VectorXd prev_x, prev_g;
  std::string stop = "max_iter";
  long it = 0;

  for (; it < cfg.max_iter; ++it) {
    Factors g = gradients_of(f, acc);
    Eigen::VectorXd x = pack(f), gv = pack(g);

    double t0 = step * 2.0;
    if (have_prev) {
      Eigen::VectorXd dx = x - prev_x, dg = gv - prev_g;
      double dgg = dx.dot(dg);
      if (dgg > 0.0) {
        double bb1 = dx.dot(dx) / dgg;
        double bb2 = dgg / dg.dot(dg);
        t0 = (it % 2) ? bb2 : bb1;
        t0 = std::min(std::max(t0, 1e-12), 1e3);
      }
    }
    prev_x = std::move(x);
    prev_g = std::move(gv);
    have_prev = true;

    double t = t0;
    bool accepted = false;
    double imp = 0.0;
    for (int h = 0; h < cfg.max_halvings; ++h) {
      Eigen::MatrixXd S2 = f.S - t * g.S;
      if (cond2(S2) <= 1e12) {
        Factors cand;
        cand.S = std::move(S2);
        cand.O = proj_orth(f.O - t * g.O);
        cand.C = proj_cone(f.C - t * g.C, cfg.rho);
        cand.B = f.B - t * g.B;
        double o2 = objective_of(cand, acc);
        if (o2 < obj) {
          f = std::move(cand);
          imp = obj - o2;
          obj = o2;
          step = t;
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }

    if (diag) {
      (*diag) << it << "," << obj << "," << (accepted ? step : 0.0) << ","
              << spectral_radius(compose_A(f)) << "\n";
    }

    if (!accepted) {
      step *= std::pow(0.5, cfg.max_halvings);
      if (step < 1e-12) {
        stop = "step_collapsed";
        break;
      }
      continue;
    }

    if (imp / std::max(std::abs(obj), 1.0) < cfg.rel_tol) {
      if (++stall >= 10) {
        stop = "stalled";
        break;
      }
    } else {
      stall = 0;
    }
  }

  res.f = std::move(f);
  res.objective = obj;
  res.iter = it;
  res.step = step;
  res.stop_reason = stop;
  return res;
}

}  // namespace

Eigen::MatrixXd SOCState::A() const {
  return S.partialPivLu().solve(O * C * S);
}

double soc_objective(const SOCState& state, const AccumulatorSet& acc) {
  return objective_of({state.S, state.O, state.C, state.B}, acc);
}

SOCGradients soc_gradients(const SOCState& state, const AccumulatorSet& acc) {
  Factors g = gradients_of({state.S, state.O, state.C, state.B}, acc);
  return SOCGradients{std::move(g.S), std::move(g.O), std::move(g.C), std::move(g.B)};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> project_factors(const Eigen::MatrixXd& O,
                                                            const Eigen::MatrixXd& C,
                                                            double rho) {
  return {proj_orth(O), proj_cone(C, rho)};
}

std::pair<KoopmanModel, SOCState> fit_stable(
    const AccumulatorSet& acc, double dt,
    std::shared_ptr<const BasisDictionary> dict, const SOCConfig& config,
    const KoopmanModel* init) {
  if (acc.count == 0) throw numerical_error("cannot fit from an empty accumulator");
  if (!(dt > 0.0)) throw config_error("sampling interval must be positive");
  if (!(config.rho > 0.0) || config.rho > 1.0)
    throw config_error("spectral bound rho must lie in (0, 1]");
  if (!acc.tr_valid)
    throw numerical_error("accumulator lacks tr(Y Y^T); the objective is undefined");
  const int n = acc.w_s();
  const int m = acc.w_u();

  Factors f0;
  if (init) {
    if (init->A.rows() != n || init->A.cols() != n || init->B.cols() != m ||
        (m > 0 && init->B.rows() != n))
      throw config_error("warm-start model does not match the accumulator shape");
    f0.S = Eigen::MatrixXd::Identity(n, n);
    auto [O0, H0] = polar(init->A);
    f0.O = std::move(O0);
    f0.C = proj_cone(H0, config.rho);
    f0.B = init->B;
  } else {
    KoopmanModel ls = fit_least_squares(acc, dt);
    f0.S = Eigen::MatrixXd::Identity(n, n);
    auto [O0, H0] = polar(ls.A);
    f0.O = std::move(O0);
    f0.C = proj_cone(H0, config.rho);
    f0.B = ls.B;
  }

  if (config.diagnostics)
    (*config.diagnostics) << "iter,objective,step,spectral_radius\n";
  RunResult best = descend(f0, acc, config, config.diagnostics);

  // Perturbed restarts: jitter the accepted factors, re-project, re-descend,
  // and keep whichever run ends lowest.
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1e-2);
  for (int r = 1; r < config.restarts; ++r) {
    Factors fr = best.f;
    for (Eigen::MatrixXd* M : {&fr.S, &fr.O, &fr.C})
      for (Eigen::Index i = 0; i < M->size(); ++i) M->data()[i] += gauss(rng);
    if (cond2(fr.S) > 1e12) fr.S = Eigen::MatrixXd::Identity(n, n);
    fr.O = proj_orth(fr.O);
    fr.C = proj_cone(fr.C, config.rho);
    RunResult alt = descend(std::move(fr), acc, config, nullptr);
    if (alt.objective < best.objective) best = std::move(alt);
  }

  SOCState state;
  state.S = std::move(best.f.S);
  state.O = std::move(best.f.O);
  state.C = std::move(best.f.C);
  state.B = std::move(best.f.B);
  state.objective = best.objective;
  state.iter = best.iter;
  state.step = best.step;
  state.stop_reason = std::move(best.stop_reason);

  KoopmanModel model;
  model.A = state.A();
  model.B = state.B;
  model.dt = dt;
  model.dictionary = std::move(dict);
  model.stability = classify_stability(model.A).stability;
  if (!model.A.allFinite())
    throw numerical_error("stable fit produced non-finite entries");
  return {std::move(model), std::move(state)};
}

Eigen::MatrixXd project_nearest_stable(const Eigen::MatrixXd& K_star,
                                       const SOCConfig& config) {
  if (K_star.rows() != K_star.cols())
    throw config_error("nearest-stable projection needs a square matrix");
  const int n = static_cast<int>(K_star.rows());
  AccumulatorSet acc = accumulate(Eigen::MatrixXd::Identity(n, n), K_star);
  auto [model, state] = fit_stable(acc, 1.0, nullptr, config);
  return model.A;
}

}  // namespace disko
