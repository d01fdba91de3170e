// disko: command-line runner for Koopman fitting, stability-constrained
// refitting, rollout analysis, LQR synthesis, and Lyapunov certification.
#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "disko/bench_systems.hpp"
#include "disko/edmd_solver.hpp"
#include "disko/errors.hpp"
#include "disko/koopman_lqr.hpp"
#include "disko/lyapunov_cert.hpp"
#include "disko/rollout_analysis.hpp"
#include "disko/snapshot_pipeline.hpp"
#include "disko/soc_optimizer.hpp"
#include "experiments.hpp"
#include "svg_plot.hpp"

namespace fs = std::filesystem;
using namespace disko;

namespace {

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double_strict(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t.empty()) throw config_error(what + ": empty number");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    throw config_error(what + ": '" + t + "' is not a number");
  return v;
}

long long parse_ll_strict(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t.empty()) throw config_error(what + ": empty integer");
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size())
    throw config_error(what + ": '" + t + "' is not an integer");
  return v;
}

std::uint64_t parse_u64_strict(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t.empty() || t[0] == '-') throw config_error(what + ": '" + t + "' is not an unsigned integer");
  char* end = nullptr;
  const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size())
    throw config_error(what + ": '" + t + "' is not an unsigned integer");
  return static_cast<std::uint64_t>(v);
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double_strict(item, what));
  if (out.empty()) throw config_error(what + ": empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(static_cast<int>(parse_ll_strict(item, what)));
  if (out.empty()) throw config_error(what + ": empty list");
  return out;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void print_matrix(std::ostream& os, const std::string& name, const Eigen::MatrixXd& M) {
  os << name << " (" << M.rows() << "x" << M.cols() << "):\n";
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    os << " ";
    for (Eigen::Index c = 0; c < M.cols(); ++c) os << "  " << fmt6(M(r, c));
    os << "\n";
  }
}

// ---------------------------------------------------------------------------
// `key = value` config files; unknown keys rejected after the command has
// consumed everything it understands.
// ---------------------------------------------------------------------------

class ConfigMap {
 public:
  ConfigMap() = default;

  static ConfigMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    ConfigMap m;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw config_error(path + ":" + std::to_string(lineno) +
                           ": expected `key = value`, got '" + t + "'");
      const std::string key = trim(t.substr(0, eq));
      const std::string val = trim(t.substr(eq + 1));
      if (key.empty())
        throw config_error(path + ":" + std::to_string(lineno) + ": empty key");
      m.values_[key] = val;  // later assignments win
    }
    return m;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& dflt) {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    consumed_.insert(key);
    return it->second;
  }
  double get_double(const std::string& key, double dflt) {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    consumed_.insert(key);
    return parse_double_strict(it->second, "config key '" + key + "'");
  }
  int get_int(const std::string& key, int dflt) {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    consumed_.insert(key);
    return static_cast<int>(parse_ll_strict(it->second, "config key '" + key + "'"));
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    consumed_.insert(key);
    return parse_u64_strict(it->second, "config key '" + key + "'");
  }
  bool get_bool(const std::string& key, bool dflt) {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    consumed_.insert(key);
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw config_error("config key '" + key + "': '" + it->second + "' is not a boolean");
  }
  std::vector<int> get_int_list(const std::string& key, std::vector<int> dflt) {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    consumed_.insert(key);
    return parse_int_list(it->second, "config key '" + key + "'");
  }

  void reject_unknown() const {
    std::string unknown;
    for (const auto& [k, v] : values_) {
      if (consumed_.count(k)) continue;
      if (!unknown.empty()) unknown += ", ";
      unknown += k;
    }
    if (!unknown.empty()) throw config_error("unknown config key(s): " + unknown);
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

// True when `name` is an option of `cmd` and was given on the command line.
bool flag_given(const CLI::App* cmd, const std::string& name) {
  const CLI::Option* opt = cmd->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

// Seed precedence: --seed flag > DISKO_SEED environment > config file > default.
std::uint64_t resolve_seed(const CLI::App* cmd, std::uint64_t flag_value, ConfigMap& cfg,
                           std::uint64_t dflt) {
  std::uint64_t val = cfg.get_u64("seed", dflt);
  if (const char* env = std::getenv("DISKO_SEED"))
    val = parse_u64_strict(env, "DISKO_SEED");
  if (flag_given(cmd, "--seed")) val = flag_value;
  return val;
}

SOCConfig read_soc_config(ConfigMap& cfg) {
  SOCConfig s;
  s.rho = cfg.get_double("rho", s.rho);
  s.max_iter = cfg.get_int("max_iter", s.max_iter);
  s.step_init = cfg.get_double("step_init", s.step_init);
  s.max_halvings = cfg.get_int("max_halvings", s.max_halvings);
  s.rel_tol = cfg.get_double("rel_tol", s.rel_tol);
  s.restarts = cfg.get_int("restarts", s.restarts);
  return s;
}

std::shared_ptr<const BasisDictionary> load_dictionary(const std::string& spec,
                                                       int state_dim, int input_dim) {
  if (spec == "pendulum6")
    return std::make_shared<const BasisDictionary>(BasisDictionary::pendulum6());
  if (spec == "pendulum8")
    return std::make_shared<const BasisDictionary>(BasisDictionary::pendulum8());
  if (spec == "identity") {
    if (state_dim < 1)
      throw config_error("identity dictionary needs --state-dim (and --input-dim)");
    return std::make_shared<const BasisDictionary>(
        BasisDictionary::state_identity(state_dim, std::max(input_dim, 0)));
  }
  std::ifstream in(spec);
  if (!in) throw config_error("cannot open dictionary file '" + spec + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  if (state_dim < 1)
    throw config_error("dictionary files need --state-dim (and --input-dim)");
  return std::make_shared<const BasisDictionary>(
      BasisDictionary::parse(ss.str(), state_dim, std::max(input_dim, 0)));
}

fs::path prepare_output_dir(const std::string& dir) {
  fs::path p(dir.empty() ? "." : dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw config_error("cannot create output directory '" + p.string() + "'");
  return p;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open '" + path.string() + "' for writing");
  return out;
}

void print_model_summary(std::ostream& os, const KoopmanModel& model,
                         const AccumulatorSet& acc) {
  os << "pairs = " << acc.count << "\n";
  os << "state_terms = " << model.w_s() << "\n";
  os << "input_terms = " << model.w_u() << "\n";
  os << "objective = " << fmt17(reconstruction_error(model.A, model.B, acc)) << "\n";
  os << "spectral_radius = " << fmt17(spectral_radius(model.A)) << "\n";
  os << "stability = " << to_string(model.stability) << "\n";
}

// ---------------------------------------------------------------------------
// fit / fit-stable
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string config_path;
  std::string trajectory;
  std::string dictionary;
  std::string model_out;
  std::string output_dir;
  std::string diagnostics;
  int state_dim = -1;
  int input_dim = -1;
  int chunks = 1;
  std::uint64_t seed = 0;
  double rho = 1.0;
  int max_iter = 20000;
  bool worked_example = false;
  CLI::App* cmd = nullptr;
};

void print_worked_example_report(std::ostream& os, const WorkedExampleReport& rep,
                                 bool include_soc) {
  print_matrix(os, "least_squares_solution", rep.K_ls);
  const auto line = [&os](const char* name, const MatrixReport& r) {
    os << name << ": reconstruction = " << fmt17(r.reconstruction)
       << ", distance = " << fmt17(r.distance) << ", eig_real = [";
    for (Eigen::Index i = 0; i < r.eig_real_sorted.size(); ++i)
      os << (i ? ", " : "") << fmt6(r.eig_real_sorted(i));
    os << "], spectral_radius = " << fmt6(r.spectral_radius) << "\n";
  };
  line("published_projection", rep.published_projection);
  line("published_soc", rep.published_soc);
  if (include_soc) {
    os << "soc_objective = " << fmt17(rep.soc_state.objective) << "\n";
    os << "soc_iterations = " << rep.soc_state.iter << "\n";
    os << "soc_stop_reason = " << rep.soc_state.stop_reason << "\n";
    os << "soc_spectral_radius = " << fmt17(spectral_radius(rep.soc_model.A)) << "\n";
    os << "soc_stability = " << to_string(rep.soc_model.stability) << "\n";
    os << "projection_objective = " << fmt17(rep.projection_objective) << "\n";
  }
}

// Lifts a trajectory and returns per-pair lifted columns.
struct LiftedPairs {
  std::vector<Eigen::VectorXd> pre, post, input;
};

LiftedPairs lift_pairs(const BasisDictionary& dict, const TrajectoryData& td) {
  if (td.states.size() < 2)
    throw config_error("trajectory has " + std::to_string(td.states.size()) +
                       " rows; need at least 2");
  const size_t n = td.states.size() - 1;
  const bool with_inputs = dict.input_dim() > 0;
  if (with_inputs && td.inputs.size() < n)
    throw config_error("trajectory has fewer inputs than transitions");
  LiftedPairs lp;
  lp.pre.reserve(n);
  lp.post.reserve(n);
  lp.input.reserve(n);
  for (size_t k = 0; k < n; ++k) {
    lp.pre.push_back(dict.evaluate_state(td.states[k]));
    lp.post.push_back(dict.evaluate_state(td.states[k + 1]));
    lp.input.push_back(with_inputs ? dict.evaluate_input(td.inputs[k])
                                   : Eigen::VectorXd(0));
  }
  return lp;
}

int run_fit(FitArgs& a, bool stable) {
  ConfigMap cfg = a.config_path.empty() ? ConfigMap() : ConfigMap::load(a.config_path);

  if (a.worked_example) {
    SOCConfig soc = read_soc_config(cfg);
    soc.seed = resolve_seed(a.cmd, a.seed, cfg, soc.seed);
    if (flag_given(a.cmd, "--rho")) soc.rho = a.rho;
    if (flag_given(a.cmd, "--max-iter")) soc.max_iter = a.max_iter;
    cfg.reject_unknown();
    const WorkedExampleReport rep = run_worked_example(soc);
    print_worked_example_report(std::cout, rep, stable);
    return 0;
  }

  const std::string traj_path =
      flag_given(a.cmd, "--trajectory") ? a.trajectory : cfg.get_string("trajectory", "");
  if (traj_path.empty()) throw config_error("no trajectory CSV given (--trajectory)");
  const std::string dict_spec =
      flag_given(a.cmd, "--dictionary") ? a.dictionary : cfg.get_string("dictionary", "pendulum6");
  int state_dim = flag_given(a.cmd, "--state-dim") ? a.state_dim : cfg.get_int("state_dim", -1);
  int input_dim = flag_given(a.cmd, "--input-dim") ? a.input_dim : cfg.get_int("input_dim", -1);
  const std::string output_dir =
      flag_given(a.cmd, "--output-dir") ? a.output_dir : cfg.get_string("output_dir", ".");
  std::string model_out =
      flag_given(a.cmd, "--model-out") ? a.model_out : cfg.get_string("model_out", "");

  SOCConfig soc = read_soc_config(cfg);
  soc.seed = resolve_seed(a.cmd, a.seed, cfg, soc.seed);
  if (flag_given(a.cmd, "--rho")) soc.rho = a.rho;
  if (flag_given(a.cmd, "--max-iter")) soc.max_iter = a.max_iter;
  const int chunks = flag_given(a.cmd, "--chunks") ? a.chunks : cfg.get_int("chunks", 1);
  const std::string diagnostics_path =
      flag_given(a.cmd, "--diagnostics") ? a.diagnostics : cfg.get_string("diagnostics", "");
  cfg.reject_unknown();

  auto dict = load_dictionary(dict_spec, state_dim, input_dim);
  const TrajectoryData td =
      read_trajectory_csv(traj_path, dict->state_dim(), dict->input_dim());

  const fs::path outdir = prepare_output_dir(output_dir);
  if (model_out.empty())
    model_out = (outdir / (stable ? "stable_model.txt" : "model.txt")).string();

  std::ofstream diag_stream;
  if (!diagnostics_path.empty()) diag_stream = open_output(diagnostics_path);

  KoopmanModel model;
  AccumulatorSet acc(dict->num_state_terms(), dict->num_input_terms() * (dict->input_dim() > 0 ? 1 : 0));
  if (!stable || chunks <= 1) {
    auto built = build_from_trajectory(*dict, td.states, td.inputs, td.dt);
    acc = std::move(built.second);
    if (stable) {
      if (!diagnostics_path.empty()) soc.diagnostics = &diag_stream;
      auto fitted = fit_stable(acc, td.dt, dict, soc);
      model = std::move(fitted.first);
      std::cout << "soc_iterations = " << fitted.second.iter << "\n";
      std::cout << "soc_stop_reason = " << fitted.second.stop_reason << "\n";
    } else {
      model = fit_least_squares(acc, td.dt, dict);
    }
  } else {
    // Streaming mode: cumulative re-ingest + warm-started refit per chunk.
    const LiftedPairs lp = lift_pairs(*dict, td);
    const int n = static_cast<int>(lp.pre.size());
    if (chunks > n)
      throw config_error("more chunks (" + std::to_string(chunks) + ") than pairs (" +
                         std::to_string(n) + ")");
    const int w_u = lp.input.front().size() > 0 ? static_cast<int>(lp.input.front().size()) : 0;
    acc = AccumulatorSet(dict->num_state_terms(), w_u);
    KoopmanModel prev;
    bool have_prev = false;
    int taken = 0;
    for (int c = 0; c < chunks; ++c) {
      const int quota = n / chunks + (c < n % chunks ? 1 : 0);
      for (int i = 0; i < quota; ++i, ++taken)
        ingest_pair(acc, lp.pre[taken], lp.post[taken], lp.input[taken]);
      SOCConfig chunk_cfg = soc;
      if (!diagnostics_path.empty() && c == chunks - 1) chunk_cfg.diagnostics = &diag_stream;
      auto fitted = fit_stable(acc, td.dt, dict, chunk_cfg, have_prev ? &prev : nullptr);
      prev = std::move(fitted.first);
      have_prev = true;
      std::cout << "chunk " << (c + 1) << "/" << chunks << ": pairs = " << acc.count
                << ", objective = " << fmt17(fitted.second.objective)
                << ", stop = " << fitted.second.stop_reason << "\n";
    }
    model = std::move(prev);
  }

  print_model_summary(std::cout, model, acc);
  save_model(model_out, model);
  std::cout << "model = " << model_out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// rollout
// ---------------------------------------------------------------------------

struct RolloutArgs {
  std::string config_path, model, initial, input, output, plot, output_dir;
  int steps = -1;
  CLI::App* cmd = nullptr;
};

int run_rollout(RolloutArgs& a) {
  ConfigMap cfg = a.config_path.empty() ? ConfigMap() : ConfigMap::load(a.config_path);
  const std::string model_path =
      flag_given(a.cmd, "--model") ? a.model : cfg.get_string("model", "");
  const std::string initial =
      flag_given(a.cmd, "--initial") ? a.initial : cfg.get_string("initial", "");
  const std::string input_spec =
      flag_given(a.cmd, "--input") ? a.input : cfg.get_string("input", "");
  const int steps = flag_given(a.cmd, "--steps") ? a.steps : cfg.get_int("steps", -1);
  const std::string output_dir =
      flag_given(a.cmd, "--output-dir") ? a.output_dir : cfg.get_string("output_dir", ".");
  std::string output = flag_given(a.cmd, "--output") ? a.output : cfg.get_string("output", "");
  const std::string plot = flag_given(a.cmd, "--plot") ? a.plot : cfg.get_string("plot", "");
  cfg.reject_unknown();

  if (model_path.empty()) throw config_error("no model file given (--model)");
  if (initial.empty()) throw config_error("no initial state given (--initial)");
  if (steps < 0) throw config_error("no horizon given (--steps)");

  const KoopmanModel model = load_model(model_path);
  const std::vector<double> init = parse_double_list(initial, "--initial");
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(init.data(), init.size());
  Eigen::VectorXd psi0;
  if (model.dictionary && static_cast<int>(init.size()) == model.dictionary->state_dim())
    psi0 = model.dictionary->evaluate_state(x);
  else if (static_cast<int>(init.size()) == model.w_s())
    psi0 = x;
  else
    throw config_error("--initial must have " +
                       (model.dictionary
                            ? std::to_string(model.dictionary->state_dim()) + " (state) or "
                            : std::string()) +
                       std::to_string(model.w_s()) + " (lifted) entries");

  std::vector<Eigen::VectorXd> inputs;
  const std::vector<Eigen::VectorXd>* inputs_ptr = nullptr;
  if (!input_spec.empty()) {
    const std::vector<double> u = parse_double_list(input_spec, "--input");
    Eigen::VectorXd uv = Eigen::Map<const Eigen::VectorXd>(u.data(), u.size());
    inputs.assign(static_cast<size_t>(steps), uv);
    inputs_ptr = &inputs;
  }

  const RolloutResult rr = rollout(model, psi0, inputs_ptr, steps);

  const fs::path outdir = prepare_output_dir(output_dir);
  if (output.empty()) output = (outdir / "rollout.csv").string();
  TrajectoryData out_traj;
  out_traj.states = rr.states;
  out_traj.dt = model.dt > 0 ? model.dt : 1.0;
  {
    auto os = open_output(output);
    write_trajectory_csv(os, out_traj);
  }
  std::cout << "steps = " << rr.horizon << "\n";
  std::cout << "final_state =";
  for (Eigen::Index i = 0; i < rr.states.back().size(); ++i)
    std::cout << " " << fmt17(rr.states.back()(i));
  std::cout << "\n";
  std::cout << "output = " << output << "\n";

  if (!plot.empty()) {
    SvgPlot svg("model rollout", "t [s]", "state");
    std::vector<double> ts(rr.states.size());
    for (size_t k = 0; k < ts.size(); ++k) ts[k] = out_traj.dt * static_cast<double>(k);
    const int dim = static_cast<int>(rr.states.front().size());
    for (int i = 0; i < dim; ++i) {
      std::vector<double> ys(rr.states.size());
      for (size_t k = 0; k < ys.size(); ++k) ys[k] = rr.states[k](i);
      svg.add_series("s" + std::to_string(i), ts, ys);
    }
    svg.write(plot);
    std::cout << "plot = " << plot << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// errors
// ---------------------------------------------------------------------------

struct ErrorsArgs {
  std::string config_path, model, trajectory, norm, output, plot, output_dir;
  bool continuous = false;
  CLI::App* cmd = nullptr;
};

int run_errors(ErrorsArgs& a) {
  ConfigMap cfg = a.config_path.empty() ? ConfigMap() : ConfigMap::load(a.config_path);
  const std::string model_path =
      flag_given(a.cmd, "--model") ? a.model : cfg.get_string("model", "");
  const std::string traj_path =
      flag_given(a.cmd, "--trajectory") ? a.trajectory : cfg.get_string("trajectory", "");
  const std::string norm_name =
      flag_given(a.cmd, "--norm") ? a.norm : cfg.get_string("norm", "spectral");
  const std::string output_dir =
      flag_given(a.cmd, "--output-dir") ? a.output_dir : cfg.get_string("output_dir", ".");
  std::string output = flag_given(a.cmd, "--output") ? a.output : cfg.get_string("output", "");
  const std::string plot = flag_given(a.cmd, "--plot") ? a.plot : cfg.get_string("plot", "");
  const bool continuous = a.continuous || cfg.get_bool("continuous", false);
  cfg.reject_unknown();

  if (model_path.empty()) throw config_error("no model file given (--model)");
  if (traj_path.empty()) throw config_error("no trajectory CSV given (--trajectory)");
  NormKind norm;
  if (norm_name == "spectral")
    norm = NormKind::spectral;
  else if (norm_name == "frobenius")
    norm = NormKind::frobenius;
  else
    throw config_error("--norm must be 'spectral' or 'frobenius'");

  const KoopmanModel model = load_model(model_path);
  const int sdim = model.dictionary ? model.dictionary->state_dim() : model.w_s();
  const int idim = model.dictionary ? model.dictionary->input_dim()
                                    : (model.w_u() > 0 ? model.w_u() : 0);
  const TrajectoryData td = read_trajectory_csv(traj_path, sdim, idim);

  std::vector<Eigen::VectorXd> basis;
  basis.reserve(td.states.size());
  for (const Eigen::VectorXd& s : td.states)
    basis.push_back(model.dictionary ? model.dictionary->evaluate_state(s) : s);

  const std::vector<Eigen::VectorXd>* inputs_ptr =
      td.inputs.empty() ? nullptr : &td.inputs;
  const ErrorProfile ep = error_profile(model, basis, inputs_ptr, norm);
  const RolloutResult rr =
      rollout(model, basis.front(), inputs_ptr, static_cast<int>(basis.size()) - 1);

  const fs::path outdir = prepare_output_dir(output_dir);
  if (output.empty()) output = (outdir / "errors.csv").string();
  {
    auto os = open_output(output);
    write_error_csv(os, rr, ep);
  }

  std::cout << "pairs = " << ep.local_errors.size() << "\n";
  std::cout << "operator_norm = " << fmt17(ep.operator_norm) << "\n";
  std::cout << "max_local_error = " << fmt17(ep.e_max_norm) << "\n";
  std::cout << "final_global_error = " << fmt17(ep.global_errors.back().norm()) << "\n";
  std::cout << "final_bound = " << fmt17(ep.bound.back()) << "\n";
  std::cout << "identity_residual = " << fmt17(ep.identity_residual) << "\n";
  std::cout << "output = " << output << "\n";

  if (continuous) {
    const ContinuousOperator cop = to_continuous(model);
    std::cout << "continuous_hurwitz = " << (cop.hurwitz ? "true" : "false") << "\n";
    std::cout << "continuous_stability = " << to_string(cop.stability) << "\n";
    std::cout << "continuous_roundtrip_residual = " << fmt17(cop.roundtrip_residual)
              << "\n";
    std::cout << "transient_growth_warning = "
              << (cop.transient_growth_warning ? "true" : "false") << "\n";
    std::cout << "continuous_eigenvalues =";
    for (Eigen::Index i = 0; i < cop.eigenvalues.size(); ++i)
      std::cout << " " << fmt6(cop.eigenvalues(i).real()) << (cop.eigenvalues(i).imag() >= 0 ? "+" : "")
                << fmt6(cop.eigenvalues(i).imag()) << "i";
    std::cout << "\n";
  }

  if (!plot.empty()) {
    SvgPlot svg("prediction error growth", "step", "norm");
    std::vector<double> xs(ep.global_errors.size()), ge(ep.global_errors.size()),
        le(ep.local_errors.size()), bd(ep.bound.size());
    for (size_t k = 0; k < xs.size(); ++k) {
      xs[k] = static_cast<double>(k + 1);
      ge[k] = ep.global_errors[k].norm();
      le[k] = ep.local_errors[k].norm();
      bd[k] = ep.bound[k];
    }
    svg.add_series("global error", xs, ge);
    svg.add_series("local error", xs, le);
    svg.add_series("bound", xs, bd);
    svg.write(plot);
    std::cout << "plot = " << plot << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// lqr
// ---------------------------------------------------------------------------

struct LqrArgs {
  std::string config_path, model, q, r, target, output, output_dir;
  int horizon = 0;
  CLI::App* cmd = nullptr;
};

int run_lqr(LqrArgs& a) {
  ConfigMap cfg = a.config_path.empty() ? ConfigMap() : ConfigMap::load(a.config_path);
  const std::string model_path =
      flag_given(a.cmd, "--model") ? a.model : cfg.get_string("model", "");
  const std::string q_spec = flag_given(a.cmd, "--q") ? a.q : cfg.get_string("q", "");
  const std::string r_spec = flag_given(a.cmd, "--r") ? a.r : cfg.get_string("r", "");
  const std::string target_spec =
      flag_given(a.cmd, "--target") ? a.target : cfg.get_string("target", "");
  const int horizon = flag_given(a.cmd, "--horizon") ? a.horizon : cfg.get_int("horizon", 0);
  const std::string output_dir =
      flag_given(a.cmd, "--output-dir") ? a.output_dir : cfg.get_string("output_dir", ".");
  std::string output = flag_given(a.cmd, "--output") ? a.output : cfg.get_string("output", "");
  cfg.reject_unknown();

  if (model_path.empty()) throw config_error("no model file given (--model)");
  const KoopmanModel model = load_model(model_path);
  if (model.w_u() == 0)
    throw config_error("model has no input channels; cannot synthesize feedback");

  const int w_s = model.w_s();
  const int w_u = model.w_u();
  const int sdim = model.dictionary ? model.dictionary->state_dim() : w_s;

  LQRWeights weights;
  if (q_spec.empty()) {
    weights.Q = lift_cost_matrix(Eigen::MatrixXd::Identity(sdim, sdim), w_s);
  } else {
    const std::vector<double> qd = parse_double_list(q_spec, "--q");
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(qd.data(), qd.size());
    if (static_cast<int>(qd.size()) == sdim)
      weights.Q = lift_cost_matrix(Eigen::MatrixXd(d.asDiagonal()), w_s);
    else if (static_cast<int>(qd.size()) == w_s)
      weights.Q = d.asDiagonal();
    else
      throw config_error("--q must list " + std::to_string(sdim) + " (state) or " +
                         std::to_string(w_s) + " (lifted) diagonal entries");
  }
  if (r_spec.empty()) {
    weights.R = Eigen::MatrixXd::Identity(w_u, w_u);
  } else {
    const std::vector<double> rd = parse_double_list(r_spec, "--r");
    if (static_cast<int>(rd.size()) != w_u)
      throw config_error("--r must list " + std::to_string(w_u) + " diagonal entries");
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(rd.data(), rd.size());
    weights.R = d.asDiagonal();
  }

  LQRSolution sol = solve_infinite_lqr(model.A, model.B, weights);
  if (!target_spec.empty()) {
    const std::vector<double> tg = parse_double_list(target_spec, "--target");
    if (static_cast<int>(tg.size()) != sdim)
      throw config_error("--target must list " + std::to_string(sdim) + " state entries");
    Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(tg.data(), tg.size());
    sol.law.target_basis =
        model.dictionary ? model.dictionary->evaluate_state(t) : Eigen::VectorXd(t);
  }

  std::cout << "iterations = " << sol.iterations << "\n";
  std::cout << "converged = " << (sol.converged ? "true" : "false") << "\n";
  std::cout << "riccati_residual = " << fmt17(sol.riccati_residual) << "\n";
  print_matrix(std::cout, "K", sol.law.K);
  const Eigen::MatrixXd closed = model.A - model.B * sol.law.K;
  std::cout << "closed_loop_spectral_radius = " << fmt17(spectral_radius(closed)) << "\n";

  if (horizon > 0) {
    const std::vector<Eigen::MatrixXd> schedule =
        solve_finite_lqr(model.A, model.B, weights, horizon, weights.Q);
    std::cout << "finite_horizon = " << horizon << "\n";
    std::cout << "first_gain_gap = " << fmt17((schedule.front() - sol.law.K).norm())
              << "\n";
  }

  const fs::path outdir = prepare_output_dir(output_dir);
  if (output.empty()) output = (outdir / "lqr_gain.csv").string();
  {
    auto os = open_output(output);
    os << "row,col,K,P\n";
    for (int i = 0; i < w_u; ++i)
      for (int j = 0; j < w_s; ++j)
        os << i << ',' << j << ',' << fmt17(sol.law.K(i, j)) << ","
           << fmt17(sol.P(std::min(i, w_s - 1), j)) << "\n";
  }
  std::cout << "output = " << output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// pendulum
// ---------------------------------------------------------------------------

struct PendulumArgs {
  std::string config_path, sizes, output_dir;
  double gravity = 9.81, beta = 0.0, dt = 0.02, horizon = 3.0, damped_beta = -0.1;
  int rollouts = 300, trials = 20, pairs = 1000;
  std::uint64_t seed = 11, eval_seed = 999;
  bool damped = false;
  CLI::App* cmd = nullptr;
};

int run_pendulum(PendulumArgs& a) {
  ConfigMap cfg = a.config_path.empty() ? ConfigMap() : ConfigMap::load(a.config_path);
  PendulumPredictionConfig pc;
  pc.plant.g = flag_given(a.cmd, "--gravity") ? a.gravity : cfg.get_double("gravity", 9.81);
  pc.plant.beta = flag_given(a.cmd, "--beta") ? a.beta : cfg.get_double("beta", 0.0);
  pc.plant.dt = flag_given(a.cmd, "--dt") ? a.dt : cfg.get_double("dt", 0.02);
  pc.horizon_seconds =
      flag_given(a.cmd, "--horizon") ? a.horizon : cfg.get_double("horizon", 3.0);
  pc.eval_rollouts =
      flag_given(a.cmd, "--rollouts") ? a.rollouts : cfg.get_int("rollouts", 300);
  pc.training_sizes = flag_given(a.cmd, "--sizes")
                          ? parse_int_list(a.sizes, "--sizes")
                          : cfg.get_int_list("sizes", pc.training_sizes);
  pc.train_seed = resolve_seed(a.cmd, a.seed, cfg, 11);
  pc.eval_seed = flag_given(a.cmd, "--eval-seed") ? a.eval_seed : cfg.get_u64("eval_seed", 999);
  pc.soc = read_soc_config(cfg);

  const bool damped = a.damped || cfg.get_bool("damped", false);
  const int trials = flag_given(a.cmd, "--trials") ? a.trials : cfg.get_int("trials", 20);
  const int pairs = flag_given(a.cmd, "--pairs") ? a.pairs : cfg.get_int("pairs", 1000);
  const double damped_beta =
      flag_given(a.cmd, "--damped-beta") ? a.damped_beta : cfg.get_double("damped_beta", -0.1);
  const std::string output_dir =
      flag_given(a.cmd, "--output-dir") ? a.output_dir : cfg.get_string("output_dir", ".");
  cfg.reject_unknown();

  const fs::path outdir = prepare_output_dir(output_dir);

  if (damped) {
    const DampedStabilityOutcome out =
        run_damped_stability(pc, trials, pairs, damped_beta, pc.train_seed);
    std::cout << "trials = " << out.trials << "\n";
    std::cout << "pairs_per_trial = " << pairs << "\n";
    std::cout << "beta = " << fmt6(damped_beta) << "\n";
    std::cout << "ls_unstable = " << out.ls_unstable << "\n";
    std::cout << "soc_stable = " << out.soc_stable << "\n";
    const fs::path csv = outdir / "damped.csv";
    auto os = open_output(csv);
    os << "trial,ls_spectral_radius,soc_spectral_radius\n";
    for (int t = 0; t < out.trials; ++t)
      os << t << ',' << fmt17(out.ls_radii[static_cast<size_t>(t)]) << ','
         << fmt17(out.soc_radii[static_cast<size_t>(t)]) << "\n";
    std::cout << "output = " << csv.string() << "\n";
    return 0;
  }

  const std::vector<PendulumSweepPoint> points = run_pendulum_sweep(pc);
  for (const PendulumSweepPoint& p : points) {
    std::cout << "pairs = " << p.pairs << ": ls_mean = " << fmt6(p.ls_mean_error)
              << " (sr " << fmt6(p.ls_spectral_radius) << ", " << to_string(p.ls_class)
              << "), soc_mean = " << fmt6(p.soc_mean_error) << " (sr "
              << fmt6(p.soc_spectral_radius) << ", " << to_string(p.soc_class)
              << "), soc_max_basis = " << fmt6(p.soc_max_abs_basis) << "\n";
  }

  const fs::path csv = outdir / "sweep.csv";
  {
    auto os = open_output(csv);
    write_sweep_csv(os, points);
  }
  std::cout << "output = " << csv.string() << "\n";

  const fs::path svg_path = outdir / "sweep.svg";
  {
    SvgPlot svg("mean angle error vs training size", "training pairs", "mean |angle error| [rad]");
    std::vector<double> xs, lm, lm_lo, lm_hi, sm, sm_lo, sm_hi;
    for (const PendulumSweepPoint& p : points) {
      xs.push_back(static_cast<double>(p.pairs));
      lm.push_back(p.ls_mean_error);
      lm_lo.push_back(p.ls_mean_error - 0.5 * p.ls_std_error);
      lm_hi.push_back(p.ls_mean_error + 0.5 * p.ls_std_error);
      sm.push_back(p.soc_mean_error);
      sm_lo.push_back(p.soc_mean_error - 0.5 * p.soc_std_error);
      sm_hi.push_back(p.soc_mean_error + 0.5 * p.soc_std_error);
    }
    svg.add_band("least squares +-std/2", xs, lm_lo, lm_hi);
    svg.add_band("stable +-std/2", xs, sm_lo, sm_hi);
    svg.add_series("least squares", xs, lm);
    svg.add_series("stable", xs, sm);
    svg.write(svg_path.string());
  }
  std::cout << "plot = " << svg_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// lyapunov
// ---------------------------------------------------------------------------

struct LyapunovArgs {
  std::string config_path, output_dir;
  double gravity = -9.81;
  std::uint64_t seed = 0;
  bool synthetic = false;
  int synthetic_dim = 6, synthetic_steps = 300;
  double synthetic_dt = 0.01;
  CLI::App* cmd = nullptr;
};

int run_lyapunov(LyapunovArgs& a) {
  ConfigMap cfg = a.config_path.empty() ? ConfigMap() : ConfigMap::load(a.config_path);
  const std::string output_dir =
      flag_given(a.cmd, "--output-dir") ? a.output_dir : cfg.get_string("output_dir", ".");

  if (a.synthetic || cfg.get_bool("synthetic", false)) {
    const int dim = flag_given(a.cmd, "--synthetic-dim") ? a.synthetic_dim
                                                    : cfg.get_int("synthetic_dim", 6);
    const int steps = flag_given(a.cmd, "--synthetic-steps") ? a.synthetic_steps
                                                        : cfg.get_int("synthetic_steps", 300);
    const double dt = flag_given(a.cmd, "--synthetic-dt") ? a.synthetic_dt
                                                     : cfg.get_double("synthetic_dt", 0.01);
    const std::uint64_t seed = resolve_seed(a.cmd, a.seed, cfg, 0);
    cfg.reject_unknown();
    const LyapunovCertificate cert = run_synthetic_lyapunov(dim, dt, steps, seed);
    int valid = 0;
    for (const LyapunovSample& s : cert.samples) valid += s.valid ? 1 : 0;
    std::cout << "samples = " << cert.samples.size() << "\n";
    std::cout << "valid_samples = " << valid << "\n";
    std::cout << "alpha_upper = " << fmt17(cert.alpha_upper) << "\n";
    std::cout << "equation_residual = " << fmt17(cert.equation_residual) << "\n";
    const fs::path outdir = prepare_output_dir(output_dir);
    const fs::path csv = outdir / "synthetic_certificate.csv";
    auto os = open_output(csv);
    write_certificate_csv(os, cert);
    std::cout << "output = " << csv.string() << "\n";
    return 0;
  }

  LyapunovExperimentConfig lc;
  lc.gravity = flag_given(a.cmd, "--gravity") ? a.gravity : cfg.get_double("gravity", lc.gravity);
  lc.beta = cfg.get_double("beta", lc.beta);
  lc.dt_control = cfg.get_double("dt_control", lc.dt_control);
  lc.dt_measure = cfg.get_double("dt_measure", lc.dt_measure);
  lc.horizon_seconds = cfg.get_double("horizon", lc.horizon_seconds);
  lc.theta0 = cfg.get_double("theta0", lc.theta0);
  lc.omega0 = cfg.get_double("omega0", lc.omega0);
  lc.r_weight = cfg.get_double("r_weight", lc.r_weight);
  lc.gain_pairs = cfg.get_int("gain_pairs", lc.gain_pairs);
  lc.gain_theta = cfg.get_double("gain_theta", lc.gain_theta);
  lc.gain_omega = cfg.get_double("gain_omega", lc.gain_omega);
  lc.gain_torque = cfg.get_double("gain_torque", lc.gain_torque);
  lc.small_count = cfg.get_int("small_count", lc.small_count);
  lc.small_steps = cfg.get_int("small_steps", lc.small_steps);
  lc.small_theta = cfg.get_double("small_theta", lc.small_theta);
  lc.small_omega = cfg.get_double("small_omega", lc.small_omega);
  lc.release_count = cfg.get_int("release_count", lc.release_count);
  lc.release_steps = cfg.get_int("release_steps", lc.release_steps);
  lc.release_lo = cfg.get_double("release_lo", lc.release_lo);
  lc.release_hi = cfg.get_double("release_hi", lc.release_hi);
  lc.release_omega = cfg.get_double("release_omega", lc.release_omega);
  lc.spin_count = cfg.get_int("spin_count", lc.spin_count);
  lc.spin_steps = cfg.get_int("spin_steps", lc.spin_steps);
  lc.spin_lo = cfg.get_double("spin_lo", lc.spin_lo);
  lc.spin_hi = cfg.get_double("spin_hi", lc.spin_hi);
  lc.spin_theta = cfg.get_double("spin_theta", lc.spin_theta);
  lc.torque_guard = cfg.get_double("torque_guard", lc.torque_guard);
  lc.seed = resolve_seed(a.cmd, a.seed, cfg, 0);
  lc.soc = read_soc_config(cfg);
  cfg.reject_unknown();

  const LyapunovExperimentResult res = run_lyapunov_experiment(lc);

  print_matrix(std::cout, "lqr_gain", res.lqr.law.K);
  std::cout << "riccati_residual = " << fmt17(res.lqr.riccati_residual) << "\n";
  std::cout << "soc_objective = " << fmt17(res.soc_state.objective) << "\n";
  std::cout << "soc_spectral_radius = " << fmt17(spectral_radius(res.soc_model.A)) << "\n";
  std::cout << "soc_stability = " << to_string(res.soc_model.stability) << "\n";
  if (res.discrete_fallback) std::cout << "notice = " << res.notice << "\n";
  std::cout << "path = "
            << (res.cert.path == LyapunovPath::continuous ? "continuous" : "discrete")
            << "\n";
  std::cout << "alpha_upper = " << fmt17(res.cert.alpha_upper) << "\n";
  std::cout << "equation_residual = " << fmt17(res.cert.equation_residual) << "\n";
  std::cout << "equilibrium_consistent = "
            << (res.cert.equilibrium_consistent ? "true" : "false") << "\n";
  const int suffix = res.cert.longest_valid_suffix();
  std::cout << "valid_window_samples = " << suffix << "\n";
  std::cout << "valid_window_seconds = " << fmt17(suffix * lc.dt_measure) << "\n";
  std::cout << "valid_window_v_decreasing = "
            << (res.cert.v_strictly_decreasing(suffix) ? "true" : "false") << "\n";

  const fs::path outdir = prepare_output_dir(output_dir);
  const fs::path cert_csv = outdir / "certificate.csv";
  {
    auto os = open_output(cert_csv);
    write_certificate_csv(os, res.cert);
  }
  const fs::path nominal_csv = outdir / "nominal.csv";
  {
    auto os = open_output(nominal_csv);
    write_trajectory_csv(os, res.nominal);
  }
  const fs::path model_txt = outdir / "stable_model.txt";
  save_model(model_txt.string(), res.soc_model);

  std::vector<double> ts, vs, dvs, al;
  for (const LyapunovSample& s : res.cert.samples) {
    ts.push_back(s.t);
    vs.push_back(s.V);
    dvs.push_back(s.dV);
    al.push_back(s.alpha_lower);
  }
  const fs::path v_svg = outdir / "lyapunov_v.svg";
  {
    SvgPlot svg("candidate Lyapunov function along the controlled trajectory", "t [s]",
                "V");
    svg.add_series("V", ts, vs);
    svg.add_series("dV/dt", ts, dvs);
    svg.write(v_svg.string());
  }
  const fs::path a_svg = outdir / "lyapunov_alpha.svg";
  {
    SvgPlot svg("certificate bounds", "t [s]", "alpha");
    std::vector<double> upper(ts.size(), res.cert.alpha_upper);
    svg.add_series("alpha_lower", ts, al);
    svg.add_series("alpha_upper", ts, upper);
    svg.write(a_svg.string());
  }
  std::cout << "certificate = " << cert_csv.string() << "\n";
  std::cout << "nominal = " << nominal_csv.string() << "\n";
  std::cout << "model = " << model_txt.string() << "\n";
  std::cout << "plots = " << v_svg.string() << " " << a_svg.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bench-random
// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string config_path, sizes, output_dir;
  int max_iter = 2000;
  double timeout = 10.0;
  std::uint64_t seed = 0;
  CLI::App* cmd = nullptr;
};

int run_bench(BenchArgs& a) {
  ConfigMap cfg = a.config_path.empty() ? ConfigMap() : ConfigMap::load(a.config_path);
  BenchRandomConfig bc;
  bc.sizes = flag_given(a.cmd, "--sizes") ? parse_int_list(a.sizes, "--sizes")
                                     : cfg.get_int_list("sizes", bc.sizes);
  bc.soc_max_iter = flag_given(a.cmd, "--max-iter") ? a.max_iter
                                               : cfg.get_int("max_iter", bc.soc_max_iter);
  bc.cell_timeout_seconds =
      flag_given(a.cmd, "--timeout") ? a.timeout : cfg.get_double("timeout", 10.0);
  bc.seed = resolve_seed(a.cmd, a.seed, cfg, 0);
  const std::string output_dir =
      flag_given(a.cmd, "--output-dir") ? a.output_dir : cfg.get_string("output_dir", ".");
  cfg.reject_unknown();

  const std::vector<BenchRandomCell> cells = run_bench_random(bc);

  int wins = 0, timeouts = 0;
  for (const BenchRandomCell& c : cells) {
    if (c.soc_normalized <= c.projection_normalized) ++wins;
    if (c.timeout) ++timeouts;
  }
  std::cout << "cells = " << cells.size() << "\n";
  std::cout << "soc_not_worse = " << wins << "\n";
  std::cout << "timeouts = " << timeouts << "\n";

  const fs::path outdir = prepare_output_dir(output_dir);
  const fs::path csv = outdir / "bench.csv";
  {
    auto os = open_output(csv);
    write_bench_csv(os, cells);
  }
  const fs::path tcsv = outdir / "bench_timings.csv";
  {
    auto os = open_output(tcsv);
    write_bench_timings_csv(os, cells);
  }
  const fs::path svg_path = outdir / "bench.svg";
  {
    SvgPlot svg("normalized reconstruction error on random data", "P (snapshot pairs)",
                "objective / (W*P)");
    for (int W : bc.sizes) {
      std::vector<double> xs, soc, proj;
      for (const BenchRandomCell& c : cells) {
        if (c.W != W) continue;
        xs.push_back(static_cast<double>(c.P));
        soc.push_back(c.soc_normalized);
        proj.push_back(c.projection_normalized);
      }
      svg.add_series("soc W=" + std::to_string(W), xs, soc);
      svg.add_series("projection W=" + std::to_string(W), xs, proj);
    }
    svg.write(svg_path.string());
  }
  std::cout << "output = " << csv.string() << "\n";
  std::cout << "timings = " << tcsv.string() << "\n";
  std::cout << "plot = " << svg_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// worked-example
// ---------------------------------------------------------------------------

struct WorkedArgs {
  std::string config_path, output_dir;
  std::uint64_t seed = 0;
  bool self_test = false;
  CLI::App* cmd = nullptr;
};

int run_worked(WorkedArgs& a) {
  ConfigMap cfg = a.config_path.empty() ? ConfigMap() : ConfigMap::load(a.config_path);
  SOCConfig soc = read_soc_config(cfg);
  soc.seed = resolve_seed(a.cmd, a.seed, cfg, soc.seed);
  const std::string output_dir =
      flag_given(a.cmd, "--output-dir") ? a.output_dir : cfg.get_string("output_dir", "");
  cfg.reject_unknown();

  const WorkedExampleReport rep = run_worked_example(soc);
  print_worked_example_report(std::cout, rep, true);

  if (!output_dir.empty()) {
    const fs::path outdir = prepare_output_dir(output_dir);
    const fs::path model_txt = outdir / "soc_model.txt";
    save_model(model_txt.string(), rep.soc_model);
    std::cout << "model = " << model_txt.string() << "\n";
  }

  if (!a.self_test) return 0;

  // Self-test: the built-in reference numbers at their stated tolerances.
  int failures = 0;
  const auto check = [&failures](const std::string& name, bool ok, double measured) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name
              << " (measured = " << fmt6(measured) << ")\n";
    if (!ok) ++failures;
  };
  const auto eig_ok = [](const Eigen::VectorXd& got, std::vector<double> want,
                         double tol) {
    std::sort(want.begin(), want.end());
    if (got.size() != static_cast<Eigen::Index>(want.size())) return false;
    for (Eigen::Index i = 0; i < got.size(); ++i)
      if (std::abs(got(i) - want[static_cast<size_t>(i)]) > tol) return false;
    return true;
  };
  const MatrixReport& p1 = rep.published_projection;
  const MatrixReport& p2 = rep.published_soc;
  check("projection reconstruction = 203.04 +- 0.05",
        std::abs(p1.reconstruction - 203.04) <= 0.05, p1.reconstruction);
  check("projection distance = 45.98 +- 0.05", std::abs(p1.distance - 45.98) <= 0.05,
        p1.distance);
  check("projection eigenvalues = {0.87, 0.87, -0.22} +- 0.01",
        eig_ok(p1.eig_real_sorted, {0.87, 0.87, -0.22}, 0.01),
        p1.eig_real_sorted.size() ? p1.eig_real_sorted(0) : 0.0);
  check("soc-solution reconstruction = 79.47 +- 0.05",
        std::abs(p2.reconstruction - 79.47) <= 0.05, p2.reconstruction);
  check("soc-solution distance = 108.53 +- 0.05", std::abs(p2.distance - 108.53) <= 0.05,
        p2.distance);
  check("soc-solution eigenvalues = {0.98, 0.98, -0.35} +- 0.01",
        eig_ok(p2.eig_real_sorted, {0.98, 0.98, -0.35}, 0.01),
        p2.eig_real_sorted.size() ? p2.eig_real_sorted(0) : 0.0);
  check("our run: spectral radius <= 1 + 1e-8",
        spectral_radius(rep.soc_model.A) <= 1.0 + 1e-8,
        spectral_radius(rep.soc_model.A));
  check("our run: objective <= 85", rep.soc_state.objective <= 85.0,
        rep.soc_state.objective);
  check("our run: objective < projection baseline",
        rep.soc_state.objective < rep.projection_objective, rep.projection_objective);
  if (failures > 0) {
    std::cout << failures << " self-test check(s) failed\n";
    return 4;
  }
  std::cout << "all self-test checks passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"data-driven identification of stable Koopman operators"};
  app.require_subcommand(1);
  int rc = 0;

  const auto add_common = [](CLI::App* cmd, std::string& config, std::string& outdir) {
    cmd->add_option("--config", config, "key = value configuration file");
    cmd->add_option("--output-dir", outdir, "directory for output files");
  };

  // fit / fit-stable share the argument surface.
  auto fit_args = std::make_shared<FitArgs>();
  auto stable_args = std::make_shared<FitArgs>();
  for (auto [name, desc, args, stable] :
       {std::tuple<const char*, const char*, std::shared_ptr<FitArgs>, bool>{
            "fit", "least-squares Koopman fit from a trajectory CSV", fit_args, false},
        std::tuple<const char*, const char*, std::shared_ptr<FitArgs>, bool>{
            "fit-stable", "stability-constrained Koopman fit (projected gradient descent)",
            stable_args, true}}) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    add_common(cmd, args->config_path, args->output_dir);
    cmd->add_option("--trajectory", args->trajectory, "trajectory CSV (t,s0..,u0..)");
    cmd->add_option("--dictionary", args->dictionary,
                    "dictionary: pendulum6 | pendulum8 | identity | label file");
    cmd->add_option("--state-dim", args->state_dim, "state dimension for CSV parsing");
    cmd->add_option("--input-dim", args->input_dim, "input dimension for CSV parsing");
    cmd->add_option("--model-out", args->model_out, "output model file");
    cmd->add_flag("--worked-example", args->worked_example,
                  "run on the built-in 3x5 snapshot example");
    if (stable) {
      cmd->add_option("--rho", args->rho, "spectral bound in (0, 1]");
      cmd->add_option("--max-iter", args->max_iter, "descent iteration budget");
      cmd->add_option("--seed", args->seed, "seed for perturbed restarts");
      cmd->add_option("--chunks", args->chunks,
                      "streaming mode: ingest + refit in this many chunks");
      cmd->add_option("--diagnostics", args->diagnostics, "per-iteration CSV log");
    }
    args->cmd = cmd;
    const bool is_stable = stable;
    auto ap = args;
    cmd->callback([ap, is_stable, &rc]() { rc = run_fit(*ap, is_stable); });
  }

  auto roll_args = std::make_shared<RolloutArgs>();
  {
    CLI::App* cmd = app.add_subcommand("rollout", "roll a saved model forward");
    add_common(cmd, roll_args->config_path, roll_args->output_dir);
    cmd->add_option("--model", roll_args->model, "model file from fit/fit-stable");
    cmd->add_option("--initial", roll_args->initial, "comma-separated initial state");
    cmd->add_option("--steps", roll_args->steps, "number of prediction steps");
    cmd->add_option("--input", roll_args->input, "constant input vector (comma-separated)");
    cmd->add_option("--output", roll_args->output, "output CSV path");
    cmd->add_option("--plot", roll_args->plot, "output SVG path");
    roll_args->cmd = cmd;
    cmd->callback([roll_args, &rc]() { rc = run_rollout(*roll_args); });
  }

  auto err_args = std::make_shared<ErrorsArgs>();
  {
    CLI::App* cmd = app.add_subcommand(
        "errors", "local/global prediction errors of a model against a trajectory");
    add_common(cmd, err_args->config_path, err_args->output_dir);
    cmd->add_option("--model", err_args->model, "model file");
    cmd->add_option("--trajectory", err_args->trajectory, "true trajectory CSV");
    cmd->add_option("--norm", err_args->norm, "operator norm: spectral | frobenius");
    cmd->add_option("--output", err_args->output, "output CSV path");
    cmd->add_option("--plot", err_args->plot, "output SVG path");
    cmd->add_flag("--continuous", err_args->continuous,
                  "also report the continuous-time operator log(A)/dt");
    err_args->cmd = cmd;
    cmd->callback([err_args, &rc]() { rc = run_errors(*err_args); });
  }

  auto lqr_args = std::make_shared<LqrArgs>();
  {
    CLI::App* cmd = app.add_subcommand("lqr", "LQR feedback from a saved model");
    add_common(cmd, lqr_args->config_path, lqr_args->output_dir);
    cmd->add_option("--model", lqr_args->model, "model file (must have inputs)");
    cmd->add_option("--q", lqr_args->q, "state-cost diagonal (comma-separated)");
    cmd->add_option("--r", lqr_args->r, "input-cost diagonal (comma-separated)");
    cmd->add_option("--target", lqr_args->target, "regulation target state");
    cmd->add_option("--horizon", lqr_args->horizon, "also solve a finite horizon");
    cmd->add_option("--output", lqr_args->output, "output CSV path");
    lqr_args->cmd = cmd;
    cmd->callback([lqr_args, &rc]() { rc = run_lqr(*lqr_args); });
  }

  auto pen_args = std::make_shared<PendulumArgs>();
  {
    CLI::App* cmd = app.add_subcommand(
        "pendulum", "training-size sweep (or damped-stability study) on the pendulum");
    add_common(cmd, pen_args->config_path, pen_args->output_dir);
    cmd->add_option("--gravity", pen_args->gravity, "gravity term");
    cmd->add_option("--beta", pen_args->beta, "damping coefficient for the sweep");
    cmd->add_option("--dt", pen_args->dt, "sample spacing [s]");
    cmd->add_option("--sizes", pen_args->sizes, "training sizes (comma-separated)");
    cmd->add_option("--rollouts", pen_args->rollouts, "evaluation rollouts");
    cmd->add_option("--horizon", pen_args->horizon, "evaluation horizon [s]");
    cmd->add_option("--seed", pen_args->seed, "training seed base");
    cmd->add_option("--eval-seed", pen_args->eval_seed, "evaluation seed");
    cmd->add_flag("--damped", pen_args->damped, "run the damped-stability study instead");
    cmd->add_option("--trials", pen_args->trials, "damped study: number of trials");
    cmd->add_option("--pairs", pen_args->pairs, "damped study: pairs per trial");
    cmd->add_option("--damped-beta", pen_args->damped_beta, "damped study: damping");
    pen_args->cmd = cmd;
    cmd->callback([pen_args, &rc]() { rc = run_pendulum(*pen_args); });
  }

  auto lyap_args = std::make_shared<LyapunovArgs>();
  {
    CLI::App* cmd = app.add_subcommand(
        "lyapunov", "LQR + stable fit + Lyapunov certificate on the pendulum");
    add_common(cmd, lyap_args->config_path, lyap_args->output_dir);
    cmd->add_option("--gravity", lyap_args->gravity, "gravity term (origin must be the stable equilibrium)");
    cmd->add_option("--seed", lyap_args->seed, "experiment seed");
    cmd->add_flag("--synthetic", lyap_args->synthetic,
                  "residual-free synthetic certificate instead of the pendulum");
    cmd->add_option("--synthetic-dim", lyap_args->synthetic_dim, "synthetic dimension");
    cmd->add_option("--synthetic-steps", lyap_args->synthetic_steps, "synthetic steps");
    cmd->add_option("--synthetic-dt", lyap_args->synthetic_dt, "synthetic step [s]");
    lyap_args->cmd = cmd;
    cmd->callback([lyap_args, &rc]() { rc = run_lyapunov(*lyap_args); });
  }

  auto bench_args = std::make_shared<BenchArgs>();
  {
    CLI::App* cmd = app.add_subcommand(
        "bench-random", "SOC vs projection baseline on random snapshot grids");
    add_common(cmd, bench_args->config_path, bench_args->output_dir);
    cmd->add_option("--sizes", bench_args->sizes, "grid sizes (comma-separated)");
    cmd->add_option("--max-iter", bench_args->max_iter, "SOC iteration budget per cell");
    cmd->add_option("--timeout", bench_args->timeout, "per-cell wall-clock budget [s]");
    cmd->add_option("--seed", bench_args->seed, "base seed");
    bench_args->cmd = cmd;
    cmd->callback([bench_args, &rc]() { rc = run_bench(*bench_args); });
  }

  auto worked_args = std::make_shared<WorkedArgs>();
  {
    CLI::App* cmd = app.add_subcommand(
        "worked-example", "built-in 3x5 snapshot example with reference numbers");
    add_common(cmd, worked_args->config_path, worked_args->output_dir);
    cmd->add_option("--seed", worked_args->seed, "seed for perturbed restarts");
    cmd->add_flag("--self-test", worked_args->self_test,
                  "check the reference numbers and exit 4 on failure");
    worked_args->cmd = cmd;
    cmd->callback([worked_args, &rc]() { rc = run_worked(*worked_args); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit 0; parse problems are config errors
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return rc;
}
