#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace disko {

// One multiplicative factor of an observable: a coordinate raised to an
// integer power, optionally inside sin or cos (the power then applies to the
// trig factor, e.g. sin(x0)^2).
struct TermFactor {
  enum class Trig { none, sin, cos };
  int coord = 0;
  int power = 1;
  Trig trig = Trig::none;

  double eval(const Eigen::VectorXd& v) const;
  std::string label(char var) const;
};

class ObservableTerm {
 public:
  enum class Kind { coordinate, monomial, trig, trig_monomial, product, custom };
  using CustomFn = std::function<double(const Eigen::VectorXd&)>;

  static ObservableTerm coordinate(int index);
  static ObservableTerm from_factors(std::vector<TermFactor> factors, char var = 'x');
  static ObservableTerm custom(const std::string& name, CustomFn fn);

  double operator()(const Eigen::VectorXd& v) const;
  Kind kind() const { return kind_; }
  const std::string& label() const { return label_; }
  // Highest coordinate index referenced; custom terms report the declared
  // arity bound they were registered with (-1 = any).
  int max_coordinate() const;
  bool is_coordinate(int index) const;

 private:
  ObservableTerm() = default;
  Kind kind_ = Kind::custom;
  std::vector<TermFactor> factors_;
  CustomFn fn_;
  std::string label_;
};

class BasisDictionary {
 public:
  // First state_dim state terms must be the coordinate projections x0..x{N-1}.
  // Empty input_terms with input_dim > 0 defaults to the identity on u.
  BasisDictionary(int state_dim, int input_dim,
                  std::vector<ObservableTerm> state_terms,
                  std::vector<ObservableTerm> input_terms = {});

  int state_dim() const { return state_dim_; }
  int input_dim() const { return input_dim_; }
  int num_state_terms() const { return static_cast<int>(state_terms_.size()); }
  int num_input_terms() const { return static_cast<int>(input_terms_.size()); }

  Eigen::VectorXd evaluate_state(const Eigen::VectorXd& s) const;
  Eigen::VectorXd evaluate_input(const Eigen::VectorXd& u) const;

  const std::vector<ObservableTerm>& state_terms() const { return state_terms_; }
  const std::vector<ObservableTerm>& input_terms() const { return input_terms_; }
  std::vector<std::string> state_labels() const;
  std::vector<std::string> input_labels() const;

  // One state-term label per line.
  std::string serialize() const;
  static BasisDictionary parse(const std::string& text, int state_dim, int input_dim);

  // Named closures referenced by dictionary files.
  static void register_custom(const std::string& name, ObservableTerm::CustomFn fn);

  // Built-ins used by the experiments.
  static BasisDictionary pendulum6();
  static BasisDictionary pendulum8();
  static BasisDictionary state_identity(int state_dim, int input_dim);

 private:
  int state_dim_ = 0;
  int input_dim_ = 0;
  std::vector<ObservableTerm> state_terms_;
  std::vector<ObservableTerm> input_terms_;
};

// Parses a single term label (grammar: products of x3, x3^2, sin(x1), cos(x0)^2;
// unknown labels fall back to the custom registry).
ObservableTerm parse_term(const std::string& label, int dim, char var = 'x');

struct EquilibriumReport {
  Eigen::VectorXd equilibrium;
  bool all_vanish = false;
  std::vector<int> nonvanishing_indices;
};

std::vector<EquilibriumReport> check_equilibrium_consistency(
    const BasisDictionary& dict, const std::vector<Eigen::VectorXd>& equilibria,
    double tol = 1e-12);

struct FilterResult {
  std::shared_ptr<BasisDictionary> reduced;
  std::vector<int> removed_indices;  // indices into the original term list
  std::vector<std::string> rationale;
  std::vector<int> flagged_state_terms;  // met the rule but kept (index < N)
};

FilterResult filter_redundant_terms(const BasisDictionary& dict,
                                    const std::vector<Eigen::VectorXd>& equilibria,
                                    double tol = 1e-12,
                                    bool allow_state_removal = false);

}  // namespace disko
