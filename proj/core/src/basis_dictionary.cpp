#include "disko/basis_dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "disko/errors.hpp"

namespace disko {

namespace {

std::map<std::string, ObservableTerm::CustomFn>& custom_registry() {
  static std::map<std::string, ObservableTerm::CustomFn> reg;
  return reg;
}

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

}  // namespace

double TermFactor::eval(const Eigen::VectorXd& v) const {
  double base = v[coord];
  switch (trig) {
    case Trig::sin: base = std::sin(base); break;
    case Trig::cos: base = std::cos(base); break;
    case Trig::none: break;
  }
  return ipow(base, power);
}

std::string TermFactor::label(char var) const {
  std::ostringstream os;
  switch (trig) {
    case Trig::sin: os << "sin(" << var << coord << ")"; break;
    case Trig::cos: os << "cos(" << var << coord << ")"; break;
    case Trig::none: os << var << coord; break;
  }
  if (power != 1) os << "^" << power;
  return os.str();
}

ObservableTerm ObservableTerm::coordinate(int index) {
  return from_factors({TermFactor{index, 1, TermFactor::Trig::none}});
}

ObservableTerm ObservableTerm::from_factors(std::vector<TermFactor> factors, char var) {
  if (factors.empty()) throw config_error("observable term needs at least one factor");
  for (const auto& f : factors) {
    if (f.coord < 0) throw config_error("negative coordinate index in term factor");
    if (f.power < 1) throw config_error("term factor powers must be positive integers");
  }
  ObservableTerm t;
  t.factors_ = std::move(factors);

  int n_trig = 0, n_plain = 0;
  for (const auto& f : t.factors_)
    (f.trig == TermFactor::Trig::none ? n_plain : n_trig)++;
  if (n_trig == 0) {
    t.kind_ = (t.factors_.size() == 1 && t.factors_[0].power == 1)
                  ? Kind::coordinate
                  : Kind::monomial;
  } else if (n_plain == 0) {
    t.kind_ = (n_trig == 1 && t.factors_[0].power == 1) ? Kind::trig : Kind::product;
  } else {
    t.kind_ = Kind::trig_monomial;
  }

  std::ostringstream os;
  for (size_t i = 0; i < t.factors_.size(); ++i) {
    if (i) os << "*";
    os << t.factors_[i].label(var);
  }
  t.label_ = os.str();
  return t;
}

ObservableTerm ObservableTerm::custom(const std::string& name, CustomFn fn) {
  if (!fn) throw config_error("custom term '" + name + "' has no callable");
  ObservableTerm t;
  t.kind_ = Kind::custom;
  t.fn_ = std::move(fn);
  t.label_ = name;
  return t;
}

double ObservableTerm::operator()(const Eigen::VectorXd& v) const {
  if (kind_ == Kind::custom) return fn_(v);
  double r = 1.0;
  for (const auto& f : factors_) r *= f.eval(v);
  return r;
}

int ObservableTerm::max_coordinate() const {
  if (kind_ == Kind::custom) return -1;
  int m = -1;
  for (const auto& f : factors_) m = std::max(m, f.coord);
  return m;
}

bool ObservableTerm::is_coordinate(int index) const {
  return kind_ == Kind::coordinate && factors_.size() == 1 &&
         factors_[0].coord == index && factors_[0].power == 1 &&
         factors_[0].trig == TermFactor::Trig::none;
}

namespace {

// Grammar per factor: ('sin'|'cos') '(' var INT ')' ['^' INT]  |  var INT ['^' INT]
TermFactor parse_factor(const std::string& tok, int dim, char var) {
  TermFactor f;
  size_t pos = 0;
  if (tok.rfind("sin(", 0) == 0 || tok.rfind("cos(", 0) == 0) {
    f.trig = tok[0] == 's' ? TermFactor::Trig::sin : TermFactor::Trig::cos;
    size_t close = tok.find(')');
    if (close == std::string::npos || tok[4] != var)
      throw config_error("bad trig factor '" + tok + "'");
    f.coord = std::stoi(tok.substr(5, close - 5));
    pos = close + 1;
  } else {
    if (tok[0] != var) throw config_error("bad factor '" + tok + "'");
    size_t end = 1;
    while (end < tok.size() && std::isdigit(static_cast<unsigned char>(tok[end]))) ++end;
    if (end == 1) throw config_error("bad coordinate in factor '" + tok + "'");
    f.coord = std::stoi(tok.substr(1, end - 1));
    pos = end;
  }
  if (pos < tok.size()) {
    if (tok[pos] != '^') throw config_error("bad factor suffix in '" + tok + "'");
    f.power = std::stoi(tok.substr(pos + 1));
  }
  if (f.coord < 0 || f.coord >= dim)
    throw config_error("coordinate out of range in factor '" + tok + "'");
  if (f.power < 1) throw config_error("non-positive power in factor '" + tok + "'");
  return f;
}

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

ObservableTerm parse_term(const std::string& label, int dim, char var) {
  std::string text = strip(label);
  if (text.empty()) throw config_error("empty term label");
  try {
    std::vector<TermFactor> factors;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, '*')) factors.push_back(parse_factor(strip(tok), dim, var));
    return ObservableTerm::from_factors(std::move(factors), var);
  } catch (const config_error&) {
    std::lock_guard<std::mutex> lock(registry_mutex());
    auto it = custom_registry().find(text);
    if (it != custom_registry().end()) return ObservableTerm::custom(text, it->second);
    throw config_error("cannot parse term '" + text + "' and no custom term registered under that name");
  }
}

BasisDictionary::BasisDictionary(int state_dim, int input_dim,
                                 std::vector<ObservableTerm> state_terms,
                                 std::vector<ObservableTerm> input_terms)
    : state_dim_(state_dim), input_dim_(input_dim),
      state_terms_(std::move(state_terms)), input_terms_(std::move(input_terms)) {
  if (state_dim_ <= 0) throw config_error("state dimension must be positive");
  if (input_dim_ < 0) throw config_error("input dimension must be nonnegative");
  if (static_cast<int>(state_terms_.size()) < state_dim_)
    throw config_error("dictionary must contain at least the raw state terms");
  for (int i = 0; i < state_dim_; ++i)
    if (!state_terms_[i].is_coordinate(i))
      throw config_error("state term " + std::to_string(i) +
                         " must be the coordinate projection x" + std::to_string(i));
  for (const auto& t : state_terms_)
    if (t.max_coordinate() >= state_dim_)
      throw config_error("term '" + t.label() + "' references a coordinate beyond the state dimension");
  if (input_terms_.empty() && input_dim_ > 0)
    for (int j = 0; j < input_dim_; ++j)
      input_terms_.push_back(ObservableTerm::from_factors(
          {TermFactor{j, 1, TermFactor::Trig::none}}, 'u'));
  for (const auto& t : input_terms_)
    if (t.max_coordinate() >= input_dim_)
      throw config_error("input term '" + t.label() + "' references a coordinate beyond the input dimension");
}

Eigen::VectorXd BasisDictionary::evaluate_state(const Eigen::VectorXd& s) const {
  if (s.size() != state_dim_)
    throw config_error("state has dimension " + std::to_string(s.size()) +
                       ", dictionary expects " + std::to_string(state_dim_));
  Eigen::VectorXd psi(num_state_terms());
  for (int i = 0; i < psi.size(); ++i) psi[i] = state_terms_[i](s);
  return psi;
}

Eigen::VectorXd BasisDictionary::evaluate_input(const Eigen::VectorXd& u) const {
  if (u.size() != input_dim_)
    throw config_error("input has dimension " + std::to_string(u.size()) +
                       ", dictionary expects " + std::to_string(input_dim_));
  Eigen::VectorXd psi(num_input_terms());
  for (int i = 0; i < psi.size(); ++i) psi[i] = input_terms_[i](u);
  return psi;
}

std::vector<std::string> BasisDictionary::state_labels() const {
  std::vector<std::string> out;
  out.reserve(state_terms_.size());
  for (const auto& t : state_terms_) out.push_back(t.label());
  return out;
}

std::vector<std::string> BasisDictionary::input_labels() const {
  std::vector<std::string> out;
  out.reserve(input_terms_.size());
  for (const auto& t : input_terms_) out.push_back(t.label());
  return out;
}

std::string BasisDictionary::serialize() const {
  std::ostringstream os;
  for (const auto& t : state_terms_) os << t.label() << "\n";
  return os.str();
}

BasisDictionary BasisDictionary::parse(const std::string& text, int state_dim,
                                       int input_dim) {
  std::vector<ObservableTerm> terms;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    line = strip(line);
    if (line.empty() || line[0] == '#') continue;
    terms.push_back(parse_term(line, state_dim, 'x'));
  }
  return BasisDictionary(state_dim, input_dim, std::move(terms));
}

void BasisDictionary::register_custom(const std::string& name,
                                      ObservableTerm::CustomFn fn) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  custom_registry()[name] = std::move(fn);
}

BasisDictionary BasisDictionary::pendulum6() {
  // theta, theta_dot, sin(theta), cos(theta)*theta_dot, sin(theta)*cos(theta),
  // sin(theta)*theta_dot^2
  return parse(
      "x0\nx1\nsin(x0)\ncos(x0)*x1\nsin(x0)*cos(x0)\nsin(x0)*x1^2\n", 2, 0);
}

BasisDictionary BasisDictionary::pendulum8() {
  // theta, theta_dot, theta^2, theta_dot^2, sin(theta), sin(theta_dot),
  // sin(theta)*theta_dot, sin(theta_dot)*theta
  return parse(
      "x0\nx1\nx0^2\nx1^2\nsin(x0)\nsin(x1)\nsin(x0)*x1\nsin(x1)*x0\n", 2, 1);
}

BasisDictionary BasisDictionary::state_identity(int state_dim, int input_dim) {
  std::vector<ObservableTerm> terms;
  for (int i = 0; i < state_dim; ++i) terms.push_back(ObservableTerm::coordinate(i));
  return BasisDictionary(state_dim, input_dim, std::move(terms));
}

std::vector<EquilibriumReport> check_equilibrium_consistency(
    const BasisDictionary& dict, const std::vector<Eigen::VectorXd>& equilibria,
    double tol) {
  std::vector<EquilibriumReport> reports;
  reports.reserve(equilibria.size());
  for (const auto& se : equilibria) {
    EquilibriumReport rep;
    rep.equilibrium = se;
    Eigen::VectorXd psi = dict.evaluate_state(se);
    for (int i = 0; i < psi.size(); ++i)
      if (std::abs(psi[i]) > tol) rep.nonvanishing_indices.push_back(i);
    rep.all_vanish = rep.nonvanishing_indices.empty();
    reports.push_back(std::move(rep));
  }
  return reports;
}

FilterResult filter_redundant_terms(const BasisDictionary& dict,
                                    const std::vector<Eigen::VectorXd>& equilibria,
                                    double tol, bool allow_state_removal) {
  FilterResult result;
  // Work on (original index, term) pairs so removals report original indices.
  std::vector<std::pair<int, ObservableTerm>> terms;
  for (int i = 0; i < dict.num_state_terms(); ++i)
    terms.emplace_back(i, dict.state_terms()[i]);
  std::vector<bool> exempt(dict.num_state_terms(), false);

  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& se : equilibria) {
      int lone = -1, n_nonvanish = 0;
      for (size_t k = 0; k < terms.size(); ++k) {
        if (exempt[terms[k].first]) continue;
        if (std::abs(terms[k].second(se)) > tol) {
          ++n_nonvanish;
          lone = static_cast<int>(k);
        }
      }
      if (n_nonvanish != 1) continue;
      int orig = terms[lone].first;
      std::ostringstream why;
      why << "term '" << terms[lone].second.label()
          << "' is the only nonvanishing term at equilibrium (";
      for (int j = 0; j < se.size(); ++j) why << (j ? ", " : "") << se[j];
      why << ")";
      if (orig < dict.state_dim() && !allow_state_removal) {
        result.flagged_state_terms.push_back(orig);
        result.rationale.push_back(why.str() + " [state term kept]");
        exempt[orig] = true;  // do not re-trigger on a kept term
      } else {
        result.removed_indices.push_back(orig);
        result.rationale.push_back(why.str() + " [removed]");
        terms.erase(terms.begin() + lone);
      }
      changed = true;
      break;  // re-scan from the first equilibrium after each change
    }
  }

  std::vector<ObservableTerm> kept;
  kept.reserve(terms.size());
  for (auto& [idx, term] : terms) kept.push_back(std::move(term));
  if (static_cast<int>(kept.size()) < dict.state_dim())
    throw numerical_error(
        "filtering removed leading state terms; the state can no longer be "
        "recovered from the lifted vector");
  for (int i = 0; i < dict.state_dim(); ++i)
    if (!kept[i].is_coordinate(i))
      throw numerical_error(
          "filtering removed leading state terms; the state can no longer be "
          "recovered from the lifted vector");
  result.reduced = std::make_shared<BasisDictionary>(
      dict.state_dim(), dict.input_dim(), std::move(kept), dict.input_terms());
  return result;
}

}  // namespace disko
