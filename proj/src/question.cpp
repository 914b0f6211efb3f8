#include "treeq/question.hpp"

#include <cmath>
#include <regex>
#include <set>

#include "treeq/error.hpp"

namespace treeq {

using nlohmann::json;

LinExpr operator+(LinExpr a, const LinExpr& b) {
  a.terms.insert(a.terms.end(), b.terms.begin(), b.terms.end());
  a.constant += b.constant;
  return a;
}

LinExpr operator*(double c, LinExpr a) {
  for (Term& t : a.terms) t.coef *= c;
  a.constant *= c;
  return a;
}

LinExpr operator-(LinExpr a, const LinExpr& b) { return std::move(a) + (-1.0 * b); }

const char* to_string(CmpOp op) {
  switch (op) {
    case CmpOp::Lt:
      return "<";
    case CmpOp::Le:
      return "<=";
    case CmpOp::Eq:
      return "=";
    case CmpOp::Ge:
      return ">=";
    case CmpOp::Gt:
      return ">";
  }
  return "?";
}

Formula cmp(LinExpr lhs, CmpOp op, LinExpr rhs) {
  Formula f;
  f.kind = Formula::Kind::Cmp;
  f.op = op;
  f.lhs = std::move(lhs);
  f.rhs = std::move(rhs);
  return f;
}

Formula boolvar(VarRef v) {
  Formula f;
  f.kind = Formula::Kind::Var;
  f.var = std::move(v);
  return f;
}

Formula negate(Formula x) {
  Formula f;
  f.kind = Formula::Kind::Not;
  f.args.push_back(std::move(x));
  return f;
}

Formula all_of(std::vector<Formula> fs) {
  Formula f;
  f.kind = Formula::Kind::And;
  f.args = std::move(fs);
  return f;
}

Formula any_of(std::vector<Formula> fs) {
  Formula f;
  f.kind = Formula::Kind::Or;
  f.args = std::move(fs);
  return f;
}

Formula implies(Formula a, Formula b) {
  Formula f;
  f.kind = Formula::Kind::Implies;
  f.args.push_back(std::move(a));
  f.args.push_back(std::move(b));
  return f;
}

Formula iff(Formula a, Formula b) { return all_of({implies(a, b), implies(b, a)}); }

Formula exactly_one(const std::vector<Formula>& fs) {
  std::vector<Formula> options;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    std::vector<Formula> conj;
    for (std::size_t j = 0; j < fs.size(); ++j) conj.push_back(i == j ? fs[j] : negate(fs[j]));
    options.push_back(all_of(std::move(conj)));
  }
  return any_of(std::move(options));
}

Formula at_most_true(const std::vector<VarRef>& bools, double n, const std::string& prefix) {
  std::vector<Formula> parts;
  LinExpr total;
  for (std::size_t i = 0; i < bools.size(); ++i) {
    VarRef counter = aux_real(prefix + std::to_string(i));
    parts.push_back(implies(boolvar(bools[i]), eq(counter, 1.0)));
    parts.push_back(implies(negate(boolvar(bools[i])), eq(counter, 0.0)));
    total = total + LinExpr(counter);
  }
  parts.push_back(le(total, n));
  return all_of(std::move(parts));
}

// Validation -------------------------------------------------------------------

namespace {

const std::regex& identifier_pattern() {
  static const std::regex re("[A-Za-z_][A-Za-z0-9_]*");
  return re;
}

const std::regex& reserved_pattern() {
  static const std::regex re("(a[0-9]+_[0-9]+)|(w[0-9]+_[0-9]+)|(f_[0-9]+)|true|false|and|or|not|ite|let|distinct");
  return re;
}

struct Validator {
  const VerificationTask& task;
  std::map<std::string, Sort> aux;

  [[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw ValidationError(path + ": " + msg);
  }

  Sort sort_of(const VarRef& v, const std::string& path) {
    if (const auto* a = std::get_if<AttrVar>(&v)) {
      if (a->instance >= task.num_instances())
        fail(path, "instance " + std::to_string(a->instance) + " not declared (task has " +
                       std::to_string(task.num_instances()) + ")");
      const Ensemble& e = task.ensemble(a->instance);
      if (a->attr.index >= e.num_attributes())
        fail(path, "attribute " + std::to_string(a->attr.index) + " not declared (K=" +
                       std::to_string(e.num_attributes()) + ")");
      return e.attr_type(a->attr) == AttrType::Real ? Sort::Real : Sort::Bool;
    }
    if (const auto* o = std::get_if<OutVar>(&v)) {
      if (o->instance >= task.num_instances()) fail(path, "output of undeclared instance " + std::to_string(o->instance));
      return Sort::Real;
    }
    const auto& x = std::get<AuxVar>(v);
    if (!std::regex_match(x.name, identifier_pattern())) fail(path, "auxiliary name '" + x.name + "' is not an identifier");
    if (std::regex_match(x.name, reserved_pattern())) fail(path, "auxiliary name '" + x.name + "' is reserved");
    auto [it, inserted] = aux.emplace(x.name, x.sort);
    if (!inserted && it->second != x.sort) fail(path, "auxiliary '" + x.name + "' used with two sorts");
    return x.sort;
  }

  void linexpr(const LinExpr& e, const std::string& path) {
    if (!std::isfinite(e.constant)) fail(path + ".const", "constant is not finite");
    for (std::size_t i = 0; i < e.terms.size(); ++i) {
      const std::string p = path + ".terms[" + std::to_string(i) + "]";
      if (!std::isfinite(e.terms[i].coef)) fail(p, "coefficient is not finite");
      if (sort_of(e.terms[i].var, p) != Sort::Real) fail(p, "comparison over a boolean variable");
    }
  }

  void formula(const Formula& f, const std::string& path) {
    switch (f.kind) {
      case Formula::Kind::Cmp:
        linexpr(f.lhs, path + ".cmp.lhs");
        linexpr(f.rhs, path + ".cmp.rhs");
        return;
      case Formula::Kind::Var:
        if (sort_of(f.var, path + ".var") != Sort::Bool) fail(path + ".var", "boolean use of a real variable");
        return;
      case Formula::Kind::Not:
        if (f.args.size() != 1) fail(path, "'not' takes one argument");
        formula(f.args[0], path + ".not");
        return;
      case Formula::Kind::Implies:
        if (f.args.size() != 2) fail(path, "'implies' takes two arguments");
        [[fallthrough]];
      case Formula::Kind::And:
      case Formula::Kind::Or: {
        const char* name = f.kind == Formula::Kind::And ? "and" : f.kind == Formula::Kind::Or ? "or" : "implies";
        for (std::size_t i = 0; i < f.args.size(); ++i)
          formula(f.args[i], path + "." + name + "[" + std::to_string(i) + "]");
        return;
      }
    }
  }
};

void collect_aux_into(const Formula& f, std::vector<AuxVar>& out, std::set<std::string>& seen) {
  auto visit = [&](const VarRef& v) {
    if (const auto* a = std::get_if<AuxVar>(&v); a && seen.insert(a->name).second) out.push_back(*a);
  };
  if (f.kind == Formula::Kind::Cmp) {
    for (const Term& t : f.lhs.terms) visit(t.var);
    for (const Term& t : f.rhs.terms) visit(t.var);
  } else if (f.kind == Formula::Kind::Var) {
    visit(f.var);
  }
  for (const Formula& g : f.args) collect_aux_into(g, out, seen);
}

}  // namespace

void validate(const VerificationTask& task) {
  if (task.instances.empty()) throw ValidationError("task: at least one instance is required");
  for (std::size_t i = 0; i < task.instances.size(); ++i)
    if (!task.instances[i]) throw ValidationError("task: instance " + std::to_string(i) + " has no ensemble");
  Validator v{task, {}};
  v.formula(task.question, "question");
  v.formula(task.background, "background");
}

std::vector<AuxVar> collect_aux(const VerificationTask& task) {
  std::vector<AuxVar> out;
  std::set<std::string> seen;
  collect_aux_into(task.question, out, seen);
  collect_aux_into(task.background, out, seen);
  return out;
}

// Builders ---------------------------------------------------------------------

namespace {

Formula same_value(const Ensemble& e, std::uint32_t k, std::uint32_t i, std::uint32_t j) {
  if (e.attr_type(AttrId(k)) == AttrType::Real) return eq(attr(i, k), attr(j, k));
  return iff(boolvar(attr(i, k)), boolvar(attr(j, k)));
}

VerificationTask finish(VerificationTask t) {
  validate(t);
  return t;
}

}  // namespace

VerificationTask single_instance_question(std::shared_ptr<const Ensemble> e, std::vector<Formula> constraints) {
  VerificationTask t;
  t.instances.push_back(std::move(e));
  t.question = all_of(std::move(constraints));
  t.background = truth();
  return finish(std::move(t));
}

VerificationTask monotonicity_task(std::shared_ptr<const Ensemble> e, AttrId k) {
  if (!e || k.index >= e->num_attributes()) throw ValidationError("monotonicity: attribute out of range");
  std::vector<Formula> parts;
  for (std::uint32_t j = 0; j < e->num_attributes(); ++j) {
    if (j == k.index) continue;
    parts.push_back(same_value(*e, j, 0, 1));
  }
  if (e->attr_type(k) == AttrType::Real) {
    parts.push_back(lt(attr(0, k.index), attr(1, k.index)));
  } else {
    parts.push_back(negate(boolvar(attr(0, k.index))));
    parts.push_back(boolvar(attr(1, k.index)));
  }
  parts.push_back(gt(out(0), out(1)));
  VerificationTask t;
  t.instances = {e, e};
  t.question = all_of(std::move(parts));
  t.background = truth();
  return finish(std::move(t));
}

VerificationTask adversarial_task(std::vector<std::shared_ptr<const Ensemble>> per_class, const AdversarialSpec& spec) {
  if (per_class.empty() || !per_class[0]) throw ValidationError("adversarial: no ensemble given");
  if (!(spec.linf >= 0.0) || !std::isfinite(spec.linf)) throw ValidationError("adversarial: infinity-norm bound must be >= 0");
  if (spec.l1_budget && (!(*spec.l1_budget >= 0.0) || !std::isfinite(*spec.l1_budget)))
    throw ValidationError("adversarial: 1-norm budget must be >= 0");
  const Ensemble& e = *per_class[0];
  for (const auto& other : per_class)
    if (!other || other->attr_types() != e.attr_types())
      throw ValidationError("adversarial: per-class ensembles must share attribute types");
  check_instance(e, spec.original);

  const double delta = spec.linf;
  const std::uint32_t K = static_cast<std::uint32_t>(e.num_attributes());
  std::vector<Formula> parts;
  LinExpr spent;
  for (std::uint32_t k = 0; k < K; ++k) {
    const double x = spec.original[k];
    if (e.attr_type(AttrId(k)) == AttrType::Real) {
      // x - delta < x' < x + delta, kept exact by moving x to the variable side.
      const LinExpr shifted({{1.0, attr(0, k)}}, -x);
      parts.push_back(gt(shifted, -delta));
      parts.push_back(lt(shifted, delta));
      if (spec.l1_budget) {
        VarRef d = aux_real("d" + std::to_string(k));
        parts.push_back(ge(d, shifted));
        parts.push_back(ge(d, LinExpr({{-1.0, attr(0, k)}}, x)));
        spent = spent + LinExpr(d);
      }
    } else {
      Formula same = x != 0.0 ? boolvar(attr(0, k)) : negate(boolvar(attr(0, k)));
      if (delta < 1.0) {
        parts.push_back(same);
      } else if (spec.l1_budget) {
        VarRef d = aux_real("d" + std::to_string(k));
        parts.push_back(ge(d, 0.0));
        parts.push_back(implies(negate(same), ge(d, 1.0)));
        spent = spent + LinExpr(d);
      }
    }
  }
  if (spec.l1_budget) {
    if (*spec.l1_budget == 0.0) {
      parts.push_back(falsity());
    } else {
      parts.push_back(lt(spent, *spec.l1_budget));
    }
  }
  for (std::uint32_t i = 1; i < per_class.size(); ++i)
    for (std::uint32_t k = 0; k < K; ++k) parts.push_back(same_value(e, k, 0, i));
  parts.push_back(spec.label);

  VerificationTask t;
  t.instances = std::move(per_class);
  t.question = all_of(std::move(parts));
  t.background = truth();
  return finish(std::move(t));
}

VerificationTask one_diff_pair_task(std::shared_ptr<const Ensemble> e, AttrId protected_attr, Formula output_gap) {
  if (!e || protected_attr.index >= e->num_attributes()) throw ValidationError("one-diff: attribute out of range");
  std::vector<Formula> parts;
  for (std::uint32_t k = 0; k < e->num_attributes(); ++k) {
    Formula same = same_value(*e, k, 0, 1);
    parts.push_back(k == protected_attr.index ? negate(std::move(same)) : std::move(same));
  }
  parts.push_back(std::move(output_gap));
  VerificationTask t;
  t.instances = {e, e};
  t.question = all_of(std::move(parts));
  t.background = truth();
  return finish(std::move(t));
}

VerificationTask any_single_diff_task(std::shared_ptr<const Ensemble> e, Formula output_gap) {
  if (!e) throw ValidationError("single-diff: no ensemble given");
  std::vector<Formula> parts;
  std::vector<Formula> selectors;
  for (std::uint32_t k = 0; k < e->num_attributes(); ++k) {
    Formula s = boolvar(aux_bool("s" + std::to_string(k)));
    Formula same = same_value(*e, k, 0, 1);
    parts.push_back(any_of({all_of({negate(s), same}), all_of({s, negate(same)})}));
    selectors.push_back(std::move(s));
  }
  parts.push_back(exactly_one(selectors));
  parts.push_back(std::move(output_gap));
  VerificationTask t;
  t.instances = {e, e};
  t.question = all_of(std::move(parts));
  t.background = truth();
  return finish(std::move(t));
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("probability must lie strictly between 0 and 1");
  return std::log(p / (1.0 - p));
}

Formula class_confidence_at_least(std::uint32_t target, std::uint32_t num_classes, double p) {
  if (target >= num_classes) throw ValidationError("target class out of range");
  if (num_classes == 1) return ge(out(0), logit(p));
  const double margin = logit(p) + std::log(static_cast<double>(num_classes - 1));
  std::vector<Formula> parts;
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    if (c == target) continue;
    parts.push_back(ge(LinExpr({{1.0, out(target)}, {-1.0, out(c)}}, 0.0), margin));
  }
  return all_of(std::move(parts));
}

Formula class_probability_at_most(std::uint32_t source, std::uint32_t target, double p) {
  return ge(LinExpr({{1.0, out(target)}, {-1.0, out(source)}}, 0.0), -logit(p));
}

// Box abstraction --------------------------------------------------------------

namespace {

void flatten_conjuncts(const Formula& f, std::vector<const Formula*>& out) {
  if (f.kind == Formula::Kind::And) {
    for (const Formula& g : f.args) flatten_conjuncts(g, out);
  } else {
    out.push_back(&f);
  }
}

// lhs - rhs as exact coefficients over distinct variables plus a constant.
struct Normalized {
  std::vector<std::pair<VarRef, Rational>> coefs;
  Rational constant;
};

Normalized normalize(const Formula& f) {
  Normalized n;
  auto add = [&](const LinExpr& e, int sign) {
    for (const Term& t : e.terms) {
      Rational c = to_rational(t.coef) * sign;
      auto it = std::find_if(n.coefs.begin(), n.coefs.end(), [&](const auto& p) { return p.first == t.var; });
      if (it == n.coefs.end()) {
        n.coefs.emplace_back(t.var, c);
      } else {
        it->second += c;
      }
    }
    n.constant += to_rational(e.constant) * sign;
  };
  add(f.lhs, 1);
  add(f.rhs, -1);
  std::erase_if(n.coefs, [](const auto& p) { return p.second == 0; });
  return n;
}

bool compare(const Rational& v, CmpOp op) {
  switch (op) {
    case CmpOp::Lt:
      return v < 0;
    case CmpOp::Le:
      return v <= 0;
    case CmpOp::Eq:
      return v == 0;
    case CmpOp::Ge:
      return v >= 0;
    case CmpOp::Gt:
      return v > 0;
  }
  return false;
}

CmpOp flip(CmpOp op) {
  switch (op) {
    case CmpOp::Lt:
      return CmpOp::Gt;
    case CmpOp::Le:
      return CmpOp::Ge;
    case CmpOp::Ge:
      return CmpOp::Le;
    case CmpOp::Gt:
      return CmpOp::Lt;
    case CmpOp::Eq:
      return CmpOp::Eq;
  }
  return op;
}

bool tighten(std::optional<DomainBox>& box, const SplitCondition& c, bool polarity) {
  const Relation r = box->relation(c);
  if (r == (polarity ? Relation::AlwaysTrue : Relation::AlwaysFalse)) return true;
  box = box->refine(c, polarity);
  return box.has_value();
}

}  // namespace

std::optional<DomainBox> box_approximation(const VerificationTask& task, std::uint32_t instance) {
  const Ensemble& e = task.ensemble(instance);
  std::optional<DomainBox> box = DomainBox::unconstrained(e.attr_types());
  std::vector<const Formula*> conjuncts;
  flatten_conjuncts(task.question, conjuncts);
  flatten_conjuncts(task.background, conjuncts);

  auto own_attr = [&](const VarRef& v) -> const AttrVar* {
    const auto* a = std::get_if<AttrVar>(&v);
    return (a != nullptr && a->instance == instance) ? a : nullptr;
  };

  for (const Formula* f : conjuncts) {
    if (f->kind == Formula::Kind::Or && f->args.empty()) return std::nullopt;
    if (f->kind == Formula::Kind::Var || (f->kind == Formula::Kind::Not && f->args[0].kind == Formula::Kind::Var)) {
      const bool positive = f->kind == Formula::Kind::Var;
      const VarRef& v = positive ? f->var : f->args[0].var;
      if (const AttrVar* a = own_attr(v)) {
        if (!tighten(box, SplitCondition::is_true(a->attr), positive)) return std::nullopt;
      }
      continue;
    }
    if (f->kind != Formula::Kind::Cmp) continue;
    Normalized n = normalize(*f);
    if (n.coefs.empty()) {
      if (!compare(n.constant, f->op)) return std::nullopt;
      continue;
    }
    if (n.coefs.size() != 1) continue;
    const AttrVar* a = own_attr(n.coefs[0].first);
    if (a == nullptr) continue;
    // c * A + k op 0  <=>  A op' -k / c
    const Rational& c = n.coefs[0].second;
    const Rational bound = -n.constant / c;
    const CmpOp op = c > 0 ? f->op : flip(f->op);
    const AttrId k = a->attr;
    const bool upper = op == CmpOp::Lt || op == CmpOp::Le || op == CmpOp::Eq;
    const bool lower = op == CmpOp::Gt || op == CmpOp::Ge || op == CmpOp::Eq;
    if (upper) {
      // [lo, hi) must keep every admissible value: A < b needs hi >= b, A <= b needs hi > b.
      double hi = op == CmpOp::Lt ? round_up(bound) : std::nextafter(round_down(bound), kInfinity);
      if (std::isfinite(hi) && !tighten(box, SplitCondition::less_than(k, hi), true)) return std::nullopt;
    }
    if (lower) {
      double lo = round_down(bound);
      if (std::isfinite(lo) && !tighten(box, SplitCondition::less_than(k, lo), false)) return std::nullopt;
    }
  }
  return box;
}

// Evaluation --------------------------------------------------------------------

namespace {

Rational value_of(const VarRef& v, const Assignment& a) {
  if (const auto* x = std::get_if<AttrVar>(&v)) return a.attrs.at(x->instance).at(x->attr.index);
  if (const auto* o = std::get_if<OutVar>(&v)) return a.outputs.at(o->instance);
  const auto& aux = std::get<AuxVar>(v);
  auto it = a.aux_real.find(aux.name);
  return it == a.aux_real.end() ? Rational(0) : it->second;
}

Rational value_of(const LinExpr& e, const Assignment& a) {
  Rational sum = to_rational(e.constant);
  for (const Term& t : e.terms) sum += to_rational(t.coef) * value_of(t.var, a);
  return sum;
}

}  // namespace

bool holds(const Formula& f, const Assignment& a) {
  switch (f.kind) {
    case Formula::Kind::Cmp:
      return compare(value_of(f.lhs, a) - value_of(f.rhs, a), f.op);
    case Formula::Kind::Var: {
      if (const auto* x = std::get_if<AttrVar>(&f.var)) return a.attrs.at(x->instance).at(x->attr.index) != 0;
      const auto& aux = std::get<AuxVar>(f.var);
      auto it = a.aux_bool.find(aux.name);
      return it != a.aux_bool.end() && it->second;
    }
    case Formula::Kind::Not:
      return !holds(f.args[0], a);
    case Formula::Kind::And:
      for (const Formula& g : f.args)
        if (!holds(g, a)) return false;
      return true;
    case Formula::Kind::Or:
      for (const Formula& g : f.args)
        if (holds(g, a)) return true;
      return false;
    case Formula::Kind::Implies:
      return !holds(f.args[0], a) || holds(f.args[1], a);
  }
  return false;
}

// JSON --------------------------------------------------------------------------

namespace {

json var_to_json(const VarRef& v) {
  if (const auto* a = std::get_if<AttrVar>(&v)) return json{{"var", {{"attr", a->attr.index}, {"instance", a->instance}}}};
  if (const auto* o = std::get_if<OutVar>(&v)) return json{{"out", {{"instance", o->instance}}}};
  const auto& x = std::get<AuxVar>(v);
  return json{{"aux", {{"name", x.name}, {"sort", x.sort == Sort::Real ? "real" : "bool"}}}};
}

std::uint32_t index_field(const json& j, const char* key, bool required) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) throw ParseError(std::string("question: missing '") + key + "'");
    return 0;
  }
  if (!it->is_number_integer() || it->get<std::int64_t>() < 0)
    throw ParseError(std::string("question: '") + key + "' must be a non-negative integer");
  return static_cast<std::uint32_t>(it->get<std::int64_t>());
}

std::optional<VarRef> var_from_json(const json& j) {
  if (!j.is_object()) return std::nullopt;
  if (auto it = j.find("var"); it != j.end()) return AttrVar{index_field(*it, "instance", false), AttrId(index_field(*it, "attr", true))};
  if (auto it = j.find("out"); it != j.end()) {
    if (it->is_number_integer() && it->get<std::int64_t>() >= 0) return OutVar{it->get<std::uint32_t>()};
    return OutVar{index_field(*it, "instance", false)};
  }
  if (auto it = j.find("aux"); it != j.end()) {
    if (!it->contains("name") || !(*it)["name"].is_string()) throw ParseError("question: aux needs a string 'name'");
    std::string sort = it->value("sort", "real");
    if (sort != "real" && sort != "bool") throw ParseError("question: aux sort must be 'real' or 'bool'");
    return AuxVar{(*it)["name"].get<std::string>(), sort == "real" ? Sort::Real : Sort::Bool};
  }
  return std::nullopt;
}

json linexpr_to_json(const LinExpr& e) {
  json terms = json::array();
  for (const Term& t : e.terms) terms.push_back(json::array({t.coef, var_to_json(t.var)}));
  return json{{"terms", terms}, {"const", e.constant}};
}

LinExpr linexpr_from_json(const json& j) {
  if (j.is_number()) return LinExpr(j.get<double>());
  if (auto v = var_from_json(j)) return LinExpr(*v);
  if (!j.is_object()) throw ParseError("question: malformed linear expression");
  for (const auto& item : j.items())
    if (item.key() != "const" && item.key() != "terms")
      throw ParseError("question: unexpected key '" + item.key() + "' in linear expression");
  LinExpr e;
  if (auto it = j.find("const"); it != j.end()) {
    if (!it->is_number()) throw ParseError("question: 'const' must be a number");
    e.constant = it->get<double>();
  }
  if (auto it = j.find("terms"); it != j.end()) {
    if (!it->is_array()) throw ParseError("question: 'terms' must be an array");
    for (const json& t : *it) {
      if (!t.is_array() || t.size() != 2 || !t[0].is_number()) throw ParseError("question: term must be [coefficient, var]");
      auto v = var_from_json(t[1]);
      if (!v) throw ParseError("question: malformed variable in term");
      e.terms.push_back({t[0].get<double>(), *v});
    }
  }
  return e;
}

CmpOp op_from_string(const std::string& s) {
  if (s == "<") return CmpOp::Lt;
  if (s == "<=") return CmpOp::Le;
  if (s == "=" || s == "==") return CmpOp::Eq;
  if (s == ">=") return CmpOp::Ge;
  if (s == ">") return CmpOp::Gt;
  throw ParseError("question: unknown comparison '" + s + "'");
}

}  // namespace

json formula_to_json(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::Cmp:
      return json{{"cmp", {{"lhs", linexpr_to_json(f.lhs)}, {"op", to_string(f.op)}, {"rhs", linexpr_to_json(f.rhs)}}}};
    case Formula::Kind::Var:
      return var_to_json(f.var);
    default:
      break;
  }
  const char* name = f.kind == Formula::Kind::Not ? "not"
                     : f.kind == Formula::Kind::And ? "and"
                     : f.kind == Formula::Kind::Or  ? "or"
                                                    : "implies";
  json args = json::array();
  for (const Formula& g : f.args) args.push_back(formula_to_json(g));
  return json{{"op", name}, {"args", args}};
}

Formula formula_from_json(const json& j) {
  if (j.is_boolean()) return j.get<bool>() ? truth() : falsity();
  if (!j.is_object()) throw ParseError("question: formula must be an object or boolean");
  if (auto it = j.find("cmp"); it != j.end()) {
    if (!it->contains("lhs") || !it->contains("rhs") || !it->contains("op"))
      throw ParseError("question: cmp needs 'lhs', 'op', 'rhs'");
    return cmp(linexpr_from_json((*it)["lhs"]), op_from_string((*it)["op"].get<std::string>()),
               linexpr_from_json((*it)["rhs"]));
  }
  if (auto v = var_from_json(j)) return boolvar(*v);
  auto op = j.find("op");
  if (op == j.end() || !op->is_string()) throw ParseError("question: formula needs 'op', 'cmp' or a variable");
  std::vector<Formula> args;
  if (auto it = j.find("args"); it != j.end()) {
    if (!it->is_array()) throw ParseError("question: 'args' must be an array");
    for (const json& a : *it) args.push_back(formula_from_json(a));
  } else if (auto one = j.find("arg"); one != j.end()) {
    args.push_back(formula_from_json(*one));
  }
  const std::string name = op->get<std::string>();
  if (name == "and") return all_of(std::move(args));
  if (name == "or") return any_of(std::move(args));
  if (name == "not") {
    if (args.size() != 1) throw ParseError("question: 'not' takes one argument");
    return negate(std::move(args[0]));
  }
  if (name == "implies") {
    if (args.size() != 2) throw ParseError("question: 'implies' takes two arguments");
    return implies(std::move(args[0]), std::move(args[1]));
  }
  throw ParseError("question: unknown op '" + name + "'");
}

VerificationTask task_from_json(const json& j, const std::vector<std::shared_ptr<const Ensemble>>& models) {
  if (!j.is_object()) throw ParseError("question file must be a JSON object");
  std::size_t n = 1;
  if (auto it = j.find("instances"); it != j.end()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() < 1) throw ParseError("question: 'instances' must be >= 1");
    n = static_cast<std::size_t>(it->get<std::int64_t>());
  }
  VerificationTask t;
  if (models.size() == 1) {
    t.instances.assign(n, models[0]);
  } else if (models.size() == n) {
    t.instances = models;
  } else {
    throw ValidationError("question declares " + std::to_string(n) + " instances but " + std::to_string(models.size()) +
                          " models were given");
  }
  t.question = j.contains("question") ? formula_from_json(j["question"]) : truth();
  t.background = j.contains("background") ? formula_from_json(j["background"]) : truth();
  validate(t);
  return t;
}

json task_to_json(const VerificationTask& task) {
  return json{{"instances", task.num_instances()},
              {"question", formula_to_json(task.question)},
              {"background", formula_to_json(task.background)}};
}

}  // namespace treeq
