#include "treeq/encode.hpp"

#include <set>

#include "treeq/error.hpp"

namespace treeq {

std::string EncodingContext::attr_name(std::uint32_t instance, AttrId k) {
  return "a" + std::to_string(k.index) + "_" + std::to_string(instance);
}

std::string EncodingContext::tree_name(std::size_t tree, std::uint32_t instance) {
  return "w" + std::to_string(tree) + "_" + std::to_string(instance);
}

std::string EncodingContext::output_name(std::uint32_t instance) { return "f_" + std::to_string(instance); }

std::string EncodingContext::var_name(const VarRef& v) {
  if (const auto* a = std::get_if<AttrVar>(&v)) return attr_name(a->instance, a->attr);
  if (const auto* o = std::get_if<OutVar>(&v)) return output_name(o->instance);
  return std::get<AuxVar>(v).name;
}

bool SmtScript::declares(const std::string& name) const {
  for (const auto& d : declared)
    if (d.first == name) return true;
  return false;
}

std::string enc_condition(const SplitCondition& c, std::uint32_t instance) {
  const std::string v = EncodingContext::attr_name(instance, c.attr);
  if (c.is_less_than()) return "(< " + v + " " + smt_literal(c.threshold) + ")";
  return v;
}

std::string enc_literal(const TrailLiteral& lit, std::uint32_t instance) {
  std::string c = enc_condition(lit.cond, instance);
  return lit.polarity ? c : "(not " + c + ")";
}

namespace {

void append_node(std::string& out, const Tree& t, Node::Index i, const std::string& w, std::uint32_t instance) {
  const Node& n = t.nodes[i];
  if (n.is_leaf()) {
    out += "(= " + w + " " + smt_literal(n.value) + ")";
    return;
  }
  const std::string c = enc_condition(n.cond, instance);
  out += "(or (and " + c + " ";
  append_node(out, t, n.left, w, instance);
  out += ") (and (not " + c + ") ";
  append_node(out, t, n.right, w, instance);
  out += "))";
}

}  // namespace

std::string enc_node(const Tree& t, Node::Index node, std::size_t tree, std::uint32_t instance) {
  std::string out;
  append_node(out, t, node, EncodingContext::tree_name(tree, instance), instance);
  return out;
}

std::string enc_ensemble(const Ensemble& e, std::uint32_t instance) {
  std::string out = "(and";
  for (std::size_t m = 0; m < e.num_trees(); ++m) {
    out += ' ';
    out += enc_node(e.tree(m), 0, m, instance);
  }
  out += " (= " + EncodingContext::output_name(instance) + " (+ " + smt_literal(e.base_score());
  for (std::size_t m = 0; m < e.num_trees(); ++m) out += " " + EncodingContext::tree_name(m, instance);
  out += ")))";
  return out;
}

std::string enc_linexpr(const LinExpr& e) {
  std::vector<std::string> parts;
  for (const Term& t : e.terms) {
    const std::string v = EncodingContext::var_name(t.var);
    parts.push_back(t.coef == 1.0 ? v : "(* " + smt_literal(t.coef) + " " + v + ")");
  }
  if (e.constant != 0.0 || parts.empty()) parts.push_back(smt_literal(e.constant));
  if (parts.size() == 1) return parts[0];
  std::string out = "(+";
  for (const std::string& p : parts) out += " " + p;
  return out + ")";
}

std::string enc_question(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::Cmp:
      return std::string("(") + to_string(f.op) + " " + enc_linexpr(f.lhs) + " " + enc_linexpr(f.rhs) + ")";
    case Formula::Kind::Var:
      return EncodingContext::var_name(f.var);
    case Formula::Kind::Not:
      return "(not " + enc_question(f.args[0]) + ")";
    case Formula::Kind::Implies:
      return "(=> " + enc_question(f.args[0]) + " " + enc_question(f.args[1]) + ")";
    case Formula::Kind::And:
    case Formula::Kind::Or: {
      const bool conj = f.kind == Formula::Kind::And;
      if (f.args.empty()) return conj ? "true" : "false";
      if (f.args.size() == 1) return enc_question(f.args[0]);
      std::string out = conj ? "(and" : "(or";
      for (const Formula& g : f.args) out += " " + enc_question(g);
      return out + ")";
    }
  }
  return "true";
}

SmtScript build_script(const VerificationTask& task, std::span<const DomainBox> boxes,
                       std::span<const Ensemble* const> ensembles) {
  const std::size_t n = task.num_instances();
  if (ensembles.size() != n || (!boxes.empty() && boxes.size() != n))
    throw ContractViolation("build_script: one ensemble and box per instance required");

  SmtScript script;
  std::set<std::string> names;
  auto declare = [&](const std::string& name, Sort sort) {
    if (!names.insert(name).second) throw ContractViolation("build_script: name collision on '" + name + "'");
    script.declared.emplace_back(name, sort);
  };
  for (std::uint32_t i = 0; i < n; ++i) {
    const Ensemble& e = task.ensemble(i);
    for (std::uint32_t k = 0; k < e.num_attributes(); ++k)
      declare(EncodingContext::attr_name(i, AttrId(k)), e.attr_type(AttrId(k)) == AttrType::Real ? Sort::Real : Sort::Bool);
    for (std::size_t m = 0; m < ensembles[i]->num_trees(); ++m) declare(EncodingContext::tree_name(m, i), Sort::Real);
    declare(EncodingContext::output_name(i), Sort::Real);
  }
  for (const AuxVar& a : collect_aux(task)) declare(a.name, a.sort);

  std::string& s = script.text;
  s += "(set-logic QF_LRA)\n";
  for (const auto& [name, sort] : script.declared)
    s += "(declare-fun " + name + " () " + (sort == Sort::Real ? "Real" : "Bool") + ")\n";
  if (!boxes.empty()) {
    for (std::uint32_t i = 0; i < n; ++i)
      for (const TrailLiteral& lit : boxes[i].trail()) s += "(assert " + enc_literal(lit, i) + ")\n";
  }
  for (std::uint32_t i = 0; i < n; ++i) s += "(assert " + enc_ensemble(*ensembles[i], i) + ")\n";
  s += "(assert " + enc_question(task.question) + ")\n";
  s += "(assert " + enc_question(task.background) + ")\n";
  s += "(check-sat)\n(get-value (";
  for (std::size_t d = 0; d < script.declared.size(); ++d) s += (d ? " " : "") + script.declared[d].first;
  s += "))\n";
  return script;
}

SmtScript build_feasibility_script(const VerificationTask& task, std::span<const DomainBox> boxes) {
  const std::size_t n = task.num_instances();
  if (boxes.size() != n) throw ContractViolation("build_feasibility_script: one box per instance required");
  SmtScript script;
  for (std::uint32_t i = 0; i < n; ++i) {
    const Ensemble& e = task.ensemble(i);
    for (std::uint32_t k = 0; k < e.num_attributes(); ++k)
      script.declared.emplace_back(EncodingContext::attr_name(i, AttrId(k)),
                                   e.attr_type(AttrId(k)) == AttrType::Real ? Sort::Real : Sort::Bool);
    script.declared.emplace_back(EncodingContext::output_name(i), Sort::Real);
  }
  for (const AuxVar& a : collect_aux(task)) script.declared.emplace_back(a.name, a.sort);
  std::string& s = script.text;
  s += "(set-logic QF_LRA)\n";
  for (const auto& [name, sort] : script.declared)
    s += "(declare-fun " + name + " () " + (sort == Sort::Real ? "Real" : "Bool") + ")\n";
  for (std::uint32_t i = 0; i < n; ++i)
    for (const TrailLiteral& lit : boxes[i].trail()) s += "(assert " + enc_literal(lit, i) + ")\n";
  s += "(assert " + enc_question(task.question) + ")\n";
  s += "(assert " + enc_question(task.background) + ")\n";
  s += "(check-sat)\n";
  script.requests_model = false;
  return script;
}

SmtScript build_script(const VerificationTask& task) {
  std::vector<const Ensemble*> es;
  for (const auto& e : task.instances) es.push_back(e.get());
  return build_script(task, {}, es);
}

}  // namespace treeq
