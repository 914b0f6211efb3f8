#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "treeq/domain.hpp"
#include "treeq/model.hpp"

namespace treeq {

enum class Sort : std::uint8_t { Real, Bool };

/// Attribute k of instance i.
struct AttrVar {
  std::uint32_t instance = 0;
  AttrId attr;
  friend bool operator==(const AttrVar&, const AttrVar&) = default;
};

/// Ensemble output F of instance i.
struct OutVar {
  std::uint32_t instance = 0;
  friend bool operator==(const OutVar&, const OutVar&) = default;
};

/// Extra decision variable introduced by the question.
struct AuxVar {
  std::string name;
  Sort sort = Sort::Real;
  friend bool operator==(const AuxVar&, const AuxVar&) = default;
};

using VarRef = std::variant<AttrVar, OutVar, AuxVar>;

inline VarRef attr(std::uint32_t instance, std::uint32_t k) { return AttrVar{instance, AttrId(k)}; }
inline VarRef out(std::uint32_t instance) { return OutVar{instance}; }
inline VarRef aux_real(std::string name) { return AuxVar{std::move(name), Sort::Real}; }
inline VarRef aux_bool(std::string name) { return AuxVar{std::move(name), Sort::Bool}; }

struct Term {
  double coef = 1.0;
  VarRef var;
};

/// sum(coef * var) + constant. Arithmetic on LinExpr adds constants in binary64,
/// so builders that need exact offsets keep them on separate sides of a Cmp.
struct LinExpr {
  std::vector<Term> terms;
  double constant = 0.0;

  LinExpr() = default;
  LinExpr(double c) : constant(c) {}  // NOLINT(google-explicit-constructor)
  LinExpr(VarRef v) : terms{{1.0, std::move(v)}} {}  // NOLINT(google-explicit-constructor)
  LinExpr(std::vector<Term> t, double c) : terms(std::move(t)), constant(c) {}
};

LinExpr operator+(LinExpr a, const LinExpr& b);
LinExpr operator-(LinExpr a, const LinExpr& b);
LinExpr operator*(double c, LinExpr a);

enum class CmpOp : std::uint8_t { Lt, Le, Eq, Ge, Gt };

const char* to_string(CmpOp op);

/// Question AST. And([]) is true, Or([]) is false.
struct Formula {
  enum class Kind : std::uint8_t { Cmp, Var, Not, And, Or, Implies };

  Kind kind = Kind::And;
  CmpOp op = CmpOp::Eq;
  LinExpr lhs;
  LinExpr rhs;
  VarRef var;
  std::vector<Formula> args;
};

Formula cmp(LinExpr lhs, CmpOp op, LinExpr rhs);
inline Formula lt(LinExpr a, LinExpr b) { return cmp(std::move(a), CmpOp::Lt, std::move(b)); }
inline Formula le(LinExpr a, LinExpr b) { return cmp(std::move(a), CmpOp::Le, std::move(b)); }
inline Formula eq(LinExpr a, LinExpr b) { return cmp(std::move(a), CmpOp::Eq, std::move(b)); }
inline Formula ge(LinExpr a, LinExpr b) { return cmp(std::move(a), CmpOp::Ge, std::move(b)); }
inline Formula gt(LinExpr a, LinExpr b) { return cmp(std::move(a), CmpOp::Gt, std::move(b)); }
Formula boolvar(VarRef v);
Formula negate(Formula f);
Formula all_of(std::vector<Formula> fs);
Formula any_of(std::vector<Formula> fs);
Formula implies(Formula a, Formula b);
Formula iff(Formula a, Formula b);
inline Formula truth() { return all_of({}); }
inline Formula falsity() { return any_of({}); }

/// Exactly one of the given formulas holds (pairwise form, as used for
/// selector variables and one-hot groups).
Formula exactly_one(const std::vector<Formula>& fs);

/// At most n of the boolean variables are true. Introduces one auxiliary
/// real per variable, named <prefix><index>, pinned to 0/1.
Formula at_most_true(const std::vector<VarRef>& bools, double n, const std::string& prefix);

struct VerificationTask {
  std::vector<std::shared_ptr<const Ensemble>> instances;
  Formula question;
  Formula background;

  std::size_t num_instances() const { return instances.size(); }
  const Ensemble& ensemble(std::size_t i) const { return *instances[i]; }
};

/// Throws ValidationError naming the first violation with a path into the AST.
void validate(const VerificationTask& task);

// Builders ---------------------------------------------------------------------

VerificationTask single_instance_question(std::shared_ptr<const Ensemble> e, std::vector<Formula> constraints);

/// Two instances equal except on `k`, where the first is smaller, and F > F'.
/// Satisfiable iff the ensemble is not monotone non-decreasing in `k`.
VerificationTask monotonicity_task(std::shared_ptr<const Ensemble> e, AttrId k);

struct AdversarialSpec {
  Instance original;
  double linf = 0.0;                  // |x_k - x'_k| < linf per attribute
  std::optional<double> l1_budget;    // sum_k |x_k - x'_k| < budget
  Formula label = truth();            // over out(i) variables
};

/// One free instance x' near `original`. With several ensembles (one per
/// class) every instance index shares the same attribute values, and
/// `label` may compare their outputs.
VerificationTask adversarial_task(std::vector<std::shared_ptr<const Ensemble>> per_class, const AdversarialSpec& spec);

/// Two instances differing exactly on `protected_attr`, plus `output_gap`.
VerificationTask one_diff_pair_task(std::shared_ptr<const Ensemble> e, AttrId protected_attr, Formula output_gap);

/// Two instances differing in exactly one (unspecified) attribute, tracked by
/// boolean selectors s<k>, plus `output_gap`.
VerificationTask any_single_diff_task(std::shared_ptr<const Ensemble> e, Formula output_gap);

/// Margin equivalent of "sigmoid(F) >= p": F >= ln(p / (1 - p)).
double logit(double p);

/// Sufficient linear condition for softmax probability of `target` >= p
/// among `num_classes` outputs (instance index == class index). Exact for two classes.
Formula class_confidence_at_least(std::uint32_t target, std::uint32_t num_classes, double p);

/// Sufficient linear condition for the probability of `source` being <= p,
/// expressed against the `target` output.
Formula class_probability_at_most(std::uint32_t source, std::uint32_t target, double p);

// Box abstraction --------------------------------------------------------------

/// Tightest box implied by the top-level conjuncts of question and background
/// that bound a single attribute of `instance`. nullopt if they contradict.
std::optional<DomainBox> box_approximation(const VerificationTask& task, std::uint32_t instance);

// Evaluation --------------------------------------------------------------------

/// Exact values for every variable a question may mention.
struct Assignment {
  std::vector<ExactInstance> attrs;  // per instance; booleans as 0/1
  std::vector<Rational> outputs;     // per instance
  std::map<std::string, Rational> aux_real;
  std::map<std::string, bool> aux_bool;
};

/// Exact two-valued evaluation. Missing aux variables read as 0 / false.
bool holds(const Formula& f, const Assignment& a);

/// Collects the distinct auxiliary variables in first-use order.
std::vector<AuxVar> collect_aux(const VerificationTask& task);

// JSON --------------------------------------------------------------------------

nlohmann::json formula_to_json(const Formula& f);
Formula formula_from_json(const nlohmann::json& j);

/// {"instances": N, "question": ast, "background": ast}. `models` supplies one
/// ensemble per instance, or a single ensemble shared by all.
VerificationTask task_from_json(const nlohmann::json& j, const std::vector<std::shared_ptr<const Ensemble>>& models);
nlohmann::json task_to_json(const VerificationTask& task);

}  // namespace treeq
