#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "treeq/domain.hpp"
#include "treeq/model.hpp"
#include "treeq/question.hpp"

namespace treeq {

/// Solver-side names: attribute k of instance i is a{k}_{i}, tree m's output
/// w{m}_{i}, the ensemble output f_{i}; auxiliaries keep their own names.
struct EncodingContext {
  static std::string attr_name(std::uint32_t instance, AttrId k);
  static std::string tree_name(std::size_t tree, std::uint32_t instance);
  static std::string output_name(std::uint32_t instance);
  static std::string var_name(const VarRef& v);
};

struct SmtScript {
  std::string text;
  std::vector<std::pair<std::string, Sort>> declared;  // declaration order
  bool requests_model = true;

  bool declares(const std::string& name) const;
};

std::string enc_condition(const SplitCondition& c, std::uint32_t instance);
std::string enc_literal(const TrailLiteral& lit, std::uint32_t instance);

/// Compact encoding of the subtree rooted at `node`:
/// (or (and cond enc(left)) (and (not cond) enc(right))), leaves (= w v).
std::string enc_node(const Tree& t, Node::Index node, std::size_t tree, std::uint32_t instance);

/// (and enc(T_1) ... enc(T_M) (= f_i (+ base w0_i ... )))
std::string enc_ensemble(const Ensemble& e, std::uint32_t instance);

std::string enc_linexpr(const LinExpr& e);
std::string enc_question(const Formula& f);

/// Full QF_LRA script: declarations, one assert per box literal, the
/// ensemble encodings, question and background, check-sat and get-value
/// over every declared variable. `boxes` and `ensembles` are per instance;
/// `ensembles` may be pruned versions of the task's ensembles.
SmtScript build_script(const VerificationTask& task, std::span<const DomainBox> boxes,
                       std::span<const Ensemble* const> ensembles);

/// Same, with the task's own ensembles and no box literals.
SmtScript build_script(const VerificationTask& task);

/// Question, background and box literals without any ensemble: outputs are
/// free. Used to test whether a branch can matter at all. No get-value.
SmtScript build_feasibility_script(const VerificationTask& task, std::span<const DomainBox> boxes);

}  // namespace treeq
