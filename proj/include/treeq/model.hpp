#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "treeq/rational.hpp"

namespace treeq {

/// Index of an input attribute, in [0, K).
struct AttrId {
  std::uint32_t index = 0;

  constexpr AttrId() = default;
  constexpr explicit AttrId(std::uint32_t i) : index(i) {}
  friend constexpr auto operator<=>(AttrId, AttrId) = default;
};

enum class AttrType : std::uint8_t { Real, Bool };

/// A node test. LessThan routes left iff x[attr] < threshold (values equal to
/// the threshold go right); BoolIsTrue routes left iff x[attr] is true.
struct SplitCondition {
  enum class Kind : std::uint8_t { LessThan, BoolIsTrue };

  Kind kind = Kind::LessThan;
  AttrId attr;
  double threshold = 0.0;  // unused for BoolIsTrue

  static SplitCondition less_than(AttrId attr, double threshold) { return {Kind::LessThan, attr, threshold}; }
  static SplitCondition is_true(AttrId attr) { return {Kind::BoolIsTrue, attr, 0.0}; }

  bool is_less_than() const { return kind == Kind::LessThan; }

  template <class Number>
  bool holds(const Number& value) const {
    if (kind == Kind::LessThan) return value < threshold;
    return value != 0;
  }

  friend bool operator==(const SplitCondition&, const SplitCondition&) = default;
  /// Canonical order: attribute ascending, LessThan before BoolIsTrue, threshold ascending.
  friend bool operator<(const SplitCondition& a, const SplitCondition& b) {
    if (a.attr != b.attr) return a.attr < b.attr;
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.threshold < b.threshold;
  }
};

std::string to_string(const SplitCondition& c);

struct Node {
  using Index = std::uint32_t;

  SplitCondition cond;
  Index left = 0;
  Index right = 0;
  double value = 0.0;
  bool leaf = true;

  static Node make_leaf(double value) { return Node{{}, 0, 0, value, true}; }
  static Node make_internal(SplitCondition cond, Index left, Index right) { return Node{cond, left, right, 0.0, false}; }

  bool is_leaf() const { return leaf; }
  friend bool operator==(const Node&, const Node&) = default;
};

/// Binary tree stored as a node array; node 0 is the root.
struct Tree {
  std::vector<Node> nodes;

  const Node& root() const { return nodes.front(); }
  std::size_t leaf_count() const;

  template <class Number>
  const Node& leaf_for(std::span<const Number> x) const {
    const Node* n = &nodes[0];
    while (!n->is_leaf()) n = &nodes[n->cond.holds(x[n->cond.attr.index]) ? n->left : n->right];
    return *n;
  }

  friend bool operator==(const Tree&, const Tree&) = default;
};

/// Boolean attribute values are stored as 0.0 / 1.0.
using Instance = std::vector<double>;
using ExactInstance = std::vector<Rational>;

/// An additive ensemble of binary trees. Immutable once constructed; the
/// constructor enforces every structural invariant.
class Ensemble {
 public:
  Ensemble(std::vector<AttrType> attr_types, std::vector<Tree> trees, double base_score = 0.0);

  std::size_t num_attributes() const { return attr_types_.size(); }
  std::size_t num_trees() const { return trees_.size(); }
  const std::vector<AttrType>& attr_types() const { return attr_types_; }
  AttrType attr_type(AttrId a) const { return attr_types_[a.index]; }
  const std::vector<Tree>& trees() const { return trees_; }
  const Tree& tree(std::size_t m) const { return trees_[m]; }
  double base_score() const { return base_score_; }

  friend bool operator==(const Ensemble&, const Ensemble&) = default;

 private:
  std::vector<AttrType> attr_types_;
  std::vector<Tree> trees_;
  double base_score_;
};

/// base_score + sum of reached leaf values, in binary64 arithmetic.
double evaluate(const Ensemble& e, std::span<const double> x);
/// Same sum computed exactly.
Rational evaluate_exact(const Ensemble& e, std::span<const double> x);
Rational evaluate_exact(const Ensemble& e, std::span<const Rational> x);

std::size_t leaf_count(const Ensemble& e);

/// Distinct split conditions in canonical order.
std::vector<SplitCondition> collect_splits(const Ensemble& e);

/// Throws ValidationError if x does not type-conform to e.
void check_instance(const Ensemble& e, std::span<const double> x);

// Model JSON ----------------------------------------------------------------

Ensemble load_ensemble(std::istream& in);
Ensemble load_ensemble(std::string_view text);
Ensemble load_ensemble_file(const std::string& path);
Ensemble ensemble_from_json(const nlohmann::json& j);
nlohmann::json ensemble_to_json(const Ensemble& e);
std::string save_ensemble(const Ensemble& e);

nlohmann::json split_to_json(const SplitCondition& c);
SplitCondition split_from_json(const nlohmann::json& j);

/// Reads an instance file: a JSON array, or {"values": [...]}, with numbers
/// for real attributes and true/false (or 0/1) for boolean ones.
Instance instance_from_json(const nlohmann::json& j, const Ensemble& e);
nlohmann::json instance_to_json(std::span<const Rational> x, const std::vector<AttrType>& types);

// XGBoost dump conversion ------------------------------------------------------

struct XgboostImportOptions {
  std::optional<std::size_t> num_attributes;  // default: max feature index + 1
  std::vector<std::uint32_t> bool_attributes;  // attributes forced to Bool
  double base_score = 0.0;
  std::size_t num_class = 1;  // trees are grouped round-robin per class
  std::size_t class_index = 0;
};

/// Converts the output of XGBoost's `dump_model(..., dump_format="json")`.
/// Splits without a `split_condition` are indicator splits; their `yes`
/// branch is taken when the attribute is true.
Ensemble import_xgboost_dump(const nlohmann::json& dump, const XgboostImportOptions& options);

}  // namespace treeq
