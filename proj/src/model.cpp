#include "treeq/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "treeq/error.hpp"

namespace treeq {

using nlohmann::json;

std::string to_string(const SplitCondition& c) {
  std::ostringstream os;
  if (c.is_less_than()) {
    os << "A" << c.attr.index << " < " << exact_decimal(c.threshold);
  } else {
    os << "A" << c.attr.index;
  }
  return os.str();
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.is_leaf(); }));
}

namespace {

std::string where(std::size_t tree, std::size_t node) {
  return "tree " + std::to_string(tree) + ", node " + std::to_string(node) + ": ";
}

void validate_tree(const Tree& t, std::size_t m, const std::vector<AttrType>& types) {
  if (t.nodes.empty()) throw ValidationError("tree " + std::to_string(m) + ": no nodes");
  const std::size_t n = t.nodes.size();
  std::vector<int> parents(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = t.nodes[i];
    if (node.is_leaf()) {
      if (!std::isfinite(node.value)) throw ValidationError(where(m, i) + "leaf value is not finite");
      continue;
    }
    const SplitCondition& c = node.cond;
    if (c.attr.index >= types.size())
      throw ValidationError(where(m, i) + "attribute " + std::to_string(c.attr.index) + " out of range (K=" +
                            std::to_string(types.size()) + ")");
    if (c.is_less_than()) {
      if (types[c.attr.index] != AttrType::Real)
        throw ValidationError(where(m, i) + "less-than split on boolean attribute " + std::to_string(c.attr.index));
      if (!std::isfinite(c.threshold)) throw ValidationError(where(m, i) + "threshold is not finite");
    } else if (types[c.attr.index] != AttrType::Bool) {
      throw ValidationError(where(m, i) + "boolean split on real attribute " + std::to_string(c.attr.index));
    }
    for (Node::Index child : {node.left, node.right}) {
      if (child >= n)
        throw ValidationError(where(m, i) + "child index " + std::to_string(child) + " out of range (" +
                              std::to_string(n) + " nodes)");
      if (child == 0) throw ValidationError(where(m, i) + "cyclic reference to the root");
      ++parents[child];
    }
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (parents[i] > 1) throw ValidationError(where(m, i) + "node has more than one parent");
    if (parents[i] == 0) throw ValidationError(where(m, i) + "node is unreachable from the root");
  }
  // Every non-root node has exactly one parent and the root none, so the only
  // way to be malformed now is a cycle detached from the root.
  std::vector<bool> seen(n, false);
  std::vector<Node::Index> stack{0};
  std::size_t visited = 0;
  while (!stack.empty()) {
    Node::Index i = stack.back();
    stack.pop_back();
    if (seen[i]) throw ValidationError(where(m, i) + "cyclic node reference");
    seen[i] = true;
    ++visited;
    const Node& node = t.nodes[i];
    if (!node.is_leaf()) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    }
  }
  if (visited != n) {
    auto it = std::find(seen.begin(), seen.end(), false);
    throw ValidationError(where(m, static_cast<std::size_t>(it - seen.begin())) + "cyclic node reference");
  }
}

template <class Number>
Rational exact_sum(const Ensemble& e, std::span<const Number> x) {
  Rational sum = to_rational(e.base_score());
  for (const Tree& t : e.trees()) sum += to_rational(t.leaf_for(x).value);
  return sum;
}

}  // namespace

Ensemble::Ensemble(std::vector<AttrType> attr_types, std::vector<Tree> trees, double base_score)
    : attr_types_(std::move(attr_types)), trees_(std::move(trees)), base_score_(base_score) {
  if (trees_.empty()) throw ValidationError("ensemble has no trees");
  if (!std::isfinite(base_score_)) throw ValidationError("base_score is not finite");
  for (std::size_t m = 0; m < trees_.size(); ++m) validate_tree(trees_[m], m, attr_types_);
}

double evaluate(const Ensemble& e, std::span<const double> x) {
  double sum = e.base_score();
  for (const Tree& t : e.trees()) sum += t.leaf_for(x).value;
  return sum;
}

Rational evaluate_exact(const Ensemble& e, std::span<const double> x) { return exact_sum(e, x); }
Rational evaluate_exact(const Ensemble& e, std::span<const Rational> x) { return exact_sum(e, x); }

std::size_t leaf_count(const Ensemble& e) {
  std::size_t total = 0;
  for (const Tree& t : e.trees()) total += t.leaf_count();
  return total;
}

std::vector<SplitCondition> collect_splits(const Ensemble& e) {
  std::vector<SplitCondition> out;
  for (const Tree& t : e.trees())
    for (const Node& n : t.nodes)
      if (!n.is_leaf()) out.push_back(n.cond);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void check_instance(const Ensemble& e, std::span<const double> x) {
  if (x.size() != e.num_attributes())
    throw ValidationError("instance has " + std::to_string(x.size()) + " values, expected " +
                          std::to_string(e.num_attributes()));
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k])) throw ValidationError("instance value " + std::to_string(k) + " is not finite");
    if (e.attr_types()[k] == AttrType::Bool && x[k] != 0.0 && x[k] != 1.0)
      throw ValidationError("instance value " + std::to_string(k) + " must be boolean");
  }
}

// JSON -----------------------------------------------------------------------

namespace {

const json& require(const json& j, const char* key, const std::string& context) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(context + "missing key '" + key + "'");
  return *it;
}

double number(const json& j, const std::string& context) {
  if (!j.is_number()) throw ParseError(context + "expected a number");
  return j.get<double>();
}

std::uint32_t attr_index(const json& j, const std::string& context) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) throw ParseError(context + "attribute must be a non-negative integer");
  return static_cast<std::uint32_t>(j.get<std::int64_t>());
}

Node node_header(const json& j, const std::string& context) {
  if (!j.is_object()) throw ParseError(context + "node must be an object");
  if (auto it = j.find("leaf"); it != j.end()) return Node::make_leaf(number(*it, context));
  if (auto it = j.find("lt"); it != j.end()) {
    AttrId a(attr_index(require(*it, "attr", context), context));
    return Node::make_internal(SplitCondition::less_than(a, number(require(*it, "threshold", context), context)), 0, 0);
  }
  if (auto it = j.find("bool"); it != j.end()) {
    AttrId a(attr_index(require(*it, "attr", context), context));
    return Node::make_internal(SplitCondition::is_true(a), 0, 0);
  }
  throw ParseError(context + "node needs one of 'leaf', 'lt', 'bool'");
}

void flatten_nested(const json& j, Tree& t, std::size_t m) {
  const std::size_t self = t.nodes.size();
  const std::string context = where(m, self);
  t.nodes.push_back(node_header(j, context));
  if (t.nodes[self].is_leaf()) return;
  const json& left = require(j, "left", context);
  const json& right = require(j, "right", context);
  t.nodes[self].left = static_cast<Node::Index>(t.nodes.size());
  flatten_nested(left, t, m);
  t.nodes[self].right = static_cast<Node::Index>(t.nodes.size());
  flatten_nested(right, t, m);
}

Node::Index child_index(const json& j, const std::string& context) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) throw ParseError(context + "child must be a node index");
  return static_cast<Node::Index>(j.get<std::int64_t>());
}

Tree tree_from_json(const json& j, std::size_t m) {
  Tree t;
  if (j.is_object() && j.contains("nodes")) {
    const json& nodes = j["nodes"];
    if (!nodes.is_array()) throw ParseError("tree " + std::to_string(m) + ": 'nodes' must be an array");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const std::string context = where(m, i);
      Node n = node_header(nodes[i], context);
      if (!n.is_leaf()) {
        n.left = child_index(require(nodes[i], "left", context), context);
        n.right = child_index(require(nodes[i], "right", context), context);
      }
      t.nodes.push_back(n);
    }
  } else {
    flatten_nested(j, t, m);
  }
  return t;
}

json node_to_json(const Tree& t, Node::Index i) {
  const Node& n = t.nodes[i];
  if (n.is_leaf()) return json{{"leaf", n.value}};
  json j = split_to_json(n.cond);
  j["left"] = node_to_json(t, n.left);
  j["right"] = node_to_json(t, n.right);
  return j;
}

}  // namespace

json split_to_json(const SplitCondition& c) {
  if (c.is_less_than()) return json{{"lt", {{"attr", c.attr.index}, {"threshold", c.threshold}}}};
  return json{{"bool", {{"attr", c.attr.index}}}};
}

SplitCondition split_from_json(const json& j) {
  Node n = node_header(j, "");
  if (n.is_leaf()) throw ParseError("expected a split condition, got a leaf");
  return n.cond;
}

Ensemble ensemble_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("model must be a JSON object");
  const json& trees_json = require(j, "trees", "model: ");
  if (!trees_json.is_array()) throw ParseError("model: 'trees' must be an array");

  std::vector<AttrType> types;
  if (auto it = j.find("attr_types"); it != j.end()) {
    if (!it->is_array()) throw ParseError("model: 'attr_types' must be an array");
    for (const json& t : *it) {
      if (t == "real") {
        types.push_back(AttrType::Real);
      } else if (t == "bool") {
        types.push_back(AttrType::Bool);
      } else {
        throw ParseError("model: unknown attribute type " + t.dump());
      }
    }
  }
  if (auto it = j.find("num_attributes"); it != j.end()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0) throw ParseError("model: bad 'num_attributes'");
    auto k = static_cast<std::size_t>(it->get<std::int64_t>());
    if (!j.contains("attr_types")) {
      types.assign(k, AttrType::Real);
    } else if (types.size() != k) {
      throw ValidationError("model: num_attributes=" + std::to_string(k) + " but " + std::to_string(types.size()) +
                            " attr_types");
    }
  } else if (!j.contains("attr_types")) {
    throw ParseError("model: missing 'num_attributes'");
  }

  double base = 0.0;
  if (auto it = j.find("base_score"); it != j.end()) base = number(*it, "model: base_score: ");

  std::vector<Tree> trees;
  for (std::size_t m = 0; m < trees_json.size(); ++m) trees.push_back(tree_from_json(trees_json[m], m));
  return Ensemble(std::move(types), std::move(trees), base);
}

json ensemble_to_json(const Ensemble& e) {
  json types = json::array();
  for (AttrType t : e.attr_types()) types.push_back(t == AttrType::Real ? "real" : "bool");
  json trees = json::array();
  for (const Tree& t : e.trees()) trees.push_back(node_to_json(t, 0));
  return json{{"num_attributes", e.num_attributes()}, {"attr_types", types}, {"base_score", e.base_score()}, {"trees", trees}};
}

Ensemble load_ensemble(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw ParseError(std::string("model JSON: ") + ex.what());
  }
  return ensemble_from_json(j);
}

Ensemble load_ensemble(std::string_view text) {
  std::istringstream in{std::string(text)};
  return load_ensemble(in);
}

Ensemble load_ensemble_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file '" + path + "'");
  try {
    return load_ensemble(in);
  } catch (const ParseError& ex) {
    throw ParseError(path + ": " + ex.what());
  } catch (const ValidationError& ex) {
    throw ValidationError(path + ": " + ex.what());
  }
}

std::string save_ensemble(const Ensemble& e) { return ensemble_to_json(e).dump(); }

Instance instance_from_json(const json& j, const Ensemble& e) {
  const json& values = j.is_object() ? require(j, "values", "instance: ") : j;
  if (!values.is_array()) throw ParseError("instance: expected an array of values");
  Instance x;
  for (const json& v : values) {
    if (v.is_boolean()) {
      x.push_back(v.get<bool>() ? 1.0 : 0.0);
    } else if (v.is_number()) {
      x.push_back(v.get<double>());
    } else {
      throw ParseError("instance: values must be numbers or booleans");
    }
  }
  check_instance(e, x);
  return x;
}

json instance_to_json(std::span<const Rational> x, const std::vector<AttrType>& types) {
  json out = json::array();
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (types[k] == AttrType::Bool) {
      out.push_back(x[k] != 0);
    } else if (x[k].get_den() == 1 && abs(x[k]) < Rational(4503599627370496.0)) {
      out.push_back(x[k].get_num().get_si());
    } else {
      out.push_back(to_string(x[k]));
    }
  }
  return out;
}

// XGBoost ----------------------------------------------------------------------

namespace {

std::uint32_t xgb_feature(const json& node, const std::string& context) {
  const json& split = require(node, "split", context);
  if (split.is_number_integer()) return static_cast<std::uint32_t>(split.get<std::int64_t>());
  if (!split.is_string()) throw ParseError(context + "'split' must name a feature");
  std::string name = split.get<std::string>();
  std::size_t start = (!name.empty() && name[0] == 'f') ? 1 : 0;
  try {
    std::size_t used = 0;
    unsigned long v = std::stoul(name.substr(start), &used);
    if (used != name.size() - start) throw std::invalid_argument(name);
    return static_cast<std::uint32_t>(v);
  } catch (const std::exception&) {
    throw ParseError(context + "feature name '" + name + "' is not of the form f<index>");
  }
}

struct XgbBuilder {
  Tree tree;
  std::size_t m;
  std::vector<std::uint32_t>& max_feature;
  std::vector<bool>& indicator;

  Node::Index add(const json& node) {
    const std::string context = "xgboost tree " + std::to_string(m) + ": ";
    if (!node.is_object()) throw ParseError(context + "node must be an object");
    Node::Index self = static_cast<Node::Index>(tree.nodes.size());
    if (auto it = node.find("leaf"); it != node.end()) {
      tree.nodes.push_back(Node::make_leaf(number(*it, context)));
      return self;
    }
    std::uint32_t f = xgb_feature(node, context);
    if (indicator.size() <= f) indicator.resize(f + 1, false);
    max_feature.push_back(f);
    const bool is_indicator = !node.contains("split_condition");
    if (is_indicator) indicator[f] = true;
    SplitCondition c = is_indicator ? SplitCondition::is_true(AttrId(f))
                                    : SplitCondition::less_than(AttrId(f), number(node["split_condition"], context));
    tree.nodes.push_back(Node::make_internal(c, 0, 0));

    const json& children = require(node, "children", context);
    auto yes_id = require(node, "yes", context).get<std::int64_t>();
    auto no_id = require(node, "no", context).get<std::int64_t>();
    const json* yes = nullptr;
    const json* no = nullptr;
    for (const json& child : children) {
      auto id = require(child, "nodeid", context).get<std::int64_t>();
      if (id == yes_id) yes = &child;
      if (id == no_id) no = &child;
    }
    if (yes == nullptr || no == nullptr) throw ParseError(context + "children do not match yes/no ids");
    Node::Index l = add(*yes);
    Node::Index r = add(*no);
    tree.nodes[self].left = l;
    tree.nodes[self].right = r;
    return self;
  }
};

}  // namespace

Ensemble import_xgboost_dump(const json& dump, const XgboostImportOptions& options) {
  if (!dump.is_array()) throw ParseError("xgboost dump must be a JSON array of trees");
  if (options.num_class == 0 || options.class_index >= options.num_class)
    throw ValidationError("class index out of range");
  std::vector<std::uint32_t> features;
  std::vector<bool> indicator;
  std::vector<Tree> trees;
  for (std::size_t m = 0; m < dump.size(); ++m) {
    if (m % options.num_class != options.class_index) continue;
    XgbBuilder b{{}, m, features, indicator};
    b.add(dump[m]);
    trees.push_back(std::move(b.tree));
  }
  std::size_t k = features.empty() ? 0 : *std::max_element(features.begin(), features.end()) + 1;
  if (options.num_attributes) {
    if (*options.num_attributes < k) throw ValidationError("num_attributes smaller than largest feature index");
    k = *options.num_attributes;
  }
  std::vector<AttrType> types(k, AttrType::Real);
  for (std::size_t f = 0; f < indicator.size() && f < k; ++f)
    if (indicator[f]) types[f] = AttrType::Bool;
  for (std::uint32_t f : options.bool_attributes) {
    if (f >= k) throw ValidationError("boolean attribute " + std::to_string(f) + " out of range");
    types[f] = AttrType::Bool;
  }
  return Ensemble(std::move(types), std::move(trees), options.base_score);
}

}  // namespace treeq
