#include "treeq/reduce.hpp"

#include "treeq/error.hpp"

namespace treeq {

namespace {

void check_box(const Ensemble& e, const DomainBox& box, const char* who) {
  if (box.size() != e.num_attributes())
    throw ContractViolation(std::string(who) + ": box has " + std::to_string(box.size()) + " attributes, ensemble " +
                            std::to_string(e.num_attributes()));
  for (std::size_t k = 0; k < box.size(); ++k)
    if (box.at(k).is_bool != (e.attr_type(AttrId(static_cast<std::uint32_t>(k))) == AttrType::Bool))
      throw ContractViolation(std::string(who) + ": box type mismatch on attribute " + std::to_string(k));
}

class TreePruner {
 public:
  TreePruner(const Tree& src, const BranchFeasible& feasible) : src_(src), feasible_(feasible) {}

  Tree run(const DomainBox& box) {
    visit(0, box);
    return std::move(out_);
  }

 private:
  Node::Index visit(Node::Index i, const DomainBox& box) {
    const Node& n = src_.nodes[i];
    if (n.is_leaf()) {
      out_.nodes.push_back(n);
      return static_cast<Node::Index>(out_.nodes.size() - 1);
    }
    Relation r = box.relation(n.cond);
    if (r == Relation::AlwaysTrue) return visit(n.left, box);
    if (r == Relation::AlwaysFalse) return visit(n.right, box);
    DomainBox lbox = *box.refine(n.cond, true);
    DomainBox rbox = *box.refine(n.cond, false);
    if (feasible_) {
      bool lok = feasible_(lbox);
      bool rok = feasible_(rbox);
      if (lok && !rok) return visit(n.left, lbox);
      if (rok && !lok) return visit(n.right, rbox);
    }
    const auto self = static_cast<Node::Index>(out_.nodes.size());
    out_.nodes.push_back(Node::make_internal(n.cond, 0, 0));
    Node::Index l = visit(n.left, lbox);
    Node::Index rr = visit(n.right, rbox);
    out_.nodes[self].left = l;
    out_.nodes[self].right = rr;
    return self;
  }

  const Tree& src_;
  const BranchFeasible& feasible_;
  Tree out_;
};

struct Counter {
  std::size_t total = 0;
  std::size_t in_left = 0;
  std::size_t in_right = 0;
};

std::optional<DomainBox> narrow(const std::optional<DomainBox>& b, const SplitCondition& c, bool polarity) {
  if (!b) return std::nullopt;
  return b->refine(c, polarity);
}

void count_walk(const Tree& t, Node::Index i, const DomainBox& box, const std::optional<DomainBox>& lb,
                const std::optional<DomainBox>& rb, Counter& acc) {
  const Node& n = t.nodes[i];
  if (n.is_leaf()) {
    ++acc.total;
    acc.in_left += lb.has_value();
    acc.in_right += rb.has_value();
    return;
  }
  for (bool pol : {true, false}) {
    std::optional<DomainBox> nb = box.refine(n.cond, pol);
    if (!nb) continue;
    count_walk(t, pol ? n.left : n.right, *nb, narrow(lb, n.cond, pol), narrow(rb, n.cond, pol), acc);
  }
}

}  // namespace

PrunedEnsemble prune(const Ensemble& e, const DomainBox& box, const BranchFeasible& feasible) {
  check_box(e, box, "prune");
  std::vector<Tree> trees;
  trees.reserve(e.num_trees());
  for (const Tree& t : e.trees()) trees.push_back(TreePruner(t, feasible).run(box));
  Ensemble pruned(e.attr_types(), std::move(trees), e.base_score());
  const std::size_t after = leaf_count(pruned);
  return {std::move(pruned), leaf_count(e), after};
}

LeafCounts unreachable_leaf_count(const Ensemble& e, const DomainBox& box, const SplitCondition& c) {
  check_box(e, box, "unreachable_leaf_count");
  if (box.relation(c) != Relation::Undecided)
    throw ContractViolation("unreachable_leaf_count: " + to_string(c) + " is decided by the box");
  const std::optional<DomainBox> lb = box.refine(c, true);
  const std::optional<DomainBox> rb = box.refine(c, false);
  Counter acc;
  for (const Tree& t : e.trees()) count_walk(t, 0, box, lb, rb, acc);
  return {acc.total - acc.in_left, acc.total - acc.in_right};
}

std::optional<SplitChoice> best_split(const Ensemble& e, const DomainBox& box) {
  std::optional<SplitChoice> best;
  for (const SplitCondition& c : collect_splits(e)) {
    if (box.relation(c) != Relation::Undecided) continue;
    LeafCounts lc = unreachable_leaf_count(e, box, c);
    const std::size_t score = lc.left + lc.right;
    if (score == 0) continue;
    if (!best) {
      best = SplitChoice{c, lc};
      continue;
    }
    const std::size_t best_score = best->counts.left + best->counts.right;
    const std::size_t best_min = std::min(best->counts.left, best->counts.right);
    if (score > best_score || (score == best_score && std::min(lc.left, lc.right) > best_min)) best = SplitChoice{c, lc};
  }
  return best;
}

}  // namespace treeq
