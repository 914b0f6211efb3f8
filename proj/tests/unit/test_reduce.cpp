#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "treeq/error.hpp"
#include "treeq/reduce.hpp"

namespace treeq {
namespace {

using testing::figure_one;

const SplitCondition kA1lt5 = SplitCondition::less_than(AttrId(0), 5.0);
const SplitCondition kA1lt3 = SplitCondition::less_than(AttrId(0), 3.0);
const SplitCondition kA2 = SplitCondition::is_true(AttrId(1));

DomainBox all() { return DomainBox::unconstrained(figure_one()->attr_types()); }

std::multiset<double> leaves(const Ensemble& e) {
  std::multiset<double> out;
  for (const Tree& t : e.trees())
    for (const Node& n : t.nodes)
      if (n.is_leaf()) out.insert(n.value);
  return out;
}

TEST(Prune, LeftOfFive) {
  auto p = prune(*figure_one(), *all().refine(kA1lt5, true));
  EXPECT_EQ(p.original_leaves, 5u);
  EXPECT_EQ(p.pruned_leaves, 4u);
  ASSERT_EQ(p.ensemble.tree(0).nodes.size(), 1u);
  EXPECT_EQ(p.ensemble.tree(0).root().value, 1.0);
  EXPECT_EQ(p.ensemble.tree(1), figure_one()->tree(1));
}

TEST(Prune, RightOfFive) {
  auto p = prune(*figure_one(), *all().refine(kA1lt5, false));
  EXPECT_EQ(p.pruned_leaves, 3u);
  EXPECT_EQ(leaves(p.ensemble), (std::multiset<double>{2, 4, 5}));
}

TEST(Prune, Unconstrained) {
  auto p = prune(*figure_one(), all());
  EXPECT_EQ(p.ensemble, *figure_one());
  EXPECT_EQ(p.pruned_leaves, 5u);
}

TEST(Prune, MismatchedBox) {
  EXPECT_THROW(prune(*figure_one(), DomainBox::unconstrained(std::vector<AttrType>{AttrType::Real})),
               ContractViolation);
  EXPECT_THROW(prune(*figure_one(), DomainBox::unconstrained(std::vector<AttrType>{AttrType::Bool, AttrType::Bool})),
               ContractViolation);
}

TEST(Prune, FeasibilityCallbackDropsBranches) {
  // pretend every box with A2 = true is infeasible
  BranchFeasible no_true = [](const DomainBox& b) { return b.at(1).boolean != BoolDomain::True; };
  auto p = prune(*figure_one(), all(), no_true);
  EXPECT_EQ(leaves(p.ensemble), (std::multiset<double>{1, 2, 5}));
}

TEST(Prune, SoundOnRandomBoxes) {
  testing::Rng rng(3);
  for (int n = 0; n < 500; ++n) {
    auto e = testing::random_ensemble(rng);
    DomainBox b = testing::random_box(rng, *e, 4);
    auto p = prune(*e, b);
    EXPECT_LE(p.pruned_leaves, p.original_leaves);
    Instance x = testing::random_point(rng, *e, b);
    EXPECT_EQ(evaluate_exact(p.ensemble, x), evaluate_exact(*e, x));
  }
}

TEST(SplitCounts, FigureOne) {
  auto e = figure_one();
  auto c5 = unreachable_leaf_count(*e, all(), kA1lt5);
  EXPECT_EQ(c5.left, 1u);
  EXPECT_EQ(c5.right, 2u);
  auto c2 = unreachable_leaf_count(*e, all(), kA2);
  EXPECT_EQ(c2.left, 1u);
  EXPECT_EQ(c2.right, 2u);
  auto c3 = unreachable_leaf_count(*e, all(), kA1lt3);
  EXPECT_EQ(c3.left, 2u);
  EXPECT_EQ(c3.right, 1u);
}

TEST(SplitCounts, DecidedConditionRejected) {
  auto box = all().refine(kA1lt3, true);
  EXPECT_THROW(unreachable_leaf_count(*figure_one(), *box, kA1lt5), ContractViolation);
}

TEST(BestSplit, FigureOne) {
  auto s = best_split(*figure_one(), all());
  ASSERT_TRUE(s);
  EXPECT_EQ(s->cond, kA1lt3);
  auto below3 = best_split(*figure_one(), *all().refine(kA1lt3, true));
  ASSERT_TRUE(below3);
  EXPECT_EQ(below3->cond, kA2);
}

TEST(BestSplit, NoSplitOnLeaf) {
  Ensemble e(std::vector<AttrType>{AttrType::Real}, {Tree{{Node::make_leaf(1)}}});
  EXPECT_FALSE(best_split(e, DomainBox::unconstrained(e.attr_types())));
  auto fully = all().refine(kA1lt3, true)->refine(kA2, true);
  EXPECT_FALSE(best_split(*figure_one(), *fully));
}

TEST(BestSplit, MatchesPruneDifference) {
  testing::Rng rng(5);
  for (int n = 0; n < 200; ++n) {
    auto e = testing::random_ensemble(rng);
    DomainBox b = testing::random_box(rng, *e, 2);
    const std::size_t base = prune(*e, b).pruned_leaves;
    for (const SplitCondition& c : collect_splits(*e)) {
      if (b.relation(c) != Relation::Undecided) continue;
      auto counts = unreachable_leaf_count(*e, b, c);
      EXPECT_EQ(counts.left, base - prune(*e, *b.refine(c, true)).pruned_leaves);
      EXPECT_EQ(counts.right, base - prune(*e, *b.refine(c, false)).pruned_leaves);
    }
  }
}

}  // namespace
}  // namespace treeq
