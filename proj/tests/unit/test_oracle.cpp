#include <gtest/gtest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "treeq/error.hpp"
#include "treeq/oracle.hpp"

namespace treeq {
namespace {

using testing::figure_one;

TEST(Oracle, LeafPaths) {
  auto paths = leaf_paths(figure_one()->tree(1));
  ASSERT_EQ(paths.size(), 3u);
  EXPECT_EQ(paths[0].value, 3.0);
  EXPECT_EQ(paths[0].literals.size(), 2u);
  EXPECT_EQ(paths[2].value, 5.0);
  EXPECT_EQ(paths[2].literals.size(), 1u);
  ExactInstance x{Rational(7, 2), Rational(1)};
  EXPECT_EQ(path_evaluate(*figure_one(), x), Rational(5));
}

TEST(Oracle, FigureOneCombos) {
  auto combos = enumerate_combos(*figure_one());
  std::vector<Rational> outs;
  for (const auto& c : combos) outs.push_back(c.output);
  std::sort(outs.begin(), outs.end());
  EXPECT_EQ(outs, (std::vector<Rational>{4, 5, 6, 6, 7}));
  // T1 leaf 2 (A1 >= 5) with T2 leaf 3 (A2, A1 < 3) is contradictory
  for (const auto& c : combos) EXPECT_FALSE(c.choice[0] == 2 && c.choice[1] == 2);
}

TEST(Oracle, TrivialCombos) {
  Ensemble leaf(std::vector<AttrType>{AttrType::Real}, {Tree{{Node::make_leaf(1)}}});
  EXPECT_EQ(enumerate_combos(leaf).size(), 1u);
  Tree s0{{Node::make_internal(SplitCondition::less_than(AttrId(0), 1.0), 1, 2), Node::make_leaf(0), Node::make_leaf(1)}};
  Tree s1{{Node::make_internal(SplitCondition::less_than(AttrId(1), 1.0), 1, 2), Node::make_leaf(0), Node::make_leaf(2)}};
  Ensemble stumps(std::vector<AttrType>(2, AttrType::Real), {s0, s1});
  EXPECT_EQ(enumerate_combos(stumps).size(), 4u);
}

TEST(Oracle, ComboGuard) {
  Tree s{{Node::make_internal(SplitCondition::less_than(AttrId(0), 1.0), 1, 2), Node::make_leaf(0), Node::make_leaf(1)}};
  Ensemble e(std::vector<AttrType>{AttrType::Real}, std::vector<Tree>(25, s));
  EXPECT_THROW(enumerate_combos(e), TooLarge);
  EXPECT_THROW(enumerate_combos(*figure_one(), 4), TooLarge);
}

TEST(Oracle, CombosPartitionInstances) {
  testing::Rng rng(9);
  for (int n = 0; n < 200; ++n) {
    auto e = testing::random_ensemble(rng);
    auto combos = enumerate_combos(*e);
    Instance x = testing::random_point(rng, *e, DomainBox::unconstrained(e->attr_types()));
    int hits = 0;
    for (const auto& c : combos) {
      if (!c.box.contains(std::span<const double>(x))) continue;
      ++hits;
      EXPECT_EQ(c.output, evaluate_exact(*e, x));
    }
    EXPECT_EQ(hits, 1);
  }
}

TEST(Oracle, Verdicts) {
  auto sat = oracle_verdict(single_instance_question(figure_one(), {lt(attr(0, 0), 2.0), gt(out(0), 5.0)}));
  ASSERT_TRUE(sat.sat);
  ASSERT_TRUE(sat.witness);
  EXPECT_LT(sat.witness->attrs[0][0], 2);
  EXPECT_EQ(sat.witness->attrs[0][1], 0);
  EXPECT_FALSE(oracle_verdict(single_instance_question(figure_one(), {gt(out(0), 7.0)})).sat);
  EXPECT_TRUE(oracle_verdict(monotonicity_task(figure_one(), AttrId(1))).sat);
  EXPECT_FALSE(oracle_verdict(monotonicity_task(figure_one(), AttrId(0))).sat);
}

TEST(Oracle, AdversarialExamples) {
  AdversarialSpec spec;
  spec.original = {4.0, 1.0};
  spec.linf = 2.0;
  spec.label = gt(out(0), 5.0);
  auto v = oracle_verdict(adversarial_task({figure_one()}, spec));
  ASSERT_TRUE(v.sat);
  EXPECT_EQ(v.witness->outputs[0], 6);
  spec.original = {0.0, 1.0};
  spec.linf = 1.0;
  spec.label = gt(out(0), 6.0);
  EXPECT_FALSE(oracle_verdict(adversarial_task({figure_one()}, spec)).sat);
}

TEST(Oracle, OneDiffExamples) {
  auto gap = [](double g) { return ge(out(0), LinExpr(out(1)) + LinExpr(g)); };
  EXPECT_TRUE(oracle_verdict(one_diff_pair_task(figure_one(), AttrId(1), gap(2.0))).sat);
  EXPECT_FALSE(oracle_verdict(one_diff_pair_task(figure_one(), AttrId(1), gap(3.0))).sat);
  auto flat = std::make_shared<const Ensemble>(std::vector<AttrType>{AttrType::Real}, std::vector<Tree>{Tree{{Node::make_leaf(2)}}});
  EXPECT_FALSE(oracle_verdict(one_diff_pair_task(flat, AttrId(0), gap(0.5))).sat);
  EXPECT_FALSE(oracle_verdict(monotonicity_task(flat, AttrId(0))).sat);
}

TEST(Oracle, Unsupported) {
  auto t = single_instance_question(figure_one(), {gt(LinExpr(attr(0, 0)) + LinExpr(out(0)), 1.0)});
  EXPECT_THROW(oracle_verdict(t), UnsupportedQuestion);
}

TEST(Grid, Examples) {
  auto sat = single_instance_question(figure_one(), {lt(attr(0, 0), 2.0), gt(out(0), 5.0)});
  auto unsat = single_instance_question(figure_one(), {gt(out(0), 7.0)});
  std::vector<DomainBox> all{DomainBox::unconstrained(figure_one()->attr_types())};
  std::vector<DomainBox> below2{*all[0].refine(SplitCondition::less_than(AttrId(0), 2.0), true)};
  EXPECT_FALSE(grid_check(unsat, all, 1).found);
  auto g = grid_check(sat, below2, 1);
  ASSERT_TRUE(g.found);
  EXPECT_TRUE(holds(sat.question, *g.witness));
  EXPECT_FALSE(grid_check(sat, below2, 0).found);
}

TEST(Partition, Checks) {
  auto types = figure_one()->attr_types();
  DomainBox all = DomainBox::unconstrained(types);
  auto c = SplitCondition::less_than(AttrId(0), 5.0);
  std::vector<DomainBox> root{all};
  std::vector<std::vector<DomainBox>> good{{*all.refine(c, true)}, {*all.refine(c, false)}};
  EXPECT_FALSE(check_partition(root, good));
  std::vector<std::vector<DomainBox>> gap{{*all.refine(c, true)}};
  EXPECT_TRUE(check_partition(root, gap));
  std::vector<std::vector<DomainBox>> overlap{{all}, {*all.refine(c, false)}};
  EXPECT_TRUE(check_partition(root, overlap));
}

}  // namespace
}  // namespace treeq
