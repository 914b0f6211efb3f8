#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "treeq/domain.hpp"
#include "treeq/error.hpp"

namespace treeq {
namespace {

const std::vector<AttrType> kFig{AttrType::Real, AttrType::Bool};
const SplitCondition kA1lt5 = SplitCondition::less_than(AttrId(0), 5.0);
const SplitCondition kA1lt3 = SplitCondition::less_than(AttrId(0), 3.0);
const SplitCondition kA2 = SplitCondition::is_true(AttrId(1));

bool has(const DomainBox& b, Instance x) { return b.contains(std::span<const double>(x)); }

TEST(Domain, Unconstrained) {
  DomainBox b = DomainBox::unconstrained(kFig);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b.at(0), AttrDomain::real());
  EXPECT_EQ(b.at(1), AttrDomain::flag());
  EXPECT_EQ(DomainBox::unconstrained({}).size(), 0u);
  EXPECT_TRUE(b.trail().empty());
}

TEST(Domain, Refine) {
  DomainBox b = DomainBox::unconstrained(kFig);
  auto left = b.refine(kA1lt5, true);
  ASSERT_TRUE(left);
  EXPECT_EQ(left->at(0), AttrDomain::real(-kInfinity, 5.0));
  EXPECT_FALSE(left->refine(kA1lt5, false));
  auto f = b.refine(kA2, false);
  ASSERT_TRUE(f);
  EXPECT_EQ(f->at(1), AttrDomain::flag(BoolDomain::False));
  EXPECT_FALSE(f->refine(kA2, true));
  ASSERT_EQ(left->trail().size(), 1u);
  EXPECT_EQ(left->trail()[0], (TrailLiteral{kA1lt5, true}));
}

TEST(Domain, Relation) {
  DomainBox b = DomainBox::unconstrained(kFig);
  auto below2 = b.refine(SplitCondition::less_than(AttrId(0), 2.0), true);
  auto above5 = b.refine(kA1lt5, false);
  EXPECT_EQ(below2->relation(kA1lt3), Relation::AlwaysTrue);
  EXPECT_EQ(above5->relation(kA1lt3), Relation::AlwaysFalse);
  EXPECT_EQ(b.relation(kA1lt3), Relation::Undecided);
  // [3, 5) against A1 < 3
  auto mid = above5 ? b.refine(kA1lt3, false)->refine(kA1lt5, true) : std::nullopt;
  EXPECT_EQ(mid->relation(kA1lt3), Relation::AlwaysFalse);
  EXPECT_EQ(mid->relation(kA1lt5), Relation::AlwaysTrue);
}

TEST(Domain, HalfOpenContains) {
  auto left = DomainBox::unconstrained(kFig).refine(kA1lt5, true);
  EXPECT_TRUE(has(*left, {4, 1}));
  EXPECT_FALSE(has(*left, {5, 1}));
  auto right = DomainBox::unconstrained(kFig).refine(kA1lt5, false);
  EXPECT_TRUE(has(*right, {5, 0}));
  ExactInstance q{Rational(9, 2), Rational(1)};
  EXPECT_TRUE(left->contains(std::span<const Rational>(q)));
}

TEST(Domain, PartitionProperty) {
  testing::Rng rng(7);
  for (int n = 0; n < 300; ++n) {
    auto e = testing::random_ensemble(rng);
    DomainBox b = testing::random_box(rng, *e, 3);
    for (const SplitCondition& c : collect_splits(*e)) {
      if (b.relation(c) != Relation::Undecided) continue;
      auto l = b.refine(c, true);
      auto r = b.refine(c, false);
      ASSERT_TRUE(l && r);
      EXPECT_TRUE(l->subset_of(b) && r->subset_of(b));
      for (int s = 0; s < 5; ++s) {
        Instance x = testing::random_point(rng, *e, b);
        EXPECT_NE(has(*l, x), has(*r, x));
      }
    }
  }
}

TEST(Domain, ReplayAndJson) {
  auto b = DomainBox::unconstrained(kFig).refine(kA1lt5, false)->refine(kA2, true);
  auto again = replay(kFig, b->trail());
  ASSERT_TRUE(again);
  EXPECT_EQ(*again, *b);
  auto parsed = trail_from_json(trail_to_json(b->trail()));
  EXPECT_EQ(parsed, b->trail());
  std::vector<TrailLiteral> contradictory{{kA1lt5, true}, {kA1lt5, false}};
  EXPECT_FALSE(replay(kFig, contradictory));
  std::vector<TrailLiteral> wrong_type{{SplitCondition::less_than(AttrId(1), 1.0), true}};
  EXPECT_THROW(replay(kFig, wrong_type), ValidationError);
  EXPECT_THROW(trail_from_json(nlohmann::json::object()), ParseError);
}

TEST(Domain, SubsetOf) {
  DomainBox all = DomainBox::unconstrained(kFig);
  auto left = all.refine(kA1lt5, true);
  EXPECT_TRUE(left->subset_of(all));
  EXPECT_FALSE(all.subset_of(*left));
}

}  // namespace
}  // namespace treeq
