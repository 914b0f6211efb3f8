#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "treeq/error.hpp"
#include "treeq/rational.hpp"

namespace treeq {
namespace {

TEST(Rational, ExactDecimal) {
  EXPECT_EQ(exact_decimal(0.1), "0.1000000000000000055511151231257827021181583404541015625");
  EXPECT_EQ(exact_decimal(5.0), "5");
  EXPECT_EQ(exact_decimal(-2.25), "-2.25");
  EXPECT_EQ(exact_decimal(0.0), "0");
}

TEST(Rational, SmtLiterals) {
  EXPECT_EQ(smt_literal(5.0), "5");
  EXPECT_EQ(smt_literal(0.5), "0.5");
  EXPECT_EQ(smt_literal(-2.25), "(- 2.25)");
  EXPECT_EQ(smt_literal(Rational(1, 3)), "(/ 1 3)");
  EXPECT_EQ(smt_literal(Rational(-2, 3)), "(- (/ 2 3))");
}

TEST(Rational, NonFiniteRejected) {
  EXPECT_THROW(to_rational(std::numeric_limits<double>::infinity()), ValidationError);
  EXPECT_THROW(to_rational(std::nan("")), ValidationError);
}

TEST(Rational, Parse) {
  EXPECT_EQ(parse_rational("12"), Rational(12));
  EXPECT_EQ(parse_rational("-3.25"), Rational(-13, 4));
  EXPECT_EQ(parse_rational("7.0"), Rational(7));
  EXPECT_EQ(parse_rational("1/3"), Rational(1, 3));
  EXPECT_THROW(parse_rational("abc"), ParseError);
  EXPECT_THROW(parse_rational(""), ParseError);
}

TEST(Rational, Rounding) {
  Rational third(1, 3);
  double lo = round_down(third);
  double hi = round_up(third);
  EXPECT_LT(to_rational(lo), third);
  EXPECT_GT(to_rational(hi), third);
  EXPECT_EQ(std::nextafter(lo, 1.0), hi);
  EXPECT_EQ(round_down(Rational(5)), 5.0);
  EXPECT_EQ(round_up(Rational(5)), 5.0);
  EXPECT_EQ(round_up(Rational(-1, 3)), -round_down(third));
}

TEST(Rational, ToString) {
  EXPECT_EQ(to_string(Rational(3)), "3");
  EXPECT_EQ(to_string(Rational(-5, 4)), "-1.25");
  EXPECT_EQ(to_string(Rational(1, 3)), "1/3");
}

}  // namespace
}  // namespace treeq
