#include "treeq/rational.hpp"

#include <cmath>
#include <limits>

#include "treeq/error.hpp"

namespace treeq {

Rational to_rational(double value) {
  if (!std::isfinite(value)) throw ValidationError("non-finite value cannot be made exact");
  Rational q;
  mpq_set_d(q.get_mpq_t(), value);
  return q;
}

namespace {

// Exact decimal of a rational whose denominator is a power of two.
std::string dyadic_decimal(const Rational& q) {
  mpz_class num = abs(q.get_num());
  const mpz_class& den = q.get_den();
  std::size_t k = mpz_sizeinbase(den.get_mpz_t(), 2) - 1;  // den == 2^k
  std::string digits;
  if (k == 0) {
    digits = num.get_str();
  } else {
    mpz_class five;
    mpz_ui_pow_ui(five.get_mpz_t(), 5, k);
    mpz_class scaled = num * five;  // value * 10^k
    digits = scaled.get_str();
    if (digits.size() <= k) digits.insert(0, k - digits.size() + 1, '0');
    digits.insert(digits.size() - k, 1, '.');
    while (digits.back() == '0') digits.pop_back();
    if (digits.back() == '.') digits.pop_back();
  }
  return sgn(q) < 0 ? "-" + digits : digits;
}

bool is_dyadic(const Rational& q) {
  const mpz_class& den = q.get_den();
  return mpz_popcount(den.get_mpz_t()) == 1;
}

}  // namespace

std::string exact_decimal(double value) { return dyadic_decimal(to_rational(value)); }

std::string smt_literal(double value) { return smt_literal(to_rational(value)); }

std::string smt_literal(const Rational& value) {
  if (is_dyadic(value)) {
    std::string text = dyadic_decimal(abs(value));
    return sgn(value) < 0 ? "(- " + text + ")" : text;
  }
  std::string body = "(/ " + mpz_class(abs(value.get_num())).get_str() + " " + value.get_den().get_str() + ")";
  return sgn(value) < 0 ? "(- " + body + ")" : body;
}

Rational parse_rational(std::string_view text) {
  if (text.empty()) throw ParseError("empty numeric literal");
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    Rational num = parse_rational(text.substr(0, slash));
    Rational den = parse_rational(text.substr(slash + 1));
    if (den == 0) throw ParseError("zero denominator in '" + std::string(text) + "'");
    return num / den;
  }
  bool negative = false;
  std::size_t i = 0;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    i = 1;
  }
  std::string digits;
  std::size_t fraction_digits = 0;
  bool seen_point = false;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c >= '0' && c <= '9') {
      digits.push_back(c);
      if (seen_point) ++fraction_digits;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      throw ParseError("malformed numeric literal '" + std::string(text) + "'");
    }
  }
  if (digits.empty()) throw ParseError("malformed numeric literal '" + std::string(text) + "'");
  mpz_class num(digits, 10);
  mpz_class den;
  mpz_ui_pow_ui(den.get_mpz_t(), 10, fraction_digits);
  Rational q(num, den);
  q.canonicalize();
  return negative ? Rational(-q) : q;
}

double round_down(const Rational& value) {
  double d = value.get_d();  // truncates toward zero
  if (!std::isfinite(d)) return d;
  while (to_rational(d) > value) d = std::nextafter(d, -std::numeric_limits<double>::infinity());
  return d;
}

double round_up(const Rational& value) {
  double d = value.get_d();
  if (!std::isfinite(d)) return d;
  while (to_rational(d) < value) d = std::nextafter(d, std::numeric_limits<double>::infinity());
  return d;
}

std::string to_string(const Rational& value) {
  if (is_dyadic(value)) return dyadic_decimal(value);
  return value.get_str();
}

}  // namespace treeq
