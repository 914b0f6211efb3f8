#pragma once

#include <gmpxx.h>

#include <string>
#include <string_view>

namespace treeq {

using Rational = mpq_class;

/// Exact value of a finite binary64.
Rational to_rational(double value);

/// Exact decimal expansion of a finite binary64 (always terminates, since the
/// denominator is a power of two). 0.1 becomes
/// "0.1000000000000000055511151231257827021181583404541015625".
std::string exact_decimal(double value);

/// SMT-LIB real literal, e.g. "5", "0.5", "(- 2.25)".
std::string smt_literal(double value);
/// SMT-LIB real literal for an arbitrary rational, e.g. "(/ 1 3)".
std::string smt_literal(const Rational& value);

/// Parses "12", "-3.25", "7.0", "1/3". Throws ParseError.
Rational parse_rational(std::string_view text);

/// Largest double that is <= value.
double round_down(const Rational& value);
/// Smallest double that is >= value.
double round_up(const Rational& value);

/// Human-readable rendering used in JSON reports: integers and dyadic values
/// as exact decimals, everything else as "p/q".
std::string to_string(const Rational& value);

}  // namespace treeq
