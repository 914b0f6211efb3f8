#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "treeq/model.hpp"

namespace treeq {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class BoolDomain : std::uint8_t { False = 1, True = 2, Both = 3 };

/// Either a half-open real interval [lo, hi) (lo may be -inf, hi may be +inf)
/// or a tri-state boolean. Never empty.
struct AttrDomain {
  double lo = -kInfinity;
  double hi = kInfinity;
  BoolDomain boolean = BoolDomain::Both;
  bool is_bool = false;

  static AttrDomain real(double lo = -kInfinity, double hi = kInfinity) { return {lo, hi, BoolDomain::Both, false}; }
  static AttrDomain flag(BoolDomain b = BoolDomain::Both) { return {-kInfinity, kInfinity, b, true}; }

  template <class Number>
  bool contains(const Number& v) const {
    if (is_bool) {
      bool value = v != 0;
      return (static_cast<int>(boolean) & (value ? 2 : 1)) != 0;
    }
    // Infinite bounds are tested explicitly: gmpxx cannot compare with inf.
    return (lo == -kInfinity || lo <= v) && (hi == kInfinity || v < hi);
  }

  friend bool operator==(const AttrDomain&, const AttrDomain&) = default;
};

/// One step of a divide trail: the condition and which side was taken.
struct TrailLiteral {
  SplitCondition cond;
  bool polarity = true;
  friend bool operator==(const TrailLiteral&, const TrailLiteral&) = default;
};

enum class Relation { AlwaysTrue, AlwaysFalse, Undecided };

/// Per-attribute domains plus the trail of literals that produced them from
/// the unconstrained box. Replaying the trail reproduces the domains.
class DomainBox {
 public:
  DomainBox() = default;

  static DomainBox unconstrained(std::span<const AttrType> types);

  std::size_t size() const { return domains_.size(); }
  const AttrDomain& operator[](AttrId a) const { return domains_[a.index]; }
  const AttrDomain& at(std::size_t k) const { return domains_.at(k); }
  const std::vector<AttrDomain>& domains() const { return domains_; }
  const std::vector<TrailLiteral>& trail() const { return trail_; }

  /// Intersects with c (polarity true) or its negation. nullopt when empty.
  std::optional<DomainBox> refine(const SplitCondition& c, bool polarity) const;

  Relation relation(const SplitCondition& c) const;

  template <class Number>
  bool contains(std::span<const Number> x) const {
    if (x.size() != domains_.size()) return false;
    for (std::size_t k = 0; k < x.size(); ++k)
      if (!domains_[k].contains(x[k])) return false;
    return true;
  }

  /// True when every point of this box lies in `outer`.
  bool subset_of(const DomainBox& outer) const;

  friend bool operator==(const DomainBox& a, const DomainBox& b) { return a.domains_ == b.domains_ && a.trail_ == b.trail_; }

 private:
  std::vector<AttrDomain> domains_;
  std::vector<TrailLiteral> trail_;
};

/// Replays a trail from the unconstrained box; nullopt if some step empties it.
/// Throws ValidationError if a literal does not fit the attribute types.
std::optional<DomainBox> replay(std::span<const AttrType> types, std::span<const TrailLiteral> trail);

nlohmann::json trail_to_json(std::span<const TrailLiteral> trail);
std::vector<TrailLiteral> trail_from_json(const nlohmann::json& j);

}  // namespace treeq
