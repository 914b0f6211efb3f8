#include "treeq/domain.hpp"

#include <algorithm>

#include "treeq/error.hpp"

namespace treeq {

using nlohmann::json;

DomainBox DomainBox::unconstrained(std::span<const AttrType> types) {
  DomainBox b;
  b.domains_.reserve(types.size());
  for (AttrType t : types) b.domains_.push_back(t == AttrType::Real ? AttrDomain::real() : AttrDomain::flag());
  return b;
}

std::optional<DomainBox> DomainBox::refine(const SplitCondition& c, bool polarity) const {
  DomainBox out = *this;
  AttrDomain& d = out.domains_[c.attr.index];
  if (c.is_less_than()) {
    if (polarity) {
      d.hi = std::min(d.hi, c.threshold);
    } else {
      d.lo = std::max(d.lo, c.threshold);
    }
    if (!(d.lo < d.hi)) return std::nullopt;
  } else {
    const int keep = polarity ? 2 : 1;
    const int bits = static_cast<int>(d.boolean) & keep;
    if (bits == 0) return std::nullopt;
    d.boolean = static_cast<BoolDomain>(bits);
  }
  out.trail_.push_back({c, polarity});
  return out;
}

Relation DomainBox::relation(const SplitCondition& c) const {
  const AttrDomain& d = domains_[c.attr.index];
  if (c.is_less_than()) {
    if (d.hi <= c.threshold) return Relation::AlwaysTrue;
    if (d.lo >= c.threshold) return Relation::AlwaysFalse;
    return Relation::Undecided;
  }
  switch (d.boolean) {
    case BoolDomain::True:
      return Relation::AlwaysTrue;
    case BoolDomain::False:
      return Relation::AlwaysFalse;
    case BoolDomain::Both:
      break;
  }
  return Relation::Undecided;
}

bool DomainBox::subset_of(const DomainBox& outer) const {
  if (outer.size() != size()) return false;
  for (std::size_t k = 0; k < size(); ++k) {
    const AttrDomain& a = domains_[k];
    const AttrDomain& b = outer.domains_[k];
    if (a.is_bool) {
      if ((static_cast<int>(a.boolean) & ~static_cast<int>(b.boolean)) != 0) return false;
    } else if (a.lo < b.lo || a.hi > b.hi) {
      return false;
    }
  }
  return true;
}

std::optional<DomainBox> replay(std::span<const AttrType> types, std::span<const TrailLiteral> trail) {
  DomainBox b = DomainBox::unconstrained(types);
  for (const TrailLiteral& lit : trail) {
    const std::uint32_t k = lit.cond.attr.index;
    if (k >= types.size()) throw ValidationError("trail literal on attribute " + std::to_string(k) + " out of range");
    const bool real = types[k] == AttrType::Real;
    if (real != lit.cond.is_less_than())
      throw ValidationError("trail literal type does not match attribute " + std::to_string(k));
    auto next = b.refine(lit.cond, lit.polarity);
    if (!next) return std::nullopt;
    b = std::move(*next);
  }
  return b;
}

json trail_to_json(std::span<const TrailLiteral> trail) {
  json out = json::array();
  for (const TrailLiteral& lit : trail) {
    json j = split_to_json(lit.cond);
    j["polarity"] = lit.polarity;
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<TrailLiteral> trail_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("trail must be an array");
  std::vector<TrailLiteral> out;
  for (const json& item : j) {
    auto pol = item.find("polarity");
    if (pol == item.end() || !pol->is_boolean()) throw ParseError("trail literal needs a boolean 'polarity'");
    out.push_back({split_from_json(item), pol->get<bool>()});
  }
  return out;
}

}  // namespace treeq
