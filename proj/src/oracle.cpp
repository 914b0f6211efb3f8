#include "treeq/oracle.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "treeq/error.hpp"

namespace treeq {

std::vector<LeafPath> leaf_paths(const Tree& t) {
  std::vector<LeafPath> out;
  std::vector<TrailLiteral> stack;
  std::function<void(Node::Index)> walk = [&](Node::Index i) {
    const Node& n = t.nodes[i];
    if (n.is_leaf()) {
      out.push_back({i, stack, n.value});
      return;
    }
    stack.push_back({n.cond, true});
    walk(n.left);
    stack.back().polarity = false;
    walk(n.right);
    stack.pop_back();
  };
  walk(0);
  return out;
}

namespace {

bool literal_holds(const TrailLiteral& lit, const Rational& v) {
  const bool c = lit.cond.is_less_than() ? v < lit.cond.threshold : v != 0;
  return c == lit.polarity;
}

double product_of_leaves(const Ensemble& e) {
  double p = 1.0;
  for (const Tree& t : e.trees()) p *= static_cast<double>(t.leaf_count());
  return p;
}

void guard(const Ensemble& e, double limit) {
  const double p = product_of_leaves(e);
  if (p > limit)
    throw TooLarge("leaf combinations " + std::to_string(p) + " exceed the guard of " + std::to_string(limit));
}

// Interval / bitmask view of a conjunction of path literals.
struct Cell {
  double lo = -kInfinity;
  double hi = kInfinity;
  int mask = 3;
};

bool narrow(std::vector<Cell>& cells, const TrailLiteral& lit) {
  Cell& c = cells[lit.cond.attr.index];
  if (lit.cond.is_less_than()) {
    if (lit.polarity) {
      c.hi = std::min(c.hi, lit.cond.threshold);
    } else {
      c.lo = std::max(c.lo, lit.cond.threshold);
    }
    return c.lo < c.hi;
  }
  c.mask &= lit.polarity ? 2 : 1;
  return c.mask != 0;
}

}  // namespace

Rational path_evaluate(const Ensemble& e, std::span<const Rational> x) {
  Rational sum = to_rational(e.base_score());
  for (const Tree& t : e.trees()) {
    int matched = 0;
    for (const LeafPath& p : leaf_paths(t)) {
      bool ok = std::all_of(p.literals.begin(), p.literals.end(),
                            [&](const TrailLiteral& lit) { return literal_holds(lit, x[lit.cond.attr.index]); });
      if (ok) {
        sum += to_rational(p.value);
        ++matched;
      }
    }
    if (matched != 1) throw ContractViolation("path_evaluate: instance matches " + std::to_string(matched) + " paths");
  }
  return sum;
}

std::vector<LeafCombo> enumerate_combos(const Ensemble& e, double limit) {
  guard(e, limit);
  std::vector<std::vector<LeafPath>> paths;
  for (const Tree& t : e.trees()) paths.push_back(leaf_paths(t));

  std::vector<LeafCombo> out;
  std::vector<Node::Index> choice;
  std::vector<TrailLiteral> lits;
  std::vector<Cell> start(e.num_attributes());
  std::function<void(std::size_t, const std::vector<Cell>&, Rational)> rec = [&](std::size_t m,
                                                                                 const std::vector<Cell>& cells,
                                                                                 Rational sum) {
    if (m == paths.size()) {
      std::optional<DomainBox> box = replay(e.attr_types(), lits);
      if (!box) throw ContractViolation("enumerate_combos: interval view and box disagree");
      out.push_back({choice, std::move(*box), sum});
      return;
    }
    for (const LeafPath& p : paths[m]) {
      std::vector<Cell> next = cells;
      bool ok = true;
      for (const TrailLiteral& lit : p.literals) ok = ok && narrow(next, lit);
      if (!ok) continue;
      choice.push_back(p.leaf);
      lits.insert(lits.end(), p.literals.begin(), p.literals.end());
      rec(m + 1, next, sum + to_rational(p.value));
      lits.resize(lits.size() - p.literals.size());
      choice.pop_back();
    }
  };
  rec(0, start, to_rational(e.base_score()));
  return out;
}

// Point search ----------------------------------------------------------------------

namespace {

enum class Tri { False, True, Unknown };

Tri tri_not(Tri t) {
  if (t == Tri::Unknown) return t;
  return t == Tri::True ? Tri::False : Tri::True;
}

struct Linear {
  std::vector<std::pair<VarRef, Rational>> terms;  // lhs - rhs
  Rational constant;
};

Linear linearize(const Formula& f) {
  Linear n;
  auto add = [&](const LinExpr& e, int sign) {
    for (const Term& t : e.terms) {
      Rational c = to_rational(t.coef) * sign;
      auto it = std::find_if(n.terms.begin(), n.terms.end(), [&](const auto& p) { return p.first == t.var; });
      if (it == n.terms.end()) {
        n.terms.emplace_back(t.var, c);
      } else {
        it->second += c;
      }
    }
    n.constant += to_rational(e.constant) * sign;
  };
  add(f.lhs, 1);
  add(f.rhs, -1);
  std::erase_if(n.terms, [](const auto& p) { return p.second == 0; });
  return n;
}

bool sign_ok(const Rational& v, CmpOp op) {
  switch (op) {
    case CmpOp::Lt:
      return v < 0;
    case CmpOp::Le:
      return v <= 0;
    case CmpOp::Eq:
      return v == 0;
    case CmpOp::Ge:
      return v >= 0;
    case CmpOp::Gt:
      return v > 0;
  }
  return false;
}

void for_each_cmp(const Formula& f, const std::function<void(const Formula&)>& fn) {
  if (f.kind == Formula::Kind::Cmp) fn(f);
  for (const Formula& g : f.args) for_each_cmp(g, fn);
}

void conjuncts(const Formula& f, std::vector<const Formula*>& out) {
  if (f.kind == Formula::Kind::And) {
    for (const Formula& g : f.args) conjuncts(g, out);
  } else {
    out.push_back(&f);
  }
}

// A lower bound `aux >= -(rest)/c` that applies when `guard` holds.
struct AuxBound {
  std::string name;
  const Formula* guard = nullptr;
  Linear lin;
  Rational coef;
};

using Candidates = std::vector<std::vector<std::vector<Rational>>>;  // [instance][attr]

class PointSearch {
 public:
  PointSearch(const VerificationTask& task, Candidates cands) : task_(task), cands_(std::move(cands)) {
    const std::size_t n = task.num_instances();
    std::size_t kmax = 0;
    for (std::size_t i = 0; i < n; ++i) kmax = std::max(kmax, task.ensemble(i).num_attributes());
    for (std::uint32_t k = 0; k < kmax; ++k)
      for (std::uint32_t i = 0; i < n; ++i)
        if (k < task.ensemble(i).num_attributes()) order_.emplace_back(i, k);
    a_.attrs.resize(n);
    known_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      a_.attrs[i].assign(task.ensemble(i).num_attributes(), Rational(0));
      known_[i].assign(task.ensemble(i).num_attributes(), false);
    }
    a_.outputs.assign(n, Rational(0));
    out_known_.assign(n, false);
    collect_aux();
  }

  std::optional<Assignment> find() {
    std::vector<std::string> bools(aux_bools_.begin(), aux_bools_.end());
    const std::size_t combos = std::size_t{1} << bools.size();
    for (std::size_t mask = 0; mask < combos; ++mask) {
      for (std::size_t b = 0; b < bools.size(); ++b) a_.aux_bool[bools[b]] = ((mask >> b) & 1) != 0;
      if (descend(0)) return a_;
    }
    return std::nullopt;
  }

 private:
  void collect_aux() {
    std::set<std::string> reals;
    auto scan = [&](const Formula& f) {
      std::function<void(const Formula&)> rec = [&](const Formula& g) {
        auto note = [&](const VarRef& v) {
          if (const auto* x = std::get_if<AuxVar>(&v)) (x->sort == Sort::Bool ? aux_bools_ : reals).insert(x->name);
        };
        if (g.kind == Formula::Kind::Var) note(g.var);
        if (g.kind == Formula::Kind::Cmp) {
          for (const Term& t : g.lhs.terms) note(t.var);
          for (const Term& t : g.rhs.terms) note(t.var);
        }
        for (const Formula& h : g.args) rec(h);
      };
      rec(f);
    };
    scan(task_.question);
    scan(task_.background);

    std::vector<const Formula*> top;
    conjuncts(task_.question, top);
    conjuncts(task_.background, top);
    for (const Formula* f : top) {
      const Formula* guard = nullptr;
      const Formula* body = f;
      if (f->kind == Formula::Kind::Implies) {
        guard = &f->args[0];
        body = &f->args[1];
      }
      if (body->kind != Formula::Kind::Cmp) continue;
      Linear lin = linearize(*body);
      const std::pair<VarRef, Rational>* aux = nullptr;
      int count = 0;
      for (const auto& t : lin.terms) {
        if (const auto* x = std::get_if<AuxVar>(&t.first); x != nullptr && x->sort == Sort::Real) {
          aux = &t;
          ++count;
        }
      }
      if (count != 1) continue;
      const Rational& c = aux->second;
      const CmpOp op = body->op;
      const bool lower = op == CmpOp::Eq || (c > 0 && (op == CmpOp::Ge || op == CmpOp::Gt)) ||
                         (c < 0 && (op == CmpOp::Le || op == CmpOp::Lt));
      if (!lower) continue;
      if (op == CmpOp::Gt || op == CmpOp::Lt)
        throw UnsupportedQuestion("strict lower bound on auxiliary '" + std::get<AuxVar>(aux->first).name + "'");
      AuxBound b;
      b.name = std::get<AuxVar>(aux->first).name;
      b.guard = guard;
      b.coef = c;
      for (const auto& t : lin.terms)
        if (&t != aux) b.lin.terms.push_back(t);
      b.lin.constant = lin.constant;
      bounds_.push_back(std::move(b));
    }
    for (const std::string& r : reals) {
      if (std::none_of(bounds_.begin(), bounds_.end(), [&](const AuxBound& b) { return b.name == r; }))
        throw UnsupportedQuestion("auxiliary real '" + r + "' has no lower bound");
    }
    aux_reals_ = std::move(reals);
  }

  bool var_known(const VarRef& v) const {
    if (const auto* x = std::get_if<AttrVar>(&v)) return known_[x->instance][x->attr.index];
    if (const auto* o = std::get_if<OutVar>(&v)) return out_known_[o->instance];
    const auto& aux = std::get<AuxVar>(v);
    return aux.sort == Sort::Bool || aux_known_;
  }

  Rational value(const VarRef& v) const {
    if (const auto* x = std::get_if<AttrVar>(&v)) return a_.attrs[x->instance][x->attr.index];
    if (const auto* o = std::get_if<OutVar>(&v)) return a_.outputs[o->instance];
    const auto& aux = std::get<AuxVar>(v);
    auto it = a_.aux_real.find(aux.name);
    return it == a_.aux_real.end() ? Rational(0) : it->second;
  }

  Tri eval(const Formula& f) const {
    switch (f.kind) {
      case Formula::Kind::Cmp: {
        Rational sum = to_rational(f.lhs.constant) - to_rational(f.rhs.constant);
        for (const Term& t : f.lhs.terms) {
          if (!var_known(t.var)) return Tri::Unknown;
          sum += to_rational(t.coef) * value(t.var);
        }
        for (const Term& t : f.rhs.terms) {
          if (!var_known(t.var)) return Tri::Unknown;
          sum -= to_rational(t.coef) * value(t.var);
        }
        return sign_ok(sum, f.op) ? Tri::True : Tri::False;
      }
      case Formula::Kind::Var: {
        if (!var_known(f.var)) return Tri::Unknown;
        if (const auto* x = std::get_if<AttrVar>(&f.var))
          return a_.attrs[x->instance][x->attr.index] != 0 ? Tri::True : Tri::False;
        auto it = a_.aux_bool.find(std::get<AuxVar>(f.var).name);
        return (it != a_.aux_bool.end() && it->second) ? Tri::True : Tri::False;
      }
      case Formula::Kind::Not:
        return tri_not(eval(f.args[0]));
      case Formula::Kind::And: {
        Tri r = Tri::True;
        for (const Formula& g : f.args) {
          Tri t = eval(g);
          if (t == Tri::False) return Tri::False;
          if (t == Tri::Unknown) r = Tri::Unknown;
        }
        return r;
      }
      case Formula::Kind::Or: {
        Tri r = Tri::False;
        for (const Formula& g : f.args) {
          Tri t = eval(g);
          if (t == Tri::True) return Tri::True;
          if (t == Tri::Unknown) r = Tri::Unknown;
        }
        return r;
      }
      case Formula::Kind::Implies: {
        Tri p = eval(f.args[0]);
        if (p == Tri::False) return Tri::True;
        Tri q = eval(f.args[1]);
        if (q == Tri::True) return Tri::True;
        if (p == Tri::True) return q;
        return Tri::Unknown;
      }
    }
    return Tri::Unknown;
  }

  Tri status() const {
    Tri q = eval(task_.question);
    if (q == Tri::False) return q;
    Tri b = eval(task_.background);
    if (b == Tri::False) return b;
    return (q == Tri::True && b == Tri::True) ? Tri::True : Tri::Unknown;
  }

  bool settle_aux() {
    a_.aux_real.clear();
    aux_known_ = false;
    for (const std::string& name : aux_reals_) {
      std::optional<Rational> best;
      for (const AuxBound& b : bounds_) {
        if (b.name != name) continue;
        if (b.guard != nullptr) {
          Tri g = eval(*b.guard);
          if (g == Tri::Unknown) throw UnsupportedQuestion("guard of auxiliary '" + name + "' depends on auxiliaries");
          if (g == Tri::False) continue;
        }
        Rational rest = b.lin.constant;
        for (const auto& [v, c] : b.lin.terms) {
          if (const auto* x = std::get_if<AuxVar>(&v); x != nullptr && x->sort == Sort::Real)
            throw UnsupportedQuestion("bound on auxiliary '" + name + "' mentions another auxiliary real");
          rest += c * value(v);
        }
        Rational bound = -rest / b.coef;
        if (!best || bound > *best) best = bound;
      }
      if (!best) throw UnsupportedQuestion("no lower bound of auxiliary '" + name + "' applies");
      a_.aux_real[name] = *best;
    }
    aux_known_ = true;
    return true;
  }

  bool descend(std::size_t pos) {
    if (pos == order_.size()) {
      settle_aux();
      const bool ok = status() == Tri::True;
      aux_known_ = false;
      return ok;
    }
    const auto [i, k] = order_[pos];
    known_[i][k] = true;
    const bool completes = k + 1 == a_.attrs[i].size();
    for (const Rational& v : cands_[i][k]) {
      a_.attrs[i][k] = v;
      if (completes) {
        a_.outputs[i] = path_evaluate(task_.ensemble(i), a_.attrs[i]);
        out_known_[i] = true;
      }
      if (status() != Tri::False && descend(pos + 1)) return true;
      out_known_[i] = false;
    }
    known_[i][k] = false;
    return false;
  }

  const VerificationTask& task_;
  Candidates cands_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> order_;
  Assignment a_;
  std::vector<std::vector<bool>> known_;
  std::vector<bool> out_known_;
  bool aux_known_ = false;
  std::set<std::string> aux_bools_;
  std::set<std::string> aux_reals_;
  std::vector<AuxBound> bounds_;
};

/// Cut points per attribute index, shared by all instances: tree thresholds
/// and the constants of single-attribute comparisons.
std::vector<std::set<Rational>> cut_points(const VerificationTask& task) {
  std::size_t kmax = 0;
  for (const auto& e : task.instances) kmax = std::max(kmax, e->num_attributes());
  std::vector<std::set<Rational>> pts(kmax);
  for (const auto& e : task.instances)
    for (const Tree& t : e->trees())
      for (const Node& n : t.nodes)
        if (!n.is_leaf() && n.cond.is_less_than()) pts[n.cond.attr.index].insert(to_rational(n.cond.threshold));

  auto scan = [&](const Formula& f) {
    Linear lin = linearize(f);
    std::vector<std::pair<AttrVar, Rational>> attrs;
    bool has_out = false;
    for (const auto& [v, c] : lin.terms) {
      if (const auto* x = std::get_if<AttrVar>(&v)) attrs.emplace_back(*x, c);
      if (std::holds_alternative<OutVar>(v)) has_out = true;
    }
    if (attrs.empty()) return;
    if (has_out) throw UnsupportedQuestion("comparison mixes attributes and outputs");
    if (attrs.size() == 1) {
      if (attrs[0].first.attr.index < kmax) pts[attrs[0].first.attr.index].insert(-lin.constant / attrs[0].second);
      return;
    }
    const bool coupling = attrs.size() == 2 && attrs[0].first.attr == attrs[1].first.attr &&
                          attrs[0].first.instance != attrs[1].first.instance &&
                          attrs[0].second == -attrs[1].second && lin.constant == 0 && lin.terms.size() == 2;
    if (!coupling) throw UnsupportedQuestion("comparison couples attributes beyond equal-index pairs");
  };
  for_each_cmp(task.question, scan);
  for_each_cmp(task.background, scan);
  return pts;
}

Rational min_gap(const std::vector<Rational>& sorted) {
  Rational gap = 1;
  for (std::size_t j = 1; j < sorted.size(); ++j) gap = std::min(gap, Rational(sorted[j] - sorted[j - 1]));
  return gap;
}

}  // namespace

OracleVerdict oracle_verdict(const VerificationTask& task) {
  for (const auto& e : task.instances) guard(*e, kComboGuard);
  const auto pts = cut_points(task);

  std::vector<std::vector<Rational>> per_attr(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    std::vector<Rational> p(pts[k].begin(), pts[k].end());
    auto& c = per_attr[k];
    if (p.empty()) {
      c = {Rational(0), Rational(1)};
      continue;
    }
    const Rational eps = min_gap(p) / 64;
    c.push_back(p.front() - 1);
    c.push_back(p.front() - eps);
    for (std::size_t j = 0; j + 1 < p.size(); ++j) {
      c.push_back(p[j]);
      c.push_back((p[j] + p[j + 1]) / 2);
      c.push_back(p[j + 1] - eps);
    }
    c.push_back(p.back());
    c.push_back(p.back() + 1);
  }
  Candidates cands(task.num_instances());
  for (std::size_t i = 0; i < task.num_instances(); ++i) {
    const Ensemble& e = task.ensemble(i);
    for (std::uint32_t k = 0; k < e.num_attributes(); ++k) {
      if (e.attr_type(AttrId(k)) == AttrType::Bool) {
        cands[i].push_back({Rational(0), Rational(1)});
      } else {
        cands[i].push_back(per_attr[k]);
      }
    }
  }
  PointSearch search(task, std::move(cands));
  OracleVerdict v;
  v.witness = search.find();
  v.sat = v.witness.has_value();
  return v;
}

GridResult grid_check(const VerificationTask& task, std::span<const DomainBox> boxes, int resolution) {
  GridResult r;
  if (resolution <= 0) return r;
  if (boxes.size() != task.num_instances()) throw ContractViolation("grid_check: one box per instance required");
  auto pts = cut_points(task);
  for (const DomainBox& b : boxes)
    for (std::size_t k = 0; k < b.size() && k < pts.size(); ++k) {
      const AttrDomain& d = b.at(k);
      if (d.is_bool) continue;
      if (d.lo != -kInfinity) pts[k].insert(to_rational(d.lo));
      if (d.hi != kInfinity) pts[k].insert(to_rational(d.hi));
    }

  std::vector<std::vector<Rational>> grid(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    std::vector<Rational> p(pts[k].begin(), pts[k].end());
    auto& g = grid[k];
    if (p.empty()) {
      g = {Rational(0), Rational(1)};
      continue;
    }
    const Rational eps = min_gap(p) / 2;
    g.push_back(p.front() - 1);
    for (std::size_t j = 0; j < p.size(); ++j) {
      g.push_back(p[j] - eps);
      g.push_back(p[j]);
      g.push_back(p[j] + eps);
      if (j + 1 < p.size())
        for (int s = 1; s <= resolution; ++s) g.push_back(p[j] + (p[j + 1] - p[j]) * s / (resolution + 1));
    }
    g.push_back(p.back() + 1);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
  }

  Candidates cands(task.num_instances());
  for (std::size_t i = 0; i < task.num_instances(); ++i) {
    const Ensemble& e = task.ensemble(i);
    for (std::uint32_t k = 0; k < e.num_attributes(); ++k) {
      const AttrDomain& d = boxes[i].at(k);
      std::vector<Rational> keep;
      const std::vector<Rational> bools{Rational(0), Rational(1)};
      for (const Rational& v : e.attr_type(AttrId(k)) == AttrType::Bool ? bools : grid[k])
        if (d.contains(v)) keep.push_back(v);
      cands[i].push_back(std::move(keep));
    }
  }
  PointSearch search(task, std::move(cands));
  r.witness = search.find();
  r.found = r.witness.has_value();
  return r;
}

// Partition -------------------------------------------------------------------------

namespace {

using Flat = std::vector<AttrDomain>;

Flat flatten(std::span<const DomainBox> boxes) {
  Flat f;
  for (const DomainBox& b : boxes) f.insert(f.end(), b.domains().begin(), b.domains().end());
  return f;
}

bool overlaps(const AttrDomain& a, const AttrDomain& b) {
  if (a.is_bool) return (static_cast<int>(a.boolean) & static_cast<int>(b.boolean)) != 0;
  return std::max(a.lo, b.lo) < std::min(a.hi, b.hi);
}

bool within(const AttrDomain& inner, const AttrDomain& outer) {
  if (inner.is_bool) return (static_cast<int>(inner.boolean) & ~static_cast<int>(outer.boolean)) == 0;
  return inner.lo >= outer.lo && inner.hi <= outer.hi;
}

bool overlaps(const Flat& a, const Flat& b) {
  for (std::size_t d = 0; d < a.size(); ++d)
    if (!overlaps(a[d], b[d])) return false;
  return true;
}

bool within(const Flat& a, const Flat& b) {
  for (std::size_t d = 0; d < a.size(); ++d)
    if (!within(a[d], b[d])) return false;
  return true;
}

// `region` is covered by the union of parts[idx] (parts known to be disjoint).
bool covered(const Flat& region, const std::vector<Flat>& parts, const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> live;
  for (std::size_t j : idx)
    if (overlaps(region, parts[j])) live.push_back(j);
  if (live.empty()) return false;
  const Flat& b = parts[live.front()];
  for (std::size_t d = 0; d < region.size(); ++d) {
    const AttrDomain& r = region[d];
    const AttrDomain& p = b[d];
    if (r.is_bool) {
      if (r.boolean == BoolDomain::Both && p.boolean != BoolDomain::Both) {
        Flat lo = region, hi = region;
        lo[d].boolean = BoolDomain::False;
        hi[d].boolean = BoolDomain::True;
        return covered(lo, parts, live) && covered(hi, parts, live);
      }
      continue;
    }
    for (double cut : {p.lo, p.hi}) {
      if (r.lo < cut && cut < r.hi) {
        Flat lo = region, hi = region;
        lo[d].hi = cut;
        hi[d].lo = cut;
        return covered(lo, parts, live) && covered(hi, parts, live);
      }
    }
  }
  return true;  // b contains the region
}

}  // namespace

std::optional<std::string> check_partition(std::span<const DomainBox> root,
                                           const std::vector<std::vector<DomainBox>>& parts) {
  const Flat whole = flatten(root);
  std::vector<Flat> flat;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    if (parts[j].size() != root.size()) return "part " + std::to_string(j) + " has the wrong number of boxes";
    flat.push_back(flatten(parts[j]));
    if (flat.back().size() != whole.size()) return "part " + std::to_string(j) + " has the wrong dimension";
    if (!within(flat.back(), whole)) return "part " + std::to_string(j) + " leaves the root box";
  }
  for (std::size_t a = 0; a < flat.size(); ++a)
    for (std::size_t b = a + 1; b < flat.size(); ++b)
      if (overlaps(flat[a], flat[b])) return "parts " + std::to_string(a) + " and " + std::to_string(b) + " overlap";
  std::vector<std::size_t> all(flat.size());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  if (!covered(whole, flat, all)) return "parts do not cover the root box";
  return std::nullopt;
}

}  // namespace treeq
