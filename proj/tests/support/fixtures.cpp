#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace treeq::testing {

std::shared_ptr<const Ensemble> figure_one() {
  const AttrId a1(0), a2(1);
  Tree t1{{Node::make_internal(SplitCondition::less_than(a1, 5.0), 1, 2), Node::make_leaf(1.0), Node::make_leaf(2.0)}};
  Tree t2{{Node::make_internal(SplitCondition::is_true(a2), 1, 4),
           Node::make_internal(SplitCondition::less_than(a1, 3.0), 2, 3), Node::make_leaf(3.0), Node::make_leaf(4.0),
           Node::make_leaf(5.0)}};
  return std::make_shared<const Ensemble>(std::vector<AttrType>{AttrType::Real, AttrType::Bool},
                                          std::vector<Tree>{t1, t2});
}

std::string figure_one_json() { return save_ensemble(*figure_one()); }

namespace {

double pick(Rng& rng, double lo, double step, int count) {
  return lo + step * static_cast<double>(std::uniform_int_distribution<int>(0, count - 1)(rng));
}

bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

void grow(Rng& rng, Tree& t, const std::vector<AttrType>& types, int depth, int max_depth) {
  const auto self = static_cast<Node::Index>(t.nodes.size());
  if (depth >= max_depth || (depth > 0 && coin(rng, 0.3))) {
    t.nodes.push_back(Node::make_leaf(pick(rng, -2.0, 0.5, 9)));
    return;
  }
  const auto k = static_cast<std::uint32_t>(uniform(rng, 0, static_cast<int>(types.size()) - 1));
  SplitCondition c = types[k] == AttrType::Bool ? SplitCondition::is_true(AttrId(k))
                                                : SplitCondition::less_than(AttrId(k), pick(rng, 0.5, 0.5, 6));
  t.nodes.push_back(Node::make_internal(c, 0, 0));
  t.nodes[self].left = static_cast<Node::Index>(t.nodes.size());
  grow(rng, t, types, depth + 1, max_depth);
  t.nodes[self].right = static_cast<Node::Index>(t.nodes.size());
  grow(rng, t, types, depth + 1, max_depth);
}

}  // namespace

std::shared_ptr<const Ensemble> random_ensemble(Rng& rng, const RandomShape& shape) {
  const int K = uniform(rng, 1, shape.max_attrs);
  std::vector<AttrType> types;
  for (int k = 0; k < K; ++k) types.push_back(coin(rng, shape.bool_share) ? AttrType::Bool : AttrType::Real);
  if (std::none_of(types.begin(), types.end(), [](AttrType t) { return t == AttrType::Real; })) types[0] = AttrType::Real;
  std::vector<Tree> trees(static_cast<std::size_t>(uniform(rng, 1, shape.max_trees)));
  for (Tree& t : trees) grow(rng, t, types, 0, uniform(rng, 1, shape.max_depth));
  const double base = coin(rng, 0.3) ? pick(rng, -1.0, 0.5, 5) : 0.0;
  return std::make_shared<const Ensemble>(types, std::move(trees), base);
}

DomainBox random_box(Rng& rng, const Ensemble& e, int literals) {
  DomainBox box = DomainBox::unconstrained(e.attr_types());
  for (int n = 0; n < literals; ++n) {
    const auto k = static_cast<std::uint32_t>(uniform(rng, 0, static_cast<int>(e.num_attributes()) - 1));
    SplitCondition c = e.attr_type(AttrId(k)) == AttrType::Bool
                           ? SplitCondition::is_true(AttrId(k))
                           : SplitCondition::less_than(AttrId(k), pick(rng, 0.25, 0.25, 13));
    if (auto next = box.refine(c, coin(rng, 0.5))) box = std::move(*next);
  }
  return box;
}

Instance random_point(Rng& rng, const Ensemble& e, const DomainBox& box) {
  Instance x(e.num_attributes());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const AttrDomain& d = box.at(k);
    if (d.is_bool) {
      if (d.boolean == BoolDomain::Both) {
        x[k] = coin(rng, 0.5) ? 1.0 : 0.0;
      } else {
        x[k] = d.boolean == BoolDomain::True ? 1.0 : 0.0;
      }
      continue;
    }
    // Candidates on a quarter grid plus the box edges; keep those inside.
    std::vector<double> options;
    for (double v = -1.0; v <= 4.0; v += 0.25)
      if (d.contains(v)) options.push_back(v);
    if (d.lo != -kInfinity) options.push_back(d.lo);
    if (d.hi != kInfinity) options.push_back(std::nextafter(d.hi, -kInfinity));
    x[k] = options[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(options.size()) - 1))];
  }
  return x;
}

namespace {

CmpOp random_op(Rng& rng) {
  static const CmpOp ops[] = {CmpOp::Lt, CmpOp::Le, CmpOp::Ge, CmpOp::Gt};
  return ops[uniform(rng, 0, 3)];
}

Formula output_gap(Rng& rng) {
  // F0 - F1 > c, or |F0 - F1| style single-sided gaps.
  const double c = pick(rng, 0.0, 0.5, 6);
  return coin(rng, 0.5) ? gt(LinExpr(out(0)) - LinExpr(out(1)), c) : gt(LinExpr(out(1)) - LinExpr(out(0)), c);
}

}  // namespace

VerificationTask random_task(Rng& rng, const RandomShape& shape, int kind) {
  auto e = random_ensemble(rng, shape);
  if (kind < 0) kind = uniform(rng, 0, 5);
  const auto K = static_cast<std::uint32_t>(e->num_attributes());
  switch (kind) {
    case 1:
      return monotonicity_task(e, AttrId(static_cast<std::uint32_t>(uniform(rng, 0, static_cast<int>(K) - 1))));
    case 2:
      return one_diff_pair_task(e, AttrId(static_cast<std::uint32_t>(uniform(rng, 0, static_cast<int>(K) - 1))),
                                output_gap(rng));
    case 3:
      return any_single_diff_task(e, output_gap(rng));
    case 4:
    case 5: {
      AdversarialSpec spec;
      spec.original = random_point(rng, *e, DomainBox::unconstrained(e->attr_types()));
      spec.linf = pick(rng, 0.0, 0.5, 6);
      if (kind == 5) spec.l1_budget = pick(rng, 0.5, 0.5, 6);
      const double f = evaluate(*e, spec.original);
      const double shift = pick(rng, 0.0, 0.5, 5);
      spec.label = coin(rng, 0.5) ? lt(out(0), f - shift) : gt(out(0), f + shift);
      return adversarial_task({e}, spec);
    }
    default: {
      std::vector<Formula> parts;
      const int bounds = uniform(rng, 0, 2);
      for (int b = 0; b < bounds; ++b) {
        const auto k = static_cast<std::uint32_t>(uniform(rng, 0, static_cast<int>(K) - 1));
        if (e->attr_type(AttrId(k)) == AttrType::Bool) {
          parts.push_back(coin(rng, 0.5) ? boolvar(attr(0, k)) : negate(boolvar(attr(0, k))));
        } else {
          parts.push_back(cmp(attr(0, k), random_op(rng), pick(rng, 0.25, 0.25, 13)));
        }
      }
      parts.push_back(cmp(out(0), random_op(rng), pick(rng, -3.0, 0.5, 15)));
      return single_instance_question(e, std::move(parts));
    }
  }
}

}  // namespace treeq::testing

namespace treeq::testing {

namespace {

void grow_complete(Rng& rng, Tree& t, int K, int depth, int max_depth) {
  const auto self = static_cast<Node::Index>(t.nodes.size());
  if (depth >= max_depth) {
    t.nodes.push_back(Node::make_leaf(std::round(std::normal_distribution<double>(0.0, 0.3)(rng) * 1024) / 1024));
    return;
  }
  const auto k = static_cast<std::uint32_t>(uniform(rng, 0, K - 1));
  const double th = std::round(std::uniform_real_distribution<double>(0.05, 0.95)(rng) * 256) / 256;
  t.nodes.push_back(Node::make_internal(SplitCondition::less_than(AttrId(k), th), 0, 0));
  t.nodes[self].left = static_cast<Node::Index>(t.nodes.size());
  grow_complete(rng, t, K, depth + 1, max_depth);
  t.nodes[self].right = static_cast<Node::Index>(t.nodes.size());
  grow_complete(rng, t, K, depth + 1, max_depth);
}

}  // namespace

std::shared_ptr<const Ensemble> synthetic_forest(Rng& rng, int K, int M, int D) {
  std::vector<Tree> trees(static_cast<std::size_t>(M));
  for (Tree& t : trees) grow_complete(rng, t, K, 0, D);
  return std::make_shared<const Ensemble>(std::vector<AttrType>(static_cast<std::size_t>(K), AttrType::Real),
                                          std::move(trees));
}

Instance synthetic_instance(Rng& rng, int K) {
  Instance x(static_cast<std::size_t>(K));
  for (double& v : x) v = std::round(std::uniform_real_distribution<double>(0.0, 1.0)(rng) * 256) / 256;
  return x;
}

std::string data_path(const std::string& name) { return std::string(TREEQ_TEST_DATA) + "/" + name; }

std::size_t count_processes_with(const std::string& needle) {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator("/proc")) {
    const std::string pid = entry.path().filename().string();
    if (pid.find_first_not_of("0123456789") != std::string::npos) continue;
    std::ifstream status(entry.path() / "stat");
    std::string line;
    if (!std::getline(status, line)) continue;
    auto close = line.rfind(')');
    if (close != std::string::npos && close + 2 < line.size() && line[close + 2] == 'Z') continue;
    std::ifstream cmd(entry.path() / "cmdline", std::ios::binary);
    std::string args((std::istreambuf_iterator<char>(cmd)), std::istreambuf_iterator<char>());
    std::replace(args.begin(), args.end(), '\0', ' ');
    if (args.find(needle) != std::string::npos) ++n;
  }
  return n;
}

}  // namespace treeq::testing
