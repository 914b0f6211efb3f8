#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treeq/domain.hpp"
#include "treeq/model.hpp"
#include "treeq/question.hpp"

namespace treeq {

/// Brute-force reference implementations. They read trees as lists of
/// root-to-leaf paths and share no code with pruning, encoding or search.

struct LeafPath {
  Node::Index leaf = 0;
  std::vector<TrailLiteral> literals;
  double value = 0.0;
};

std::vector<LeafPath> leaf_paths(const Tree& t);

/// Output computed by matching one path per tree.
Rational path_evaluate(const Ensemble& e, std::span<const Rational> x);

struct LeafCombo {
  std::vector<Node::Index> choice;  // one leaf node per tree
  DomainBox box;                    // conjunction of the chosen paths
  Rational output;                  // base + sum of leaf values
};

inline constexpr double kComboGuard = 1e6;

/// Every combination of leaves whose paths are jointly consistent. Throws
/// TooLarge when the product of per-tree leaf counts exceeds `guard`.
std::vector<LeafCombo> enumerate_combos(const Ensemble& e, double guard = kComboGuard);

struct OracleVerdict {
  bool sat = false;
  std::optional<Assignment> witness;
};

/// Decides the task by exhaustive search over representative points: for
/// each attribute, every cut point (tree thresholds and single-attribute
/// question constants) together with points just below it, midpoints of the
/// cells between them and points beyond the extremes. Auxiliary booleans are
/// enumerated; auxiliary reals take the largest lower bound that applies.
/// Throws TooLarge (combo guard) or UnsupportedQuestion.
OracleVerdict oracle_verdict(const VerificationTask& task);

struct GridResult {
  bool found = false;
  std::optional<Assignment> witness;
};

/// Looks for a satisfying point on a grid inside `boxes` (one per instance):
/// cut points, cut points +- eps (eps = half the smallest gap between cut
/// points of one attribute), `resolution` evenly spaced points inside every
/// cell, and both boolean values. resolution 0 yields an empty grid.
GridResult grid_check(const VerificationTask& task, std::span<const DomainBox> boxes, int resolution);

/// Checks that `parts` (each one box per instance) are pairwise disjoint and
/// cover `root` exactly. Returns a description of the first problem found.
std::optional<std::string> check_partition(std::span<const DomainBox> root,
                                           const std::vector<std::vector<DomainBox>>& parts);

}  // namespace treeq
