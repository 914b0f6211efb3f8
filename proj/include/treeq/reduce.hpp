#pragma once

#include <cstddef>
#include <functional>
#include <optional>

#include "treeq/domain.hpp"
#include "treeq/model.hpp"

namespace treeq {

struct PrunedEnsemble {
  Ensemble ensemble;
  std::size_t original_leaves = 0;
  std::size_t pruned_leaves = 0;
};

/// Optional extra feasibility test for branches the box cannot decide.
/// Returning false for a refined box drops that branch.
using BranchFeasible = std::function<bool(const DomainBox&)>;

/// Removes every branch whose path is inconsistent with `box`, collapsing
/// decided nodes into the surviving child. Throws ContractViolation if the
/// box does not match the ensemble's attributes.
PrunedEnsemble prune(const Ensemble& e, const DomainBox& box, const BranchFeasible& feasible = {});

struct LeafCounts {
  std::size_t left = 0;
  std::size_t right = 0;
};

/// Leaves made unreachable by adding c (left) or not c (right) to `box`,
/// counted in one walk. Throws ContractViolation if c is decided by `box`.
LeafCounts unreachable_leaf_count(const Ensemble& e, const DomainBox& box, const SplitCondition& c);

struct SplitChoice {
  SplitCondition cond;
  LeafCounts counts;
};

/// Undecided split with the highest left + right count; ties go to the larger
/// smaller side, then to canonical order. nullopt when nothing scores above 0.
std::optional<SplitChoice> best_split(const Ensemble& e, const DomainBox& box);

}  // namespace treeq
