#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "treeq/domain.hpp"
#include "treeq/model.hpp"
#include "treeq/question.hpp"

namespace treeq::testing {

/// Two trees over A1 (real, attribute 0) and A2 (bool, attribute 1):
/// T1 = A1 < 5 ? 1 : 2, T2 = A2 ? (A1 < 3 ? 3 : 4) : 5.
std::shared_ptr<const Ensemble> figure_one();

/// Minimal model file text for figure_one.
std::string figure_one_json();

struct RandomShape {
  int max_trees = 5;
  int max_depth = 3;
  int max_attrs = 3;
  double bool_share = 0.3;  // chance an attribute is boolean
};

using Rng = std::mt19937_64;

/// Thresholds are drawn from {0.5, 1.0, ..., 3.0}, leaf values from
/// {-2, -1.5, ..., 2}, so random questions can hit exact ties.
std::shared_ptr<const Ensemble> random_ensemble(Rng& rng, const RandomShape& shape = {});

/// A box obtained by refining the unconstrained box with a few random literals.
DomainBox random_box(Rng& rng, const Ensemble& e, int literals);

/// A point inside `box`, drawn from the grid of thresholds and midpoints.
Instance random_point(Rng& rng, const Ensemble& e, const DomainBox& box);

/// Random task from the builder fragment (single-instance bounds, monotonicity,
/// one-diff pairs, any-single-diff pairs, adversarial with or without an L1
/// budget). `kind` selects the family; -1 picks one at random.
VerificationTask random_task(Rng& rng, const RandomShape& shape = {}, int kind = -1);

/// Boosting-like forest: M complete trees of depth D over K real attributes,
/// thresholds in [0.05, 0.95] on a 1/256 grid, leaves ~ N(0, 0.3) on a
/// 1/1024 grid.
std::shared_ptr<const Ensemble> synthetic_forest(Rng& rng, int K, int M, int D);

/// K values in [0, 1] on a 1/256 grid.
Instance synthetic_instance(Rng& rng, int K);

/// Directory holding the test data files.
std::string data_path(const std::string& name);

/// Live processes whose command line contains `needle` (zombies excluded).
std::size_t count_processes_with(const std::string& needle);

}  // namespace treeq::testing
