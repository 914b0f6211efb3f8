#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include <json.hpp>

#include "treeq/domain.hpp"
#include "treeq/question.hpp"
#include "treeq/reduce.hpp"
#include "treeq/solver.hpp"

namespace treeq {

enum class StopMode { FirstSat, Exhaustive, Budget };

const char* to_string(StopMode m);
StopMode stop_mode_from_string(const std::string& s);

struct SearchConfig {
  std::chrono::milliseconds subproblem_timeout{5000};
  double timeout_growth = 1.0;  // per divide step
  int max_depth = 60;
  int workers = 1;
  StopMode stop_mode = StopMode::FirstSat;
  std::chrono::milliseconds budget{20 * 60 * 1000};  // total, Budget mode only
  std::optional<std::chrono::milliseconds> time_limit;  // overall cap, any mode

  bool prune = true;   // root box approximation + pruning
  bool divide = true;  // split on unknown
  int presplit_depth = 0;  // divide without solving until this depth
  bool deep_prune = false;
  std::chrono::milliseconds deep_prune_timeout{250};

  SolverOptions solver;
  std::string dump_smt;  // directory for per-subproblem scripts, empty = off

  /// Throws ValidationError on non-positive or inconsistent values.
  void validate() const;
};

struct Subproblem {
  std::vector<DomainBox> boxes;  // per instance
  int depth = 0;                 // divide steps taken
  std::size_t id = 0;
  std::optional<std::size_t> parent;
};

enum class ReportStatus { Sat, Unsat, UnknownSplit, UnknownTerminal };

const char* to_string(ReportStatus s);

struct SubproblemReport {
  std::size_t id = 0;
  std::optional<std::size_t> parent;
  int depth = 0;
  std::vector<std::vector<TrailLiteral>> trails;  // per instance
  std::vector<DomainBox> boxes;
  ReportStatus status = ReportStatus::UnknownTerminal;

  // Sat
  std::vector<ExactInstance> witnesses;
  std::vector<Rational> outputs;
  std::map<std::string, Rational> aux_real;
  std::map<std::string, bool> aux_bool;
  // UnknownSplit
  std::optional<SplitCondition> split;
  std::uint32_t split_instance = 0;
  LeafCounts split_counts;
  // Unsat (vacuous) and UnknownTerminal
  std::string reason;

  std::chrono::duration<double> solve_time{0};
  std::size_t leaves_before = 0;
  std::size_t leaves_after = 0;

  bool terminal() const { return status != ReportStatus::UnknownSplit; }
};

struct Summary {
  SolverStatus verdict = SolverStatus::Unknown;
  std::size_t sat = 0;
  std::size_t unsat = 0;
  std::size_t unknown_split = 0;
  std::size_t unknown_terminal = 0;
  std::optional<SubproblemReport> witness;  // first Sat report
  std::vector<Subproblem> unresolved;       // terminal unknowns and never-solved subproblems
  std::chrono::duration<double> elapsed{0};
  std::string stop_reason;  // "exhausted", "first-sat", "budget", "time-limit", "cancelled"
};

using ReportSink = std::function<void(const SubproblemReport&)>;

/// Prune, solve, divide. Reports are passed to `sink` as they resolve, one at
/// a time. A stop request on `stop` cancels in-flight solves. Throws
/// SolverUnavailable (after flushing earlier reports) if the solver cannot be
/// started.
Summary run(const VerificationTask& task, const SearchConfig& cfg, const ReportSink& sink = {},
            std::stop_token stop = {});

struct Checkpoint {
  SolverStatus prior_verdict = SolverStatus::Unknown;
  std::vector<Subproblem> unresolved;
};

Checkpoint make_checkpoint(const Summary& s);

/// Restarts only the checkpointed subproblems. Trails are replayed on the
/// task's attributes and intersected with the task's current box
/// approximation; the overall verdict is combined with the prior one.
/// Throws ValidationError if a trail does not fit the task.
Summary resume(const Checkpoint& cp, const VerificationTask& task, const SearchConfig& cfg, const ReportSink& sink = {},
               std::stop_token stop = {});

/// Sat re-check: the witness satisfies question and background, its outputs
/// equal exact evaluation, and every instance lies in its box.
bool witness_holds(const VerificationTask& task, const SubproblemReport& r);

nlohmann::json report_to_json(const SubproblemReport& r, const VerificationTask& task);
nlohmann::json summary_to_json(const Summary& s, const VerificationTask& task);
nlohmann::json checkpoint_to_json(const Checkpoint& cp);
Checkpoint checkpoint_from_json(const nlohmann::json& j, const VerificationTask& task);

}  // namespace treeq
