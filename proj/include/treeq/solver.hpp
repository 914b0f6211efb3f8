#pragma once

#include <chrono>
#include <map>
#include <stop_token>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "treeq/encode.hpp"
#include "treeq/question.hpp"

namespace treeq {

enum class SolverStatus { Sat, Unsat, Unknown };

const char* to_string(SolverStatus s);

using ModelValue = std::variant<Rational, bool>;

struct SolverVerdict {
  SolverStatus status = SolverStatus::Unknown;
  std::map<std::string, ModelValue> model;  // non-empty only for Sat
  std::chrono::duration<double> wall_time{0};
  bool timed_out = false;   // we stopped the process (timeout or cancellation)
  bool cancelled = false;
  std::string diagnostics;  // tail of solver output on anomalies
};

/// How to launch the solver. The command is split on whitespace (single and
/// double quotes group words); `{timeout_ms}` is replaced by the soft timeout.
/// The process reads SMT-LIB2 on stdin and prints its answers on stdout.
struct SolverOptions {
  std::string command = default_command();
  std::chrono::milliseconds grace{2000};

  /// $TREEQ_SOLVER_CMD if set, otherwise "z3 -in -t:{timeout_ms}".
  static std::string default_command();
};

/// Runs one fresh solver process on `script`.
///
/// With a `{timeout_ms}` placeholder the solver enforces the timeout itself
/// and is killed only after timeout + grace. Without it the process group is
/// sent SIGTERM at the timeout and SIGKILL after the grace period. A stop
/// request kills the process immediately. A zero timeout answers Unknown
/// without starting a process.
///
/// Throws SolverUnavailable if the process cannot be started and
/// ProtocolError if it exits without a parseable verdict.
SolverVerdict solve(const SmtScript& script, std::chrono::milliseconds timeout, const SolverOptions& options,
                    std::stop_token stop = {});

/// Parses solver stdout (verdict line followed by a get-value answer). With
/// `expect_model` false a bare "sat" is accepted.
SolverVerdict parse_solver_output(std::string_view output, bool expect_model = true);

struct DecodedModel {
  std::vector<ExactInstance> instances;
  std::vector<Rational> outputs;
  std::vector<std::vector<bool>> defaulted;  // per instance, per attribute
  std::map<std::string, Rational> aux_real;
  std::map<std::string, bool> aux_bool;

  Assignment assignment() const { return {instances, outputs, aux_real, aux_bool}; }
};

/// Reads attribute, output and auxiliary values for every instance of `task`.
/// Attributes missing from the model default to 0 / false (flagged); a
/// missing output variable is a ProtocolError.
DecodedModel decode_model(const SolverVerdict& verdict, const VerificationTask& task);

}  // namespace treeq
