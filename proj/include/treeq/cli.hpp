#pragma once

#include <iosfwd>
#include <stop_token>

namespace treeq::cli {

enum ExitCode : int {
  kSat = 0,
  kUnsat = 1,
  kUnknown = 2,
  kError = 3,
  kReportCheckFailed = 4,
};

/// Entry point of the `treeq` command. Reports and summaries go to `out`
/// (unless --output names a file), diagnostics to `err`. A stop request on
/// `stop` cancels a running search gracefully.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::stop_token stop = {});

}  // namespace treeq::cli
