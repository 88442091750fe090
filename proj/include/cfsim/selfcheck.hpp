#pragma once

#include <string>
#include <vector>

namespace cfsim {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Quick oracle/invariant battery behind the `validate` CLI subcommand.
// Independent of the sweep path; runs in a few seconds.
std::vector<CheckResult> run_selfcheck();

std::string format_selfcheck(const std::vector<CheckResult>& results);

}  // namespace cfsim
