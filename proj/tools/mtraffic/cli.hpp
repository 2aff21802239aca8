#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mtraffic::cli {

/// Runs the command line (without the program name). Returns the exit code:
/// 0 success, 1 internal or numerical failure, 2 invalid input or usage.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct ToyCheck {
  std::string name;
  bool passed = false;
  double max_error = 0.0;
  double tolerance = 0.0;
};

/// The toy-network pipeline against reference values. `perturb`
/// names a check whose computed value is shifted before comparison.
std::vector<ToyCheck> run_toy_checks(const std::string& perturb = {});

}  // namespace mtraffic::cli
