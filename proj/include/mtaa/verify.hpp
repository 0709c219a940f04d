#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mtaa {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  /// Run only the named suite when non-empty.
  std::string only;
  std::uint64_t seed = 20240915;
  /// Test hook: name of a suite whose computed gradients are deliberately
  /// corrupted, to prove the checks can fail.
  std::string fault;
};

/// Names of the available suites, in execution order.
std::vector<std::string> verification_suites();

/// Runs the finite-difference, solver-oracle and property suites.
std::vector<CheckResult> run_verification(const VerifyOptions& options);

}  // namespace mtaa
