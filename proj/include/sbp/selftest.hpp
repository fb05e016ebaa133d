#pragma once

// Oracle checks runnable from the command line on any build.

#include <cstdint>
#include <string>
#include <vector>

namespace sbp {

struct SelfTestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<SelfTestResult> run_selftest(std::uint64_t seed = 0);

}  // namespace sbp
