#pragma once

#include "slat/tape.hpp"

#include <string>
#include <vector>

namespace slat {

struct SuiteResult {
  std::string name;
  double max_rel_error = 0.0;
  bool passed = false;
  std::string worst_param;
  long worst_index = 0;
};

// Finite-difference checks for every op and every composite the model uses:
// the bare ops, the adapter transform, the gated layer (wrt gate and
// weights), the regularized total loss, and the K-adapter routed forward.
std::vector<SuiteResult> run_gradcheck_suite(int instances = 20, double epsilon = 1e-4,
                                             double tolerance = 1e-4);

}  // namespace slat
