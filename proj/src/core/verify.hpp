#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "measures.hpp"
#include "rng.hpp"

namespace matinfo {

struct VerifyOptions {
  std::vector<int> sizes = {2, 4, 8, 16};
  int trials = 1000;
  std::uint64_t seed = 0;
  std::vector<double> alphas = {0.5, 1.0, 2.0};
  std::vector<double> mus = {0.5, 1.0, 3.0};
};

struct PropertyResult {
  std::string name;
  int trials = 0;
  double max_violation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

// Runs every executable property over random sanitized kernels; a property
// passes when its worst observed violation stays within tolerance.
std::vector<PropertyResult> run_property_suite(const VerifyOptions& opts);

bool all_pass(const std::vector<PropertyResult>& results);

// Random rank-diverse unit-diagonal PSD kernel (shared with tests).
KernelMatrix random_kernel(int n, Rng& rng);

}  // namespace matinfo
