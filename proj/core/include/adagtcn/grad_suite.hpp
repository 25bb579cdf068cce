#pragma once

#include <string>
#include <vector>

namespace adagtcn {

struct GradSuiteEntry {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Finite-difference verification of every layer on fixed small fixtures:
/// AGL (frozen Gumbel noise), DN-GCN, DI-TCN and the dense head at 1e-4
/// relative tolerance, plus the end-to-end tiny model at 1e-3.
/// `module` selects "all", "agl", "gconv", "tconv" or "model".
std::vector<GradSuiteEntry> run_grad_suite(const std::string& module = "all");

}  // namespace adagtcn
