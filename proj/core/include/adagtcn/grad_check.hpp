#pragma once

#include <functional>
#include <vector>

#include "adagtcn/tape.hpp"

namespace adagtcn {

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::size_t worst_input = 0;    // index into the inputs vector
  std::size_t worst_element = 0;  // flat element index within that input
  double analytic = 0.0;          // reverse-mode gradient at the worst element
  double numeric = 0.0;           // central-difference estimate there
};

/// Builds a scalar expression from staged leaves (one per input tensor, same
/// order as `inputs`).
using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares the reverse-mode gradient of f against central finite differences
/// (f(x+eps) - f(x-eps)) / (2 eps), elementwise over every input. Relative
/// error uses denominator max(|analytic|, |numeric|, 1e-6), so near-zero
/// gradients are compared on an absolute 1e-6 scale. Throws NumericError if f
/// evaluates to a non-finite value at or around the inputs.
GradCheckReport check_gradients(const ScalarFn& f, const std::vector<Tensor>& inputs,
                                double eps = 1e-5, double tol = 1e-4);

}  // namespace adagtcn
