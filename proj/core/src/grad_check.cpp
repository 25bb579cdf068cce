#include "adagtcn/grad_check.hpp"

#include <cmath>

#include "adagtcn/errors.hpp"

namespace adagtcn {

namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& in : inputs) leaves.push_back(tape.leaf(in, false));
  const Var root = f(tape, leaves);
  const Tensor& value = tape.value(root);
  if (value.numel() != 1) {
    throw ShapeError("check_gradients: f must be scalar-valued, got " + value.shape_str());
  }
  if (!std::isfinite(value[0])) {
    throw NumericError("check_gradients: non-finite function value");
  }
  return value[0];
}

}  // namespace

GradCheckReport check_gradients(const ScalarFn& f, const std::vector<Tensor>& inputs,
                                double eps, double tol) {
  if (eps <= 0.0) throw ConfigError("check_gradients: eps must be positive");

  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& in : inputs) leaves.push_back(tape.leaf(in, true));
  const Var root = f(tape, leaves);
  if (tape.value(root).numel() != 1) {
    throw ShapeError("check_gradients: f must be scalar-valued, got " +
                     tape.value(root).shape_str());
  }
  if (!std::isfinite(tape.value(root)[0])) {
    throw NumericError("check_gradients: non-finite function value");
  }
  tape.backward(root);

  GradCheckReport report;
  report.pass = true;
  std::vector<Tensor> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor& analytic = tape.grad(leaves[i]);
    for (std::size_t e = 0; e < inputs[i].numel(); ++e) {
      const double original = probe[i][e];
      probe[i][e] = original + eps;
      const double f_plus = evaluate(f, probe);
      probe[i][e] = original - eps;
      const double f_minus = evaluate(f, probe);
      probe[i][e] = original;

      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = analytic[e];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_input = i;
        report.worst_element = e;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace adagtcn
