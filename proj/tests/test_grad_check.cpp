#include <doctest.h>

#include "adagtcn/errors.hpp"
#include "adagtcn/grad_check.hpp"
#include "adagtcn/ops.hpp"

using namespace adagtcn;

TEST_CASE("square function: analytic 6 matches numeric 6 at x=3") {
  const auto f = [](Tape&, const std::vector<Var>& in) {
    return ops::sum(ops::mul(in[0], in[0]));
  };
  const GradCheckReport report = check_gradients(f, {Tensor::scalar(3.0)}, 1e-5, 1e-8);
  CHECK(report.pass);
  CHECK(report.analytic == doctest::Approx(6.0).epsilon(1e-10));
  CHECK(report.numeric == doctest::Approx(6.0).epsilon(1e-8));
}

TEST_CASE("reports worst offending element") {
  // Gradient of sum(x^3) is 3x^2; all elements agree with FD, so the report
  // records a tiny max_rel_err and a valid location.
  const auto f = [](Tape&, const std::vector<Var>& in) {
    return ops::sum(ops::mul(ops::mul(in[0], in[0]), in[0]));
  };
  const GradCheckReport report =
      check_gradients(f, {Tensor::from_values({1.0, -2.0, 0.5})}, 1e-5, 1e-4);
  CHECK(report.pass);
  CHECK(report.worst_input == 0);
  CHECK(report.worst_element < 3);
}

TEST_CASE("non-finite function value raises evaluation error") {
  const auto f = [](Tape&, const std::vector<Var>& in) { return ops::sum(ops::log(in[0])); };
  CHECK_THROWS_AS(check_gradients(f, {Tensor::scalar(-1.0)}, 1e-5, 1e-4), NumericError);
}

TEST_CASE("eps must be positive") {
  const auto f = [](Tape&, const std::vector<Var>& in) { return ops::sum(in[0]); };
  CHECK_THROWS_AS(check_gradients(f, {Tensor::scalar(1.0)}, 0.0, 1e-4), ConfigError);
}

TEST_CASE("requires-grad leaves receive zero-filled gradients when unused") {
  Tape tape;
  const Var used = tape.leaf(Tensor::scalar(2.0));
  const Var unused = tape.leaf(Tensor::from_values({1.0, 2.0}));
  tape.backward(ops::mul(used, used));
  CHECK(tape.grad(unused) == Tensor({2}));
  CHECK(tape.grad(used)[0] == 4.0);
}
