#include "adagtcn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "adagtcn/errors.hpp"

namespace adagtcn::ops {

namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape) throw Error(std::string(op) + ": operands on different tapes");
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " vs " +
                   b.shape_str());
}

enum class Broadcast { kEqual, kScalarLeft, kScalarRight };

Broadcast binary_mode(const char* op, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return Broadcast::kEqual;
  if (a.is_scalar()) return Broadcast::kScalarLeft;
  if (b.is_scalar()) return Broadcast::kScalarRight;
  shape_fail(op, a, b);
}

// F: double(double, double). DA/DB: partial derivatives as double(av, bv).
template <typename F, typename DA, typename DB>
Var binary_op(const char* name, Var a, Var b, F f, DA dfda, DB dfdb) {
  require_same_tape(a, b, name);
  Tape& tape = *a.tape;
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  const Broadcast mode = binary_mode(name, av, bv);

  const Tensor& big = mode == Broadcast::kScalarLeft ? bv : av;
  Tensor out(big.shape());
  const std::size_t n = big.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = mode == Broadcast::kScalarLeft ? av[0] : av[i];
    const double y = mode == Broadcast::kScalarRight ? bv[0] : bv[i];
    out[i] = f(x, y);
  }

  return tape.record(std::move(out), {a, b}, [=](Tape& t, const Tensor& g) {
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    const std::size_t count = g.numel();
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < count; ++i) {
        const double x = mode == Broadcast::kScalarLeft ? va[0] : va[i];
        const double y = mode == Broadcast::kScalarRight ? vb[0] : vb[i];
        const double d = dfda(x, y) * g[i];
        ga[mode == Broadcast::kScalarLeft ? 0 : i] += d;
      }
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buf(b);
      for (std::size_t i = 0; i < count; ++i) {
        const double x = mode == Broadcast::kScalarLeft ? va[0] : va[i];
        const double y = mode == Broadcast::kScalarRight ? vb[0] : vb[i];
        const double d = dfdb(x, y) * g[i];
        gb[mode == Broadcast::kScalarRight ? 0 : i] += d;
      }
    }
  });
}

// F: double(double). D: derivative as double(x, y) given input and output.
template <typename F, typename D>
Var unary_op(Var x, F f, D dfdx) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = f(xv[i]);
  Tensor saved = out;
  return tape.record(std::move(out), {x}, [x, saved, dfdx](Tape& t, const Tensor& g) {
    if (!t.requires_grad(x)) return;
    const Tensor& xin = t.value(x);
    Tensor& gx = t.grad_buf(x);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      gx[i] += dfdx(xin[i], saved[i]) * g[i];
    }
  });
}

void matmul_accum(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a + i * k;
    double* c_row = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = a_row[l];
      const double* b_row = b + l * n;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
    }
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of bounds for shape " + shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Var add(Var a, Var b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var emax(Var a, Var b) {
  // Ties route the gradient to the first operand.
  return binary_op(
      "emax", a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Var tanh(Var x) {
  return unary_op(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var x) {
  // Subgradient at zero is defined as 0.
  return unary_op(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
  return unary_op(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var x) {
  return unary_op(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  return unary_op(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var neg(Var x) {
  return unary_op(
      x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var rsqrt(Var x) {
  return unary_op(
      x, [](double v) { return 1.0 / std::sqrt(v); },
      [](double, double y) { return -0.5 * y * y * y; });
}

Var scale(Var x, double c) {
  return unary_op(
      x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Var clamp(Var x, double lo, double hi) {
  if (lo > hi) throw ConfigError("clamp: lo > hi");
  return unary_op(
      x, [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  Tape& tape = *a.tape;
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw ShapeError("matmul: inner dimensions disagree: " + av.shape_str() + " x " +
                     bv.shape_str());
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  matmul_accum(av.raw(), bv.raw(), out.raw(), m, k, n);

  return tape.record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g) {
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    if (t.requires_grad(a)) {
      // dA = g * B^T
      Tensor& ga = t.grad_buf(a);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
          double s = 0.0;
          const double* g_row = g.raw() + i * n;
          const double* b_row = vb.raw() + l * n;
          for (std::size_t j = 0; j < n; ++j) s += g_row[j] * b_row[j];
          ga[i * k + l] += s;
        }
      }
    }
    if (t.requires_grad(b)) {
      // dB = A^T * g
      Tensor& gb = t.grad_buf(b);
      for (std::size_t i = 0; i < m; ++i) {
        const double* a_row = va.raw() + i * k;
        const double* g_row = g.raw() + i * n;
        for (std::size_t l = 0; l < k; ++l) {
          const double av_il = a_row[l];
          double* gb_row = gb.raw() + l * n;
          for (std::size_t j = 0; j < n; ++j) gb_row[j] += av_il * g_row[j];
        }
      }
    }
  });
}

Var transpose(Var x) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  if (xv.rank() != 2) throw ShapeError("transpose: expected rank-2, got " + xv.shape_str());
  const std::size_t r = xv.dim(0), c = xv.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = xv.at(i, j);
  }
  return tape.record(std::move(out), {x}, [x, r, c](Tape& t, const Tensor& g) {
    if (!t.requires_grad(x)) return;
    Tensor& gx = t.grad_buf(x);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
    }
  });
}

Var add_rowvec(Var x, Var row_vec) {
  require_same_tape(x, row_vec, "add_rowvec");
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  const Tensor& bv = tape.value(row_vec);
  if (xv.rank() != 2 || bv.numel() != xv.dim(1)) shape_fail("add_rowvec", xv, bv);
  const std::size_t r = xv.dim(0), c = xv.dim(1);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = xv.at(i, j) + bv[j];
  }
  return tape.record(std::move(out), {x, row_vec}, [x, row_vec, r, c](Tape& t, const Tensor& g) {
    if (t.requires_grad(x)) {
      Tensor& gx = t.grad_buf(x);
      for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(row_vec)) {
      Tensor& gb = t.grad_buf(row_vec);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
      }
    }
  });
}

Var reshape(Var x, Shape shape) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  if (shape_numel(shape) != xv.numel()) {
    throw ShapeError("reshape: cannot view " + xv.shape_str() + " as " + shape_string(shape));
  }
  Tensor out(shape, std::vector<double>(xv.data().begin(), xv.data().end()));
  return tape.record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    if (!t.requires_grad(x)) return;
    Tensor& gx = t.grad_buf(x);
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
  });
}

Var narrow(Var x, std::size_t axis, std::size_t start, std::size_t len) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  const AxisSplit s = split_at(xv.shape(), axis, "narrow");
  if (start + len > s.len) {
    throw ShapeError("narrow: range [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") exceeds axis length " +
                     std::to_string(s.len));
  }
  Shape out_shape = xv.shape();
  out_shape[axis] = len;
  Tensor out(out_shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t a = 0; a < len; ++a) {
      const double* src = xv.raw() + (o * s.len + start + a) * s.inner;
      double* dst = out.raw() + (o * len + a) * s.inner;
      std::copy(src, src + s.inner, dst);
    }
  }
  return tape.record(std::move(out), {x}, [x, s, start, len](Tape& t, const Tensor& g) {
    if (!t.requires_grad(x)) return;
    Tensor& gx = t.grad_buf(x);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t a = 0; a < len; ++a) {
        const double* src = g.raw() + (o * len + a) * s.inner;
        double* dst = gx.raw() + (o * s.len + start + a) * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ConfigError("concat: no inputs");
  Tape& tape = *parts[0].tape;
  const Tensor& first = tape.value(parts[0]);
  const AxisSplit s0 = split_at(first.shape(), axis, "concat");

  std::size_t total = 0;
  std::vector<std::size_t> lens;
  for (const Var& part : parts) {
    require_same_tape(parts[0], part, "concat");
    const Tensor& pv = tape.value(part);
    if (pv.rank() != first.rank()) shape_fail("concat", first, pv);
    for (std::size_t d = 0; d < first.rank(); ++d) {
      if (d != axis && pv.dim(d) != first.dim(d)) shape_fail("concat", first, pv);
    }
    lens.push_back(pv.dim(axis));
    total += pv.dim(axis);
  }

  Shape out_shape = first.shape();
  out_shape[axis] = total;
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& pv = tape.value(parts[p]);
    for (std::size_t o = 0; o < s0.outer; ++o) {
      const double* src = pv.raw() + o * lens[p] * s0.inner;
      double* dst = out.raw() + (o * total + offset) * s0.inner;
      std::copy(src, src + lens[p] * s0.inner, dst);
    }
    offset += lens[p];
  }

  std::vector<Var> inputs = parts;
  return tape.record(std::move(out), inputs,
                     [inputs, lens, s0, total](Tape& t, const Tensor& g) {
                       std::size_t off = 0;
                       for (std::size_t p = 0; p < inputs.size(); ++p) {
                         if (t.requires_grad(inputs[p])) {
                           Tensor& gp = t.grad_buf(inputs[p]);
                           for (std::size_t o = 0; o < s0.outer; ++o) {
                             const double* src = g.raw() + (o * total + off) * s0.inner;
                             double* dst = gp.raw() + o * lens[p] * s0.inner;
                             for (std::size_t i = 0; i < lens[p] * s0.inner; ++i) dst[i] += src[i];
                           }
                         }
                         off += lens[p];
                       }
                     });
}

Var swap_last_axes(Var x) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  if (xv.rank() != 3) throw ShapeError("swap_last_axes: expected rank-3, got " + xv.shape_str());
  const std::size_t a = xv.dim(0), b = xv.dim(1), c = xv.dim(2);
  Tensor out({a, c, b});
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      for (std::size_t k = 0; k < c; ++k) out.at(i, k, j) = xv.at(i, j, k);
    }
  }
  return tape.record(std::move(out), {x}, [x, a, b, c](Tape& t, const Tensor& g) {
    if (!t.requires_grad(x)) return;
    Tensor& gx = t.grad_buf(x);
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t j = 0; j < b; ++j) {
        for (std::size_t k = 0; k < c; ++k) {
          gx[(i * b + j) * c + k] += g[(i * c + k) * b + j];
        }
      }
    }
  });
}

Var softmax(Var x, std::size_t axis) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  if (xv.rank() > 2) throw ShapeError("softmax: expected rank <= 2, got " + xv.shape_str());
  const AxisSplit s = split_at(xv.shape(), axis, "softmax");

  Tensor out(xv.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const auto idx = [&](std::size_t a) { return (o * s.len + a) * s.inner + i; };
      double hi = xv[idx(0)];
      for (std::size_t a = 1; a < s.len; ++a) hi = std::max(hi, xv[idx(a)]);
      double z = 0.0;
      for (std::size_t a = 0; a < s.len; ++a) {
        const double e = std::exp(xv[idx(a)] - hi);
        out[idx(a)] = e;
        z += e;
      }
      for (std::size_t a = 0; a < s.len; ++a) out[idx(a)] /= z;
    }
  }

  Tensor saved = out;
  return tape.record(std::move(out), {x}, [x, s, saved](Tape& t, const Tensor& g) {
    if (!t.requires_grad(x)) return;
    Tensor& gx = t.grad_buf(x);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const auto idx = [&](std::size_t a) { return (o * s.len + a) * s.inner + i; };
        double dot = 0.0;
        for (std::size_t a = 0; a < s.len; ++a) dot += g[idx(a)] * saved[idx(a)];
        for (std::size_t a = 0; a < s.len; ++a) {
          gx[idx(a)] += saved[idx(a)] * (g[idx(a)] - dot);
        }
      }
    }
  });
}

Var sum(Var x) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  double total = 0.0;
  for (double v : xv.data()) total += v;
  return tape.record(Tensor::scalar(total), {x}, [x](Tape& t, const Tensor& g) {
    if (!t.requires_grad(x)) return;
    Tensor& gx = t.grad_buf(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g[0];
  });
}

Var sum(Var x, std::size_t axis) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  const AxisSplit s = split_at(xv.shape(), axis, "sum");
  Shape out_shape;
  for (std::size_t d = 0; d < xv.rank(); ++d) {
    if (d != axis) out_shape.push_back(xv.dim(d));
  }
  if (out_shape.empty()) out_shape = {1};
  Tensor out(out_shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t a = 0; a < s.len; ++a) {
      const double* src = xv.raw() + (o * s.len + a) * s.inner;
      double* dst = out.raw() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  return tape.record(std::move(out), {x}, [x, s](Tape& t, const Tensor& g) {
    if (!t.requires_grad(x)) return;
    Tensor& gx = t.grad_buf(x);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t a = 0; a < s.len; ++a) {
        const double* src = g.raw() + o * s.inner;
        double* dst = gx.raw() + (o * s.len + a) * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Var mean(Var x) {
  const std::size_t n = x.tape->value(x).numel();
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var mean(Var x, std::size_t axis) {
  const std::size_t n = x.tape->value(x).dim(axis);
  return scale(sum(x, axis), 1.0 / static_cast<double>(n));
}

Var max(Var x) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  std::size_t arg = 0;
  for (std::size_t i = 1; i < xv.numel(); ++i) {
    if (xv[i] > xv[arg]) arg = i;
  }
  return tape.record(Tensor::scalar(xv[arg]), {x}, [x, arg](Tape& t, const Tensor& g) {
    if (!t.requires_grad(x)) return;
    t.grad_buf(x)[arg] += g[0];
  });
}

Var max(Var x, std::size_t axis) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  const AxisSplit s = split_at(xv.shape(), axis, "max");
  Shape out_shape;
  for (std::size_t d = 0; d < xv.rank(); ++d) {
    if (d != axis) out_shape.push_back(xv.dim(d));
  }
  if (out_shape.empty()) out_shape = {1};
  Tensor out(out_shape);
  std::vector<std::size_t> args(out.numel(), 0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const auto idx = [&](std::size_t a) { return (o * s.len + a) * s.inner + i; };
      std::size_t best = 0;
      for (std::size_t a = 1; a < s.len; ++a) {
        if (xv[idx(a)] > xv[idx(best)]) best = a;
      }
      out[o * s.inner + i] = xv[idx(best)];
      args[o * s.inner + i] = idx(best);
    }
  }
  return tape.record(std::move(out), {x}, [x, args](Tape& t, const Tensor& g) {
    if (!t.requires_grad(x)) return;
    Tensor& gx = t.grad_buf(x);
    for (std::size_t i = 0; i < args.size(); ++i) gx[args[i]] += g[i];
  });
}

Var conv1d_dilated_batched(Var x, Var filters, std::size_t dilation) {
  require_same_tape(x, filters, "conv1d_dilated");
  if (dilation == 0) throw ConfigError("conv1d_dilated: dilation must be positive");
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  const Tensor& fv = tape.value(filters);
  if (xv.rank() != 3 || fv.rank() != 3) {
    throw ShapeError("conv1d_dilated: expected x [B, C_in, T] and filters [C_out, C_in, d], got " +
                     xv.shape_str() + " and " + fv.shape_str());
  }
  const std::size_t batch = xv.dim(0), c_in = xv.dim(1), t_len = xv.dim(2);
  const std::size_t c_out = fv.dim(0), width = fv.dim(2);
  if (fv.dim(1) != c_in) {
    throw ShapeError("conv1d_dilated: filter input channels " + fv.shape_str() +
                     " do not match signal " + xv.shape_str());
  }
  const std::size_t field = (width - 1) * dilation + 1;
  if (t_len < field) {
    throw LengthError("conv1d_dilated: sequence length " + std::to_string(t_len) +
                      " shorter than receptive field; need T >= " + std::to_string(field));
  }
  const std::size_t t_out = t_len - (width - 1) * dilation;

  Tensor out({batch, c_out, t_out});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < c_out; ++co) {
      double* dst = out.raw() + (b * c_out + co) * t_out;
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const double* src = xv.raw() + (b * c_in + ci) * t_len;
        const double* w = fv.raw() + (co * c_in + ci) * width;
        for (std::size_t s = 0; s < width; ++s) {
          const double ws = w[s];
          const double* shifted = src + s * dilation;
          for (std::size_t t = 0; t < t_out; ++t) dst[t] += ws * shifted[t];
        }
      }
    }
  }

  return tape.record(std::move(out), {x, filters},
                     [x, filters, batch, c_in, t_len, c_out, width, t_out,
                      dilation](Tape& t, const Tensor& g) {
                       const Tensor& xin = t.value(x);
                       const Tensor& fin = t.value(filters);
                       if (t.requires_grad(x)) {
                         Tensor& gx = t.grad_buf(x);
                         for (std::size_t b = 0; b < batch; ++b) {
                           for (std::size_t co = 0; co < c_out; ++co) {
                             const double* gout = g.raw() + (b * c_out + co) * t_out;
                             for (std::size_t ci = 0; ci < c_in; ++ci) {
                               double* dst = gx.raw() + (b * c_in + ci) * t_len;
                               const double* w = fin.raw() + (co * c_in + ci) * width;
                               for (std::size_t s = 0; s < width; ++s) {
                                 const double ws = w[s];
                                 double* shifted = dst + s * dilation;
                                 for (std::size_t tt = 0; tt < t_out; ++tt) {
                                   shifted[tt] += ws * gout[tt];
                                 }
                               }
                             }
                           }
                         }
                       }
                       if (t.requires_grad(filters)) {
                         Tensor& gf = t.grad_buf(filters);
                         for (std::size_t b = 0; b < batch; ++b) {
                           for (std::size_t co = 0; co < c_out; ++co) {
                             const double* gout = g.raw() + (b * c_out + co) * t_out;
                             for (std::size_t ci = 0; ci < c_in; ++ci) {
                               const double* src = xin.raw() + (b * c_in + ci) * t_len;
                               double* w = gf.raw() + (co * c_in + ci) * width;
                               for (std::size_t s = 0; s < width; ++s) {
                                 const double* shifted = src + s * dilation;
                                 double acc = 0.0;
                                 for (std::size_t tt = 0; tt < t_out; ++tt) {
                                   acc += shifted[tt] * gout[tt];
                                 }
                                 w[s] += acc;
                               }
                             }
                           }
                         }
                       }
                     });
}

Var conv1d_dilated(Var x, Var filters, std::size_t dilation) {
  const Tensor& xv = x.tape->value(x);
  if (xv.rank() != 2) {
    throw ShapeError("conv1d_dilated: expected signal [C_in, T], got " + xv.shape_str());
  }
  Var batched = reshape(x, {1, xv.dim(0), xv.dim(1)});
  Var out = conv1d_dilated_batched(batched, filters, dilation);
  const Tensor& ov = out.tape->value(out);
  return reshape(out, {ov.dim(1), ov.dim(2)});
}

Tensor topk_mask_values(const Tensor& scores, std::size_t k) {
  if (scores.rank() != 2 || scores.dim(0) != scores.dim(1)) {
    throw ShapeError("topk_mask: expected square matrix, got " + scores.shape_str());
  }
  const std::size_t p = scores.dim(0);
  if (k > p) {
    throw ConfigError("topk_mask: k = " + std::to_string(k) + " exceeds row length " +
                      std::to_string(p));
  }
  Tensor mask({p, p});
  std::vector<std::size_t> order(p);
  for (std::size_t i = 0; i < p; ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    const double* row = scores.raw() + i * p;
    std::sort(order.begin(), order.end(), [row](std::size_t a, std::size_t b) {
      if (row[a] != row[b]) return row[a] > row[b];
      return a < b;
    });
    for (std::size_t j = 0; j < k; ++j) mask.at(i, order[j]) = 1.0;
  }
  return mask;
}

Var topk_mask(Var scores, std::size_t k) {
  Tape& tape = *scores.tape;
  Tensor mask = topk_mask_values(tape.value(scores), k);
  Tensor saved = mask;
  return tape.record(std::move(mask), {scores}, [scores, saved](Tape& t, const Tensor& g) {
    if (!t.requires_grad(scores)) return;
    Tensor& gs = t.grad_buf(scores);
    for (std::size_t i = 0; i < g.numel(); ++i) gs[i] += g[i] * saved[i];
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_same_tape(x, gain, "layer_norm");
  require_same_tape(x, bias, "layer_norm");
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  const Tensor& gv = tape.value(gain);
  const Tensor& bv = tape.value(bias);
  if (xv.rank() != 2) throw ShapeError("layer_norm: expected rank-2, got " + xv.shape_str());
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  if (cols < 2) {
    throw ShapeError("layer_norm: needs at least 2 channels, got " + xv.shape_str());
  }
  if (gv.numel() != cols || bv.numel() != cols) shape_fail("layer_norm", xv, gv);

  Tensor normalized({rows, cols});
  Tensor inv_std({rows});
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.raw() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += row[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t c = 0; c < cols; ++c) {
      const double xhat = (row[c] - mu) * inv;
      normalized.at(r, c) = xhat;
      out.at(r, c) = xhat * gv[c] + bv[c];
    }
  }

  return tape.record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, normalized, inv_std, rows, cols](Tape& t, const Tensor& g) {
        const Tensor& gv = t.value(gain);
        if (t.requires_grad(gain)) {
          Tensor& gg = t.grad_buf(gain);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              gg[c] += g[r * cols + c] * normalized.at(r, c);
            }
          }
        }
        if (t.requires_grad(bias)) {
          Tensor& gb = t.grad_buf(bias);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
          }
        }
        if (t.requires_grad(x)) {
          Tensor& gx = t.grad_buf(x);
          const double denom = static_cast<double>(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              const double dxhat = g[r * cols + c] * gv[c];
              m1 += dxhat;
              m2 += dxhat * normalized.at(r, c);
            }
            m1 /= denom;
            m2 /= denom;
            for (std::size_t c = 0; c < cols; ++c) {
              const double dxhat = g[r * cols + c] * gv[c];
              gx[r * cols + c] += inv_std[r] * (dxhat - m1 - normalized.at(r, c) * m2);
            }
          }
        }
      });
}

}  // namespace adagtcn::ops
