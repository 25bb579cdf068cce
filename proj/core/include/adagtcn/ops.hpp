#pragma once

#include <cstddef>
#include <vector>

#include "adagtcn/tape.hpp"

namespace adagtcn::ops {

// Binary elementwise ops accept equal shapes, or a scalar (1-element tensor)
// on either side. No other broadcasting is supported.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var emax(Var a, Var b);

Var tanh(Var x);
Var relu(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var log(Var x);
Var neg(Var x);
Var rsqrt(Var x);
Var scale(Var x, double c);
/// Pass-through gradient strictly inside (lo, hi), zero where clamped.
Var clamp(Var x, double lo, double hi);

Var matmul(Var a, Var b);
Var transpose(Var x);
/// x: [R x C], row_vec: [C] or [1 x C]; adds the vector to every row.
Var add_rowvec(Var x, Var row_vec);

Var reshape(Var x, Shape shape);
/// Slice `len` indices starting at `start` along `axis` (rank <= 3).
Var narrow(Var x, std::size_t axis, std::size_t start, std::size_t len);
/// Concatenate same-rank tensors along `axis`; other dims must agree.
Var concat(const std::vector<Var>& parts, std::size_t axis);
/// [A x B x C] -> [A x C x B].
Var swap_last_axes(Var x);

/// Numerically stabilized softmax along `axis` of a 1-D or 2-D tensor.
Var softmax(Var x, std::size_t axis);

Var sum(Var x);
Var sum(Var x, std::size_t axis);
Var mean(Var x);
Var mean(Var x, std::size_t axis);
/// Gradient routes to the first-encountered argmax.
Var max(Var x);
Var max(Var x, std::size_t axis);

/// Valid-mode dilated 1-D convolution.
///   x: [C_in x T], filters: [C_out x C_in x d]
///   out[co, t] = sum_{ci, s} filters[co, ci, s] * x[ci, t + dilation * s]
Var conv1d_dilated(Var x, Var filters, std::size_t dilation);
/// Batched form, x: [B x C_in x T]; filters shared across the batch.
Var conv1d_dilated_batched(Var x, Var filters, std::size_t dilation);

/// Binary mask with exactly k ones per row at the k largest entries of a
/// square score matrix; ties break toward the lower column index.
Tensor topk_mask_values(const Tensor& scores, std::size_t k);
/// Recorded op over the same kernel. Backward is the straight-through
/// estimator: upstream gradient flows unchanged to selected entries.
Var topk_mask(Var scores, std::size_t k);

/// Per-row normalization of [R x C] to zero mean / unit variance across
/// columns (population variance), then gain/bias (each [C] or [1 x C]).
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

}  // namespace adagtcn::ops

namespace adagtcn {

inline Var operator+(Var a, Var b) { return ops::add(a, b); }
inline Var operator-(Var a, Var b) { return ops::sub(a, b); }
inline Var operator*(Var a, Var b) { return ops::mul(a, b); }

}  // namespace adagtcn
