// Test-only reference implementations. These stay independent of the library
// kernels they check: plain nested loops and textbook formulas only.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "adagtcn/rng.hpp"
#include "adagtcn/tensor.hpp"

namespace oracles {

inline adagtcn::Tensor random_tensor(adagtcn::Shape shape, adagtcn::RngEngine& rng,
                                     double scale = 1.0) {
  adagtcn::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

inline adagtcn::Tensor random_uniform_tensor(adagtcn::Shape shape, adagtcn::RngEngine& rng,
                                             double lo, double hi) {
  adagtcn::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Brute-force triple-loop matrix product.
inline adagtcn::Tensor matmul_naive(const adagtcn::Tensor& a, const adagtcn::Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  adagtcn::Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a.at(i, l) * b.at(l, j);
      c.at(i, j) = s;
    }
  }
  return c;
}

/// Direct-sum valid-mode dilated convolution: out[b,co,t] = sum f * x shifted.
inline adagtcn::Tensor conv1d_naive(const adagtcn::Tensor& x, const adagtcn::Tensor& f,
                                    std::size_t dilation) {
  const std::size_t batch = x.dim(0), c_in = x.dim(1), t_len = x.dim(2);
  const std::size_t c_out = f.dim(0), width = f.dim(2);
  const std::size_t t_out = t_len - (width - 1) * dilation;
  adagtcn::Tensor out({batch, c_out, t_out});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < c_out; ++co) {
      for (std::size_t t = 0; t < t_out; ++t) {
        double s = 0.0;
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          for (std::size_t w = 0; w < width; ++w) {
            s += f.at(co, ci, w) * x.at(b, ci, t + dilation * w);
          }
        }
        out.at(b, co, t) = s;
      }
    }
  }
  return out;
}

/// Largest-magnitude eigenvalue of a symmetric matrix by power iteration.
inline double spectral_radius(const adagtcn::Tensor& a, std::size_t iters = 500) {
  const std::size_t n = a.dim(0);
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double lambda = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) w[i] += a.at(i, j) * v[j];
    }
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    lambda = norm;
  }
  return lambda;
}

}  // namespace oracles
