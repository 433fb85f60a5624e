#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include "adnn/histogram.hpp"

namespace adnn {

// Arithmetic distribution layers. Histograms are treated as probability
// masses on the bin-center values, so the product layer computes the density
// of Z = X*W and the sum layer the density of Z = X+B, with the layer kernel
// supplying the second operand. Forward and backward share one
// (kernel bin, output bin) -> input bin map, which keeps the backward pass
// exactly adjoint to the forward pass.

struct ProductTable {
  int width = 0;
  std::vector<std::int32_t> input_bin;  // [i * width + j] -> nearest_bin(c_j / c_i), -1 out of range
  std::vector<double> inv_center;       // 1 / |c_i|, 0 at the center bin (skipped)
};

namespace detail {

inline void check_odd_width(int width) {
  if (width < 3 || width % 2 == 0) {
    throw std::invalid_argument("histogram width must be odd and >= 3");
  }
}

inline ProductTable build_product_table(int width) {
  ProductTable t;
  t.width = width;
  t.input_bin.assign(static_cast<std::size_t>(width) * width, -1);
  t.inv_center.assign(static_cast<std::size_t>(width), 0.0);
  const int zero = (width - 1) / 2;
  for (int i = 0; i < width; ++i) {
    if (i == zero) continue;  // the kernel's zero-value bin is excluded
    const double ci = bin_center(i, width);
    t.inv_center[static_cast<std::size_t>(i)] = 1.0 / std::abs(ci);
    for (int j = 0; j < width; ++j) {
      const double ratio = bin_center(j, width) / ci;
      t.input_bin[static_cast<std::size_t>(i) * width + j] = nearest_bin(ratio, width);
    }
  }
  return t;
}

}  // namespace detail

inline const ProductTable& product_table(int width = kBins) {
  detail::check_odd_width(width);
  static std::mutex mu;
  static std::map<int, ProductTable> cache;
  std::scoped_lock lock(mu);
  auto it = cache.find(width);
  if (it == cache.end()) it = cache.emplace(width, detail::build_product_table(width)).first;
  return it->second;
}

namespace detail {

template <class T>
void check_lengths(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw std::invalid_argument("histogram length mismatch");
  check_odd_width(static_cast<int>(a.size()));
}

}  // namespace detail

// z_j = sum_{i != zero} w_i * (1/|c_i|) * x[nbin(c_j / c_i)], out-of-range
// lookups contribute nothing.
template <class T>
void product_forward(std::span<const T> x, std::span<const T> w, std::span<T> z) {
  detail::check_lengths(x, w);
  if (z.size() != x.size()) throw std::invalid_argument("histogram length mismatch");
  const int width = static_cast<int>(x.size());
  const ProductTable& tab = product_table(width);
  for (auto& v : z) v = T(0);
  for (int i = 0; i < width; ++i) {
    const double invc = tab.inv_center[static_cast<std::size_t>(i)];
    if (invc == 0.0) continue;
    const T wi = w[static_cast<std::size_t>(i)] * static_cast<T>(invc);
    const std::int32_t* row = tab.input_bin.data() + static_cast<std::size_t>(i) * width;
    for (int j = 0; j < width; ++j) {
      const std::int32_t n = row[j];
      if (n >= 0) z[static_cast<std::size_t>(j)] += wi * x[static_cast<std::size_t>(n)];
    }
  }
}

// Kernel gradient (and optionally the input gradient) of the product layer.
// kernel_grad_i = sum_j dz_j * x[nbin(c_j/c_i)] / |c_i|
// input_grad_n  = sum over pairs (i,j) mapping to n of dz_j * w_i / |c_i|
template <class T>
void product_backward(std::span<const T> x, std::span<const T> w, std::span<const T> dz,
                      std::span<T> kernel_grad, std::span<T> input_grad) {
  detail::check_lengths(x, w);
  if (dz.size() != x.size() || kernel_grad.size() != x.size()) {
    throw std::invalid_argument("histogram length mismatch");
  }
  const bool want_input = !input_grad.empty();
  if (want_input && input_grad.size() != x.size()) {
    throw std::invalid_argument("histogram length mismatch");
  }
  const int width = static_cast<int>(x.size());
  const ProductTable& tab = product_table(width);
  for (auto& v : kernel_grad) v = T(0);
  for (auto& v : input_grad) v = T(0);
  for (int i = 0; i < width; ++i) {
    const double invc = tab.inv_center[static_cast<std::size_t>(i)];
    if (invc == 0.0) continue;
    const std::int32_t* row = tab.input_bin.data() + static_cast<std::size_t>(i) * width;
    T acc = T(0);
    const T wi = w[static_cast<std::size_t>(i)] * static_cast<T>(invc);
    for (int j = 0; j < width; ++j) {
      const std::int32_t n = row[j];
      if (n < 0) continue;
      acc += dz[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(n)];
      if (want_input) input_grad[static_cast<std::size_t>(n)] += dz[static_cast<std::size_t>(j)] * wi;
    }
    kernel_grad[static_cast<std::size_t>(i)] = acc * static_cast<T>(invc);
  }
}

// Discrete correlation in centered index space: z_j = sum_i b_i * x[j - (i - zero)].
template <class T>
void sum_forward(std::span<const T> x, std::span<const T> b, std::span<T> z) {
  detail::check_lengths(x, b);
  if (z.size() != x.size()) throw std::invalid_argument("histogram length mismatch");
  const int width = static_cast<int>(x.size());
  const int zero = (width - 1) / 2;
  for (auto& v : z) v = T(0);
  for (int i = 0; i < width; ++i) {
    const int shift = i - zero;
    const T bi = b[static_cast<std::size_t>(i)];
    const int jlo = std::max(0, shift);
    const int jhi = std::min(width, width + shift);
    for (int j = jlo; j < jhi; ++j) {
      z[static_cast<std::size_t>(j)] += bi * x[static_cast<std::size_t>(j - shift)];
    }
  }
}

// kernel_grad_k = sum_j dz_j * x[j - (k - zero)]
// input_grad_m  = sum_i b_i * dz[m + (i - zero)]
template <class T>
void sum_backward(std::span<const T> x, std::span<const T> b, std::span<const T> dz,
                  std::span<T> kernel_grad, std::span<T> input_grad) {
  detail::check_lengths(x, b);
  if (dz.size() != x.size() || kernel_grad.size() != x.size()) {
    throw std::invalid_argument("histogram length mismatch");
  }
  const bool want_input = !input_grad.empty();
  if (want_input && input_grad.size() != x.size()) {
    throw std::invalid_argument("histogram length mismatch");
  }
  const int width = static_cast<int>(x.size());
  const int zero = (width - 1) / 2;
  for (auto& v : kernel_grad) v = T(0);
  for (auto& v : input_grad) v = T(0);
  for (int i = 0; i < width; ++i) {
    const int shift = i - zero;
    const T bi = b[static_cast<std::size_t>(i)];
    const int jlo = std::max(0, shift);
    const int jhi = std::min(width, width + shift);
    T acc = T(0);
    for (int j = jlo; j < jhi; ++j) {
      acc += dz[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j - shift)];
      if (want_input) {
        input_grad[static_cast<std::size_t>(j - shift)] += bi * dz[static_cast<std::size_t>(j)];
      }
    }
    kernel_grad[static_cast<std::size_t>(i)] = acc;
  }
}

// Identity-plus-noise kernel initialization: all mass at the layer's
// identity value (+1 for the product layer, 0 for the sum layer) with
// seeded uniform noise in [-0.01, 0.01] on every bin.
template <class T, class RngT>
void init_product_kernel(std::span<T> w, RngT& rng) {
  for (auto& v : w) v = static_cast<T>(rng.uniform(-0.01, 0.01));
  w[w.size() - 1] += T(1);
}

template <class T, class RngT>
void init_sum_kernel(std::span<T> b, RngT& rng) {
  for (auto& v : b) v = static_cast<T>(rng.uniform(-0.01, 0.01));
  b[(b.size() - 1) / 2] += T(1);
}

}  // namespace adnn
