#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace adnn {

// Discrete densities over [-1, 1]. The pipeline currency is the 201-bin
// histogram (bin interval 0.01, center bin at value 0); the distribution
// layers additionally accept any odd width so small configurations stay
// cheap to test.
inline constexpr int kBins = 201;
inline constexpr int kZeroBin = 100;

// Center value of bin i for an odd `width`-bin histogram over [-1, 1].
// Written as a single rational so that the endpoints and the middle bin
// are exact doubles (-1.0, 0.0, +1.0); the identity/reflection kernels
// rely on that.
inline double bin_center(int i, int width = kBins) {
  return static_cast<double>(2 * i - (width - 1)) / static_cast<double>(width - 1);
}

// Nearest-bin index for value v, ties toward the lower bin. Values outside
// [-1, 1] have no bin and return -1, even inside the outermost half-bin.
inline int nearest_bin(double v, int width = kBins) {
  if (v < -1.0 || v > 1.0) return -1;
  const double t = (v + 1.0) * (0.5 * static_cast<double>(width - 1));
  int idx = static_cast<int>(std::ceil(t - 0.5));
  if (idx < 0) idx = 0;
  if (idx >= width) idx = width - 1;
  return idx;
}

// Normalized 201-bin density. Unnormalized tallies live in plain arrays;
// only normalized histograms are handed to the network.
struct Histogram {
  std::array<float, kBins> mass{};

  double sum() const {
    double s = 0.0;
    for (float m : mass) s += m;
    return s;
  }

  // Scales the mass to total 1. Throws if there is nothing to normalize.
  void normalize() {
    const double s = sum();
    if (!(s > 0.0)) throw std::runtime_error("histogram has no mass to normalize");
    const float inv = static_cast<float>(1.0 / s);
    for (float& m : mass) m *= inv;
  }

  static Histogram delta(int bin) {
    if (bin < 0 || bin >= kBins) throw std::out_of_range("delta bin out of range");
    Histogram h;
    h.mass[static_cast<std::size_t>(bin)] = 1.0f;
    return h;
  }
};

}  // namespace adnn
