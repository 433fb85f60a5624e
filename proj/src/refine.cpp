#include "adnn/refine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "adnn/parallel.hpp"

namespace adnn {

void RefineConfig::validate() const {
  if (radius < 1) throw std::invalid_argument("refinement radius must be >= 1");
  if (!(n > 0.0)) throw std::invalid_argument("approximation width multiplier must be > 0");
  if (iterations < 1) throw std::invalid_argument("iteration count must be >= 1");
}

std::array<double, 3> rgb_to_lab(double r, double g, double b) {
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  auto linearize = [](double u) {
    return u > 0.04045 ? std::pow((u + 0.055) / 1.055, 2.4) : u / 12.92;
  };
  const double rl = linearize(clamp01(r));
  const double gl = linearize(clamp01(g));
  const double bl = linearize(clamp01(b));
  const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
  constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
  auto f = [](double t) {
    constexpr double d = 6.0 / 29.0;
    return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
  };
  const double fx = f(x / xn), fy = f(y / yn), fz = f(z / zn);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double gaussian_approx(double x, double mu, double sigma, double n, ApproxShape shape) {
  const double span = n * sigma;
  const double d = x - mu;
  // Degenerate spread collapses to an exact-match indicator. The tolerance
  // absorbs accumulation rounding: a window of identical values must still
  // count its own member as a match.
  const double tol = 1e-9 * std::max(1.0, std::abs(mu));
  if (span <= tol) return std::abs(d) <= tol ? 1.0 : 0.0;
  if (std::abs(d) > span) return 0.0;
  switch (shape) {
    case ApproxShape::SymmetricTriangle: return 1.0 - std::abs(d) / span;
    case ApproxShape::AsWrittenEq11: return std::abs(1.0 + d / span);
  }
  return 0.0;
}

namespace {

constexpr int kFeatures = 5;  // L, a, b, x/width, y/height

std::vector<double> feature_planes(const ImageF& frame) {
  std::vector<double> feats(static_cast<std::size_t>(frame.width) * frame.height * kFeatures);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const auto lab = rgb_to_lab(frame.at(x, y, 0), frame.at(x, y, 1), frame.at(x, y, 2));
      double* f = feats.data() + (static_cast<std::size_t>(y) * frame.width + x) * kFeatures;
      f[0] = lab[0];
      f[1] = lab[1];
      f[2] = lab[2];
      f[3] = static_cast<double>(x) / frame.width;
      f[4] = static_cast<double>(y) / frame.height;
    }
  }
  return feats;
}

void step_into(const ImageF& frame, const std::vector<double>& feats, const LabelMask& prev,
               const RefineConfig& cfg, LabelMask& next, int threads) {
  const int w = frame.width, h = frame.height;
  parallel_chunks(0, h, threads, [&](int, int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        const int xlo = std::max(0, x - cfg.radius), xhi = std::min(w - 1, x + cfg.radius);
        const int ylo = std::max(0, y - cfg.radius), yhi = std::min(h - 1, y + cfg.radius);

        // per-label window statistics over the five features
        double sum[2][kFeatures] = {};
        double sumsq[2][kFeatures] = {};
        int count[2] = {0, 0};
        for (int wy = ylo; wy <= yhi; ++wy) {
          for (int wx = xlo; wx <= xhi; ++wx) {
            const int l = prev.at(wx, wy) == Label::Foreground ? 1 : 0;
            const double* f = feats.data() + (static_cast<std::size_t>(wy) * w + wx) * kFeatures;
            ++count[l];
            for (int k = 0; k < kFeatures; ++k) {
              sum[l][k] += f[k];
              sumsq[l][k] += f[k] * f[k];
            }
          }
        }
        const int window = count[0] + count[1];
        const double* v = feats.data() + (static_cast<std::size_t>(y) * w + x) * kFeatures;
        double score[2] = {0.0, 0.0};
        for (int l = 0; l < 2; ++l) {
          if (count[l] == 0) continue;  // absent labels score zero
          const double inv = 1.0 / count[l];
          double likelihood = 0.0;
          for (int k = 0; k < kFeatures; ++k) {
            const double mu = sum[l][k] * inv;
            const double var = std::max(0.0, sumsq[l][k] * inv - mu * mu);
            likelihood += gaussian_approx(v[k], mu, std::sqrt(var), cfg.n, cfg.shape);
          }
          const double prior = static_cast<double>(count[l]) / window;
          score[l] = prior * (likelihood / kFeatures);
        }
        const Label current = prev.at(x, y);
        Label out = current;
        if (score[1] > score[0]) out = Label::Foreground;
        else if (score[0] > score[1]) out = Label::Background;
        next.at(x, y) = out;
      }
    }
  });
}

void check_binary(const LabelMask& mask) {
  for (Label l : mask.labels) {
    if (l == Label::Ignore) throw std::invalid_argument("refinement mask must be binary");
  }
}

}  // namespace

LabelMask refine_step(const ImageF& frame, const LabelMask& mask, const RefineConfig& cfg, int threads) {
  cfg.validate();
  if (frame.width != mask.width || frame.height != mask.height) {
    throw std::invalid_argument("frame and mask dimensions do not match");
  }
  check_binary(mask);
  const auto feats = feature_planes(frame);
  LabelMask next(mask.width, mask.height);
  step_into(frame, feats, mask, cfg, next, threads);
  return next;
}

LabelMask refine(const ImageF& frame, const LabelMask& mask, const RefineConfig& cfg, int threads) {
  cfg.validate();
  if (frame.width != mask.width || frame.height != mask.height) {
    throw std::invalid_argument("frame and mask dimensions do not match");
  }
  check_binary(mask);
  const auto feats = feature_planes(frame);
  LabelMask current = mask;
  LabelMask next(mask.width, mask.height);
  for (int it = 0; it < cfg.iterations; ++it) {
    step_into(frame, feats, current, cfg, next, threads);
    if (next.labels == current.labels) break;  // fixed point
    std::swap(current, next);
  }
  return current;
}

}  // namespace adnn
