#pragma once

#include <array>

#include "adnn/image.hpp"

namespace adnn {

// Compact surrogate for the Gaussian bell used by the refinement
// likelihoods. The printed form is asymmetric (2 at one edge of the
// support, 0 at the other); the symmetric triangle is the default and the
// printed form stays available for fidelity experiments.
enum class ApproxShape { SymmetricTriangle, AsWrittenEq11 };

struct RefineConfig {
  int radius = 4;
  double n = 2.0;  // support half-width in standard deviations
  int iterations = 20;
  ApproxShape shape = ApproxShape::SymmetricTriangle;

  void validate() const;
};

// Standard sRGB -> CIE Lab, D65 white point. Inputs are clamped to [0, 1].
std::array<double, 3> rgb_to_lab(double r, double g, double b);

// Piecewise Gaussian approximation. sigma = 0 degenerates to an exact-match
// indicator.
double gaussian_approx(double x, double mu, double sigma, double n, ApproxShape shape);

// One synchronous relabeling pass: every pixel is rescored from the
// radius-R window statistics (Lab + normalized position, per current
// label) of the previous mask. Labels absent from a window score zero and
// ties keep the current label.
LabelMask refine_step(const ImageF& frame, const LabelMask& mask, const RefineConfig& cfg,
                      int threads = 1);

// refine_step iterated cfg.iterations times (early exit on a fixed point).
LabelMask refine(const ImageF& frame, const LabelMask& mask, const RefineConfig& cfg,
                 int threads = 1);

}  // namespace adnn
