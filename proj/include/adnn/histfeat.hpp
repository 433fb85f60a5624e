#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "adnn/histogram.hpp"
#include "adnn/image.hpp"

namespace adnn {

// Temporal window feeding the subtraction histograms. `history_len` counts
// frames (0 = every preceding frame); `stride` subsamples the walk back in
// time. The current frame contributes its own zero difference by default,
// matching a sum over the full frame range.
struct HistoryConfig {
  int history_len = 200;
  int stride = 1;
  bool include_current = true;
};

// Per-pixel network input: one normalized subtraction histogram per color
// channel, plus the training label when one is attached.
struct PixelFeature {
  std::array<Histogram, 3> channels;
  Label label = Label::Background;

  const float* flat() const { return channels[0].mass.data(); }
  float* flat() { return channels[0].mass.data(); }
};
static_assert(sizeof(PixelFeature::channels) == 3 * kBins * sizeof(float));

// Histogram of differences history[i] - current per channel, nearest-bin
// quantized (ties toward the lower bin) and normalized to total mass 1.
// `history` is a span of RGB triples.
std::array<Histogram, 3> subtraction_histogram(std::span<const std::array<float, 3>> history,
                                               const std::array<float, 3>& current);

// Frame indices making up the temporal window of `frame_index` under `cfg`,
// most recent first. Empty when the window has no frames.
std::vector<int> history_frames(int frame_index, const HistoryConfig& cfg, int total);

// Feature of a single pixel of frame `frame_index`.
PixelFeature pixel_feature(const FrameSequence& seq, int frame_index, int x, int y,
                           const HistoryConfig& cfg);

enum class BatchWarning : std::uint8_t { None, MissingForeground, MissingBackground };

struct TrainingBatch {
  std::vector<PixelFeature> features;
  BatchWarning warning = BatchWarning::None;
};

// Labeled features sampled from one ground-truth frame. Ignore pixels are
// never sampled. With `balance` set the two classes are drawn to equal
// counts of `max_per_class` (without replacement when a class has enough
// pixels, with replacement otherwise); a class with no pixels at all yields
// an unbalanced batch and a warning instead of an error. Deterministic for
// a fixed seed.
TrainingBatch extract_training_batch(const FrameSequence& seq, const LabelMask& gt, int frame_index,
                                     const HistoryConfig& cfg, bool balance, int max_per_class,
                                     std::uint64_t seed);

// Feature of every pixel of the frame, row-major.
std::vector<PixelFeature> extract_frame_features(const FrameSequence& seq, int frame_index,
                                                 const HistoryConfig& cfg, int threads = 1);

}  // namespace adnn
