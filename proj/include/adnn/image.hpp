#pragma once

#include <cstdint>
#include <vector>

namespace adnn {

enum class Label : std::uint8_t { Background = 0, Foreground = 1, Ignore = 2 };

// RGB frame, channel-interleaved, values in [0, 1].
struct ImageF {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // size = 3 * width * height

  float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  static ImageF solid(int w, int h, float r, float g, float b) {
    ImageF im;
    im.width = w;
    im.height = h;
    im.data.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t p = 0; p < static_cast<std::size_t>(w) * h; ++p) {
      im.data[p * 3 + 0] = r;
      im.data[p * 3 + 1] = g;
      im.data[p * 3 + 2] = b;
    }
    return im;
  }
};

struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<Label> labels;  // row-major

  LabelMask() = default;
  LabelMask(int w, int h, Label fill = Label::Background)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {}

  Label& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  Label at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

// Ordered stack of equally sized frames. `ids` keeps the numeric field of
// the source file names so outputs can be written under matching numbers;
// synthetic sequences number from 0.
struct FrameSequence {
  int width = 0;
  int height = 0;
  std::vector<ImageF> frames;
  std::vector<long> ids;

  int count() const { return static_cast<int>(frames.size()); }
};

}  // namespace adnn
