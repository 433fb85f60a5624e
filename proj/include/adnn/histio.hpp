#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "adnn/image.hpp"

namespace adnn {

// File-name templates with one zero-padded integer field ("in%06d.jpg").
struct FilePattern {
  std::string prefix;
  std::string suffix;
  int digits = 0;  // 0 = any run of digits

  static FilePattern parse(const std::string& pattern);
  // Numeric field if `name` matches, -1 otherwise.
  long match(const std::string& name) const;
  std::string format(long number) const;
};

// Loads every frame matching `pattern` under `root`, ordered by the numeric
// field. 8-bit values are divided by 255; grayscale is replicated to 3
// channels. Throws on a missing directory, fewer than 2 matches,
// inconsistent dimensions, or an undecodable file, naming the path.
FrameSequence load_sequence(const std::filesystem::path& root, const std::string& pattern);

// Single frame, same decoding rules.
ImageF load_frame(const std::filesystem::path& path);

// CDnet ground-truth encoding: 255 foreground; 0 and 50 background; 85, 170
// and anything else ignore.
LabelMask load_gt_mask(const std::filesystem::path& path);

// Predicted mask as 8-bit grayscale (foreground 255, background 0). Masks
// holding Ignore are rejected.
void save_mask(const LabelMask& mask, const std::filesystem::path& path);

// Frame written as 8-bit RGB (values quantized by round(v * 255)).
void save_frame(const ImageF& frame, const std::filesystem::path& path);

struct SyntheticConfig {
  int width = 64;
  int height = 64;
  int count = 60;
  int square = 8;
  std::vector<std::pair<int, int>> path;  // per-frame top-left, size == count
  std::array<float, 3> bg_color{0.50f, 0.50f, 0.50f};
  std::array<float, 3> fg_color{0.90f, 0.35f, 0.25f};
  float noise = 0.05f;  // uniform half-width, <= 0.2
  std::uint64_t seed = 0;
};

// Diagonal constant-velocity path bouncing off the frame borders.
std::vector<std::pair<int, int>> bounce_path(const SyntheticConfig& cfg, int x0, int y0, int dx, int dy);

// Deterministic moving-square sequence: background color plus seeded uniform
// noise with the square painted over it; masks mark exactly the square.
std::pair<FrameSequence, std::vector<LabelMask>> generate_synthetic(const SyntheticConfig& cfg);

}  // namespace adnn
