#include "adnn/histfeat.hpp"

#include <algorithm>
#include <stdexcept>

#include "adnn/parallel.hpp"
#include "adnn/rng.hpp"

namespace adnn {

std::array<Histogram, 3> subtraction_histogram(std::span<const std::array<float, 3>> history,
                                               const std::array<float, 3>& current) {
  if (history.empty()) throw std::invalid_argument("empty history");
  std::array<Histogram, 3> out;
  for (const auto& obs : history) {
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(obs[static_cast<std::size_t>(c)]) -
                       static_cast<double>(current[static_cast<std::size_t>(c)]);
      const int bin = nearest_bin(d);
      if (bin < 0) throw std::invalid_argument("pixel values must lie in [0, 1]");
      out[static_cast<std::size_t>(c)].mass[static_cast<std::size_t>(bin)] += 1.0f;
    }
  }
  for (auto& h : out) h.normalize();
  return out;
}

std::vector<int> history_frames(int frame_index, const HistoryConfig& cfg, int total) {
  if (frame_index < 0 || frame_index >= total) throw std::out_of_range("frame index out of range");
  if (cfg.stride < 1) throw std::invalid_argument("stride must be >= 1");
  std::vector<int> frames;
  int i = cfg.include_current ? frame_index : frame_index - cfg.stride;
  while (i >= 0 && (cfg.history_len <= 0 || static_cast<int>(frames.size()) < cfg.history_len)) {
    frames.push_back(i);
    i -= cfg.stride;
  }
  return frames;
}

PixelFeature pixel_feature(const FrameSequence& seq, int frame_index, int x, int y,
                           const HistoryConfig& cfg) {
  const std::vector<int> window = history_frames(frame_index, cfg, seq.count());
  if (window.empty()) throw std::invalid_argument("no history frames for frame index");
  std::vector<std::array<float, 3>> history;
  history.reserve(window.size());
  for (int f : window) {
    const ImageF& im = seq.frames[static_cast<std::size_t>(f)];
    history.push_back({im.at(x, y, 0), im.at(x, y, 1), im.at(x, y, 2)});
  }
  const ImageF& cur = seq.frames[static_cast<std::size_t>(frame_index)];
  PixelFeature feat;
  feat.channels = subtraction_histogram(history, {cur.at(x, y, 0), cur.at(x, y, 1), cur.at(x, y, 2)});
  return feat;
}

TrainingBatch extract_training_batch(const FrameSequence& seq, const LabelMask& gt, int frame_index,
                                     const HistoryConfig& cfg, bool balance, int max_per_class,
                                     std::uint64_t seed) {
  if (gt.width != seq.width || gt.height != seq.height) {
    throw std::invalid_argument("ground truth dimensions do not match the sequence");
  }
  if (max_per_class < 1) throw std::invalid_argument("max_per_class must be >= 1");
  const std::vector<int> window = history_frames(frame_index, cfg, seq.count());
  if (window.empty()) throw std::invalid_argument("no history frames for frame index");

  std::vector<std::uint32_t> fg, bg;
  for (int y = 0; y < gt.height; ++y) {
    for (int x = 0; x < gt.width; ++x) {
      switch (gt.at(x, y)) {
        case Label::Foreground: fg.push_back(static_cast<std::uint32_t>(y * gt.width + x)); break;
        case Label::Background: bg.push_back(static_cast<std::uint32_t>(y * gt.width + x)); break;
        case Label::Ignore: break;
      }
    }
  }

  Rng rng(seed);
  // Sample min(pool, target) without replacement, then top up with
  // replacement when balancing demands more than the pool holds.
  auto draw = [&](std::vector<std::uint32_t>& pool, int target, bool top_up) {
    std::vector<std::uint32_t> picks;
    rng.shuffle(pool);
    const int base = std::min<int>(target, static_cast<int>(pool.size()));
    picks.assign(pool.begin(), pool.begin() + base);
    if (top_up) {
      while (static_cast<int>(picks.size()) < target) {
        picks.push_back(pool[rng.index(pool.size())]);
      }
    }
    return picks;
  };

  TrainingBatch batch;
  if (balance && fg.empty()) batch.warning = BatchWarning::MissingForeground;
  if (balance && bg.empty()) batch.warning = BatchWarning::MissingBackground;
  const bool can_balance = balance && !fg.empty() && !bg.empty();
  std::vector<std::uint32_t> fg_picks =
      fg.empty() ? std::vector<std::uint32_t>{} : draw(fg, max_per_class, can_balance);
  std::vector<std::uint32_t> bg_picks =
      bg.empty() ? std::vector<std::uint32_t>{} : draw(bg, max_per_class, can_balance);

  batch.features.reserve(fg_picks.size() + bg_picks.size());
  auto emit = [&](const std::vector<std::uint32_t>& picks, Label label) {
    for (std::uint32_t p : picks) {
      const int x = static_cast<int>(p) % gt.width;
      const int y = static_cast<int>(p) / gt.width;
      PixelFeature feat = pixel_feature(seq, frame_index, x, y, cfg);
      feat.label = label;
      batch.features.push_back(std::move(feat));
    }
  };
  emit(fg_picks, Label::Foreground);
  emit(bg_picks, Label::Background);
  return batch;
}

std::vector<PixelFeature> extract_frame_features(const FrameSequence& seq, int frame_index,
                                                 const HistoryConfig& cfg, int threads) {
  const std::vector<int> window = history_frames(frame_index, cfg, seq.count());
  if (window.empty()) throw std::invalid_argument("no history frames for frame index");
  std::vector<PixelFeature> grid(static_cast<std::size_t>(seq.width) * seq.height);
  parallel_chunks(0, seq.height, threads, [&](int, int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < seq.width; ++x) {
        grid[static_cast<std::size_t>(y) * seq.width + x] = pixel_feature(seq, frame_index, x, y, cfg);
      }
    }
  });
  return grid;
}

}  // namespace adnn
