#include "adnn/histio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "adnn/rng.hpp"

namespace fs = std::filesystem;

namespace adnn {

FilePattern FilePattern::parse(const std::string& pattern) {
  const auto pos = pattern.find('%');
  if (pos == std::string::npos) throw std::invalid_argument("pattern has no % field: " + pattern);
  FilePattern p;
  p.prefix = pattern.substr(0, pos);
  std::size_t i = pos + 1;
  if (i < pattern.size() && pattern[i] == '0') {
    ++i;
    std::size_t start = i;
    while (i < pattern.size() && std::isdigit(static_cast<unsigned char>(pattern[i]))) ++i;
    if (start == i) throw std::invalid_argument("bad width in pattern: " + pattern);
    p.digits = std::stoi(pattern.substr(start, i - start));
  }
  if (i >= pattern.size() || pattern[i] != 'd') {
    throw std::invalid_argument("pattern field must be %d or %0Nd: " + pattern);
  }
  p.suffix = pattern.substr(i + 1);
  if (p.suffix.find('%') != std::string::npos) {
    throw std::invalid_argument("pattern must contain a single % field: " + pattern);
  }
  return p;
}

long FilePattern::match(const std::string& name) const {
  if (name.size() <= prefix.size() + suffix.size()) return -1;
  if (name.compare(0, prefix.size(), prefix) != 0) return -1;
  if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) return -1;
  const std::string mid = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
  if (mid.empty()) return -1;
  if (digits > 0 && static_cast<int>(mid.size()) != digits) return -1;
  for (char c : mid) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return -1;
  }
  return std::stol(mid);
}

std::string FilePattern::format(long number) const {
  std::string num = std::to_string(number);
  if (digits > 0 && static_cast<int>(num.size()) < digits) {
    num.insert(0, static_cast<std::size_t>(digits) - num.size(), '0');
  }
  return prefix + num + suffix;
}

namespace {

ImageF decode_frame(const cv::Mat& img, const fs::path& path) {
  if (img.empty()) throw std::runtime_error("could not decode image: " + path.string());
  if (img.depth() != CV_8U) throw std::runtime_error("expected 8-bit image: " + path.string());
  ImageF out;
  out.width = img.cols;
  out.height = img.rows;
  out.data.resize(static_cast<std::size_t>(img.cols) * img.rows * 3);
  constexpr float kInv255 = 1.0f / 255.0f;
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      float r, g, b;
      if (img.channels() == 1) {
        r = g = b = img.at<std::uint8_t>(y, x) * kInv255;
      } else if (img.channels() == 3) {
        const auto px = img.at<cv::Vec3b>(y, x);  // OpenCV stores BGR
        b = px[0] * kInv255;
        g = px[1] * kInv255;
        r = px[2] * kInv255;
      } else {
        throw std::runtime_error("unsupported channel count in " + path.string());
      }
      out.at(x, y, 0) = r;
      out.at(x, y, 1) = g;
      out.at(x, y, 2) = b;
    }
  }
  return out;
}

}  // namespace

ImageF load_frame(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("missing file: " + path.string());
  return decode_frame(cv::imread(path.string(), cv::IMREAD_UNCHANGED), path);
}

FrameSequence load_sequence(const fs::path& root, const std::string& pattern) {
  if (!fs::is_directory(root)) throw std::runtime_error("missing directory: " + root.string());
  const FilePattern pat = FilePattern::parse(pattern);
  std::vector<std::pair<long, std::string>> found;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    const long num = pat.match(name);
    if (num >= 0) found.emplace_back(num, name);
  }
  if (found.empty()) throw std::runtime_error("no frames matched " + pattern + " in " + root.string());
  if (found.size() < 2) {
    throw std::runtime_error("need at least 2 frames, found 1: " + (root / found[0].second).string());
  }
  std::sort(found.begin(), found.end());
  FrameSequence seq;
  for (const auto& [num, name] : found) {
    ImageF frame = load_frame(root / name);
    if (seq.frames.empty()) {
      seq.width = frame.width;
      seq.height = frame.height;
    } else if (frame.width != seq.width || frame.height != seq.height) {
      throw std::runtime_error("inconsistent dimensions: " + (root / name).string());
    }
    seq.frames.push_back(std::move(frame));
    seq.ids.push_back(num);
  }
  return seq;
}

LabelMask load_gt_mask(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("missing file: " + path.string());
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw std::runtime_error("could not decode image: " + path.string());
  if (img.depth() != CV_8U || img.channels() != 1) {
    throw std::runtime_error("ground truth must be 8-bit grayscale: " + path.string());
  }
  LabelMask mask(img.cols, img.rows);
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      Label l;
      switch (img.at<std::uint8_t>(y, x)) {
        case 255: l = Label::Foreground; break;
        case 0:
        case 50: l = Label::Background; break;  // hard shadow counts as background
        default: l = Label::Ignore; break;      // 85 outside ROI, 170 unknown motion
      }
      mask.at(x, y) = l;
    }
  }
  return mask;
}

void save_mask(const LabelMask& mask, const fs::path& path) {
  cv::Mat img(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      switch (mask.at(x, y)) {
        case Label::Foreground: img.at<std::uint8_t>(y, x) = 255; break;
        case Label::Background: img.at<std::uint8_t>(y, x) = 0; break;
        case Label::Ignore:
          throw std::runtime_error("predicted mask may not contain Ignore: " + path.string());
      }
    }
  }
  if (!cv::imwrite(path.string(), img)) {
    throw std::runtime_error("could not write mask: " + path.string());
  }
}

void save_frame(const ImageF& frame, const fs::path& path) {
  cv::Mat img(frame.height, frame.width, CV_8UC3);
  auto q = [](float v) {
    const int b = static_cast<int>(std::lround(v * 255.0f));
    return static_cast<std::uint8_t>(std::clamp(b, 0, 255));
  };
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      img.at<cv::Vec3b>(y, x) = {q(frame.at(x, y, 2)), q(frame.at(x, y, 1)), q(frame.at(x, y, 0))};
    }
  }
  if (!cv::imwrite(path.string(), img)) {
    throw std::runtime_error("could not write frame: " + path.string());
  }
}

std::vector<std::pair<int, int>> bounce_path(const SyntheticConfig& cfg, int x0, int y0, int dx, int dy) {
  std::vector<std::pair<int, int>> path;
  path.reserve(static_cast<std::size_t>(cfg.count));
  int x = x0, y = y0;
  const int xmax = cfg.width - cfg.square;
  const int ymax = cfg.height - cfg.square;
  for (int t = 0; t < cfg.count; ++t) {
    path.emplace_back(x, y);
    if (x + dx < 0 || x + dx > xmax) dx = -dx;
    if (y + dy < 0 || y + dy > ymax) dy = -dy;
    x += dx;
    y += dy;
  }
  return path;
}

std::pair<FrameSequence, std::vector<LabelMask>> generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.width <= 0 || cfg.height <= 0 || cfg.count < 2 || cfg.square <= 0) {
    throw std::invalid_argument("invalid synthetic config dimensions");
  }
  if (!(cfg.noise >= 0.0f && cfg.noise <= 0.2f)) {
    throw std::invalid_argument("noise amplitude must be in [0, 0.2]");
  }
  if (static_cast<int>(cfg.path.size()) != cfg.count) {
    throw std::invalid_argument("motion path must list one offset per frame");
  }
  for (const auto& [x, y] : cfg.path) {
    if (x < 0 || y < 0 || x + cfg.square > cfg.width || y + cfg.square > cfg.height) {
      throw std::invalid_argument("square leaves the frame bounds");
    }
  }

  Rng rng(cfg.seed);
  FrameSequence seq;
  seq.width = cfg.width;
  seq.height = cfg.height;
  std::vector<LabelMask> masks;
  for (int t = 0; t < cfg.count; ++t) {
    ImageF frame = ImageF::solid(cfg.width, cfg.height, cfg.bg_color[0], cfg.bg_color[1], cfg.bg_color[2]);
    for (float& v : frame.data) {
      v = std::clamp(v + static_cast<float>(rng.uniform(-cfg.noise, cfg.noise)), 0.0f, 1.0f);
    }
    LabelMask mask(cfg.width, cfg.height);
    const auto [ox, oy] = cfg.path[static_cast<std::size_t>(t)];
    for (int y = oy; y < oy + cfg.square; ++y) {
      for (int x = ox; x < ox + cfg.square; ++x) {
        frame.at(x, y, 0) = cfg.fg_color[0];
        frame.at(x, y, 1) = cfg.fg_color[1];
        frame.at(x, y, 2) = cfg.fg_color[2];
        mask.at(x, y) = Label::Foreground;
      }
    }
    seq.frames.push_back(std::move(frame));
    seq.ids.push_back(t);
    masks.push_back(std::move(mask));
  }
  return {std::move(seq), std::move(masks)};
}

}  // namespace adnn
