#include "adnn/net.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

namespace adnn {

LabelMask classify_frame(const FrameSequence& seq, int frame_index, const Network<float>& net,
                         const HistoryConfig& hcfg, int threads) {
  if (net.config().hist_width != kBins) {
    throw std::invalid_argument("pixel features are 201-bin histograms; hist_width must match");
  }
  const std::vector<int> window = history_frames(frame_index, hcfg, seq.count());
  if (window.empty()) throw std::invalid_argument("no history frames for frame index");
  LabelMask mask(seq.width, seq.height);
  parallel_chunks(0, seq.height, threads, [&](int, int y0, int y1) {
    auto cache = net.make_cache();
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < seq.width; ++x) {
        const PixelFeature feat = pixel_feature(seq, frame_index, x, y, hcfg);
        mask.at(x, y) = net.classify(feat.flat(), cache) == 1 ? Label::Foreground : Label::Background;
      }
    }
  });
  return mask;
}

namespace {

constexpr char kMagic[4] = {'A', 'D', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_u32(std::FILE* f, std::uint32_t v) {
  if (std::fwrite(&v, sizeof(v), 1, f) != 1) throw std::runtime_error("write failed");
}

std::uint32_t read_u32(std::FILE* f) {
  std::uint32_t v;
  if (std::fread(&v, sizeof(v), 1, f) != 1) throw std::runtime_error("truncated model file");
  return v;
}

std::uint32_t bias_flags(const NetworkConfig& cfg) {
  return (cfg.bias_combine ? 1u : 0u) | (cfg.bias_hidden ? 2u : 0u) | (cfg.bias_output ? 4u : 0u);
}

}  // namespace

void save_model(const Network<float>& net, const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw std::runtime_error("could not open for writing: " + path.string());
  const NetworkConfig& cfg = net.config();
  if (std::fwrite(kMagic, 1, 4, f.get()) != 4) throw std::runtime_error("write failed");
  write_u32(f.get(), kVersion);
  write_u32(f.get(), static_cast<std::uint32_t>(cfg.architecture));
  write_u32(f.get(), static_cast<std::uint32_t>(cfg.adl_filters));
  write_u32(f.get(), static_cast<std::uint32_t>(cfg.hist_width));
  write_u32(f.get(), static_cast<std::uint32_t>(cfg.adl_depth));
  write_u32(f.get(), static_cast<std::uint32_t>(cfg.hidden_units));
  write_u32(f.get(), static_cast<std::uint32_t>(cfg.classes));
  write_u32(f.get(), bias_flags(cfg));
  write_u32(f.get(), static_cast<std::uint32_t>(net.params().size()));
  for (const auto& t : net.params()) {
    const auto name_len = static_cast<std::uint16_t>(t.name.size());
    if (std::fwrite(&name_len, sizeof(name_len), 1, f.get()) != 1) throw std::runtime_error("write failed");
    if (std::fwrite(t.name.data(), 1, t.name.size(), f.get()) != t.name.size()) {
      throw std::runtime_error("write failed");
    }
    const auto rank = static_cast<std::uint8_t>(t.shape.size());
    if (std::fwrite(&rank, 1, 1, f.get()) != 1) throw std::runtime_error("write failed");
    for (auto d : t.shape) write_u32(f.get(), d);
    if (std::fwrite(t.value.data(), sizeof(float), t.value.size(), f.get()) != t.value.size()) {
      throw std::runtime_error("write failed");
    }
  }
  if (std::fflush(f.get()) != 0) throw std::runtime_error("write failed: " + path.string());
}

Network<float> load_model(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw std::runtime_error("could not open model file: " + path.string());
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a model file: " + path.string());
  }
  const std::uint32_t version = read_u32(f.get());
  if (version != kVersion) {
    throw std::runtime_error("unsupported version " + std::to_string(version) + ": " + path.string());
  }
  NetworkConfig cfg;
  const std::uint32_t arch = read_u32(f.get());
  if (arch > 1) throw std::runtime_error("unknown architecture tag in " + path.string());
  cfg.architecture = static_cast<Arch>(arch);
  cfg.adl_filters = static_cast<int>(read_u32(f.get()));
  cfg.hist_width = static_cast<int>(read_u32(f.get()));
  cfg.adl_depth = static_cast<int>(read_u32(f.get()));
  cfg.hidden_units = static_cast<int>(read_u32(f.get()));
  cfg.classes = static_cast<int>(read_u32(f.get()));
  const std::uint32_t flags = read_u32(f.get());
  cfg.bias_combine = flags & 1u;
  cfg.bias_hidden = flags & 2u;
  cfg.bias_output = flags & 4u;

  Network<float> net(cfg);
  const std::uint32_t blocks = read_u32(f.get());
  if (blocks != net.params().size()) {
    throw std::runtime_error("block count does not match config: " + path.string());
  }
  for (auto& t : net.params()) {
    std::uint16_t name_len;
    if (std::fread(&name_len, sizeof(name_len), 1, f.get()) != 1) {
      throw std::runtime_error("truncated model file: " + path.string());
    }
    std::string name(name_len, '\0');
    if (std::fread(name.data(), 1, name_len, f.get()) != name_len) {
      throw std::runtime_error("truncated model file: " + path.string());
    }
    std::uint8_t rank;
    if (std::fread(&rank, 1, 1, f.get()) != 1) {
      throw std::runtime_error("truncated model file: " + path.string());
    }
    std::vector<std::uint32_t> shape(rank);
    for (auto& d : shape) d = read_u32(f.get());
    if (name != t.name || shape != t.shape) {
      throw std::runtime_error("block " + name + " does not match config in " + path.string());
    }
    if (std::fread(t.value.data(), sizeof(float), t.value.size(), f.get()) != t.value.size()) {
      throw std::runtime_error("truncated model file: " + path.string());
    }
  }
  return net;
}

}  // namespace adnn
