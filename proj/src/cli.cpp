#include "adnn/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "adnn/histfeat.hpp"
#include "adnn/histio.hpp"
#include "adnn/metrics.hpp"
#include "adnn/net.hpp"
#include "adnn/parallel.hpp"
#include "adnn/refine.hpp"

namespace fs = std::filesystem;

namespace adnn {

namespace {

struct SharedOpts {
  std::uint64_t seed = 7;
  int threads = default_threads();
  bool deterministic = false;
};

void add_shared(CLI::App* cmd, SharedOpts& o) {
  cmd->add_option("--seed", o.seed, "Seed for all randomness")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads")->capture_default_str();
  cmd->add_flag("--deterministic", o.deterministic,
                "Bit-reproducible run (forces a fixed reduction order; use with --threads 1)");
  cmd->add_option("--config", "Config file of key=value lines ('#' comments); explicit flags win");
}

std::string trim(const std::string& s) {
  const auto lo = s.find_first_not_of(" \t\r\n");
  if (lo == std::string::npos) return "";
  const auto hi = s.find_last_not_of(" \t\r\n");
  return s.substr(lo, hi - lo + 1);
}

// Expands `--config FILE` into per-key flags, inserted only for keys the
// command line does not already carry: flags override the file, the file
// overrides built-in defaults.
std::vector<std::string> apply_config_file(const std::vector<std::string>& args) {
  std::string file;
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") file = args[i + 1];
  }
  if (file.empty()) return args;
  std::ifstream in(file);
  if (!in) throw std::runtime_error("could not read config file: " + file);
  std::vector<std::string> out = args;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("config line is not key=value: " + line);
    const std::string key = "--" + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool given = false;
    for (const auto& a : args) {
      if (a == key || a.rfind(key + "=", 0) == 0) given = true;
    }
    if (given) continue;
    if (value == "true") {
      out.push_back(key);
    } else if (value == "false") {
      // flag left at its default
    } else {
      out.push_back(key);
      out.push_back(value);
    }
  }
  return out;
}

int effective_threads(const SharedOpts& o) { return o.deterministic ? 1 : std::max(1, o.threads); }

struct SynthOpts {
  std::string out;
  int width = 64, height = 64, count = 60, square = 8;
  double noise = 0.05;
  std::vector<double> bg{0.5, 0.5, 0.5};
  std::vector<double> fg{0.9, 0.35, 0.25};
  int x0 = 0, y0 = 0, dx = 1, dy = 1;
  bool still = false;
};

void add_synth(CLI::App* cmd, SynthOpts& o) {
  cmd->add_option("--out", o.out, "Output directory")->required();
  cmd->add_option("--width", o.width)->capture_default_str();
  cmd->add_option("--height", o.height)->capture_default_str();
  cmd->add_option("--count", o.count, "Frame count")->capture_default_str();
  cmd->add_option("--square", o.square, "Square size in pixels")->capture_default_str();
  cmd->add_option("--noise", o.noise, "Uniform noise half-width, <= 0.2")->capture_default_str();
  cmd->add_option("--bg", o.bg, "Background color r,g,b")->delimiter(',')->expected(3)->capture_default_str();
  cmd->add_option("--fg", o.fg, "Square color r,g,b")->delimiter(',')->expected(3)->capture_default_str();
  cmd->add_option("--x0", o.x0, "Initial square x")->capture_default_str();
  cmd->add_option("--y0", o.y0, "Initial square y")->capture_default_str();
  cmd->add_option("--dx", o.dx, "Per-frame x velocity")->capture_default_str();
  cmd->add_option("--dy", o.dy, "Per-frame y velocity")->capture_default_str();
  cmd->add_flag("--static", o.still, "Keep the square fixed at (x0, y0)");
}

SyntheticConfig to_synthetic_config(const SynthOpts& o, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.width = o.width;
  cfg.height = o.height;
  cfg.count = o.count;
  cfg.square = o.square;
  cfg.noise = static_cast<float>(o.noise);
  for (int c = 0; c < 3; ++c) {
    cfg.bg_color[static_cast<std::size_t>(c)] = static_cast<float>(o.bg[static_cast<std::size_t>(c)]);
    cfg.fg_color[static_cast<std::size_t>(c)] = static_cast<float>(o.fg[static_cast<std::size_t>(c)]);
  }
  cfg.seed = seed;
  if (o.still) {
    cfg.path.assign(static_cast<std::size_t>(cfg.count), {o.x0, o.y0});
  } else {
    cfg.path = bounce_path(cfg, o.x0, o.y0, o.dx, o.dy);
  }
  return cfg;
}

void write_synthetic(const SyntheticConfig& cfg, const fs::path& out) {
  auto [seq, masks] = generate_synthetic(cfg);
  fs::create_directories(out / "frames");
  fs::create_directories(out / "gt");
  const FilePattern pat = FilePattern::parse("%06d.png");
  for (int t = 0; t < seq.count(); ++t) {
    save_frame(seq.frames[static_cast<std::size_t>(t)], out / "frames" / pat.format(t));
    save_mask(masks[static_cast<std::size_t>(t)], out / "gt" / pat.format(t));
  }
  std::printf("wrote %d frames under %s\n", seq.count(), out.string().c_str());
}

struct HistoryOpts {
  int history = 200;
  int stride = 1;
  bool exclude_current = false;
};

void add_history(CLI::App* cmd, HistoryOpts& o) {
  cmd->add_option("--history", o.history, "Historical frames per pixel (0 = all preceding)")
      ->capture_default_str();
  cmd->add_option("--stride", o.stride, "Temporal stride through the history")->capture_default_str();
  cmd->add_flag("--exclude-current", o.exclude_current,
                "Drop the current frame (and its zero difference) from its own history");
}

HistoryConfig to_history(const HistoryOpts& o) {
  HistoryConfig cfg;
  cfg.history_len = o.history;
  cfg.stride = o.stride;
  cfg.include_current = !o.exclude_current;
  return cfg;
}

struct NetOpts {
  std::string arch = "adnn";
  int filters = 2;
  int hidden = 512;
  int depth = 1;
};

void add_net(CLI::App* cmd, NetOpts& o) {
  cmd->add_option("--arch", o.arch, "Architecture: adnn | cnn1")
      ->check(CLI::IsMember({"adnn", "cnn1"}))
      ->capture_default_str();
  cmd->add_option("--filters", o.filters, "Distribution filters per layer")->capture_default_str();
  cmd->add_option("--hidden", o.hidden, "Hidden units")->capture_default_str();
  cmd->add_option("--depth", o.depth, "Stacked distribution blocks")->capture_default_str();
}

NetworkConfig to_net_config(const NetOpts& o) {
  NetworkConfig cfg = o.arch == "cnn1" ? NetworkConfig::cnn1_default() : NetworkConfig::adnn_default();
  cfg.adl_filters = o.filters;
  cfg.hidden_units = o.hidden;
  cfg.adl_depth = o.depth;
  return cfg;
}

struct TrainOpts {
  double lr = 1e-4;
  int epochs = 60;
  int batch = 1000;
  int max_per_class = 500;
  bool no_balance = false;
};

void add_train(CLI::App* cmd, TrainOpts& o) {
  cmd->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--epochs", o.epochs, "Maximum training epochs")->capture_default_str();
  cmd->add_option("--batch", o.batch, "Batch size")->capture_default_str();
  cmd->add_option("--max-per-class", o.max_per_class, "Samples drawn per class per frame")
      ->capture_default_str();
  cmd->add_flag("--no-balance", o.no_balance, "Skip class balancing when sampling");
}

TrainConfig to_train_config(const TrainOpts& o, const SharedOpts& shared) {
  TrainConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.max_epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.seed = shared.seed;
  cfg.deterministic = shared.deterministic;
  cfg.threads = effective_threads(shared);
  return cfg;
}

std::vector<int> parse_index_list(const std::string& csv) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string tok = csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) out.push_back(std::stoi(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// Gathers labeled features from the listed (video, frame) pairs.
std::vector<PixelFeature> gather_training_features(
    const std::vector<std::string>& frames_dirs, const std::string& frames_pattern,
    const std::vector<std::string>& gt_dirs, const std::string& gt_pattern,
    const std::vector<std::string>& frame_lists, const HistoryConfig& hcfg, const TrainOpts& topts,
    std::uint64_t seed) {
  if (frames_dirs.size() != gt_dirs.size()) {
    throw std::invalid_argument("--frames and --gt must be given once per video, in pairs");
  }
  if (!frame_lists.empty() && frame_lists.size() != frames_dirs.size()) {
    throw std::invalid_argument("--train-frames must be given once per video when present");
  }
  std::vector<PixelFeature> features;
  for (std::size_t v = 0; v < frames_dirs.size(); ++v) {
    const FrameSequence seq = load_sequence(frames_dirs[v], frames_pattern);
    std::vector<int> indices;
    if (!frame_lists.empty()) {
      indices = parse_index_list(frame_lists[v]);
    } else {
      indices.push_back(seq.count() / 2);
    }
    const FilePattern gt_pat = FilePattern::parse(gt_pattern);
    for (int idx : indices) {
      if (idx <= 0 || idx >= seq.count()) {
        throw std::invalid_argument("training frame index " + std::to_string(idx) +
                                    " out of range (frame 0 has no history to train on)");
      }
      const fs::path gt_path = fs::path(gt_dirs[v]) / gt_pat.format(seq.ids[static_cast<std::size_t>(idx)]);
      const LabelMask gt = load_gt_mask(gt_path);
      if (gt.width != seq.width || gt.height != seq.height) {
        throw std::invalid_argument("dimensions differ between " + gt_path.string() + " and frames in " +
                                    frames_dirs[v]);
      }
      auto batch = extract_training_batch(seq, gt, idx, hcfg, !topts.no_balance, topts.max_per_class,
                                          seed + static_cast<std::uint64_t>(idx));
      if (batch.warning == BatchWarning::MissingForeground) {
        std::fprintf(stderr, "warning: no foreground pixels in %s, batch is unbalanced\n",
                     gt_path.string().c_str());
      } else if (batch.warning == BatchWarning::MissingBackground) {
        std::fprintf(stderr, "warning: no background pixels in %s, batch is unbalanced\n",
                     gt_path.string().c_str());
      }
      features.insert(features.end(), batch.features.begin(), batch.features.end());
    }
  }
  return features;
}

void run_train(const std::vector<std::string>& frames_dirs, const std::string& frames_pattern,
               const std::vector<std::string>& gt_dirs, const std::string& gt_pattern,
               const std::vector<std::string>& frame_lists, const std::string& model_path,
               const HistoryOpts& hopts, const NetOpts& nopts, const TrainOpts& topts,
               const SharedOpts& shared) {
  const HistoryConfig hcfg = to_history(hopts);
  const auto features = gather_training_features(frames_dirs, frames_pattern, gt_dirs, gt_pattern,
                                                 frame_lists, hcfg, topts, shared.seed);
  std::printf("training on %zu samples\n", features.size());
  const NetworkConfig ncfg = to_net_config(nopts);
  const TrainConfig tcfg = to_train_config(topts, shared);
  const auto result = train<float>(features, ncfg, tcfg, [](int epoch, double loss) {
    std::printf("epoch %d loss %.6f\n", epoch + 1, loss);
    std::fflush(stdout);
  });
  const fs::path out(model_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_model(result.net, out);
  std::printf("saved model to %s\n", model_path.c_str());
}

void run_infer(const std::string& frames_dir, const std::string& frames_pattern,
               const std::string& model_path, const std::string& out_dir, int start, int end,
               const std::set<int>& skip, const HistoryOpts& hopts, const SharedOpts& shared) {
  const FrameSequence seq = load_sequence(frames_dir, frames_pattern);
  const Network<float> net = load_model(model_path);
  const HistoryConfig hcfg = to_history(hopts);
  fs::create_directories(out_dir);
  const FilePattern pat = FilePattern::parse("%06d.png");
  const int threads = effective_threads(shared);
  const int last = end < 0 ? seq.count() : std::min(end, seq.count());
  int written = 0;
  for (int t = std::max(0, start); t < last; ++t) {
    if (skip.count(t)) continue;
    if (history_frames(t, hcfg, seq.count()).empty()) continue;  // no usable history yet
    const LabelMask mask = classify_frame(seq, t, net, hcfg, threads);
    save_mask(mask, fs::path(out_dir) / pat.format(seq.ids[static_cast<std::size_t>(t)]));
    ++written;
  }
  std::printf("wrote %d masks under %s\n", written, out_dir.c_str());
}

void run_refine_cmd(const std::string& frames_dir, const std::string& frames_pattern,
                    const std::string& masks_dir, const std::string& masks_pattern,
                    const std::string& out_dir, const RefineConfig& rcfg, const SharedOpts& shared) {
  if (!fs::is_directory(masks_dir)) throw std::runtime_error("missing directory: " + masks_dir);
  const FilePattern mask_pat = FilePattern::parse(masks_pattern);
  const FilePattern frame_pat = FilePattern::parse(frames_pattern);
  fs::create_directories(out_dir);
  const int threads = effective_threads(shared);
  std::vector<std::pair<long, std::string>> masks;
  for (const auto& entry : fs::directory_iterator(masks_dir)) {
    const long id = mask_pat.match(entry.path().filename().string());
    if (id >= 0) masks.emplace_back(id, entry.path().filename().string());
  }
  if (masks.empty()) throw std::runtime_error("no masks matched " + masks_pattern + " in " + masks_dir);
  std::sort(masks.begin(), masks.end());
  const FilePattern out_pat = FilePattern::parse("%06d.png");
  for (const auto& [id, name] : masks) {
    const fs::path frame_path = fs::path(frames_dir) / frame_pat.format(id);
    const ImageF frame = load_frame(frame_path);
    LabelMask mask = load_gt_mask(fs::path(masks_dir) / name);
    for (auto& l : mask.labels) {
      if (l == Label::Ignore) throw std::runtime_error("mask is not binary: " + name);
    }
    if (frame.width != mask.width || frame.height != mask.height) {
      throw std::runtime_error("dimensions differ between " + frame_path.string() + " and " +
                               (fs::path(masks_dir) / name).string());
    }
    save_mask(refine(frame, mask, rcfg, threads), fs::path(out_dir) / out_pat.format(id));
  }
  std::printf("refined %zu masks into %s\n", masks.size(), out_dir.c_str());
}

Confusion eval_video(const std::string& pred_dir, const std::string& pred_pattern,
                     const std::string& gt_dir, const std::string& gt_pattern) {
  if (!fs::is_directory(pred_dir)) throw std::runtime_error("missing directory: " + pred_dir);
  if (!fs::is_directory(gt_dir)) throw std::runtime_error("missing directory: " + gt_dir);
  const FilePattern pred_pat = FilePattern::parse(pred_pattern);
  const FilePattern gt_pat = FilePattern::parse(gt_pattern);
  Confusion total;
  int matched = 0;
  std::vector<std::pair<long, std::string>> preds;
  for (const auto& entry : fs::directory_iterator(pred_dir)) {
    const long id = pred_pat.match(entry.path().filename().string());
    if (id >= 0) preds.emplace_back(id, entry.path().filename().string());
  }
  std::sort(preds.begin(), preds.end());
  for (const auto& [id, name] : preds) {
    const fs::path gt_path = fs::path(gt_dir) / gt_pat.format(id);
    if (!fs::exists(gt_path)) continue;
    const LabelMask pred = load_gt_mask(fs::path(pred_dir) / name);
    const LabelMask gt = load_gt_mask(gt_path);
    if (pred.width != gt.width || pred.height != gt.height) {
      throw std::runtime_error("dimensions differ between " + (fs::path(pred_dir) / name).string() +
                               " and " + gt_path.string());
    }
    total += confusion(pred, gt);
    ++matched;
  }
  if (matched == 0) {
    throw std::runtime_error("no prediction in " + pred_dir + " matched a ground-truth file in " + gt_dir);
  }
  return total;
}

void write_report(const EvalReport& report, const std::string& out_path) {
  const std::string csv = to_csv(report);
  std::fputs(csv.c_str(), stdout);
  if (!out_path.empty()) {
    const fs::path out(out_path);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::FILE* f = std::fopen(out_path.c_str(), "wb");
    if (!f) throw std::runtime_error("could not write report: " + out_path);
    std::fputs(csv.c_str(), f);
    std::fclose(f);
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Background subtraction via arithmetic distribution learning"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "Write a synthetic moving-square sequence");
  SharedOpts synth_shared;
  SynthOpts synth_opts;
  add_shared(synth, synth_shared);
  add_synth(synth, synth_opts);

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "Train a classifier from ground-truth frames");
  SharedOpts train_shared;
  HistoryOpts train_hist;
  NetOpts train_net;
  TrainOpts train_opts;
  std::vector<std::string> train_frames_dirs, train_gt_dirs, train_frame_lists;
  std::string train_frames_pattern = "%06d.png", train_gt_pattern = "%06d.png", train_model;
  add_shared(train_cmd, train_shared);
  add_history(train_cmd, train_hist);
  add_net(train_cmd, train_net);
  add_train(train_cmd, train_opts);
  train_cmd->add_option("--frames", train_frames_dirs, "Frame directory (repeat per video)")->required();
  train_cmd->add_option("--frames-pattern", train_frames_pattern, "Frame file template")->capture_default_str();
  train_cmd->add_option("--gt", train_gt_dirs, "Ground-truth directory (repeat per video)")->required();
  train_cmd->add_option("--gt-pattern", train_gt_pattern, "Ground-truth file template")->capture_default_str();
  train_cmd->add_option("--train-frames", train_frame_lists,
                        "Comma-separated frame indices per video (default: the middle frame)");
  train_cmd->add_option("--model", train_model, "Output model file")->required();

  // ---- infer ----
  auto* infer_cmd = app.add_subcommand("infer", "Classify frames into masks");
  SharedOpts infer_shared;
  HistoryOpts infer_hist;
  std::string infer_frames, infer_frames_pattern = "%06d.png", infer_model, infer_out;
  int infer_start = 0, infer_end = -1;
  add_shared(infer_cmd, infer_shared);
  add_history(infer_cmd, infer_hist);
  infer_cmd->add_option("--frames", infer_frames, "Frame directory")->required();
  infer_cmd->add_option("--frames-pattern", infer_frames_pattern)->capture_default_str();
  infer_cmd->add_option("--model", infer_model, "Model file")->required();
  infer_cmd->add_option("--out", infer_out, "Mask output directory")->required();
  infer_cmd->add_option("--start", infer_start, "First frame index")->capture_default_str();
  infer_cmd->add_option("--end", infer_end, "One past the last frame index (-1 = all)")->capture_default_str();

  // ---- refine ----
  auto* refine_cmd = app.add_subcommand("refine", "Iteratively refine existing masks");
  SharedOpts refine_shared;
  std::string refine_frames, refine_frames_pattern = "%06d.png";
  std::string refine_masks, refine_masks_pattern = "%06d.png", refine_out;
  RefineConfig refine_cfg;
  std::string refine_shape = "symmetric";
  add_shared(refine_cmd, refine_shared);
  refine_cmd->add_option("--frames", refine_frames, "Frame directory")->required();
  refine_cmd->add_option("--frames-pattern", refine_frames_pattern)->capture_default_str();
  refine_cmd->add_option("--masks", refine_masks, "Input mask directory")->required();
  refine_cmd->add_option("--masks-pattern", refine_masks_pattern)->capture_default_str();
  refine_cmd->add_option("--out", refine_out, "Refined mask directory")->required();
  refine_cmd->add_option("--radius", refine_cfg.radius, "Window radius")->capture_default_str();
  refine_cmd->add_option("--napprox", refine_cfg.n, "Approximation width multiplier")->capture_default_str();
  refine_cmd->add_option("--iterations", refine_cfg.iterations)->capture_default_str();
  refine_cmd->add_option("--shape", refine_shape, "Approximation shape: symmetric | eq11")
      ->check(CLI::IsMember({"symmetric", "eq11"}))
      ->capture_default_str();

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "Score masks against ground truth");
  SharedOpts eval_shared;
  std::vector<std::string> eval_pred_dirs, eval_gt_dirs, eval_names;
  std::string eval_pred_pattern = "%06d.png", eval_gt_pattern = "%06d.png", eval_out;
  add_shared(eval_cmd, eval_shared);
  eval_cmd->add_option("--pred", eval_pred_dirs, "Predicted mask directory (repeat per video)")->required();
  eval_cmd->add_option("--pred-pattern", eval_pred_pattern)->capture_default_str();
  eval_cmd->add_option("--gt", eval_gt_dirs, "Ground-truth directory (repeat per video)")->required();
  eval_cmd->add_option("--gt-pattern", eval_gt_pattern)->capture_default_str();
  eval_cmd->add_option("--name", eval_names, "Video name per pair (default: directory name)");
  eval_cmd->add_option("--out", eval_out, "Report file (CSV); always printed to stdout");

  // ---- pipeline ----
  auto* pipe = app.add_subcommand("pipeline", "synth/ingest -> train -> infer -> refine -> eval");
  SharedOpts pipe_shared;
  SynthOpts pipe_synth;
  HistoryOpts pipe_hist;
  NetOpts pipe_net;
  TrainOpts pipe_train;
  RefineConfig pipe_refine_cfg;
  std::string pipe_refine_shape = "symmetric";
  std::string pipe_frames, pipe_frames_pattern = "%06d.png";
  std::string pipe_gt, pipe_gt_pattern = "%06d.png";
  int pipe_train_frame = -1;
  bool pipe_no_refine = false;
  add_shared(pipe, pipe_shared);
  add_history(pipe, pipe_hist);
  add_net(pipe, pipe_net);
  add_train(pipe, pipe_train);
  pipe->add_option("--out", pipe_synth.out, "Working directory for every pipeline artifact")->required();
  pipe->add_option("--frames", pipe_frames, "Existing frame directory (default: synthesize)");
  pipe->add_option("--frames-pattern", pipe_frames_pattern)->capture_default_str();
  pipe->add_option("--gt", pipe_gt, "Existing ground-truth directory");
  pipe->add_option("--gt-pattern", pipe_gt_pattern)->capture_default_str();
  pipe->add_option("--train-frame", pipe_train_frame, "Frame index to train on (default: middle)")
      ->capture_default_str();
  pipe->add_option("--width", pipe_synth.width)->capture_default_str();
  pipe->add_option("--height", pipe_synth.height)->capture_default_str();
  pipe->add_option("--count", pipe_synth.count)->capture_default_str();
  pipe->add_option("--square", pipe_synth.square)->capture_default_str();
  pipe->add_option("--noise", pipe_synth.noise)->capture_default_str();
  pipe->add_option("--radius", pipe_refine_cfg.radius)->capture_default_str();
  pipe->add_option("--napprox", pipe_refine_cfg.n)->capture_default_str();
  pipe->add_option("--iterations", pipe_refine_cfg.iterations)->capture_default_str();
  pipe->add_option("--shape", pipe_refine_shape)->check(CLI::IsMember({"symmetric", "eq11"}))
      ->capture_default_str();
  pipe->add_flag("--no-refine", pipe_no_refine, "Stop after raw inference");

  std::vector<std::string> expanded;
  try {
    expanded = apply_config_file(args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error [config]: %s\n", e.what());
    return 2;
  }
  std::vector<std::string> argv(expanded.rbegin(), expanded.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) {
      write_synthetic(to_synthetic_config(synth_opts, synth_shared.seed), synth_opts.out);
    } else if (*train_cmd) {
      run_train(train_frames_dirs, train_frames_pattern, train_gt_dirs, train_gt_pattern,
                train_frame_lists, train_model, train_hist, train_net, train_opts, train_shared);
    } else if (*infer_cmd) {
      run_infer(infer_frames, infer_frames_pattern, infer_model, infer_out, infer_start, infer_end,
                {}, infer_hist, infer_shared);
    } else if (*refine_cmd) {
      refine_cfg.shape = refine_shape == "eq11" ? ApproxShape::AsWrittenEq11 : ApproxShape::SymmetricTriangle;
      run_refine_cmd(refine_frames, refine_frames_pattern, refine_masks, refine_masks_pattern,
                     refine_out, refine_cfg, refine_shared);
    } else if (*eval_cmd) {
      if (eval_pred_dirs.size() != eval_gt_dirs.size()) {
        throw std::invalid_argument("--pred and --gt must be given once per video, in pairs");
      }
      std::vector<std::pair<std::string, Confusion>> rows;
      for (std::size_t v = 0; v < eval_pred_dirs.size(); ++v) {
        const std::string name = v < eval_names.size()
                                     ? eval_names[v]
                                     : fs::path(eval_pred_dirs[v]).filename().string();
        rows.emplace_back(name, eval_video(eval_pred_dirs[v], eval_pred_pattern, eval_gt_dirs[v],
                                           eval_gt_pattern));
      }
      write_report(aggregate(rows), eval_out);
    } else if (*pipe) {
      const fs::path out(pipe_synth.out);
      std::string frames_dir = pipe_frames, gt_dir = pipe_gt;
      std::string frames_pattern = pipe_frames_pattern, gt_pattern = pipe_gt_pattern;
      if (frames_dir.empty()) {
        write_synthetic(to_synthetic_config(pipe_synth, pipe_shared.seed), out);
        frames_dir = (out / "frames").string();
        gt_dir = (out / "gt").string();
        frames_pattern = gt_pattern = "%06d.png";
      } else if (gt_dir.empty()) {
        throw std::invalid_argument("--gt is required when --frames is given");
      }
      const FrameSequence probe = load_sequence(frames_dir, frames_pattern);
      const int train_frame = pipe_train_frame >= 0 ? pipe_train_frame : probe.count() / 2;
      const std::string model_path = (out / "model.adnn").string();
      run_train({frames_dir}, frames_pattern, {gt_dir}, gt_pattern,
                {std::to_string(train_frame)}, model_path, pipe_hist, pipe_net, pipe_train,
                pipe_shared);
      const std::string raw_masks = (out / "masks_raw").string();
      run_infer(frames_dir, frames_pattern, model_path, raw_masks, 0, -1, {train_frame}, pipe_hist,
                pipe_shared);
      std::vector<std::pair<std::string, Confusion>> raw_rows{
          {"raw", eval_video(raw_masks, "%06d.png", gt_dir, gt_pattern)}};
      std::printf("-- before refinement --\n");
      write_report(aggregate(raw_rows), (out / "report_raw.csv").string());
      if (!pipe_no_refine) {
        pipe_refine_cfg.shape = pipe_refine_shape == "eq11" ? ApproxShape::AsWrittenEq11
                                                            : ApproxShape::SymmetricTriangle;
        const std::string refined = (out / "masks").string();
        run_refine_cmd(frames_dir, frames_pattern, raw_masks, "%06d.png", refined, pipe_refine_cfg,
                       pipe_shared);
        std::vector<std::pair<std::string, Confusion>> rows{
            {"refined", eval_video(refined, "%06d.png", gt_dir, gt_pattern)}};
        std::printf("-- after refinement --\n");
        write_report(aggregate(rows), (out / "report.csv").string());
      }
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error [config]: %s\n", e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error [io]: %s\n", e.what());
    return 3;
  } catch (const std::system_error& e) {
    std::fprintf(stderr, "error [io]: %s\n", e.what());
    return 3;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "error [runtime]: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error [internal]: %s\n", e.what());
    return 4;
  }
  return 0;
}

}  // namespace adnn
