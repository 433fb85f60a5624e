#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adnn/image.hpp"

namespace adnn {

struct Confusion {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

struct Metrics {
  double re = 0.0, pr = 0.0, fm = 0.0;
};

// Pixel counts with foreground as the positive class; ground-truth Ignore
// pixels are excluded. The prediction must be binary.
Confusion confusion(const LabelMask& pred, const LabelMask& gt);

// Re = tp/(tp+fn), Pr = tp/(tp+fp), Fm = harmonic mean; 0/0 counts as 0.
Metrics re_pr_fm(const Confusion& c);

struct EvalReport {
  struct Row {
    std::string video;
    Confusion counts;
    Metrics metrics;
  };
  std::vector<Row> per_video;
  Metrics overall;  // unweighted mean of the per-video metrics
};

EvalReport aggregate(const std::vector<std::pair<std::string, Confusion>>& per_video);

// CSV table: header, one row per video, final Overall row. Fixed column
// order and 6-decimal formatting so reports diff cleanly.
std::string to_csv(const EvalReport& report);

}  // namespace adnn
