#include "adnn/metrics.hpp"

#include <cstdio>
#include <stdexcept>

namespace adnn {

Confusion confusion(const LabelMask& pred, const LabelMask& gt) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw std::invalid_argument("prediction and ground truth dimensions do not match");
  }
  Confusion c;
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    if (pred.labels[i] == Label::Ignore) {
      throw std::invalid_argument("prediction may not contain Ignore labels");
    }
    if (gt.labels[i] == Label::Ignore) continue;
    const bool p = pred.labels[i] == Label::Foreground;
    const bool g = gt.labels[i] == Label::Foreground;
    if (p && g) ++c.tp;
    else if (p && !g) ++c.fp;
    else if (!p && g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Metrics re_pr_fm(const Confusion& c) {
  auto ratio = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
  Metrics m;
  m.re = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  m.pr = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  m.fm = ratio(2.0 * m.pr * m.re, m.pr + m.re);
  return m;
}

EvalReport aggregate(const std::vector<std::pair<std::string, Confusion>>& per_video) {
  if (per_video.empty()) throw std::invalid_argument("nothing to aggregate");
  EvalReport report;
  for (const auto& [name, counts] : per_video) {
    const Metrics m = re_pr_fm(counts);
    report.per_video.push_back({name, counts, m});
    report.overall.re += m.re;
    report.overall.pr += m.pr;
    report.overall.fm += m.fm;
  }
  const double inv = 1.0 / static_cast<double>(per_video.size());
  report.overall.re *= inv;
  report.overall.pr *= inv;
  report.overall.fm *= inv;
  return report;
}

std::string to_csv(const EvalReport& report) {
  std::string out = "video,Re,Pr,Fm\n";
  char line[256];
  for (const auto& row : report.per_video) {
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f\n", row.video.c_str(), row.metrics.re,
                  row.metrics.pr, row.metrics.fm);
    out += line;
  }
  std::snprintf(line, sizeof(line), "Overall,%.6f,%.6f,%.6f\n", report.overall.re,
                report.overall.pr, report.overall.fm);
  out += line;
  return out;
}

}  // namespace adnn
