#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <cstring>
#include <span>
#include <vector>

#include "adnn/dist_layers.hpp"
#include "adnn/histfeat.hpp"
#include "adnn/histio.hpp"
#include "adnn/metrics.hpp"
#include "adnn/net.hpp"
#include "adnn/refine.hpp"

namespace py = pybind11;
using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using FArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

namespace {

std::vector<double> hist_from_array(const DArray& a) {
  const auto buf = a.request();
  if (buf.ndim != 1) throw std::invalid_argument("expected a 1-D histogram array");
  const auto* p = static_cast<const double*>(buf.ptr);
  return std::vector<double>(p, p + buf.shape[0]);
}

py::array_t<double> array_from_vec(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(double));
  return out;
}

adnn::ImageF frame_from_array(const FArray& a) {
  const auto buf = a.request();
  if (buf.ndim != 3 || buf.shape[2] != 3) throw std::invalid_argument("expected an (H, W, 3) frame");
  adnn::ImageF im;
  im.height = static_cast<int>(buf.shape[0]);
  im.width = static_cast<int>(buf.shape[1]);
  const auto* p = static_cast<const float*>(buf.ptr);
  im.data.assign(p, p + im.width * im.height * 3);
  return im;
}

adnn::LabelMask mask_from_array(const U8Array& a) {
  const auto buf = a.request();
  if (buf.ndim != 2) throw std::invalid_argument("expected an (H, W) mask");
  adnn::LabelMask m(static_cast<int>(buf.shape[1]), static_cast<int>(buf.shape[0]));
  const auto* p = static_cast<const std::uint8_t*>(buf.ptr);
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    if (p[i] > 2) throw std::invalid_argument("mask values must be 0 (bg), 1 (fg) or 2 (ignore)");
    m.labels[i] = static_cast<adnn::Label>(p[i]);
  }
  return m;
}

py::array_t<std::uint8_t> array_from_mask(const adnn::LabelMask& m) {
  py::array_t<std::uint8_t> out({m.height, m.width});
  auto* p = out.mutable_data();
  for (std::size_t i = 0; i < m.labels.size(); ++i) p[i] = static_cast<std::uint8_t>(m.labels[i]);
  return out;
}

adnn::ApproxShape shape_from_string(const std::string& s) {
  if (s == "symmetric") return adnn::ApproxShape::SymmetricTriangle;
  if (s == "eq11") return adnn::ApproxShape::AsWrittenEq11;
  throw std::invalid_argument("shape must be 'symmetric' or 'eq11'");
}

// Trained classifier handle for python callers.
struct Model {
  adnn::Network<float> net;

  py::array_t<std::uint8_t> classify(const FArray& features) const {
    const auto buf = features.request();
    if (buf.ndim != 3 || buf.shape[1] != 3 || buf.shape[2] != adnn::kBins) {
      throw std::invalid_argument("expected features shaped (N, 3, 201)");
    }
    const auto n = static_cast<std::size_t>(buf.shape[0]);
    const auto* p = static_cast<const float*>(buf.ptr);
    py::array_t<std::uint8_t> out(static_cast<py::ssize_t>(n));
    auto cache = net.make_cache();
    for (std::size_t i = 0; i < n; ++i) {
      out.mutable_data()[i] = static_cast<std::uint8_t>(net.classify(p + i * 3 * adnn::kBins, cache));
    }
    return out;
  }

  py::array_t<double> log_probs(const FArray& features) const {
    const auto buf = features.request();
    if (buf.ndim != 3 || buf.shape[1] != 3 || buf.shape[2] != adnn::kBins) {
      throw std::invalid_argument("expected features shaped (N, 3, 201)");
    }
    const auto n = static_cast<std::size_t>(buf.shape[0]);
    const auto* p = static_cast<const float*>(buf.ptr);
    py::array_t<double> out({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(2)});
    auto cache = net.make_cache();
    for (std::size_t i = 0; i < n; ++i) {
      net.forward(p + i * 3 * adnn::kBins, cache);
      out.mutable_data()[i * 2] = cache.logp[0];
      out.mutable_data()[i * 2 + 1] = cache.logp[1];
    }
    return out;
  }

  std::size_t param_count() const { return net.param_count(); }
  void save(const std::string& path) const { adnn::save_model(net, path); }
};

adnn::NetworkConfig config_from_kwargs(const std::string& arch, int filters, int hidden, int depth) {
  adnn::NetworkConfig cfg =
      arch == "cnn1" ? adnn::NetworkConfig::cnn1_default() : adnn::NetworkConfig::adnn_default();
  cfg.adl_filters = filters;
  cfg.hidden_units = hidden;
  cfg.adl_depth = depth;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Background subtraction via arithmetic distribution layers";
  m.attr("BINS") = adnn::kBins;

  m.def("bin_center", [](int i) { return adnn::bin_center(i); }, py::arg("i"));
  m.def("nearest_bin", [](double v) { return adnn::nearest_bin(v); }, py::arg("value"));

  m.def("product_forward", [](const DArray& x, const DArray& w) {
    const auto xv = hist_from_array(x), wv = hist_from_array(w);
    std::vector<double> z(xv.size());
    adnn::product_forward<double>(xv, wv, z);
    return array_from_vec(z);
  }, py::arg("x"), py::arg("kernel"));

  m.def("sum_forward", [](const DArray& x, const DArray& b) {
    const auto xv = hist_from_array(x), bv = hist_from_array(b);
    std::vector<double> z(xv.size());
    adnn::sum_forward<double>(xv, bv, z);
    return array_from_vec(z);
  }, py::arg("x"), py::arg("kernel"));

  m.def("product_backward", [](const DArray& x, const DArray& w, const DArray& dz) {
    const auto xv = hist_from_array(x), wv = hist_from_array(w), dzv = hist_from_array(dz);
    std::vector<double> gw(xv.size()), gx(xv.size());
    adnn::product_backward<double>(xv, wv, dzv, gw, gx);
    return py::make_tuple(array_from_vec(gw), array_from_vec(gx));
  }, py::arg("x"), py::arg("kernel"), py::arg("upstream"),
     "Returns (kernel_grad, input_grad)");

  m.def("sum_backward", [](const DArray& x, const DArray& b, const DArray& dz) {
    const auto xv = hist_from_array(x), bv = hist_from_array(b), dzv = hist_from_array(dz);
    std::vector<double> gb(xv.size()), gx(xv.size());
    adnn::sum_backward<double>(xv, bv, dzv, gb, gx);
    return py::make_tuple(array_from_vec(gb), array_from_vec(gx));
  }, py::arg("x"), py::arg("kernel"), py::arg("upstream"),
     "Returns (kernel_grad, input_grad)");

  m.def("subtraction_histogram", [](const DArray& history, const DArray& current) {
    const auto hb = history.request();
    const auto cb = current.request();
    if (hb.ndim != 2 || hb.shape[1] != 3 || cb.ndim != 1 || cb.shape[0] != 3) {
      throw std::invalid_argument("expected history (N, 3) and current (3,)");
    }
    std::vector<std::array<float, 3>> hist(static_cast<std::size_t>(hb.shape[0]));
    const auto* hp = static_cast<const double*>(hb.ptr);
    for (std::size_t i = 0; i < hist.size(); ++i) {
      hist[i] = {static_cast<float>(hp[i * 3]), static_cast<float>(hp[i * 3 + 1]),
                 static_cast<float>(hp[i * 3 + 2])};
    }
    const auto* cp = static_cast<const double*>(cb.ptr);
    const auto out = adnn::subtraction_histogram(
        hist, {static_cast<float>(cp[0]), static_cast<float>(cp[1]), static_cast<float>(cp[2])});
    py::array_t<double> arr({static_cast<py::ssize_t>(3), static_cast<py::ssize_t>(adnn::kBins)});
    for (int c = 0; c < 3; ++c) {
      for (int j = 0; j < adnn::kBins; ++j) {
        arr.mutable_data()[c * adnn::kBins + j] =
            out[static_cast<std::size_t>(c)].mass[static_cast<std::size_t>(j)];
      }
    }
    return arr;
  }, py::arg("history"), py::arg("current"));

  m.def("rgb_to_lab", [](double r, double g, double b) {
    const auto lab = adnn::rgb_to_lab(r, g, b);
    return py::make_tuple(lab[0], lab[1], lab[2]);
  }, py::arg("r"), py::arg("g"), py::arg("b"));

  m.def("gaussian_approx", [](double x, double mu, double sigma, double n, const std::string& shape) {
    return adnn::gaussian_approx(x, mu, sigma, n, shape_from_string(shape));
  }, py::arg("x"), py::arg("mu"), py::arg("sigma"), py::arg("n") = 2.0,
     py::arg("shape") = "symmetric");

  m.def("refine", [](const FArray& frame, const U8Array& mask, int radius, double n, int iterations,
                     const std::string& shape, int threads) {
    adnn::RefineConfig cfg;
    cfg.radius = radius;
    cfg.n = n;
    cfg.iterations = iterations;
    cfg.shape = shape_from_string(shape);
    return array_from_mask(adnn::refine(frame_from_array(frame), mask_from_array(mask), cfg, threads));
  }, py::arg("frame"), py::arg("mask"), py::arg("radius") = 4, py::arg("n") = 2.0,
     py::arg("iterations") = 20, py::arg("shape") = "symmetric", py::arg("threads") = 1);

  m.def("confusion", [](const U8Array& pred, const U8Array& gt) {
    const auto c = adnn::confusion(mask_from_array(pred), mask_from_array(gt));
    return py::make_tuple(c.tp, c.fp, c.fn, c.tn);
  }, py::arg("pred"), py::arg("gt"), "Returns (tp, fp, fn, tn); gt value 2 is ignored");

  m.def("re_pr_fm", [](std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
    const auto r = adnn::re_pr_fm({tp, fp, fn, tn});
    return py::make_tuple(r.re, r.pr, r.fm);
  }, py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn") = 0);

  m.def("generate_synthetic", [](int width, int height, int count, int square, double noise,
                                 std::uint64_t seed) {
    adnn::SyntheticConfig cfg;
    cfg.width = width;
    cfg.height = height;
    cfg.count = count;
    cfg.square = square;
    cfg.noise = static_cast<float>(noise);
    cfg.seed = seed;
    cfg.path = adnn::bounce_path(cfg, 0, 0, 1, 1);
    auto [seq, masks] = adnn::generate_synthetic(cfg);
    py::array_t<float> frames({count, height, width, 3});
    py::array_t<std::uint8_t> gts({count, height, width});
    for (int t = 0; t < count; ++t) {
      std::memcpy(frames.mutable_data() + static_cast<std::size_t>(t) * height * width * 3,
                  seq.frames[static_cast<std::size_t>(t)].data.data(),
                  static_cast<std::size_t>(height) * width * 3 * sizeof(float));
      for (std::size_t i = 0; i < masks[static_cast<std::size_t>(t)].labels.size(); ++i) {
        gts.mutable_data()[static_cast<std::size_t>(t) * height * width + i] =
            static_cast<std::uint8_t>(masks[static_cast<std::size_t>(t)].labels[i]);
      }
    }
    return py::make_tuple(frames, gts);
  }, py::arg("width") = 64, py::arg("height") = 64, py::arg("count") = 60, py::arg("square") = 8,
     py::arg("noise") = 0.05, py::arg("seed") = 0);

  py::class_<Model>(m, "Model")
      .def("classify", &Model::classify, py::arg("features"),
           "Argmax labels for features shaped (N, 3, 201); ties go to background")
      .def("log_probs", &Model::log_probs, py::arg("features"))
      .def("param_count", &Model::param_count)
      .def("save", &Model::save, py::arg("path"));

  m.def("train", [](const FArray& features, const U8Array& labels, const std::string& arch,
                    int filters, int hidden, int depth, double lr, int epochs, int batch,
                    std::uint64_t seed) {
    const auto fb = features.request();
    const auto lb = labels.request();
    if (fb.ndim != 3 || fb.shape[1] != 3 || fb.shape[2] != adnn::kBins) {
      throw std::invalid_argument("expected features shaped (N, 3, 201)");
    }
    if (lb.ndim != 1 || lb.shape[0] != fb.shape[0]) {
      throw std::invalid_argument("labels must be (N,) matching the features");
    }
    std::vector<adnn::PixelFeature> samples(static_cast<std::size_t>(fb.shape[0]));
    const auto* fp = static_cast<const float*>(fb.ptr);
    const auto* lp = static_cast<const std::uint8_t*>(lb.ptr);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      std::memcpy(samples[i].flat(), fp + i * 3 * adnn::kBins, 3 * adnn::kBins * sizeof(float));
      samples[i].label = lp[i] ? adnn::Label::Foreground : adnn::Label::Background;
    }
    adnn::TrainConfig tcfg;
    tcfg.learning_rate = lr;
    tcfg.max_epochs = epochs;
    tcfg.batch_size = batch;
    tcfg.seed = seed;
    tcfg.deterministic = true;
    auto result = adnn::train<float>(samples, config_from_kwargs(arch, filters, hidden, depth), tcfg);
    return py::make_tuple(Model{std::move(result.net)}, result.epoch_loss);
  }, py::arg("features"), py::arg("labels"), py::arg("arch") = "adnn", py::arg("filters") = 2,
     py::arg("hidden") = 512, py::arg("depth") = 1, py::arg("lr") = 1e-4, py::arg("epochs") = 60,
     py::arg("batch") = 1000, py::arg("seed") = 0,
     "Returns (model, per_epoch_loss); labels are 0 background / 1 foreground");

  m.def("load_model", [](const std::string& path) { return Model{adnn::load_model(path)}; },
        py::arg("path"));
}
