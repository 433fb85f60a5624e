#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "adnn/dist_layers.hpp"
#include "adnn/histfeat.hpp"
#include "adnn/image.hpp"
#include "adnn/parallel.hpp"
#include "adnn/rng.hpp"

namespace adnn {

enum class Arch : std::uint32_t { ADNN = 0, CNN1 = 1 };

// Per-layer-family bias switches. The published parameter totals count
// weights only (405 / 1,611 / 106,354 all decompose exactly with every bias
// off), so CNN1 defaults to none and the ADNN keeps biases off the wide
// hidden layer.
struct NetworkConfig {
  Arch architecture = Arch::ADNN;
  int adl_filters = 2;
  int hist_width = kBins;  // odd; a center zero bin must exist
  int adl_depth = 1;
  int hidden_units = 512;
  int classes = 2;
  bool bias_combine = true;
  bool bias_hidden = false;
  bool bias_output = true;

  static NetworkConfig adnn_default() { return NetworkConfig{}; }

  static NetworkConfig cnn1_default() {
    NetworkConfig cfg;
    cfg.architecture = Arch::CNN1;
    cfg.bias_combine = false;
    cfg.bias_hidden = false;
    cfg.bias_output = false;
    return cfg;
  }

  void validate() const {
    if (hist_width < 3 || hist_width % 2 == 0) throw std::invalid_argument("hist_width must be odd and >= 3");
    if (classes != 2) throw std::invalid_argument("only 2-class networks are supported");
    if (adl_filters < 1 || adl_depth < 1 || hidden_units < 1) {
      throw std::invalid_argument("filter, depth and hidden unit counts must be >= 1");
    }
  }

  int map_count() const { return 3 * adl_filters; }
};

struct TrainConfig {
  double learning_rate = 1e-4;
  int max_epochs = 60;
  int batch_size = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool deterministic = false;
  int threads = 1;

  void validate() const {
    if (!(learning_rate > 0.0) && learning_rate != 0.0) throw std::invalid_argument("learning rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (max_epochs < 0) throw std::invalid_argument("epoch count must be >= 0");
  }
};

// Named, shaped parameter block with its paired gradient buffer.
template <class T>
struct Tensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Tensor(std::string n, std::vector<std::uint32_t> s) : name(std::move(n)), shape(std::move(s)) {
    std::size_t total = 1;
    for (auto d : shape) total *= d;
    value.assign(total, T(0));
    grad.assign(total, T(0));
  }
};

// The classifier. Production runs the float instantiation; the double one
// exists for finite-difference checks, sharing the exact same code path.
template <class T>
class Network {
 public:
  explicit Network(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto w = static_cast<std::uint32_t>(cfg_.hist_width);
    const auto f = static_cast<std::uint32_t>(cfg_.adl_filters);
    const auto maps = static_cast<std::uint32_t>(cfg_.map_count());
    const auto hidden = static_cast<std::uint32_t>(cfg_.hidden_units);
    const auto k = static_cast<std::uint32_t>(cfg_.classes);
    if (cfg_.architecture == Arch::ADNN) {
      params_.emplace_back("prod_kernels0", std::vector<std::uint32_t>{f, 3, w});
      params_.emplace_back("sum_kernels0", std::vector<std::uint32_t>{f, 3, w});
      for (int d = 1; d < cfg_.adl_depth; ++d) {
        params_.emplace_back("prod_kernels" + std::to_string(d), std::vector<std::uint32_t>{maps, w});
        params_.emplace_back("sum_kernels" + std::to_string(d), std::vector<std::uint32_t>{maps, w});
      }
      params_.emplace_back("combine_w", std::vector<std::uint32_t>{maps});
      if (cfg_.bias_combine) params_.emplace_back("combine_b", std::vector<std::uint32_t>{1});
      params_.emplace_back("hidden_w", std::vector<std::uint32_t>{hidden, w});
      if (cfg_.bias_hidden) params_.emplace_back("hidden_b", std::vector<std::uint32_t>{hidden});
      params_.emplace_back("out_w", std::vector<std::uint32_t>{k, hidden});
      if (cfg_.bias_output) params_.emplace_back("out_b", std::vector<std::uint32_t>{k});
    } else {
      params_.emplace_back("mix_w", std::vector<std::uint32_t>{3});
      if (cfg_.bias_combine) params_.emplace_back("mix_b", std::vector<std::uint32_t>{1});
      params_.emplace_back("out_w", std::vector<std::uint32_t>{k, w});
      if (cfg_.bias_output) params_.emplace_back("out_b", std::vector<std::uint32_t>{k});
    }
  }

  const NetworkConfig& config() const { return cfg_; }
  std::vector<Tensor<T>>& params() { return params_; }
  const std::vector<Tensor<T>>& params() const { return params_; }

  Tensor<T>& block(const std::string& name) {
    for (auto& t : params_) {
      if (t.name == name) return t;
    }
    throw std::out_of_range("no parameter block named " + name);
  }
  const Tensor<T>& block(const std::string& name) const {
    return const_cast<Network*>(this)->block(name);
  }
  bool has_block(const std::string& name) const {
    for (const auto& t : params_) {
      if (t.name == name) return true;
    }
    return false;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& t : params_) n += t.value.size();
    return n;
  }

  // Distribution kernels start as the identity delta plus small noise, so
  // the untrained network is near pass-through; the dense layers use
  // uniform fan-scaled draws and biases start at zero.
  void init(std::uint64_t seed) {
    Rng rng(seed);
    const int w = cfg_.hist_width;
    auto glorot = [&](Tensor<T>& t, int fan_in, int fan_out) {
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& v : t.value) v = static_cast<T>(rng.uniform(-limit, limit));
    };
    if (cfg_.architecture == Arch::ADNN) {
      for (int d = 0; d < cfg_.adl_depth; ++d) {
        auto& prod = block("prod_kernels" + std::to_string(d));
        auto& sum = block("sum_kernels" + std::to_string(d));
        const std::size_t kernels = prod.value.size() / static_cast<std::size_t>(w);
        for (std::size_t k = 0; k < kernels; ++k) {
          std::span<T> pk(prod.value.data() + k * static_cast<std::size_t>(w), static_cast<std::size_t>(w));
          init_product_kernel(pk, rng);
        }
        for (std::size_t k = 0; k < kernels; ++k) {
          std::span<T> sk(sum.value.data() + k * static_cast<std::size_t>(w), static_cast<std::size_t>(w));
          init_sum_kernel(sk, rng);
        }
      }
      auto& comb = block("combine_w");
      const T base = static_cast<T>(1.0 / cfg_.map_count());
      for (auto& v : comb.value) v = base + static_cast<T>(rng.uniform(-0.01, 0.01));
      glorot(block("hidden_w"), w, cfg_.hidden_units);
      glorot(block("out_w"), cfg_.hidden_units, cfg_.classes);
    } else {
      auto& mix = block("mix_w");
      for (auto& v : mix.value) v = static_cast<T>(1.0 / 3.0) + static_cast<T>(rng.uniform(-0.01, 0.01));
      glorot(block("out_w"), w, cfg_.classes);
    }
  }

  void zero_grads() {
    for (auto& t : params_) std::fill(t.grad.begin(), t.grad.end(), T(0));
  }

  // Per-sample activations kept for the backward pass.
  struct Cache {
    std::vector<std::vector<T>> maps;  // ADNN: one 3F x width buffer per block
    std::vector<T> combined;           // width (ADNN) / width (CNN1 mixed map)
    std::vector<T> hidden_pre;
    std::vector<T> hidden_act;
    std::vector<T> logits;
    std::vector<T> logp;
    T finite_probe = T(0);  // running sum of pre-activations; NaN/Inf poison it
    // backward scratch
    std::vector<std::vector<T>> dmaps;
    std::vector<T> dcombined;
    std::vector<T> scratch;
  };

  Cache make_cache() const {
    Cache c;
    const auto w = static_cast<std::size_t>(cfg_.hist_width);
    if (cfg_.architecture == Arch::ADNN) {
      const auto maps = static_cast<std::size_t>(cfg_.map_count());
      c.maps.resize(static_cast<std::size_t>(cfg_.adl_depth));
      c.dmaps.resize(static_cast<std::size_t>(cfg_.adl_depth));
      for (auto& m : c.maps) m.assign(maps * w, T(0));
      for (auto& m : c.dmaps) m.assign(maps * w, T(0));
      c.hidden_pre.assign(static_cast<std::size_t>(cfg_.hidden_units), T(0));
      c.hidden_act.assign(static_cast<std::size_t>(cfg_.hidden_units), T(0));
    }
    c.combined.assign(w, T(0));
    c.dcombined.assign(w, T(0));
    c.logits.assign(static_cast<std::size_t>(cfg_.classes), T(0));
    c.logp.assign(static_cast<std::size_t>(cfg_.classes), T(0));
    c.scratch.assign(w, T(0));
    return c;
  }

  // x: 3 * hist_width values, channel-major.
  void forward(const T* x, Cache& c) const {
    const int w = cfg_.hist_width;
    if (cfg_.architecture == Arch::ADNN) {
      forward_adnn(x, c);
    } else {
      forward_cnn1(x, c);
    }
    // log-softmax, shifted by the max logit
    T m = c.logits[0];
    for (int k = 1; k < cfg_.classes; ++k) m = std::max(m, c.logits[static_cast<std::size_t>(k)]);
    T lse = T(0);
    for (int k = 0; k < cfg_.classes; ++k) lse += std::exp(c.logits[static_cast<std::size_t>(k)] - m);
    lse = m + std::log(lse);
    for (int k = 0; k < cfg_.classes; ++k) c.logp[static_cast<std::size_t>(k)] = c.logits[static_cast<std::size_t>(k)] - lse;
    if (!std::isfinite(static_cast<double>(c.finite_probe)) ||
        !std::isfinite(static_cast<double>(c.logp[0]))) {
      throw std::runtime_error("non-finite activation in forward pass");
    }
    (void)w;
  }

  // Gradient blocks parallel to params(); reduced into the tensors' grad
  // buffers by the caller so multi-worker accumulation stays ordered.
  std::vector<std::vector<T>> make_grad_blocks() const {
    std::vector<std::vector<T>> g;
    g.reserve(params_.size());
    for (const auto& t : params_) g.emplace_back(t.value.size(), T(0));
    return g;
  }

  // Accumulates scale * d NLL(sample) / d theta into g. `c` must hold the
  // forward activations of the same sample.
  void backward(const T* x, int label, T scale, Cache& c, std::vector<std::vector<T>>& g) const {
    std::vector<T> dlogits(static_cast<std::size_t>(cfg_.classes));
    for (int k = 0; k < cfg_.classes; ++k) {
      const T soft = std::exp(c.logp[static_cast<std::size_t>(k)]);
      dlogits[static_cast<std::size_t>(k)] = scale * (soft - (k == label ? T(1) : T(0)));
    }
    if (cfg_.architecture == Arch::ADNN) {
      backward_adnn(x, dlogits, c, g);
    } else {
      backward_cnn1(x, dlogits, c, g);
    }
  }

  int classify(const T* x, Cache& c) const {
    forward(x, c);
    // ties go to background
    return c.logp[1] > c.logp[0] ? 1 : 0;
  }

 private:
  int block_index(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  void forward_adnn(const T* x, Cache& c) const {
    const int w = cfg_.hist_width;
    const auto sw = static_cast<std::size_t>(w);
    const int maps = cfg_.map_count();
    // stacked distribution blocks; block 0 expands the 3 channels into
    // 3 * adl_filters maps, deeper blocks transform each map in place
    for (int d = 0; d < cfg_.adl_depth; ++d) {
      const auto& prod = block("prod_kernels" + std::to_string(d));
      const auto& sum = block("sum_kernels" + std::to_string(d));
      auto& out = c.maps[static_cast<std::size_t>(d)];
      for (int m = 0; m < maps; ++m) {
        const T* in;
        std::size_t kidx;
        if (d == 0) {
          const int channel = m % 3;
          const int filter = m / 3;
          in = x + static_cast<std::size_t>(channel) * sw;
          kidx = static_cast<std::size_t>(filter * 3 + channel);
        } else {
          in = c.maps[static_cast<std::size_t>(d - 1)].data() + static_cast<std::size_t>(m) * sw;
          kidx = static_cast<std::size_t>(m);
        }
        std::span<const T> xin(in, sw);
        std::span<const T> wk(prod.value.data() + kidx * sw, sw);
        std::span<const T> bk(sum.value.data() + kidx * sw, sw);
        std::span<T> zout(out.data() + static_cast<std::size_t>(m) * sw, sw);
        product_forward(xin, wk, zout);
        std::span<T> tmp(c.scratch.data(), sw);
        sum_forward(xin, bk, tmp);
        for (std::size_t j = 0; j < sw; ++j) zout[j] += tmp[j];
      }
    }
    // 1x1 combining convolution across maps
    const auto& comb = block("combine_w");
    const T cb = cfg_.bias_combine ? block("combine_b").value[0] : T(0);
    const auto& last = c.maps[static_cast<std::size_t>(cfg_.adl_depth - 1)];
    for (std::size_t j = 0; j < sw; ++j) c.combined[j] = cb;
    for (int m = 0; m < maps; ++m) {
      const T cw = comb.value[static_cast<std::size_t>(m)];
      const T* src = last.data() + static_cast<std::size_t>(m) * sw;
      for (std::size_t j = 0; j < sw; ++j) c.combined[j] += cw * src[j];
    }
    // full-width convolution + relu
    const auto& hw = block("hidden_w");
    const T* hb = cfg_.bias_hidden ? block("hidden_b").value.data() : nullptr;
    T probe = T(0);
    for (int u = 0; u < cfg_.hidden_units; ++u) {
      const T* row = hw.value.data() + static_cast<std::size_t>(u) * sw;
      T acc = hb ? hb[u] : T(0);
      for (std::size_t j = 0; j < sw; ++j) acc += row[j] * c.combined[j];
      c.hidden_pre[static_cast<std::size_t>(u)] = acc;
      c.hidden_act[static_cast<std::size_t>(u)] = acc > T(0) ? acc : T(0);
      probe += acc;
    }
    c.finite_probe = probe;
    // final linear map to logits
    const auto& ow = block("out_w");
    const T* ob = cfg_.bias_output ? block("out_b").value.data() : nullptr;
    for (int k = 0; k < cfg_.classes; ++k) {
      const T* row = ow.value.data() + static_cast<std::size_t>(k) * cfg_.hidden_units;
      T acc = ob ? ob[k] : T(0);
      for (int u = 0; u < cfg_.hidden_units; ++u) acc += row[u] * c.hidden_act[static_cast<std::size_t>(u)];
      c.logits[static_cast<std::size_t>(k)] = acc;
    }
  }

  void backward_adnn(const T* x, const std::vector<T>& dlogits, Cache& c,
                     std::vector<std::vector<T>>& g) const {
    const auto sw = static_cast<std::size_t>(cfg_.hist_width);
    const int maps = cfg_.map_count();
    const int i_ow = block_index("out_w");
    const int i_ob = block_index("out_b");
    const int i_hw = block_index("hidden_w");
    const int i_hb = block_index("hidden_b");
    const int i_cw = block_index("combine_w");
    const int i_cb = block_index("combine_b");

    // output layer
    const auto& ow = block("out_w");
    std::vector<T> dact(static_cast<std::size_t>(cfg_.hidden_units), T(0));
    for (int k = 0; k < cfg_.classes; ++k) {
      const T dk = dlogits[static_cast<std::size_t>(k)];
      T* gow = g[static_cast<std::size_t>(i_ow)].data() + static_cast<std::size_t>(k) * cfg_.hidden_units;
      const T* row = ow.value.data() + static_cast<std::size_t>(k) * cfg_.hidden_units;
      for (int u = 0; u < cfg_.hidden_units; ++u) {
        gow[u] += dk * c.hidden_act[static_cast<std::size_t>(u)];
        dact[static_cast<std::size_t>(u)] += dk * row[u];
      }
      if (i_ob >= 0) g[static_cast<std::size_t>(i_ob)][static_cast<std::size_t>(k)] += dk;
    }
    // relu mask + hidden layer
    const auto& hw = block("hidden_w");
    std::fill(c.dcombined.begin(), c.dcombined.end(), T(0));
    for (int u = 0; u < cfg_.hidden_units; ++u) {
      if (!(c.hidden_pre[static_cast<std::size_t>(u)] > T(0))) continue;
      const T du = dact[static_cast<std::size_t>(u)];
      if (du == T(0)) continue;
      T* ghw = g[static_cast<std::size_t>(i_hw)].data() + static_cast<std::size_t>(u) * sw;
      const T* row = hw.value.data() + static_cast<std::size_t>(u) * sw;
      for (std::size_t j = 0; j < sw; ++j) {
        ghw[j] += du * c.combined[j];
        c.dcombined[j] += du * row[j];
      }
      if (i_hb >= 0) g[static_cast<std::size_t>(i_hb)][static_cast<std::size_t>(u)] += du;
    }
    // combining convolution
    const auto& comb = block("combine_w");
    const auto& last = c.maps[static_cast<std::size_t>(cfg_.adl_depth - 1)];
    auto& dlast = c.dmaps[static_cast<std::size_t>(cfg_.adl_depth - 1)];
    for (int m = 0; m < maps; ++m) {
      const T* src = last.data() + static_cast<std::size_t>(m) * sw;
      T* dm = dlast.data() + static_cast<std::size_t>(m) * sw;
      const T cw = comb.value[static_cast<std::size_t>(m)];
      T gacc = T(0);
      for (std::size_t j = 0; j < sw; ++j) {
        gacc += c.dcombined[j] * src[j];
        dm[j] = cw * c.dcombined[j];
      }
      g[static_cast<std::size_t>(i_cw)][static_cast<std::size_t>(m)] += gacc;
    }
    if (i_cb >= 0) {
      T gacc = T(0);
      for (std::size_t j = 0; j < sw; ++j) gacc += c.dcombined[j];
      g[static_cast<std::size_t>(i_cb)][0] += gacc;
    }
    // distribution blocks, deepest first
    for (int d = cfg_.adl_depth - 1; d >= 0; --d) {
      const auto& prod = block("prod_kernels" + std::to_string(d));
      const auto& sum = block("sum_kernels" + std::to_string(d));
      const int i_p = block_index("prod_kernels" + std::to_string(d));
      const int i_s = block_index("sum_kernels" + std::to_string(d));
      auto& dy = c.dmaps[static_cast<std::size_t>(d)];
      const bool want_input = d > 0;
      if (want_input) {
        std::fill(c.dmaps[static_cast<std::size_t>(d - 1)].begin(),
                  c.dmaps[static_cast<std::size_t>(d - 1)].end(), T(0));
      }
      std::vector<T> gk(sw), gi(want_input ? sw : 0), gi2(want_input ? sw : 0);
      for (int m = 0; m < maps; ++m) {
        const T* in;
        std::size_t kidx;
        if (d == 0) {
          in = x + static_cast<std::size_t>(m % 3) * sw;
          kidx = static_cast<std::size_t>((m / 3) * 3 + (m % 3));
        } else {
          in = c.maps[static_cast<std::size_t>(d - 1)].data() + static_cast<std::size_t>(m) * sw;
          kidx = static_cast<std::size_t>(m);
        }
        std::span<const T> xin(in, sw);
        std::span<const T> dzm(dy.data() + static_cast<std::size_t>(m) * sw, sw);
        std::span<const T> wk(prod.value.data() + kidx * sw, sw);
        std::span<const T> bk(sum.value.data() + kidx * sw, sw);
        product_backward(xin, wk, dzm, std::span<T>(gk), std::span<T>(gi));
        T* gp = g[static_cast<std::size_t>(i_p)].data() + kidx * sw;
        for (std::size_t j = 0; j < sw; ++j) gp[j] += gk[j];
        sum_backward(xin, bk, dzm, std::span<T>(gk), std::span<T>(gi2));
        T* gs = g[static_cast<std::size_t>(i_s)].data() + kidx * sw;
        for (std::size_t j = 0; j < sw; ++j) gs[j] += gk[j];
        if (want_input) {
          T* dprev = c.dmaps[static_cast<std::size_t>(d - 1)].data() + static_cast<std::size_t>(m) * sw;
          for (std::size_t j = 0; j < sw; ++j) dprev[j] += gi[j] + gi2[j];
        }
      }
    }
  }

  void forward_cnn1(const T* x, Cache& c) const {
    const auto sw = static_cast<std::size_t>(cfg_.hist_width);
    const auto& mix = block("mix_w");
    const T mb = cfg_.bias_combine ? block("mix_b").value[0] : T(0);
    T probe = T(0);
    for (std::size_t j = 0; j < sw; ++j) {
      T acc = mb;
      for (int ch = 0; ch < 3; ++ch) acc += mix.value[static_cast<std::size_t>(ch)] * x[static_cast<std::size_t>(ch) * sw + j];
      c.combined[j] = acc;
      probe += acc;
    }
    c.finite_probe = probe;
    const auto& ow = block("out_w");
    const T* ob = cfg_.bias_output ? block("out_b").value.data() : nullptr;
    for (int k = 0; k < cfg_.classes; ++k) {
      const T* row = ow.value.data() + static_cast<std::size_t>(k) * sw;
      T acc = ob ? ob[k] : T(0);
      for (std::size_t j = 0; j < sw; ++j) {
        const T r = c.combined[j] > T(0) ? c.combined[j] : T(0);
        acc += row[j] * r;
      }
      c.logits[static_cast<std::size_t>(k)] = acc;
    }
  }

  void backward_cnn1(const T* x, const std::vector<T>& dlogits, Cache& c,
                     std::vector<std::vector<T>>& g) const {
    const auto sw = static_cast<std::size_t>(cfg_.hist_width);
    const int i_ow = block_index("out_w");
    const int i_ob = block_index("out_b");
    const int i_mw = block_index("mix_w");
    const int i_mb = block_index("mix_b");
    const auto& ow = block("out_w");
    std::fill(c.dcombined.begin(), c.dcombined.end(), T(0));
    for (int k = 0; k < cfg_.classes; ++k) {
      const T dk = dlogits[static_cast<std::size_t>(k)];
      T* gow = g[static_cast<std::size_t>(i_ow)].data() + static_cast<std::size_t>(k) * sw;
      const T* row = ow.value.data() + static_cast<std::size_t>(k) * sw;
      for (std::size_t j = 0; j < sw; ++j) {
        const T r = c.combined[j] > T(0) ? c.combined[j] : T(0);
        gow[j] += dk * r;
        if (c.combined[j] > T(0)) c.dcombined[j] += dk * row[j];
      }
      if (i_ob >= 0) g[static_cast<std::size_t>(i_ob)][static_cast<std::size_t>(k)] += dk;
    }
    for (int ch = 0; ch < 3; ++ch) {
      T gacc = T(0);
      for (std::size_t j = 0; j < sw; ++j) gacc += c.dcombined[j] * x[static_cast<std::size_t>(ch) * sw + j];
      g[static_cast<std::size_t>(i_mw)][static_cast<std::size_t>(ch)] += gacc;
    }
    if (i_mb >= 0) {
      T gacc = T(0);
      for (std::size_t j = 0; j < sw; ++j) gacc += c.dcombined[j];
      g[static_cast<std::size_t>(i_mb)][0] += gacc;
    }
  }

  NetworkConfig cfg_;
  std::vector<Tensor<T>> params_;
};

// Adam with bias-corrected moments, driven by the tensors' grad buffers.
template <class T>
class Adam {
 public:
  Adam(Network<T>& net, const TrainConfig& tc) : net_(net), tc_(tc) {
    for (const auto& t : net.params()) {
      m_.emplace_back(t.value.size(), T(0));
      v_.emplace_back(t.value.size(), T(0));
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(tc_.beta1, t_);
    const double c2 = 1.0 - std::pow(tc_.beta2, t_);
    auto& blocks = net_.params();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      auto& p = blocks[b];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double gi = static_cast<double>(p.grad[i]);
        m_[b][i] = static_cast<T>(tc_.beta1 * m_[b][i] + (1.0 - tc_.beta1) * gi);
        v_[b][i] = static_cast<T>(tc_.beta2 * v_[b][i] + (1.0 - tc_.beta2) * gi * gi);
        const double mhat = static_cast<double>(m_[b][i]) / c1;
        const double vhat = static_cast<double>(v_[b][i]) / c2;
        p.value[i] -= static_cast<T>(tc_.learning_rate * mhat / (std::sqrt(vhat) + tc_.epsilon));
      }
    }
  }

 private:
  Network<T>& net_;
  TrainConfig tc_;
  std::vector<std::vector<T>> m_, v_;
  long t_ = 0;
};

// Mean NLL of one batch with gradients reduced into the network's grad
// buffers in fixed chunk order, so results depend only on the thread count.
template <class T>
double batch_loss_and_grads(Network<T>& net, const std::vector<const T*>& xs,
                            const std::vector<int>& labels, int threads) {
  const int n = static_cast<int>(xs.size());
  threads = std::max(1, std::min(threads, n));
  std::vector<std::vector<std::vector<T>>> grads(static_cast<std::size_t>(threads));
  std::vector<double> losses(static_cast<std::size_t>(threads), 0.0);
  const T scale = T(1) / static_cast<T>(n);
  parallel_chunks(0, n, threads, [&](int chunk, int lo, int hi) {
    auto cache = net.make_cache();
    auto g = net.make_grad_blocks();
    double loss = 0.0;
    for (int s = lo; s < hi; ++s) {
      net.forward(xs[static_cast<std::size_t>(s)], cache);
      loss -= static_cast<double>(cache.logp[static_cast<std::size_t>(labels[static_cast<std::size_t>(s)])]);
      net.backward(xs[static_cast<std::size_t>(s)], labels[static_cast<std::size_t>(s)], scale, cache, g);
    }
    grads[static_cast<std::size_t>(chunk)] = std::move(g);
    losses[static_cast<std::size_t>(chunk)] = loss;
  });
  net.zero_grads();
  auto& blocks = net.params();
  double total = 0.0;
  for (int c = 0; c < threads; ++c) {
    total += losses[static_cast<std::size_t>(c)];
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      auto& dst = blocks[b].grad;
      const auto& src = grads[static_cast<std::size_t>(c)][b];
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  return total / n;
}

template <class T>
struct TrainResult {
  Network<T> net;
  std::vector<double> epoch_loss;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Adam training over labeled pixel features. Samples are shuffled each
// epoch from the run seed; with a fixed seed and thread count the result is
// a pure function of its inputs.
template <class T>
TrainResult<T> train(const std::vector<PixelFeature>& samples, const NetworkConfig& cfg,
                     const TrainConfig& tcfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  tcfg.validate();
  if (cfg.hist_width != kBins) {
    throw std::invalid_argument("pixel features are 201-bin histograms; hist_width must match");
  }
  std::size_t fg = 0, bg = 0;
  for (const auto& s : samples) (s.label == Label::Foreground ? fg : bg) += 1;
  if (fg == 0 || bg == 0) {
    throw std::invalid_argument("training needs at least one sample of each class");
  }

  TrainResult<T> result{Network<T>(cfg), {}};
  result.net.init(tcfg.seed);
  Adam<T> opt(result.net, tcfg);
  const int threads = tcfg.deterministic ? 1 : std::max(1, tcfg.threads);

  // features stay float32; the double instantiation widens per sample
  std::vector<std::vector<T>> converted;
  std::vector<const T*> ptrs(samples.size());
  std::vector<int> labels(samples.size());
  if constexpr (std::is_same_v<T, float>) {
    for (std::size_t i = 0; i < samples.size(); ++i) ptrs[i] = samples[i].flat();
  } else {
    converted.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      converted[i].assign(samples[i].flat(), samples[i].flat() + 3 * kBins);
      ptrs[i] = converted[i].data();
    }
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    labels[i] = samples[i].label == Label::Foreground ? 1 : 0;
  }

  Rng shuffle_rng(tcfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::uint32_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);

  for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tcfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
      std::vector<const T*> bx;
      std::vector<int> bl;
      bx.reserve(stop - start);
      bl.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        bx.push_back(ptrs[order[i]]);
        bl.push_back(labels[order[i]]);
      }
      const double loss = batch_loss_and_grads(result.net, bx, bl, threads);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("training aborted: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss * static_cast<double>(stop - start);
      seen += stop - start;
      opt.step();
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(seen));
    if (on_epoch) on_epoch(epoch, result.epoch_loss.back());
  }
  return result;
}

// Per-pixel argmax labeling of one frame; ties go to background.
LabelMask classify_frame(const FrameSequence& seq, int frame_index, const Network<float>& net,
                         const HistoryConfig& hcfg, int threads = 1);

// Model container: magic "ADNN", little-endian u32 version/arch/config
// fields, then the named float32 blocks.
void save_model(const Network<float>& net, const std::filesystem::path& path);
Network<float> load_model(const std::filesystem::path& path);

}  // namespace adnn
