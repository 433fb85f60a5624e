#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "adnn/net.hpp"
#include "support/fd_check.hpp"

namespace fs = std::filesystem;
using adnn::Arch;
using adnn::kBins;
using adnn::Label;
using adnn::Network;
using adnn::NetworkConfig;
using adnn::PixelFeature;
using adnn::TrainConfig;

namespace {

// random normalized per-channel histograms for a width-w network input
std::vector<double> random_input(adnn::Rng& rng, int width) {
  std::vector<double> x(static_cast<std::size_t>(3 * width));
  for (int c = 0; c < 3; ++c) {
    double s = 0.0;
    for (int j = 0; j < width; ++j) {
      const double v = rng.uniform();
      x[static_cast<std::size_t>(c * width + j)] = v;
      s += v;
    }
    for (int j = 0; j < width; ++j) x[static_cast<std::size_t>(c * width + j)] /= s;
  }
  return x;
}

PixelFeature delta_feature(int bin, Label label) {
  PixelFeature f;
  for (auto& ch : f.channels) ch = adnn::Histogram::delta(bin);
  f.label = label;
  return f;
}

NetworkConfig tiny_config(Arch arch, int depth = 1) {
  NetworkConfig cfg = arch == Arch::ADNN ? NetworkConfig::adnn_default() : NetworkConfig::cnn1_default();
  cfg.hist_width = 21;
  cfg.adl_filters = 1;
  cfg.adl_depth = depth;
  cfg.hidden_units = 6;
  cfg.bias_combine = true;
  cfg.bias_hidden = true;
  cfg.bias_output = true;
  return cfg;
}

std::vector<double> flatten_params(const Network<double>& net) {
  std::vector<double> theta;
  for (const auto& t : net.params()) theta.insert(theta.end(), t.value.begin(), t.value.end());
  return theta;
}

void load_params(Network<double>& net, const std::vector<double>& theta) {
  std::size_t off = 0;
  for (auto& t : net.params()) {
    std::copy(theta.begin() + static_cast<long>(off), theta.begin() + static_cast<long>(off + t.value.size()),
              t.value.begin());
    off += t.value.size();
  }
}

}  // namespace

TEST_CASE("parameter counts reproduce the published totals") {
  CHECK(Network<float>(NetworkConfig::cnn1_default()).param_count() == 405);
  CHECK(Network<float>(NetworkConfig::adnn_default()).param_count() == 106357);
  NetworkConfig bare = NetworkConfig::adnn_default();
  bare.bias_combine = bare.bias_hidden = bare.bias_output = false;
  CHECK(Network<float>(bare).param_count() == 106354);
}

TEST_CASE("forward rows are normalized and zero weights give log(0.5)") {
  for (Arch arch : {Arch::ADNN, Arch::CNN1}) {
    NetworkConfig cfg = tiny_config(arch);
    Network<double> zero(cfg);  // all-zero parameters
    auto cache = zero.make_cache();
    adnn::Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
      const auto x = random_input(rng, cfg.hist_width);
      zero.forward(x.data(), cache);
      CHECK(cache.logp[0] == doctest::Approx(std::log(0.5)));
      CHECK(cache.logp[1] == doctest::Approx(std::log(0.5)));
    }
    Network<double> net(cfg);
    net.init(7);
    for (int trial = 0; trial < 10; ++trial) {
      const auto x = random_input(rng, cfg.hist_width);
      net.forward(x.data(), cache);
      const double total = std::exp(cache.logp[0]) + std::exp(cache.logp[1]);
      CHECK(std::abs(total - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("log-softmax is invariant to shifting both logits") {
  NetworkConfig cfg = tiny_config(Arch::ADNN);
  Network<double> net(cfg);
  net.init(13);
  adnn::Rng rng(17);
  const auto x = random_input(rng, cfg.hist_width);
  auto cache = net.make_cache();
  net.forward(x.data(), cache);
  const auto base = cache.logp;
  auto& ob = net.block("out_b");
  for (auto& v : ob.value) v += 3.25;  // shifts both logits equally
  net.forward(x.data(), cache);
  CHECK(cache.logp[0] == doctest::Approx(base[0]).epsilon(1e-12));
  CHECK(cache.logp[1] == doctest::Approx(base[1]).epsilon(1e-12));
}

TEST_CASE("full-network gradients match finite differences") {
  adnn::Rng rng(23);
  struct Case {
    Arch arch;
    int depth;
  };
  for (const Case tc : {Case{Arch::ADNN, 1}, Case{Arch::ADNN, 2}, Case{Arch::CNN1, 1}}) {
    NetworkConfig cfg = tiny_config(tc.arch, tc.depth);
    Network<double> net(cfg);
    net.init(29);

    std::vector<std::vector<double>> batch;
    std::vector<const double*> xs;
    std::vector<int> labels{0, 1, 1, 0};
    for (int s = 0; s < 4; ++s) batch.push_back(random_input(rng, cfg.hist_width));
    for (const auto& b : batch) xs.push_back(b.data());

    adnn::batch_loss_and_grads(net, xs, labels, 1);
    std::vector<double> analytic;
    for (const auto& t : net.params()) analytic.insert(analytic.end(), t.grad.begin(), t.grad.end());

    const auto theta0 = flatten_params(net);
    auto loss_at = [&](const std::vector<double>& theta) {
      Network<double> probe(cfg);
      load_params(probe, theta);
      auto cache = probe.make_cache();
      double loss = 0.0;
      for (std::size_t s = 0; s < xs.size(); ++s) {
        probe.forward(xs[s], cache);
        loss -= cache.logp[static_cast<std::size_t>(labels[s])];
      }
      return loss / static_cast<double>(xs.size());
    };
    const auto fd = oracle::fd_gradient(theta0, loss_at);
    CHECK(oracle::max_rel_err(analytic, fd) <= 1e-3);
  }
}

TEST_CASE("batch gradients are the mean of per-sample gradients") {
  NetworkConfig cfg = tiny_config(Arch::ADNN);
  Network<double> net(cfg);
  net.init(31);
  adnn::Rng rng(37);
  const auto a = random_input(rng, cfg.hist_width);
  const auto b = random_input(rng, cfg.hist_width);

  auto grads_of = [&](std::vector<const double*> xs, std::vector<int> ls) {
    adnn::batch_loss_and_grads(net, xs, ls, 1);
    std::vector<double> g;
    for (const auto& t : net.params()) g.insert(g.end(), t.grad.begin(), t.grad.end());
    return g;
  };

  const auto ga = grads_of({a.data()}, {1});
  const auto gb = grads_of({b.data()}, {0});
  const auto gab = grads_of({a.data(), b.data()}, {1, 0});
  const auto gaa = grads_of({a.data(), a.data()}, {1, 1});
  for (std::size_t i = 0; i < ga.size(); ++i) {
    CHECK(gab[i] == doctest::Approx(0.5 * (ga[i] + gb[i])).epsilon(1e-12));
    CHECK(gaa[i] == doctest::Approx(ga[i]).epsilon(1e-12));
  }
}

TEST_CASE("positive loss implies some nonzero gradient") {
  NetworkConfig cfg = tiny_config(Arch::ADNN);
  Network<double> net(cfg);
  net.init(41);
  adnn::Rng rng(43);
  const auto x = random_input(rng, cfg.hist_width);
  const double loss = adnn::batch_loss_and_grads<double>(net, {x.data()}, {1}, 1);
  CHECK(loss > 0.0);
  double norm = 0.0;
  for (const auto& t : net.params()) {
    for (double g : t.grad) norm += g * g;
  }
  CHECK(norm > 0.0);
}

TEST_CASE("training separates delta histograms and is deterministic") {
  std::vector<PixelFeature> samples;
  for (int i = 0; i < 20; ++i) {
    samples.push_back(delta_feature(60, Label::Foreground));
    samples.push_back(delta_feature(140, Label::Background));
  }
  NetworkConfig cfg = NetworkConfig::adnn_default();
  cfg.hidden_units = 32;
  TrainConfig tcfg;
  tcfg.learning_rate = 1e-2;
  tcfg.max_epochs = 60;
  tcfg.batch_size = 8;
  tcfg.seed = 7;
  tcfg.deterministic = true;

  const auto run1 = adnn::train<float>(samples, cfg, tcfg);
  CHECK(run1.epoch_loss.size() == 60);
  CHECK(run1.epoch_loss.back() < 0.05);
  CHECK(run1.epoch_loss.back() < run1.epoch_loss.front());

  const auto run2 = adnn::train<float>(samples, cfg, tcfg);
  for (std::size_t b = 0; b < run1.net.params().size(); ++b) {
    CHECK(run1.net.params()[b].value == run2.net.params()[b].value);
  }

  // a zero learning rate leaves the initialization untouched
  TrainConfig frozen = tcfg;
  frozen.learning_rate = 0.0;
  frozen.max_epochs = 3;
  const auto still = adnn::train<float>(samples, cfg, frozen);
  Network<float> reference(cfg);
  reference.init(frozen.seed);
  for (std::size_t b = 0; b < still.net.params().size(); ++b) {
    CHECK(still.net.params()[b].value == reference.params()[b].value);
  }
}

TEST_CASE("training rejects single-class input and non-finite losses") {
  std::vector<PixelFeature> only_bg(10, delta_feature(100, Label::Background));
  CHECK_THROWS_AS(adnn::train<float>(only_bg, NetworkConfig::adnn_default(), TrainConfig{}),
                  std::invalid_argument);

  PixelFeature poisoned = delta_feature(60, Label::Foreground);
  poisoned.channels[0].mass[0] = std::numeric_limits<float>::infinity();
  std::vector<PixelFeature> samples{poisoned, delta_feature(140, Label::Background)};
  NetworkConfig cfg = tiny_config(Arch::ADNN);
  cfg.hist_width = kBins;  // pipeline width required by train()
  TrainConfig tcfg;
  tcfg.max_epochs = 2;
  tcfg.batch_size = 2;
  CHECK_THROWS_AS(adnn::train<float>(samples, cfg, tcfg), std::runtime_error);
}

TEST_CASE("model files round-trip and reject corruption") {
  const fs::path dir = fs::temp_directory_path() / "adnn_model_test";
  fs::create_directories(dir);
  const fs::path path = dir / "model.adnn";

  NetworkConfig cfg = NetworkConfig::adnn_default();
  cfg.hidden_units = 8;
  Network<float> net(cfg);
  net.init(99);
  adnn::save_model(net, path);
  const Network<float> back = adnn::load_model(path);
  CHECK(back.config().hidden_units == 8);
  REQUIRE(back.params().size() == net.params().size());
  for (std::size_t b = 0; b < net.params().size(); ++b) {
    CHECK(back.params()[b].name == net.params()[b].name);
    CHECK(back.params()[b].value == net.params()[b].value);
  }

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("JUNK", 4);
  }
  CHECK_THROWS_WITH_AS(adnn::load_model(path), doctest::Contains("not a model file"), std::runtime_error);

  adnn::save_model(net, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const std::uint32_t bad = 999;
    f.write(reinterpret_cast<const char*>(&bad), 4);
  }
  CHECK_THROWS_WITH_AS(adnn::load_model(path), doctest::Contains("unsupported version"), std::runtime_error);

  // truncation
  adnn::save_model(net, path);
  fs::resize_file(path, fs::file_size(path) / 2);
  CHECK_THROWS_AS(adnn::load_model(path), std::runtime_error);

  fs::remove_all(dir);
}
