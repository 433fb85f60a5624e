#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "adnn/refine.hpp"
#include "adnn/rng.hpp"

using adnn::ApproxShape;
using adnn::ImageF;
using adnn::Label;
using adnn::LabelMask;
using adnn::RefineConfig;

namespace {

LabelMask random_mask(int w, int h, adnn::Rng& rng, double fg_prob) {
  LabelMask m(w, h);
  for (auto& l : m.labels) l = rng.uniform() < fg_prob ? Label::Foreground : Label::Background;
  return m;
}

ImageF gradient_frame(int w, int h) {
  ImageF im = ImageF::solid(w, h, 0.0f, 0.0f, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      im.at(x, y, 0) = 0.2f + 0.6f * static_cast<float>(x) / w;
      im.at(x, y, 1) = 0.5f;
      im.at(x, y, 2) = 0.2f + 0.6f * static_cast<float>(y) / h;
    }
  }
  return im;
}

}  // namespace

TEST_CASE("sRGB to Lab conversion hits the reference values") {
  const auto white = adnn::rgb_to_lab(1.0, 1.0, 1.0);
  CHECK(white[0] == doctest::Approx(100.0).epsilon(1e-4));
  CHECK(std::abs(white[1]) <= 0.01);
  CHECK(std::abs(white[2]) <= 0.01);

  const auto black = adnn::rgb_to_lab(0.0, 0.0, 0.0);
  CHECK(std::abs(black[0]) <= 0.01);
  CHECK(std::abs(black[1]) <= 0.01);
  CHECK(std::abs(black[2]) <= 0.01);

  // frozen from an independently written reference converter
  const auto gray = adnn::rgb_to_lab(0.5, 0.5, 0.5);
  CHECK(gray[0] == doctest::Approx(53.38897).epsilon(1e-5));
  CHECK(std::abs(gray[1]) <= 1e-4);
  CHECK(std::abs(gray[2]) <= 1e-4);

  const auto red = adnn::rgb_to_lab(1.0, 0.0, 0.0);
  CHECK(red[0] == doctest::Approx(53.24079).epsilon(1e-5));
  CHECK(red[1] == doctest::Approx(80.09246).epsilon(1e-5));
  CHECK(red[2] == doctest::Approx(67.20320).epsilon(1e-5));
}

TEST_CASE("gaussian approximation shapes") {
  CHECK(adnn::gaussian_approx(3.0, 3.0, 1.0, 2.0, ApproxShape::SymmetricTriangle) == 1.0);
  CHECK(adnn::gaussian_approx(3.0, 3.0, 1.0, 2.0, ApproxShape::AsWrittenEq11) == 1.0);
  // symmetric triangle hits zero at both edges of the support
  CHECK(adnn::gaussian_approx(5.0, 3.0, 1.0, 2.0, ApproxShape::SymmetricTriangle) == 0.0);
  CHECK(adnn::gaussian_approx(1.0, 3.0, 1.0, 2.0, ApproxShape::SymmetricTriangle) == 0.0);
  // the printed form is asymmetric: 2 at one edge, 0 at the other
  CHECK(adnn::gaussian_approx(5.0, 3.0, 1.0, 2.0, ApproxShape::AsWrittenEq11) == 2.0);
  CHECK(adnn::gaussian_approx(1.0, 3.0, 1.0, 2.0, ApproxShape::AsWrittenEq11) == 0.0);
  // outside the support both vanish
  CHECK(adnn::gaussian_approx(5.1, 3.0, 1.0, 2.0, ApproxShape::AsWrittenEq11) == 0.0);
  // zero sigma degenerates to exact match
  CHECK(adnn::gaussian_approx(3.0, 3.0, 0.0, 2.0, ApproxShape::SymmetricTriangle) == 1.0);
  CHECK(adnn::gaussian_approx(3.0001, 3.0, 0.0, 2.0, ApproxShape::SymmetricTriangle) == 0.0);
}

TEST_CASE("constant masks are fixed points") {
  const ImageF frame = gradient_frame(12, 10);
  const LabelMask all_bg(12, 10, Label::Background);
  RefineConfig cfg;
  const auto one = adnn::refine_step(frame, all_bg, cfg);
  CHECK(one.labels == all_bg.labels);
  const auto many = adnn::refine(frame, all_bg, cfg);
  CHECK(many.labels == all_bg.labels);

  const LabelMask all_fg(12, 10, Label::Foreground);
  CHECK(adnn::refine(frame, all_fg, cfg).labels == all_fg.labels);
}

TEST_CASE("an isolated pixel on a uniform frame flips in one step") {
  const ImageF frame = ImageF::solid(11, 11, 0.4f, 0.4f, 0.4f);
  LabelMask mask(11, 11, Label::Background);
  mask.at(5, 5) = Label::Foreground;
  RefineConfig cfg;  // radius 4: the 9x9 window sees one foreground pixel
  const auto out = adnn::refine_step(frame, mask, cfg);
  CHECK(out.at(5, 5) == Label::Background);
  for (const auto& l : out.labels) CHECK(l == Label::Background);
}

TEST_CASE("refine output stays binary with matching dimensions") {
  adnn::Rng rng(15);
  const ImageF frame = gradient_frame(20, 14);
  const auto mask = random_mask(20, 14, rng, 0.3);
  RefineConfig cfg;
  cfg.iterations = 5;
  const auto out = adnn::refine(frame, mask, cfg);
  CHECK(out.width == 20);
  CHECK(out.height == 14);
  for (const auto& l : out.labels) CHECK(l != Label::Ignore);
}

TEST_CASE("one iteration equals a single step and reruns are deterministic") {
  adnn::Rng rng(16);
  const ImageF frame = gradient_frame(16, 16);
  const auto mask = random_mask(16, 16, rng, 0.4);
  RefineConfig cfg;
  cfg.iterations = 1;
  CHECK(adnn::refine(frame, mask, cfg).labels == adnn::refine_step(frame, mask, cfg).labels);
  cfg.iterations = 7;
  const auto a = adnn::refine(frame, mask, cfg);
  const auto b = adnn::refine(frame, mask, cfg);
  CHECK(a.labels == b.labels);
  // schedule independence
  const auto c = adnn::refine(frame, mask, cfg, 4);
  CHECK(c.labels == a.labels);
}

TEST_CASE("label swap symmetry") {
  adnn::Rng rng(17);
  const ImageF frame = gradient_frame(18, 12);
  const auto mask = random_mask(18, 12, rng, 0.35);
  LabelMask flipped = mask;
  for (auto& l : flipped.labels) {
    l = l == Label::Foreground ? Label::Background : Label::Foreground;
  }
  RefineConfig cfg;
  cfg.iterations = 3;
  const auto out = adnn::refine(frame, mask, cfg);
  const auto out_flipped = adnn::refine(frame, flipped, cfg);
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    const Label expect =
        out.labels[i] == Label::Foreground ? Label::Background : Label::Foreground;
    CHECK(out_flipped.labels[i] == expect);
  }
}

TEST_CASE("translation equivariance away from borders") {
  const int w = 24, h = 20, dx = 3, dy = 2;
  adnn::Rng rng(18);
  // content defined on an extended canvas so both crops see the same scene
  ImageF big = ImageF::solid(w + dx, h + dy, 0.0f, 0.0f, 0.0f);
  for (int y = 0; y < h + dy; ++y) {
    for (int x = 0; x < w + dx; ++x) {
      for (int c = 0; c < 3; ++c) big.at(x, y, c) = static_cast<float>(rng.uniform(0.2, 0.8));
    }
  }
  LabelMask big_mask(w + dx, h + dy);
  for (auto& l : big_mask.labels) l = rng.uniform() < 0.4 ? Label::Foreground : Label::Background;

  auto crop_frame = [&](int ox, int oy) {
    ImageF im = ImageF::solid(w, h, 0, 0, 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) im.at(x, y, c) = big.at(x + ox, y + oy, c);
      }
    }
    return im;
  };
  auto crop_mask = [&](int ox, int oy) {
    LabelMask m(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) m.at(x, y) = big_mask.at(x + ox, y + oy);
    }
    return m;
  };

  RefineConfig cfg;
  const auto out_a = adnn::refine_step(crop_frame(0, 0), crop_mask(0, 0), cfg);
  const auto out_b = adnn::refine_step(crop_frame(dx, dy), crop_mask(dx, dy), cfg);
  const int r = cfg.radius;
  for (int y = r; y < h - r - dy; ++y) {
    for (int x = r; x < w - r - dx; ++x) {
      CHECK(out_a.at(x + dx, y + dy) == out_b.at(x, y));
    }
  }
}

TEST_CASE("invalid inputs are rejected") {
  const ImageF frame = gradient_frame(8, 8);
  LabelMask wrong(7, 8);
  RefineConfig cfg;
  CHECK_THROWS_AS(adnn::refine_step(frame, wrong, cfg), std::invalid_argument);
  LabelMask with_ignore(8, 8);
  with_ignore.at(2, 2) = Label::Ignore;
  CHECK_THROWS_AS(adnn::refine_step(frame, with_ignore, cfg), std::invalid_argument);
  RefineConfig bad;
  bad.radius = 0;
  CHECK_THROWS_AS(adnn::refine_step(frame, LabelMask(8, 8), bad), std::invalid_argument);
}
