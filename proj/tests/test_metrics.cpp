#include <doctest.h>

#include <algorithm>

#include "adnn/metrics.hpp"
#include "adnn/rng.hpp"

using adnn::Confusion;
using adnn::Label;
using adnn::LabelMask;

TEST_CASE("confusion counting") {
  SUBCASE("perfect prediction") {
    LabelMask gt(4, 4, Label::Background);
    gt.at(1, 1) = Label::Foreground;
    const auto c = adnn::confusion(gt, gt);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
    CHECK(c.tp == 1);
    CHECK(c.tn == 15);
  }

  SUBCASE("all-ignore ground truth counts nothing") {
    const LabelMask pred(3, 3, Label::Background);
    const LabelMask gt(3, 3, Label::Ignore);
    const auto c = adnn::confusion(pred, gt);
    CHECK(c.tp + c.fp + c.fn + c.tn == 0);
  }

  SUBCASE("hand-built 3x3 case") {
    // gt:  F F B    pred: F B F
    //      B B B          B B B
    //      F B B          B F B
    LabelMask gt(3, 3, Label::Background);
    gt.at(0, 0) = gt.at(1, 0) = gt.at(0, 2) = Label::Foreground;
    LabelMask pred(3, 3, Label::Background);
    pred.at(0, 0) = pred.at(2, 0) = pred.at(1, 2) = Label::Foreground;
    const auto c = adnn::confusion(pred, gt);
    CHECK(c.tp == 1);
    CHECK(c.fp == 2);
    CHECK(c.fn == 2);
    CHECK(c.tn == 4);
  }

  SUBCASE("ignored pixels never influence counts") {
    adnn::Rng rng(3);
    LabelMask gt(8, 8, Label::Background);
    LabelMask pred(8, 8, Label::Background);
    for (std::size_t i = 0; i < gt.labels.size(); ++i) {
      const double u = rng.uniform();
      gt.labels[i] = u < 0.3 ? Label::Foreground : (u < 0.6 ? Label::Ignore : Label::Background);
      pred.labels[i] = rng.uniform() < 0.5 ? Label::Foreground : Label::Background;
    }
    const auto base = adnn::confusion(pred, gt);
    auto flipped = pred;
    for (std::size_t i = 0; i < gt.labels.size(); ++i) {
      if (gt.labels[i] == Label::Ignore) {
        flipped.labels[i] =
            flipped.labels[i] == Label::Foreground ? Label::Background : Label::Foreground;
      }
    }
    const auto same = adnn::confusion(flipped, gt);
    CHECK(same.tp == base.tp);
    CHECK(same.fp == base.fp);
    CHECK(same.fn == base.fn);
    CHECK(same.tn == base.tn);
    const std::uint64_t evaluated =
        static_cast<std::uint64_t>(std::count_if(gt.labels.begin(), gt.labels.end(),
                                                 [](Label l) { return l != Label::Ignore; }));
    CHECK(base.tp + base.fp + base.fn + base.tn == evaluated);
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(adnn::confusion(LabelMask(2, 2), LabelMask(3, 2)), std::invalid_argument);
    LabelMask pred(2, 2, Label::Background);
    pred.at(0, 0) = Label::Ignore;
    CHECK_THROWS_AS(adnn::confusion(pred, LabelMask(2, 2)), std::invalid_argument);
  }
}

TEST_CASE("recall, precision, f-measure") {
  const auto m = adnn::re_pr_fm({8, 2, 2, 0});
  CHECK(m.re == doctest::Approx(0.8));
  CHECK(m.pr == doctest::Approx(0.8));
  CHECK(m.fm == doctest::Approx(0.8));

  const auto zero = adnn::re_pr_fm({0, 0, 0, 5});
  CHECK(zero.re == 0.0);
  CHECK(zero.pr == 0.0);
  CHECK(zero.fm == 0.0);

  // counts chosen so Re and Pr are exactly the published highway pair
  const Confusion highway{27839097, 4170903, 1150903, 0};
  const auto hm = adnn::re_pr_fm(highway);
  CHECK(hm.re == doctest::Approx(0.9603).epsilon(1e-12));
  CHECK(hm.pr == doctest::Approx(0.8697).epsilon(1e-12));
  CHECK(hm.fm == doctest::Approx(0.9127).epsilon(1.1e-4));

  // harmonic mean lies between precision and recall
  adnn::Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    const Confusion c{rng.next_u64() % 100 + 1, rng.next_u64() % 100, rng.next_u64() % 100, 0};
    const auto r = adnn::re_pr_fm(c);
    if (r.pr > 0.0 && r.re > 0.0) {
      CHECK(r.fm >= std::min(r.pr, r.re) - 1e-12);
      CHECK(r.fm <= std::max(r.pr, r.re) + 1e-12);
    }
  }
}

TEST_CASE("aggregation averages per-video metrics") {
  const Confusion a{1, 0, 0, 10};                 // fm 1.0
  const Confusion b{1, 1, 1, 10};                 // fm 0.5
  const auto single = adnn::aggregate({{"only", a}});
  CHECK(single.overall.fm == doctest::Approx(1.0));

  const auto joint = adnn::aggregate({{"a", a}, {"b", b}});
  CHECK(joint.overall.fm == doctest::Approx(0.75));
  // pooled counts would give 2/(2 + 0.5*(1+1)) = 2/3: the mean must win
  Confusion pooled = a;
  pooled += b;
  CHECK(adnn::re_pr_fm(pooled).fm == doctest::Approx(2.0 / 3.0));
  CHECK(joint.overall.fm != doctest::Approx(2.0 / 3.0));

  const Confusion fm08{8, 2, 2, 0};
  const Confusion fm06{6, 4, 4, 0};
  const auto avg = adnn::aggregate({{"x", fm08}, {"y", fm06}});
  CHECK(avg.overall.fm == doctest::Approx(0.7));

  CHECK_THROWS_AS(adnn::aggregate({}), std::invalid_argument);
}

TEST_CASE("csv report format is stable") {
  const auto report = adnn::aggregate({{"video1", {8, 2, 2, 0}}});
  const auto csv = adnn::to_csv(report);
  CHECK(csv ==
        "video,Re,Pr,Fm\n"
        "video1,0.800000,0.800000,0.800000\n"
        "Overall,0.800000,0.800000,0.800000\n");
}
