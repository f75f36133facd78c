#include <doctest.h>

#include <random>

#include "damagekit/error.hpp"
#include "damagekit/eval.hpp"
#include "oracles.hpp"

using namespace damagekit;
using namespace damagekit::eval;

namespace {

Instance gt(BinaryMask m, ClassLabel l = ClassLabel::Damage) { return make_ground_truth(l, std::move(m)); }
Instance pr(BinaryMask m, double c, ClassLabel l = ClassLabel::Damage) { return make_prediction(l, std::move(m), c); }

EvalPair pair_of(std::string id, Size size, std::vector<Instance> truth, std::vector<Instance> preds) {
  return {std::move(id), std::move(truth), {"", size, tile::Frame::full(), std::move(preds)}};
}

std::vector<Instance> random_instances(std::mt19937_64& rng, int w, int h, bool predictions) {
  std::uniform_int_distribution<int> count(0, 5), px(0, w - 1), py(0, h - 1), side(1, std::max(2, w / 3));
  std::uniform_int_distribution<int> cls(0, 3);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  std::vector<Instance> out;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    auto m = oracle::rect_mask(w, h, px(rng), py(rng), side(rng), side(rng));
    const ClassLabel label = cls(rng) == 0 ? ClassLabel::Dirt : ClassLabel::Damage;
    out.push_back(predictions ? pr(m, std::round(conf(rng) * 20) / 20, label) : gt(m, label));
  }
  return out;
}

}  // namespace

TEST_CASE("worked example: precision 2/3, recall 3/4") {
  const Size s{40, 10};
  std::vector<Instance> truth{gt(oracle::rect_mask(40, 10, 0, 0, 4, 4)), gt(oracle::rect_mask(40, 10, 10, 0, 4, 4)),
                              gt(oracle::rect_mask(40, 10, 20, 0, 4, 4)), gt(oracle::rect_mask(40, 10, 30, 0, 4, 4))};
  // Prediction 0 touches truths 0 and 1; prediction 1 touches truth 2; prediction 2 touches nothing.
  std::vector<Instance> preds{pr(oracle::rect_mask(40, 10, 2, 0, 10, 2), 0.9),
                              pr(oracle::rect_mask(40, 10, 21, 1, 2, 2), 0.8),
                              pr(oracle::rect_mask(40, 10, 0, 7, 3, 3), 0.7)};
  const auto r = precision_recall({pair_of("a", s, truth, preds)}, 0.0);
  CHECK(*r.precision == 2.0 / 3.0);
  CHECK(*r.recall == 0.75);
  CHECK(r.matched_predictions == 2);
  CHECK(r.detected_ground_truths == 3);
}

TEST_CASE("worked example: aggregate IoU is 50/150, not the per-image mean") {
  // Image A: truth 75 px, prediction 75 px sharing 50 -> intersection 50, union 100.
  const auto a_gt = oracle::rect_mask(20, 20, 0, 0, 15, 5);
  const auto a_pr = oracle::rect_mask(20, 20, 5, 0, 15, 5);
  // Image B: truth 50 px, no prediction -> intersection 0, union 50.
  const auto b_gt = oracle::rect_mask(20, 20, 0, 0, 10, 5);
  const std::vector<EvalPair> pairs{pair_of("A", {20, 20}, {gt(a_gt)}, {pr(a_pr, 1.0)}),
                                    pair_of("B", {20, 20}, {gt(b_gt)}, {})};
  const auto totals = aggregate_iou_totals(pairs, 0.0);
  CHECK(totals.intersection == 50);
  CHECK(totals.union_area == 150);
  CHECK(*aggregate_iou(pairs, 0.0) == 50.0 / 150.0);
}

TEST_CASE("identity predictions give 1.0 everywhere") {
  std::vector<Instance> truth{gt(oracle::rect_mask(30, 30, 1, 1, 5, 5)), gt(oracle::rect_mask(30, 30, 10, 10, 8, 3))};
  std::vector<Instance> preds;
  for (const auto& t : truth) preds.push_back(pr(t.mask, 0.9));
  const std::vector<EvalPair> pairs{pair_of("a", {30, 30}, truth, preds)};
  const auto r = precision_recall(pairs, 0.5);
  CHECK(*r.precision == 1.0);
  CHECK(*r.recall == 1.0);
  CHECK(*aggregate_iou(pairs, 0.5) == 1.0);
}

TEST_CASE("undefined metrics are markers, not numbers") {
  const std::vector<EvalPair> none{pair_of("a", {10, 10}, {}, {})};
  const auto r = precision_recall(none, 0.0);
  CHECK_FALSE(r.precision.has_value());
  CHECK_FALSE(r.recall.has_value());
  CHECK_FALSE(aggregate_iou(none, 0.0).has_value());
  const std::vector<EvalPair> only_gt{pair_of("a", {10, 10}, {gt(oracle::rect_mask(10, 10, 0, 0, 2, 2))},
                                              {pr(oracle::rect_mask(10, 10, 0, 0, 2, 2), 0.3)})};
  const auto high = precision_recall(only_gt, 0.5);
  CHECK_FALSE(high.precision.has_value());
  CHECK(*high.recall == 0.0);
  CHECK(*aggregate_iou(only_gt, 0.5) == 0.0);
}

TEST_CASE("class filter and same-class matching") {
  const auto m = oracle::rect_mask(10, 10, 0, 0, 4, 4);
  const std::vector<EvalPair> pairs{pair_of("a", {10, 10}, {gt(m, ClassLabel::Damage)}, {pr(m, 0.9, ClassLabel::Dirt)})};
  // Default filter (damage): the dirt prediction is ignored.
  const auto d = precision_recall(pairs, 0.0);
  CHECK_FALSE(d.precision.has_value());
  CHECK(*d.recall == 0.0);
  // All classes: the dirt prediction still cannot validate damage.
  const auto all = precision_recall(pairs, 0.0, std::nullopt);
  CHECK(*all.precision == 0.0);
  CHECK(*all.recall == 0.0);
}

TEST_CASE("dimension mismatch inside a pair is rejected") {
  const std::vector<EvalPair> bad{pair_of("a", {10, 10}, {gt(oracle::rect_mask(10, 10, 0, 0, 2, 2))},
                                          {pr(oracle::rect_mask(12, 10, 0, 0, 2, 2), 0.5)})};
  CHECK_THROWS_AS(precision_recall(bad, 0.0), Error);
  CHECK_THROWS_AS(aggregate_iou(bad, 0.0), Error);
}

TEST_CASE("metrics equal brute-force enumeration on random fixtures") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(4, 48);
  std::uniform_real_distribution<double> thr(0.0, 1.0);
  for (int trial = 0; trial < 150; ++trial) {
    std::vector<EvalPair> pairs;
    const int n_images = 1 + trial % 3;
    for (int i = 0; i < n_images; ++i) {
      const int w = dim(rng), h = dim(rng);
      pairs.push_back(pair_of(std::to_string(i), {w, h}, random_instances(rng, w, h, false),
                              random_instances(rng, w, h, true)));
    }
    const double t = std::round(thr(rng) * 20) / 20;
    for (const ClassFilter f : {ClassFilter{ClassLabel::Damage}, ClassFilter{ClassLabel::Dirt}, ClassFilter{}}) {
      oracle::PrCounts c;
      std::size_t inter = 0, uni = 0;
      for (const auto& p : pairs) {
        oracle::count_pr(p.ground_truth, p.predictions.instances, t, f, c);
        const auto [i, u] = oracle::count_iou(p.ground_truth, p.predictions.instances, p.predictions.size.width,
                                              p.predictions.size.height, t, f);
        inter += i;
        uni += u;
      }
      const auto r = precision_recall(pairs, t, f);
      CHECK(r.kept_predictions == c.kept);
      CHECK(r.matched_predictions == c.matched);
      CHECK(r.ground_truths == c.truths);
      CHECK(r.detected_ground_truths == c.detected);
      const auto totals = aggregate_iou_totals(pairs, t, f);
      CHECK(totals.intersection == inter);
      CHECK(totals.union_area == uni);
    }
  }
}

TEST_CASE("sweep: singleton equals direct calls; recall never rises with threshold") {
  std::mt19937_64 rng(6);
  std::vector<EvalPair> pairs;
  for (int i = 0; i < 4; ++i)
    pairs.push_back(pair_of(std::to_string(i), {40, 40}, random_instances(rng, 40, 40, false),
                            random_instances(rng, 40, 40, true)));
  const auto one = sweep(pairs, {0.0});
  CHECK(one.rows.at(0).pr.precision == precision_recall(pairs, 0.0).precision);
  CHECK(one.rows.at(0).iou.iou() == aggregate_iou(pairs, 0.0));

  const auto full = sweep(pairs, default_thresholds(), std::nullopt);
  REQUIRE(full.rows.size() == 101);
  for (std::size_t i = 1; i < full.rows.size(); ++i) {
    CHECK(full.rows[i].pr.detected_ground_truths <= full.rows[i - 1].pr.detected_ground_truths);
    CHECK(full.rows[i].pr.recall.value_or(0) <= full.rows[i - 1].pr.recall.value_or(0));
    const auto iou = full.rows[i].iou.iou();
    if (iou) CHECK((*iou >= 0.0 && *iou <= 1.0));
  }
  const std::vector<double> five{0.0, 0.25, 0.5, 0.75, 1.0};
  const auto s5 = sweep(pairs, five, std::nullopt);
  for (std::size_t i = 0; i < five.size(); ++i) {
    const auto direct = precision_recall(pairs, five[i], std::nullopt);
    CHECK(s5.rows[i].pr.precision == direct.precision);
    CHECK(s5.rows[i].pr.recall == direct.recall);
    CHECK(s5.rows[i].iou.iou() == aggregate_iou(pairs, five[i], std::nullopt));
  }
  CHECK_THROWS_AS(sweep(pairs, {}), Error);
  CHECK_THROWS_AS(sweep(pairs, {0.5, 0.5}), Error);
  CHECK_THROWS_AS(sweep(pairs, {0.2, 0.1}), Error);
  CHECK_THROWS_AS(sweep(pairs, {1.5}), Error);
}

TEST_CASE("sweep CSV leaves undefined values empty") {
  const std::vector<EvalPair> pairs{pair_of("a", {10, 10}, {gt(oracle::rect_mask(10, 10, 0, 0, 2, 2))},
                                            {pr(oracle::rect_mask(10, 10, 0, 0, 2, 2), 0.3)})};
  const auto csv = sweep_to_csv(sweep(pairs, {0.0, 0.5}));
  CHECK(csv == "threshold,precision,recall,aggregate_iou\n0,1,1,1\n0.5,,0,0\n");
}

TEST_CASE("measure_area: scale squared, zero for empty, resolution invariant") {
  const ReferenceScale s(200.0, 400.0);
  CHECK(s.units_per_pixel() == 0.5);
  BinaryMask m(100, 100);
  for (int i = 0; i < 1000; ++i) m.set(i % 100, i / 100);
  const auto a = measure_area(gt(m), s);
  CHECK(a.area == 250.0);
  CHECK(a.pixels == 1000);
  CHECK(a.assumes_fronto_parallel);
  CHECK(measure_area(Instance{ClassLabel::Damage, BinaryMask(10, 10), std::nullopt}, s).area == 0.0);
  const auto doubled = measure_area(gt(resize_nearest(m, {200, 200})), ReferenceScale(200.0, 800.0));
  CHECK(doubled.area == doctest::Approx(a.area));
  CHECK_THROWS_AS(ReferenceScale(0.0, 10.0), Error);
  CHECK_THROWS_AS(ReferenceScale(10.0, -1.0), Error);
}

TEST_CASE("overlay colours hits green, misses red and false positives yellow") {
  RasterImage img(10, 4, 3, 0);
  const auto truth = oracle::rect_mask(10, 4, 0, 0, 4, 4);
  const auto pred = oracle::rect_mask(10, 4, 2, 0, 6, 4);
  const auto out = render_overlay(img, pair_of("a", {10, 4}, {gt(truth)}, {pr(pred, 0.9)}), 0.0);
  CHECK(out.at(0, 0, 0) > 0);
  CHECK(out.at(0, 0, 1) == 0);  // missed: red
  CHECK(out.at(3, 0, 1) > 0);
  CHECK(out.at(3, 0, 0) == 0);  // hit: green
  CHECK(out.at(6, 0, 0) > 0);
  CHECK(out.at(6, 0, 1) > 0);  // false positive: yellow
  CHECK(out.at(9, 0, 0) == 0);
}
