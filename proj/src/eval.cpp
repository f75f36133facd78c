#include "damagekit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "damagekit/error.hpp"
#include "damagekit/json_codec.hpp"

namespace damagekit::eval {

namespace {

bool selected(const Instance& inst, const ClassFilter& filter) {
  return !filter || inst.label == *filter;
}

void require_threshold(double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::OutOfRange, "threshold must lie in [0, 1]");
  }
}

void require_consistent(const EvalPair& pair) {
  const Size size = pair.predictions.size;
  if (!pair.predictions.frame.is_full()) {
    throw Error(ErrorKind::DimensionMismatch, pair.image_id + ": predictions must be in the full-image frame");
  }
  for (const auto& gt : pair.ground_truth) {
    if (gt.mask.size() != size) {
      throw Error(ErrorKind::DimensionMismatch, pair.image_id + ": ground-truth mask size differs from predictions");
    }
    if (gt.confidence) {
      throw Error(ErrorKind::OutOfRange, pair.image_id + ": ground truth must not carry a confidence");
    }
  }
  for (const auto& p : pair.predictions.instances) {
    if (p.mask.size() != size) {
      throw Error(ErrorKind::DimensionMismatch, pair.image_id + ": prediction mask size differs from frame");
    }
  }
}

double confidence_of(const Instance& p) { return p.confidence.value_or(1.0); }

Metric ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

PrecisionRecall precision_recall(const std::vector<EvalPair>& pairs, double threshold, ClassFilter filter) {
  require_threshold(threshold);
  PrecisionRecall out;
  for (const auto& pair : pairs) {
    require_consistent(pair);
    std::vector<const Instance*> kept;
    for (const auto& p : pair.predictions.instances) {
      if (selected(p, filter) && confidence_of(p) >= threshold) kept.push_back(&p);
    }
    std::vector<const Instance*> truths;
    for (const auto& g : pair.ground_truth) {
      if (selected(g, filter)) truths.push_back(&g);
    }
    std::vector<bool> detected(truths.size(), false);
    for (const Instance* p : kept) {
      bool matched = false;
      for (std::size_t g = 0; g < truths.size(); ++g) {
        if (truths[g]->label == p->label && masks_intersect(p->mask, truths[g]->mask)) {
          matched = true;
          detected[g] = true;
        }
      }
      out.matched_predictions += matched ? 1 : 0;
    }
    out.kept_predictions += kept.size();
    out.ground_truths += truths.size();
    out.detected_ground_truths += static_cast<std::size_t>(std::count(detected.begin(), detected.end(), true));
  }
  out.precision = ratio(out.matched_predictions, out.kept_predictions);
  out.recall = ratio(out.detected_ground_truths, out.ground_truths);
  return out;
}

Metric IouTotals::iou() const { return ratio(intersection, union_area); }

IouTotals aggregate_iou_totals(const std::vector<EvalPair>& pairs, double threshold, ClassFilter filter) {
  require_threshold(threshold);
  IouTotals totals;
  for (const auto& pair : pairs) {
    require_consistent(pair);
    const Size size = pair.predictions.size;
    BinaryMask predicted(size.width, size.height);
    BinaryMask truth(size.width, size.height);
    for (const auto& p : pair.predictions.instances) {
      if (selected(p, filter) && confidence_of(p) >= threshold) mask_union_into(predicted, p.mask);
    }
    for (const auto& g : pair.ground_truth) {
      if (selected(g, filter)) mask_union_into(truth, g.mask);
    }
    const Overlap o = mask_overlap(predicted, truth);
    totals.intersection += o.intersection;
    totals.union_area += o.union_area;
  }
  return totals;
}

Metric aggregate_iou(const std::vector<EvalPair>& pairs, double threshold, ClassFilter filter) {
  return aggregate_iou_totals(pairs, threshold, filter).iou();
}

const SweepRow* ThresholdSweep::best_iou() const {
  const SweepRow* best = nullptr;
  for (const auto& row : rows) {
    const auto v = row.iou.iou();
    if (v && (!best || *v > *best->iou.iou())) best = &row;
  }
  return best;
}

namespace {

// Threshold-independent facts about one image; each threshold then reduces
// to counting values >= t.
struct ImageSummary {
  std::vector<double> prediction_confidence;
  std::vector<bool> prediction_matched;
  // Highest confidence of a same-class prediction touching each ground truth;
  // -1 when none touches.
  std::vector<double> truth_best_confidence;
  // Highest covering prediction confidence per pixel, split by whether the
  // pixel is ground truth. Sorted ascending.
  std::vector<double> truth_pixel_confidence;
  std::vector<double> other_pixel_confidence;
  std::size_t truth_pixels = 0;
};

ImageSummary summarize(const EvalPair& pair, const ClassFilter& filter) {
  require_consistent(pair);
  ImageSummary s;
  std::vector<const Instance*> truths;
  for (const auto& g : pair.ground_truth) {
    if (selected(g, filter)) truths.push_back(&g);
  }
  s.truth_best_confidence.assign(truths.size(), -1.0);

  const Size size = pair.predictions.size;
  std::vector<double> pixel_conf(static_cast<std::size_t>(size.width) * size.height, -1.0);
  for (const auto& p : pair.predictions.instances) {
    if (!selected(p, filter)) continue;
    const double conf = confidence_of(p);
    bool matched = false;
    for (std::size_t g = 0; g < truths.size(); ++g) {
      if (truths[g]->label == p.label && masks_intersect(p.mask, truths[g]->mask)) {
        matched = true;
        s.truth_best_confidence[g] = std::max(s.truth_best_confidence[g], conf);
      }
    }
    s.prediction_confidence.push_back(conf);
    s.prediction_matched.push_back(matched);
    const auto bits = p.mask.bits();
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i]) pixel_conf[i] = std::max(pixel_conf[i], conf);
    }
  }
  BinaryMask truth(size.width, size.height);
  for (const Instance* g : truths) mask_union_into(truth, g->mask);
  const auto tb = truth.bits();
  for (std::size_t i = 0; i < tb.size(); ++i) {
    if (tb[i]) {
      ++s.truth_pixels;
      if (pixel_conf[i] >= 0.0) s.truth_pixel_confidence.push_back(pixel_conf[i]);
    } else if (pixel_conf[i] >= 0.0) {
      s.other_pixel_confidence.push_back(pixel_conf[i]);
    }
  }
  std::sort(s.truth_pixel_confidence.begin(), s.truth_pixel_confidence.end());
  std::sort(s.other_pixel_confidence.begin(), s.other_pixel_confidence.end());
  return s;
}

std::size_t count_at_least(const std::vector<double>& sorted, double t) {
  return static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
}

}  // namespace

ThresholdSweep sweep(const std::vector<EvalPair>& pairs, const std::vector<double>& thresholds, ClassFilter filter) {
  if (thresholds.empty()) throw Error(ErrorKind::OutOfRange, "threshold list is empty");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    require_threshold(thresholds[i]);
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
      throw Error(ErrorKind::OutOfRange, "thresholds must be strictly increasing");
    }
  }
  std::vector<ImageSummary> summaries;
  summaries.reserve(pairs.size());
  for (const auto& pair : pairs) summaries.push_back(summarize(pair, filter));

  ThresholdSweep out;
  for (const double t : thresholds) {
    SweepRow row;
    row.threshold = t;
    for (const auto& s : summaries) {
      for (std::size_t i = 0; i < s.prediction_confidence.size(); ++i) {
        if (s.prediction_confidence[i] >= t) {
          ++row.pr.kept_predictions;
          if (s.prediction_matched[i]) ++row.pr.matched_predictions;
        }
      }
      row.pr.ground_truths += s.truth_best_confidence.size();
      for (const double best : s.truth_best_confidence) {
        if (best >= 0.0 && best >= t) ++row.pr.detected_ground_truths;
      }
      const std::size_t hit = count_at_least(s.truth_pixel_confidence, t);
      row.iou.intersection += hit;
      row.iou.union_area += s.truth_pixels + count_at_least(s.other_pixel_confidence, t);
    }
    row.pr.precision = ratio(row.pr.matched_predictions, row.pr.kept_predictions);
    row.pr.recall = ratio(row.pr.detected_ground_truths, row.pr.ground_truths);
    out.rows.push_back(row);
  }
  return out;
}

std::vector<double> default_thresholds() {
  std::vector<double> out;
  for (int i = 0; i <= 100; ++i) out.push_back(i / 100.0);
  return out;
}

namespace {

std::string format_metric(const Metric& m) {
  if (!m) return "";
  std::ostringstream os;
  os.precision(10);
  os << *m;
  return os.str();
}

nlohmann::json metric_json(const Metric& m) { return m ? nlohmann::json(*m) : nlohmann::json(nullptr); }

}  // namespace

std::string sweep_to_csv(const ThresholdSweep& sweep) {
  std::ostringstream os;
  os << "threshold,precision,recall,aggregate_iou\n";
  for (const auto& row : sweep.rows) {
    os << format_metric(row.threshold) << ',' << format_metric(row.pr.precision) << ','
       << format_metric(row.pr.recall) << ',' << format_metric(row.iou.iou()) << '\n';
  }
  return os.str();
}

std::string sweep_to_json(const ThresholdSweep& sweep, ClassFilter filter) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : sweep.rows) {
    rows.push_back({{"threshold", row.threshold},
                    {"precision", metric_json(row.pr.precision)},
                    {"recall", metric_json(row.pr.recall)},
                    {"aggregate_iou", metric_json(row.iou.iou())},
                    {"kept_predictions", row.pr.kept_predictions},
                    {"matched_predictions", row.pr.matched_predictions},
                    {"ground_truths", row.pr.ground_truths},
                    {"detected_ground_truths", row.pr.detected_ground_truths},
                    {"intersection", row.iou.intersection},
                    {"union", row.iou.union_area}});
  }
  nlohmann::json doc{{"class_filter", filter ? std::string(damagekit::to_string(*filter)) : std::string("all")},
                     {"rows", std::move(rows)}};
  if (const SweepRow* best = sweep.best_iou()) {
    doc["best_iou"] = {{"threshold", best->threshold}, {"aggregate_iou", *best->iou.iou()}};
  } else {
    doc["best_iou"] = nullptr;
  }
  return doc.dump(2) + "\n";
}

ReferenceScale::ReferenceScale(double reference_length, double reference_extent_pixels)
    : length_(reference_length), extent_(reference_extent_pixels) {
  if (!(length_ > 0.0) || !(extent_ > 0.0) || !std::isfinite(length_) || !std::isfinite(extent_)) {
    throw Error(ErrorKind::OutOfRange, "reference length and pixel extent must be positive");
  }
}

AreaMeasurement measure_area(const Instance& instance, const ReferenceScale& scale) {
  AreaMeasurement m;
  m.pixels = instance.mask.area();
  const double s = scale.units_per_pixel();
  m.area = static_cast<double>(m.pixels) * s * s;
  return m;
}

RasterImage render_overlay(const RasterImage& image, const EvalPair& pair, double threshold, ClassFilter filter) {
  require_threshold(threshold);
  require_consistent(pair);
  const Size size = pair.predictions.size;
  if (image.size() != size) throw Error(ErrorKind::DimensionMismatch, "overlay image size differs from predictions");
  BinaryMask predicted(size.width, size.height);
  BinaryMask truth(size.width, size.height);
  for (const auto& p : pair.predictions.instances) {
    if (selected(p, filter) && confidence_of(p) >= threshold) mask_union_into(predicted, p.mask);
  }
  for (const auto& g : pair.ground_truth) {
    if (selected(g, filter)) mask_union_into(truth, g.mask);
  }
  RasterImage out(size.width, size.height, 3);
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      const bool p = predicted.get(x, y);
      const bool g = truth.get(x, y);
      int color[3] = {-1, -1, -1};
      if (p && g) color[0] = 0, color[1] = 200, color[2] = 0;
      else if (g) color[0] = 220, color[1] = 0, color[2] = 0;
      else if (p) color[0] = 240, color[1] = 220, color[2] = 0;
      for (int c = 0; c < 3; ++c) {
        const int base = image.at(x, y, c);
        out.at(x, y, c) = static_cast<std::uint8_t>(color[0] < 0 ? base : (base + color[c] + 1) / 2);
      }
    }
  }
  return out;
}

}  // namespace damagekit::eval
