#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "damagekit/labels.hpp"
#include "damagekit/tile.hpp"

namespace damagekit::eval {

struct EvalPair {
  std::string image_id;
  std::vector<Instance> ground_truth;
  tile::PredictionSet predictions;  // full frame
};

// Empty optional = all classes. Matching is always same-class.
using ClassFilter = std::optional<ClassLabel>;
inline constexpr ClassFilter kDefaultClassFilter = ClassLabel::Damage;

// An empty optional marks an undefined metric (0/0); it is never coerced.
using Metric = std::optional<double>;

struct PrecisionRecall {
  Metric precision;
  Metric recall;
  std::size_t kept_predictions = 0;
  std::size_t matched_predictions = 0;
  std::size_t ground_truths = 0;
  std::size_t detected_ground_truths = 0;
};

// Any-overlap criterion: a kept prediction (confidence >= threshold) counts
// for precision if it shares a pixel with a same-class ground truth; a ground
// truth counts for recall if any kept same-class prediction touches it.
PrecisionRecall precision_recall(const std::vector<EvalPair>& pairs, double threshold,
                                 ClassFilter filter = kDefaultClassFilter);

struct IouTotals {
  std::size_t intersection = 0;
  std::size_t union_area = 0;
  Metric iou() const;
};

// Per image, union the kept predictions and union the ground truth, then sum
// intersections and unions over the whole set before dividing.
IouTotals aggregate_iou_totals(const std::vector<EvalPair>& pairs, double threshold,
                               ClassFilter filter = kDefaultClassFilter);
Metric aggregate_iou(const std::vector<EvalPair>& pairs, double threshold, ClassFilter filter = kDefaultClassFilter);

struct SweepRow {
  double threshold = 0.0;
  PrecisionRecall pr;
  IouTotals iou;
};

struct ThresholdSweep {
  std::vector<SweepRow> rows;

  // Row with the largest defined IoU, if any.
  const SweepRow* best_iou() const;
};

// Thresholds must be strictly increasing and inside [0, 1].
ThresholdSweep sweep(const std::vector<EvalPair>& pairs, const std::vector<double>& thresholds,
                     ClassFilter filter = kDefaultClassFilter);
// 0.00, 0.01, ..., 1.00
std::vector<double> default_thresholds();

// "threshold,precision,recall,aggregate_iou" with empty fields for undefined values.
std::string sweep_to_csv(const ThresholdSweep& sweep);
std::string sweep_to_json(const ThresholdSweep& sweep, ClassFilter filter);

// Physical units per pixel derived from a reference component of known size.
class ReferenceScale {
 public:
  // Both arguments must be positive.
  ReferenceScale(double reference_length, double reference_extent_pixels);

  double reference_length() const { return length_; }
  double reference_extent() const { return extent_; }
  double units_per_pixel() const { return length_ / extent_; }

 private:
  double length_;
  double extent_;
};

struct AreaMeasurement {
  double area = 0.0;          // squared physical units
  std::size_t pixels = 0;
  // One scale is valid across the image only if the surface faces the camera.
  bool assumes_fronto_parallel = true;
};

AreaMeasurement measure_area(const Instance& instance, const ReferenceScale& scale);

// Green = predicted pixels on ground truth, red = missed ground truth,
// yellow = predicted pixels off ground truth. Colours are blended at 50%.
RasterImage render_overlay(const RasterImage& image, const EvalPair& pair, double threshold,
                           ClassFilter filter = kDefaultClassFilter);

}  // namespace damagekit::eval
