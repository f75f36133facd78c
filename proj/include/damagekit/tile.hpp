#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "damagekit/image.hpp"
#include "damagekit/labels.hpp"

namespace damagekit::tile {

struct Window {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  Rect rect() const { return {x, y, width, height}; }
  friend bool operator==(const Window&, const Window&) = default;
};

struct TilingPlan {
  Size image_size;
  Size window_size;
  int overlap = 0;
  // Row-major: y origin outer, x origin inner.
  std::vector<Window> windows;
};

// Origins at multiples of (window - overlap) per axis, plus one window
// clamped to the far edge when the last strided window stops short of it.
TilingPlan plan_tiling(Size image_size, Size window_size, int overlap);
// Strided-then-clamped origins along one axis.
std::vector<int> axis_origins(int extent, int window, int overlap);

std::vector<RasterImage> extract_windows(const RasterImage& image, const TilingPlan& plan);

// Coordinate frame of a prediction set: the full image or one plan window.
struct Frame {
  std::optional<int> window;  // empty => full image

  bool is_full() const { return !window.has_value(); }
  static Frame full() { return {}; }
  static Frame window_at(int index) { return {index}; }
  friend bool operator==(const Frame&, const Frame&) = default;
};

struct PredictionSet {
  std::string image_id;
  Size size;  // dimensions of the frame
  Frame frame;
  std::vector<Instance> instances;

  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

// Bilinear resample to round(W * factor) x round(H * factor), 0 < factor <= 1.
RasterImage downscale_image(const RasterImage& image, double factor);
// Nearest-neighbour mask resample for ground truth in the downscaled frame.
std::vector<Instance> downscale_instances(const std::vector<Instance>& instances, double factor);
// Masks are resampled nearest-neighbour to `full_size`; confidences untouched.
PredictionSet upscale_predictions(const PredictionSet& predictions, double factor, Size full_size);

struct MergeSettings {
  // Same-class instances sharing at least this many pixels are grouped.
  std::size_t min_overlap_pixels = 1;
};

// Translates window-frame instances into the full frame, then unions each
// connected group of same-class overlapping instances (confidence = max).
PredictionSet merge_predictions(const std::vector<PredictionSet>& per_window, const TilingPlan& plan,
                                const MergeSettings& settings = {});
// Grouping step alone, over instances already in one frame. Output order is
// canonical: class, then first set pixel in row-major order.
std::vector<Instance> merge_overlapping(std::vector<Instance> instances, const MergeSettings& settings = {});

// Window-clipped copies of full-frame instances; fragments that end up
// empty are dropped.
std::vector<Instance> clip_to_window(const std::vector<Instance>& instances, const Window& window);

struct MockPerturbation {
  int dilation_radius = 0;
  std::uint64_t confidence_seed = 0;
  // Fraction of emitted predictions that are false positives, in [0, 1).
  double false_positive_rate = 0.0;
};

// Test double for the external detector: dilated ground truth with seeded
// confidences in [0.5, 1] plus seeded rectangular false positives placed
// away from the ground truth where possible.
PredictionSet mock_detect(const std::vector<Instance>& ground_truth, Size size, const MockPerturbation& perturbation,
                          std::string image_id = {}, Frame frame = Frame::full());

// Interchange document:
//   { "image_id", "width", "height", "frame": "full" | {"window": k},
//     "instances": [ { "class", "confidence", "mask": { "rle", "width", "height" } } ] }
std::string write_predictions(const PredictionSet& predictions);
PredictionSet read_predictions(std::string_view document);
// Schema problems as "pointer: message" strings; empty when valid.
std::vector<std::string> validate_predictions(std::string_view document);

// Window index written by the tile command and read by detector adapters:
//   { "image_id", "width", "height", "window_width", "window_height", "overlap",
//     "windows": [ { "index", "x", "y", "width", "height", "file" } ] }
std::string write_window_index(const TilingPlan& plan, std::string_view image_id,
                               const std::vector<std::string>& files);
struct WindowIndex {
  std::string image_id;
  TilingPlan plan;
  std::vector<std::string> files;
};
WindowIndex read_window_index(std::string_view document);

}  // namespace damagekit::tile
