#include "damagekit/tile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "damagekit/error.hpp"
#include "damagekit/json_codec.hpp"
#include "damagekit/random.hpp"

namespace damagekit::tile {

using nlohmann::json;

std::vector<int> axis_origins(int extent, int window, int overlap) {
  const int stride = window - overlap;
  std::vector<int> origins;
  for (int o = 0; o + window <= extent; o += stride) origins.push_back(o);
  if (origins.back() + window < extent) origins.push_back(extent - window);
  return origins;
}

TilingPlan plan_tiling(Size image_size, Size window_size, int overlap) {
  if (image_size.width < 1 || image_size.height < 1 || window_size.width < 1 || window_size.height < 1) {
    throw Error(ErrorKind::InvalidPlan, "image and window sizes must be positive");
  }
  if (window_size.width > image_size.width || window_size.height > image_size.height) {
    throw Error(ErrorKind::InvalidPlan, "window " + std::to_string(window_size.width) + "x" +
                                            std::to_string(window_size.height) + " is larger than image " +
                                            std::to_string(image_size.width) + "x" +
                                            std::to_string(image_size.height));
  }
  if (overlap < 0 || overlap >= std::min(window_size.width, window_size.height)) {
    throw Error(ErrorKind::InvalidPlan, "overlap must lie in [0, min(window width, window height))");
  }
  TilingPlan plan{image_size, window_size, overlap, {}};
  const auto xs = axis_origins(image_size.width, window_size.width, overlap);
  const auto ys = axis_origins(image_size.height, window_size.height, overlap);
  for (const int y : ys) {
    for (const int x : xs) plan.windows.push_back({x, y, window_size.width, window_size.height});
  }
  return plan;
}

std::vector<RasterImage> extract_windows(const RasterImage& image, const TilingPlan& plan) {
  if (image.size() != plan.image_size) {
    throw Error(ErrorKind::DimensionMismatch, "image size does not match the tiling plan");
  }
  std::vector<RasterImage> out;
  out.reserve(plan.windows.size());
  for (const auto& w : plan.windows) out.push_back(crop_image(image, w.rect()));
  return out;
}

namespace {

void require_factor(double factor) {
  if (!(factor > 0.0 && factor <= 1.0)) {
    throw Error(ErrorKind::OutOfRange, "scale factor must lie in (0, 1]");
  }
}

Size scaled_size(Size s, double factor) {
  return {std::max(1, static_cast<int>(std::lround(s.width * factor))),
          std::max(1, static_cast<int>(std::lround(s.height * factor)))};
}

}  // namespace

RasterImage downscale_image(const RasterImage& image, double factor) {
  require_factor(factor);
  if (factor == 1.0) return image;
  return resize_bilinear(image, scaled_size(image.size(), factor));
}

std::vector<Instance> downscale_instances(const std::vector<Instance>& instances, double factor) {
  require_factor(factor);
  std::vector<Instance> out;
  for (const auto& inst : instances) {
    BinaryMask mask = resize_nearest(inst.mask, scaled_size(inst.mask.size(), factor));
    if (mask.any()) out.push_back({inst.label, std::move(mask), inst.confidence});
  }
  return out;
}

PredictionSet upscale_predictions(const PredictionSet& predictions, double factor, Size full_size) {
  require_factor(factor);
  if (predictions.size != scaled_size(full_size, factor)) {
    throw Error(ErrorKind::DimensionMismatch, "prediction frame is not the downscaled full size");
  }
  PredictionSet out{predictions.image_id, full_size, Frame::full(), {}};
  for (const auto& inst : predictions.instances) {
    BinaryMask mask = resize_nearest(inst.mask, full_size);
    if (mask.any()) out.instances.push_back({inst.label, std::move(mask), inst.confidence});
  }
  return out;
}

namespace {

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

bool shares_pixels(const BinaryMask& a, const Rect& box_a, const BinaryMask& b, const Rect& box_b,
                   std::size_t min_pixels) {
  const Rect common = intersect(box_a, box_b);
  if (common.empty()) return false;
  std::size_t shared = 0;
  for (int y = common.y; y < common.bottom(); ++y) {
    for (int x = common.x; x < common.right(); ++x) {
      if (a.get(x, y) && b.get(x, y) && ++shared >= min_pixels) return true;
    }
  }
  return false;
}

std::size_t first_set_pixel(const BinaryMask& mask) {
  const auto bits = mask.bits();
  return static_cast<std::size_t>(std::find(bits.begin(), bits.end(), std::uint8_t{1}) - bits.begin());
}

}  // namespace

std::vector<Instance> merge_overlapping(std::vector<Instance> instances, const MergeSettings& settings) {
  if (settings.min_overlap_pixels < 1) throw Error(ErrorKind::OutOfRange, "min overlap must be >= 1 pixel");
  const std::size_t n = instances.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (instances[i].mask.size() != instances[0].mask.size()) {
      throw Error(ErrorKind::DimensionMismatch, "instances to merge must share one frame");
    }
  }
  std::vector<Rect> boxes(n);
  for (std::size_t i = 0; i < n; ++i) boxes[i] = instances[i].mask.bounding_box();

  DisjointSet groups(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (instances[i].label != instances[j].label) continue;
      if (groups.find(i) == groups.find(j)) continue;
      if (shares_pixels(instances[i].mask, boxes[i], instances[j].mask, boxes[j], settings.min_overlap_pixels)) {
        groups.unite(i, j);
      }
    }
  }

  std::vector<Instance> merged;
  std::vector<std::size_t> slot(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = groups.find(i);
    if (slot[root] == n) {
      slot[root] = merged.size();
      merged.push_back(std::move(instances[i]));
      continue;
    }
    Instance& target = merged[slot[root]];
    mask_union_into(target.mask, instances[i].mask);
    if (target.confidence && instances[i].confidence) {
      target.confidence = std::max(*target.confidence, *instances[i].confidence);
    } else if (instances[i].confidence) {
      target.confidence = instances[i].confidence;
    }
  }

  std::vector<std::size_t> firsts(merged.size());
  for (std::size_t i = 0; i < merged.size(); ++i) firsts[i] = first_set_pixel(merged[i].mask);
  std::vector<std::size_t> order(merged.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ia = merged[a];
    const auto& ib = merged[b];
    if (ia.label != ib.label) return ia.label < ib.label;
    if (firsts[a] != firsts[b]) return firsts[a] < firsts[b];
    const auto ba = ia.mask.bits();
    const auto bb = ib.mask.bits();
    if (!std::equal(ba.begin(), ba.end(), bb.begin())) {
      return std::lexicographical_compare(ba.begin(), ba.end(), bb.begin(), bb.end());
    }
    return ia.confidence.value_or(-1.0) < ib.confidence.value_or(-1.0);
  });
  std::vector<Instance> sorted;
  sorted.reserve(merged.size());
  for (const auto i : order) sorted.push_back(std::move(merged[i]));
  return sorted;
}

PredictionSet merge_predictions(const std::vector<PredictionSet>& per_window, const TilingPlan& plan,
                                const MergeSettings& settings) {
  if (per_window.size() != plan.windows.size()) {
    throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(plan.windows.size()) +
                                                  " window prediction sets, got " +
                                                  std::to_string(per_window.size()));
  }
  std::vector<bool> seen(plan.windows.size(), false);
  std::string image_id;
  std::vector<Instance> translated;
  for (const auto& set : per_window) {
    if (set.frame.is_full()) {
      throw Error(ErrorKind::DimensionMismatch, "window prediction set is in the full-image frame");
    }
    const int k = *set.frame.window;
    if (k < 0 || static_cast<std::size_t>(k) >= plan.windows.size() || seen[k]) {
      throw Error(ErrorKind::DimensionMismatch, "window index " + std::to_string(k) + " is invalid or repeated");
    }
    seen[k] = true;
    const Window& w = plan.windows[k];
    if (set.size != Size{w.width, w.height}) {
      throw Error(ErrorKind::DimensionMismatch, "window " + std::to_string(k) + " frame size does not match the plan");
    }
    if (image_id.empty()) image_id = set.image_id;
    for (const auto& inst : set.instances) {
      if (inst.mask.size() != set.size) {
        throw Error(ErrorKind::DimensionMismatch, "mask size does not match window " + std::to_string(k));
      }
      translated.push_back({inst.label, place_mask(inst.mask, plan.image_size, w.x, w.y), inst.confidence});
    }
  }
  return {image_id, plan.image_size, Frame::full(), merge_overlapping(std::move(translated), settings)};
}

std::vector<Instance> clip_to_window(const std::vector<Instance>& instances, const Window& window) {
  std::vector<Instance> out;
  for (const auto& inst : instances) {
    BinaryMask fragment = crop_mask(inst.mask, window.rect());
    if (fragment.any()) out.push_back({inst.label, std::move(fragment), inst.confidence});
  }
  return out;
}

PredictionSet mock_detect(const std::vector<Instance>& ground_truth, Size size, const MockPerturbation& perturbation,
                          std::string image_id, Frame frame) {
  if (!(perturbation.false_positive_rate >= 0.0 && perturbation.false_positive_rate < 1.0)) {
    throw Error(ErrorKind::OutOfRange, "false-positive rate must lie in [0, 1)");
  }
  RandomStream rng(derive_seed(perturbation.confidence_seed, "tile.mock_detect",
                               frame.window ? static_cast<std::uint64_t>(*frame.window) + 1 : 0));
  PredictionSet out{std::move(image_id), size, frame, {}};
  BinaryMask occupied(size.width, size.height);
  for (const auto& gt : ground_truth) {
    if (gt.mask.size() != size) throw Error(ErrorKind::DimensionMismatch, "ground-truth mask size mismatch");
    BinaryMask mask = dilate_square(gt.mask, perturbation.dilation_radius);
    mask_union_into(occupied, mask);
    out.instances.push_back({gt.label, std::move(mask), rng.uniform(0.5, 1.0)});
  }

  const double rate = perturbation.false_positive_rate;
  const auto n_fp = static_cast<std::size_t>(std::llround(rate / (1.0 - rate) * ground_truth.size()));
  const int short_side = std::min(size.width, size.height);
  const int min_side = std::max(1, short_side / 32);
  const int max_side = std::max(min_side, short_side / 8);
  constexpr int kPlacementAttempts = 64;
  for (std::size_t i = 0; i < n_fp; ++i) {
    const ClassLabel label =
        ground_truth.empty()
            ? ClassLabel::Damage
            : ground_truth[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(ground_truth.size()) - 1))].label;
    Rect box;
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const int w = static_cast<int>(rng.uniform_int(min_side, max_side));
      const int h = static_cast<int>(rng.uniform_int(min_side, max_side));
      box = {static_cast<int>(rng.uniform_int(0, size.width - w)), static_cast<int>(rng.uniform_int(0, size.height - h)),
             w, h};
      bool clear = true;
      for (int y = box.y; y < box.bottom() && clear; ++y) {
        for (int x = box.x; x < box.right(); ++x) {
          if (occupied.get(x, y)) {
            clear = false;
            break;
          }
        }
      }
      if (clear) break;
    }
    BinaryMask mask(size.width, size.height);
    for (int y = box.y; y < box.bottom(); ++y) {
      for (int x = box.x; x < box.right(); ++x) mask.set(x, y);
    }
    mask_union_into(occupied, mask);
    out.instances.push_back({label, std::move(mask), rng.uniform(0.5, 1.0)});
  }
  return out;
}

std::string write_predictions(const PredictionSet& predictions) {
  json instances = json::array();
  for (const auto& inst : predictions.instances) {
    if (!inst.confidence) throw Error(ErrorKind::OutOfRange, "interchange instances require a confidence");
    instances.push_back({{"class", std::string(damagekit::to_string(inst.label))},
                         {"confidence", *inst.confidence},
                         {"mask", mask_to_json(inst.mask)}});
  }
  json doc{{"image_id", predictions.image_id},
           {"width", predictions.size.width},
           {"height", predictions.size.height}};
  doc["frame"] = predictions.frame.is_full() ? json("full") : json{{"window", *predictions.frame.window}};
  doc["instances"] = std::move(instances);
  return doc.dump() + "\n";
}

namespace {

void check_predictions(const json& doc, std::vector<std::string>& problems) {
  auto problem = [&](const std::string& pointer, const std::string& message) {
    problems.push_back(pointer + ": " + message);
  };
  if (!doc.is_object()) {
    problem("", "top level must be an object");
    return;
  }
  if (!doc.contains("image_id") || !doc["image_id"].is_string()) problem("/image_id", "expected string");
  int width = 0, height = 0;
  for (const char* key : {"width", "height"}) {
    if (!doc.contains(key) || !doc[key].is_number_integer() || doc[key].get<long long>() < 1) {
      problem(std::string("/") + key, "expected positive integer");
    } else {
      (std::string(key) == "width" ? width : height) = doc[key].get<int>();
    }
  }
  if (!doc.contains("frame")) {
    problem("/frame", "missing required key");
  } else {
    const json& frame = doc["frame"];
    const bool ok = (frame.is_string() && frame.get<std::string>() == "full") ||
                    (frame.is_object() && frame.size() == 1 && frame.contains("window") &&
                     frame["window"].is_number_integer() && frame["window"].get<long long>() >= 0);
    if (!ok) problem("/frame", "expected \"full\" or {\"window\": k}");
  }
  if (!doc.contains("instances") || !doc["instances"].is_array()) {
    problem("/instances", "expected array");
    return;
  }
  const json& instances = doc["instances"];
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const std::string at = "/instances/" + std::to_string(i);
    const json& inst = instances[i];
    if (!inst.is_object()) {
      problem(at, "expected object");
      continue;
    }
    if (!inst.contains("class") || !inst["class"].is_string() ||
        !try_parse_class_label(inst["class"].get<std::string>())) {
      problem(at + "/class", "expected \"damage\" or \"dirt\"");
    }
    if (!inst.contains("confidence") || !inst["confidence"].is_number() ||
        !(inst["confidence"].get<double>() >= 0.0 && inst["confidence"].get<double>() <= 1.0)) {
      problem(at + "/confidence", "expected number in [0, 1]");
    }
    if (!inst.contains("mask")) {
      problem(at + "/mask", "missing required key");
      continue;
    }
    try {
      const BinaryMask mask = mask_from_json(inst["mask"], at + "/mask");
      if (width > 0 && height > 0 && mask.size() != Size{width, height}) {
        problem(at + "/mask", "dimensions do not match the frame");
      }
    } catch (const Error& e) {
      problems.emplace_back(e.what());
    }
  }
}

}  // namespace

std::vector<std::string> validate_predictions(std::string_view document) {
  std::vector<std::string> problems;
  json doc;
  try {
    doc = parse_json(document, "predictions");
  } catch (const Error& e) {
    problems.emplace_back(e.what());
    return problems;
  }
  check_predictions(doc, problems);
  return problems;
}

PredictionSet read_predictions(std::string_view document) {
  const json doc = parse_json(document, "predictions");
  std::vector<std::string> problems;
  check_predictions(doc, problems);
  if (!problems.empty()) {
    std::string message = "invalid prediction document";
    for (const auto& p : problems) message += "\n  " + p;
    throw Error(ErrorKind::Parse, message);
  }
  PredictionSet out;
  out.image_id = doc["image_id"].get<std::string>();
  out.size = {doc["width"].get<int>(), doc["height"].get<int>()};
  if (doc["frame"].is_object()) out.frame = Frame::window_at(doc["frame"]["window"].get<int>());
  const json& instances = doc["instances"];
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const json& inst = instances[i];
    out.instances.push_back({parse_class_label(inst["class"].get<std::string>()),
                             mask_from_json(inst["mask"], "/instances/" + std::to_string(i) + "/mask"),
                             inst["confidence"].get<double>()});
  }
  return out;
}

std::string write_window_index(const TilingPlan& plan, std::string_view image_id,
                               const std::vector<std::string>& files) {
  json windows = json::array();
  for (std::size_t i = 0; i < plan.windows.size(); ++i) {
    const auto& w = plan.windows[i];
    json node{{"index", i}, {"x", w.x}, {"y", w.y}, {"width", w.width}, {"height", w.height}};
    if (i < files.size()) node["file"] = files[i];
    windows.push_back(std::move(node));
  }
  return json{{"image_id", std::string(image_id)},
              {"width", plan.image_size.width},
              {"height", plan.image_size.height},
              {"window_width", plan.window_size.width},
              {"window_height", plan.window_size.height},
              {"overlap", plan.overlap},
              {"windows", std::move(windows)}}
             .dump(2) +
         "\n";
}

WindowIndex read_window_index(std::string_view document) {
  const json doc = parse_json(document, "window index");
  WindowIndex index;
  index.image_id = require_string(doc, "image_id", "");
  const Size image_size{require_int(doc, "width", ""), require_int(doc, "height", "")};
  const Size window_size{require_int(doc, "window_width", ""), require_int(doc, "window_height", "")};
  index.plan = plan_tiling(image_size, window_size, require_int(doc, "overlap", ""));
  const json& windows = require_field(doc, "windows", "");
  if (!windows.is_array() || windows.size() != index.plan.windows.size()) {
    throw Error(ErrorKind::Parse, "/windows: does not match the plan implied by the sizes");
  }
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const std::string at = "/windows/" + std::to_string(i);
    const Window w{require_int(windows[i], "x", at), require_int(windows[i], "y", at),
                   require_int(windows[i], "width", at), require_int(windows[i], "height", at)};
    if (w != index.plan.windows[i]) throw Error(ErrorKind::Parse, at + ": window differs from the plan");
    index.files.push_back(windows[i].contains("file") ? require_string(windows[i], "file", at) : std::string());
  }
  return index;
}

}  // namespace damagekit::tile
