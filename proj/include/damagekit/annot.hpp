#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "damagekit/geometry.hpp"
#include "damagekit/labels.hpp"

namespace damagekit::annot {

enum class Split { Training, Validation };

std::string_view to_string(Split split);

// A labeled region is either a polygon (hand annotation) or a raster mask
// (generated samples, pasted regions).
struct LabeledShape {
  ClassLabel label = ClassLabel::Damage;
  std::variant<PolygonOutline, BinaryMask> shape;

  friend bool operator==(const LabeledShape&, const LabeledShape&) = default;
};

struct AnnotatedImage {
  std::string image_path;
  // 0 until resolved from the image file.
  int width = 0;
  int height = 0;
  std::vector<LabeledShape> instances;
  std::optional<Split> split;

  bool has_size() const { return width > 0 && height > 0; }
  // Rasterizes every shape at the image size; regions that fall entirely
  // outside the image are dropped.
  std::vector<Instance> ground_truth() const;

  friend bool operator==(const AnnotatedImage&, const AnnotatedImage&) = default;
};

struct DatasetManifest {
  std::vector<AnnotatedImage> training;
  std::vector<AnnotatedImage> validation;
};

struct ViaOptions {
  // Region attribute holding the class; values compare case-insensitively.
  std::string class_key = "class";
};

// Accepts a VIA-2 project (with "_via_img_metadata") or a bare VIA export
// (filename-keyed object). File and region order is preserved.
std::vector<AnnotatedImage> parse_via(std::string_view document, const ViaOptions& options = {});

// Fills width/height by reading each image header below `root`.
void resolve_image_sizes(std::vector<AnnotatedImage>& images, const std::filesystem::path& root);

// Deterministic for a fixed seed. |validation| = max(1, round(fraction * N)).
DatasetManifest split_manifest(std::vector<AnnotatedImage> images, double validation_fraction,
                               std::uint64_t seed);

// Canonical manifest document:
//   { "version": 1,
//     "images": [ { "path", "width", "height", "split"?,
//                   "instances": [ { "class", "polygon": [[x, y], ...] }
//                                | { "class", "mask": { "rle": [...], "width", "height" } } ] } ] }
std::string write_manifest(const std::vector<AnnotatedImage>& images);
std::string write_manifest(const DatasetManifest& manifest);
std::vector<AnnotatedImage> read_manifest(std::string_view document);
DatasetManifest group_by_split(const std::vector<AnnotatedImage>& images);

inline constexpr int kManifestVersion = 1;

}  // namespace damagekit::annot
