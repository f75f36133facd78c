#include "damagekit/annot.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "damagekit/error.hpp"
#include "damagekit/image_io.hpp"
#include "damagekit/json_codec.hpp"
#include "damagekit/random.hpp"

namespace damagekit::annot {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Split split) {
  return split == Split::Training ? "training" : "validation";
}

std::vector<Instance> AnnotatedImage::ground_truth() const {
  if (!has_size()) {
    throw Error(ErrorKind::Configuration, "image size unresolved for " + image_path);
  }
  std::vector<Instance> out;
  for (const auto& entry : instances) {
    BinaryMask mask;
    if (const auto* polygon = std::get_if<PolygonOutline>(&entry.shape)) {
      mask = rasterize(*polygon, width, height);
    } else {
      mask = std::get<BinaryMask>(entry.shape);
      if (mask.size() != Size{width, height}) {
        throw Error(ErrorKind::DimensionMismatch, "mask instance does not match image size for " + image_path);
      }
    }
    if (mask.any()) out.push_back(Instance{entry.label, std::move(mask), std::nullopt});
  }
  return out;
}

namespace {

std::string region_name(const std::string& file, std::size_t index) {
  return "file '" + file + "' region " + std::to_string(index);
}

ClassLabel region_class(const ordered_json& attributes, const std::string& key, const std::string& where) {
  if (!attributes.is_object() || !attributes.contains(key)) {
    throw Error(ErrorKind::UnknownClass,
                where + ": missing region attribute '" + key + "' (accepted: damage, dirt)");
  }
  const auto& value = attributes.at(key);
  if (value.is_string()) {
    const auto text = value.get<std::string>();
    if (auto label = try_parse_class_label(text)) return *label;
    throw Error(ErrorKind::UnknownClass,
                where + ": unknown class '" + text + "' (accepted: damage, dirt)");
  }
  // VIA checkbox attributes serialize as {"option": true}.
  if (value.is_object()) {
    std::vector<std::string> chosen;
    for (const auto& [option, flag] : value.items()) {
      if (flag.is_boolean() && flag.get<bool>()) chosen.push_back(option);
    }
    if (chosen.size() == 1) {
      if (auto label = try_parse_class_label(chosen.front())) return *label;
      throw Error(ErrorKind::UnknownClass,
                  where + ": unknown class '" + chosen.front() + "' (accepted: damage, dirt)");
    }
  }
  throw Error(ErrorKind::UnknownClass,
              where + ": class attribute '" + key + "' must name exactly one of: damage, dirt");
}

std::vector<double> number_array(const ordered_json& node, const char* key, const std::string& where) {
  if (!node.contains(key) || !node.at(key).is_array()) {
    throw Error(ErrorKind::InvalidRegion, where + ": missing '" + key + "' array");
  }
  std::vector<double> out;
  for (const auto& v : node.at(key)) {
    if (!v.is_number()) throw Error(ErrorKind::InvalidRegion, where + ": non-numeric entry in '" + key + "'");
    out.push_back(v.get<double>());
  }
  return out;
}

AnnotatedImage parse_file_entry(const ordered_json& entry, const std::string& fallback_name,
                                const ViaOptions& options) {
  AnnotatedImage image;
  image.image_path = entry.contains("filename") && entry.at("filename").is_string()
                         ? entry.at("filename").get<std::string>()
                         : fallback_name;
  if (!entry.contains("regions")) return image;
  const auto& regions = entry.at("regions");
  std::vector<const ordered_json*> ordered;
  if (regions.is_array()) {
    for (const auto& r : regions) ordered.push_back(&r);
  } else if (regions.is_object()) {
    // VIA 1.x stored regions as an index-keyed object.
    for (const auto& [k, r] : regions.items()) ordered.push_back(&r);
  } else {
    throw Error(ErrorKind::Parse, "file '" + image.image_path + "': 'regions' must be an array");
  }

  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const auto& region = *ordered[i];
    const std::string where = region_name(image.image_path, i);
    if (!region.contains("shape_attributes") || !region.at("shape_attributes").is_object()) {
      throw Error(ErrorKind::InvalidRegion, where + ": missing 'shape_attributes'");
    }
    const auto& shape = region.at("shape_attributes");
    const std::string name =
        shape.contains("name") && shape.at("name").is_string() ? shape.at("name").get<std::string>() : "";
    if (name != "polygon") {
      throw Error(ErrorKind::UnsupportedShape,
                  where + ": shape '" + name + "' is not supported (only 'polygon')");
    }
    const auto xs = number_array(shape, "all_points_x", where);
    const auto ys = number_array(shape, "all_points_y", where);
    if (xs.size() != ys.size()) {
      throw Error(ErrorKind::InvalidRegion, where + ": all_points_x has " + std::to_string(xs.size()) +
                                                " entries but all_points_y has " + std::to_string(ys.size()));
    }
    const ClassLabel label = region_class(
        region.contains("region_attributes") ? region.at("region_attributes") : ordered_json::object(),
        options.class_key, where);
    std::vector<Point2> points(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) points[k] = {xs[k], ys[k]};
    try {
      image.instances.push_back({label, PolygonOutline(std::move(points))});
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidRegion, where + ": " + e.what());
    }
  }
  return image;
}

}  // namespace

std::vector<AnnotatedImage> parse_via(std::string_view document, const ViaOptions& options) {
  ordered_json root;
  try {
    root = ordered_json::parse(document.begin(), document.end());
  } catch (const ordered_json::parse_error& e) {
    throw Error(ErrorKind::Parse, "VIA document: malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!root.is_object()) throw Error(ErrorKind::Parse, "VIA document: top level must be an object");
  const ordered_json& files = root.contains("_via_img_metadata") ? root.at("_via_img_metadata") : root;
  if (!files.is_object()) throw Error(ErrorKind::Parse, "VIA document: '_via_img_metadata' must be an object");

  std::vector<AnnotatedImage> images;
  for (const auto& [key, entry] : files.items()) {
    if (!entry.is_object()) throw Error(ErrorKind::Parse, "VIA document: entry '" + key + "' is not an object");
    images.push_back(parse_file_entry(entry, key, options));
  }
  return images;
}

void resolve_image_sizes(std::vector<AnnotatedImage>& images, const std::filesystem::path& root) {
  for (auto& image : images) {
    const std::filesystem::path p(image.image_path);
    const Size size = read_image_size(p.is_absolute() ? p : root / p);
    image.width = size.width;
    image.height = size.height;
  }
}

DatasetManifest split_manifest(std::vector<AnnotatedImage> images, double validation_fraction,
                               std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorKind::OutOfRange, "validation fraction must lie in (0, 1)");
  }
  if (images.empty()) throw Error(ErrorKind::OutOfRange, "cannot split an empty image list");
  const std::size_t n = images.size();
  const std::size_t n_val =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(validation_fraction * n)), 1, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RandomStream rng(derive_seed(seed, "annot.split"));
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(order[i], order[j]);
  }
  std::vector<bool> is_val(n, false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;

  // Input order is kept within each side.
  DatasetManifest manifest;
  for (std::size_t i = 0; i < n; ++i) {
    auto& img = images[i];
    img.split = is_val[i] ? Split::Validation : Split::Training;
    (is_val[i] ? manifest.validation : manifest.training).push_back(std::move(img));
  }
  return manifest;
}

namespace {

json image_to_json(const AnnotatedImage& image) {
  json instances = json::array();
  for (const auto& entry : image.instances) {
    json node{{"class", std::string(damagekit::to_string(entry.label))}};
    if (const auto* polygon = std::get_if<PolygonOutline>(&entry.shape)) {
      json points = json::array();
      for (const auto& v : polygon->vertices()) points.push_back({v.x, v.y});
      node["polygon"] = std::move(points);
    } else {
      node["mask"] = mask_to_json(std::get<BinaryMask>(entry.shape));
    }
    instances.push_back(std::move(node));
  }
  json out{{"path", image.image_path}, {"width", image.width}, {"height", image.height}};
  if (image.split) out["split"] = std::string(to_string(*image.split));
  out["instances"] = std::move(instances);
  return out;
}

std::string dump_manifest(const std::vector<const AnnotatedImage*>& images) {
  json list = json::array();
  for (const auto* img : images) list.push_back(image_to_json(*img));
  return json{{"version", kManifestVersion}, {"images", std::move(list)}}.dump(2) + "\n";
}

AnnotatedImage image_from_json(const json& node, const std::string& where) {
  AnnotatedImage image;
  image.image_path = require_string(node, "path", where);
  image.width = require_int(node, "width", where);
  image.height = require_int(node, "height", where);
  if (node.contains("split")) {
    const auto split = require_string(node, "split", where);
    if (split == "training") image.split = Split::Training;
    else if (split == "validation") image.split = Split::Validation;
    else throw Error(ErrorKind::Parse, where + "/split: expected 'training' or 'validation'");
  }
  const json& instances = require_field(node, "instances", where);
  if (!instances.is_array()) throw Error(ErrorKind::Parse, where + "/instances: expected array");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const std::string iw = where + "/instances/" + std::to_string(i);
    const json& inst = instances[i];
    const ClassLabel label = parse_class_label(require_string(inst, "class", iw));
    if (inst.contains("polygon")) {
      const json& pts = inst.at("polygon");
      if (!pts.is_array()) throw Error(ErrorKind::Parse, iw + "/polygon: expected array");
      std::vector<Point2> vertices;
      for (const auto& p : pts) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
          throw Error(ErrorKind::Parse, iw + "/polygon: expected [x, y] pairs");
        }
        vertices.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      image.instances.push_back({label, PolygonOutline(std::move(vertices))});
    } else if (inst.contains("mask")) {
      image.instances.push_back({label, mask_from_json(inst.at("mask"), iw + "/mask")});
    } else {
      throw Error(ErrorKind::Parse, iw + ": expected 'polygon' or 'mask'");
    }
  }
  return image;
}

}  // namespace

std::string write_manifest(const std::vector<AnnotatedImage>& images) {
  std::vector<const AnnotatedImage*> refs;
  for (const auto& img : images) refs.push_back(&img);
  return dump_manifest(refs);
}

std::string write_manifest(const DatasetManifest& manifest) {
  std::vector<const AnnotatedImage*> refs;
  for (const auto& img : manifest.training) refs.push_back(&img);
  for (const auto& img : manifest.validation) refs.push_back(&img);
  return dump_manifest(refs);
}

std::vector<AnnotatedImage> read_manifest(std::string_view document) {
  const json root = parse_json(document, "manifest");
  if (!root.is_object()) throw Error(ErrorKind::Parse, "manifest: top level must be an object");
  const int version = require_int(root, "version", "");
  if (version != kManifestVersion) {
    throw Error(ErrorKind::Parse, "/version: unsupported manifest version " + std::to_string(version));
  }
  const json& list = require_field(root, "images", "");
  if (!list.is_array()) throw Error(ErrorKind::Parse, "/images: expected array");
  std::vector<AnnotatedImage> images;
  for (std::size_t i = 0; i < list.size(); ++i) {
    images.push_back(image_from_json(list[i], "/images/" + std::to_string(i)));
  }
  return images;
}

DatasetManifest group_by_split(const std::vector<AnnotatedImage>& images) {
  DatasetManifest manifest;
  for (const auto& img : images) {
    (img.split == Split::Validation ? manifest.validation : manifest.training).push_back(img);
  }
  return manifest;
}

}  // namespace damagekit::annot
