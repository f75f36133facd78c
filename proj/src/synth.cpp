#include "damagekit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include "damagekit/error.hpp"
#include "damagekit/image_io.hpp"
#include "damagekit/json_codec.hpp"

namespace damagekit::synth {

using nlohmann::json;

std::string_view to_string(ExemplarClass cls) {
  switch (cls) {
    case ExemplarClass::Damage: return "damage";
    case ExemplarClass::Dirt: return "dirt";
    case ExemplarClass::CleanStructure: return "clean";
  }
  return "clean";
}

ExemplarClass parse_exemplar_class(std::string_view text) {
  if (text == "clean" || text == "Clean" || text == "CLEAN") return ExemplarClass::CleanStructure;
  if (auto label = try_parse_class_label(text)) {
    return *label == ClassLabel::Damage ? ExemplarClass::Damage : ExemplarClass::Dirt;
  }
  throw Error(ErrorKind::UnknownClass,
              "unknown exemplar class '" + std::string(text) + "' (accepted: damage, dirt, clean)");
}

std::optional<ClassLabel> instance_label(ExemplarClass cls) {
  switch (cls) {
    case ExemplarClass::Damage: return ClassLabel::Damage;
    case ExemplarClass::Dirt: return ClassLabel::Dirt;
    case ExemplarClass::CleanStructure: return std::nullopt;
  }
  return std::nullopt;
}

void validate(const ExemplarCrop& crop) {
  const auto& p = crop.patch;
  if (p.channels() != 4) throw Error(ErrorKind::InvalidRegion, crop.source_id + ": exemplar patch must be RGBA");
  if (crop.target.size() != p.size()) {
    throw Error(ErrorKind::DimensionMismatch, crop.source_id + ": target mask size differs from patch");
  }
  bool any_alpha = false;
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      const bool opaque = p.at(x, y, 3) > 0;
      any_alpha = any_alpha || opaque;
      if (crop.target.get(x, y) && !opaque) {
        throw Error(ErrorKind::InvalidRegion, crop.source_id + ": target mask extends outside the alpha region");
      }
    }
  }
  if (!any_alpha) throw Error(ErrorKind::InvalidRegion, crop.source_id + ": exemplar alpha is empty");
  if (crop.cls == ExemplarClass::CleanStructure && crop.target.any()) {
    throw Error(ErrorKind::InvalidRegion, crop.source_id + ": clean-structure exemplar must have an empty target");
  }
}

std::vector<ExemplarCrop> load_exemplar_library(const std::filesystem::path& directory) {
  if (!std::filesystem::is_directory(directory)) {
    throw Error(ErrorKind::Configuration, "exemplar library is not a directory: " + directory.string());
  }
  std::vector<std::filesystem::path> sidecars;
  for (const auto& entry : std::filesystem::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") sidecars.push_back(entry.path());
  }
  std::sort(sidecars.begin(), sidecars.end());
  std::vector<ExemplarCrop> library;
  for (const auto& sidecar : sidecars) {
    std::ifstream in(sidecar);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const json doc = parse_json(buffer.str(), sidecar.string());
    const std::string where = sidecar.filename().string();
    ExemplarCrop crop;
    auto image_path = sidecar;
    image_path.replace_extension(".png");
    crop.patch = load_image(image_path, true);
    if (crop.patch.channels() != 4) {
      throw Error(ErrorKind::InvalidRegion, image_path.string() + ": exemplar image has no alpha channel");
    }
    crop.cls = parse_exemplar_class(require_string(doc, "class", where));
    crop.target = mask_from_json(require_field(doc, "target_mask", where), where + "/target_mask");
    crop.source_id = doc.contains("source_id") ? require_string(doc, "source_id", where) : sidecar.stem().string();
    validate(crop);
    library.push_back(std::move(crop));
  }
  return library;
}

void save_exemplar(const ExemplarCrop& crop, const std::filesystem::path& directory, const std::string& name) {
  validate(crop);
  std::filesystem::create_directories(directory);
  save_image(crop.patch, directory / (name + ".png"));
  const json doc{{"class", std::string(to_string(crop.cls))},
                 {"target_mask", mask_to_json(crop.target)},
                 {"source_id", crop.source_id}};
  std::ofstream(directory / (name + ".json")) << doc.dump(2) << "\n";
}

void validate(const SynthSettings& s) {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Configuration, m); };
  if (s.canvas.width < 1 || s.canvas.height < 1) fail("synth canvas must be at least 1x1");
  if (s.exemplar_count.min < 0 || s.exemplar_count.max < s.exemplar_count.min) fail("synth exemplar_count range invalid");
  if (!(s.scale.min > 0.0) || s.scale.max < s.scale.min) fail("synth scale range invalid (min must be > 0)");
  if (s.rotation_degrees.max < s.rotation_degrees.min) fail("synth rotation range invalid");
  if (s.surround_crop.min < 0.0 || s.surround_crop.max > 1.0 || s.surround_crop.max < s.surround_crop.min) {
    fail("synth surround_crop range must lie within [0, 1]");
  }
  if (s.background_grid.min < 1 || s.background_grid.max < s.background_grid.min) fail("synth background_grid invalid");
  if (s.placement_retries < 0 || s.scale_retries < 1) fail("synth retry counts invalid");
}

BackgroundPool BackgroundPool::from_directory(const std::filesystem::path& directory) {
  if (!std::filesystem::is_directory(directory)) {
    throw Error(ErrorKind::Configuration, "background pool is not a directory: " + directory.string());
  }
  BackgroundPool pool;
  pool.entries_ = std::make_shared<std::vector<Entry>>();
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  for (auto& p : paths) pool.entries_->push_back({std::move(p), nullptr});
  if (pool.entries_->empty()) {
    throw Error(ErrorKind::Configuration, "background pool has no images: " + directory.string());
  }
  return pool;
}

BackgroundPool BackgroundPool::from_images(std::vector<RasterImage> images) {
  BackgroundPool pool;
  pool.entries_ = std::make_shared<std::vector<Entry>>();
  for (auto& img : images) {
    if (img.channels() == 4) {
      RasterImage rgb(img.width(), img.height(), 3);
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
          for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = img.at(x, y, c);
      img = std::move(rgb);
    }
    pool.entries_->push_back({{}, std::make_shared<const RasterImage>(std::move(img))});
  }
  return pool;
}

std::shared_ptr<const RasterImage> BackgroundPool::image(std::size_t index) const {
  if (!entries_ || index >= entries_->size()) throw Error(ErrorKind::OutOfRange, "background pool index out of range");
  std::lock_guard lock(*mutex_);
  const Entry& e = (*entries_)[index];
  if (!e.cached) e.cached = std::make_shared<const RasterImage>(load_image(e.path));
  return e.cached;
}

Collage build_background(const BackgroundPool& pool, Size canvas, RandomStream& rng, Range<int> grid) {
  if (pool.size() == 0) throw Error(ErrorKind::Configuration, "background pool is empty");
  const int rows = std::min(static_cast<int>(rng.uniform_int(grid.min, grid.max)), canvas.height);
  const int cols = std::min(static_cast<int>(rng.uniform_int(grid.min, grid.max)), canvas.width);
  Collage collage;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      CollageCell cell;
      const int x0 = static_cast<int>(static_cast<long long>(c) * canvas.width / cols);
      const int x1 = static_cast<int>(static_cast<long long>(c + 1) * canvas.width / cols);
      const int y0 = static_cast<int>(static_cast<long long>(r) * canvas.height / rows);
      const int y1 = static_cast<int>(static_cast<long long>(r + 1) * canvas.height / rows);
      cell.cell = {x0, y0, x1 - x0, y1 - y0};
      cell.pool_index = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1));
      const auto img = pool.image(cell.pool_index);
      const double s = std::max({1.0, static_cast<double>(cell.cell.width) / img->width(),
                                 static_cast<double>(cell.cell.height) / img->height()});
      cell.resized = s == 1.0 ? img->size()
                              : Size{std::max(cell.cell.width, static_cast<int>(std::ceil(img->width() * s))),
                                     std::max(cell.cell.height, static_cast<int>(std::ceil(img->height() * s)))};
      cell.crop_x = static_cast<int>(rng.uniform_int(0, cell.resized.width - cell.cell.width));
      cell.crop_y = static_cast<int>(rng.uniform_int(0, cell.resized.height - cell.cell.height));
      collage.cells.push_back(cell);
    }
  }
  collage.image = render_background(pool, canvas, collage.cells);
  return collage;
}

RasterImage render_background(const BackgroundPool& pool, Size canvas, const std::vector<CollageCell>& cells) {
  RasterImage out(canvas.width, canvas.height, 3);
  for (const auto& cell : cells) {
    const auto img = pool.image(cell.pool_index);
    RasterImage resized_storage;
    const RasterImage* source = img.get();
    if (cell.resized != img->size()) {
      resized_storage = resize_bilinear(*img, cell.resized);
      source = &resized_storage;
    }
    for (int y = 0; y < cell.cell.height; ++y) {
      for (int x = 0; x < cell.cell.width; ++x) {
        for (int c = 0; c < 3; ++c) {
          out.at(cell.cell.x + x, cell.cell.y + y, c) = source->at(cell.crop_x + x, cell.crop_y + y, c);
        }
      }
    }
  }
  return out;
}

namespace {

// Resamples an exemplar through an inverse map from output pixel-centre
// coordinates to input coordinates. Alpha and target use nearest neighbour;
// colour uses alpha-weighted bilinear interpolation so cleared pixels do not
// bleed into the structure edge.
template <typename InverseMap>
ExemplarCrop warp(const ExemplarCrop& in, Size out_size, InverseMap inverse) {
  ExemplarCrop out;
  out.cls = in.cls;
  out.source_id = in.source_id;
  out.patch = RasterImage(out_size.width, out_size.height, 4);
  out.target = BinaryMask(out_size.width, out_size.height);
  const RasterImage& p = in.patch;
  const int w = p.width();
  const int h = p.height();
  for (int y = 0; y < out_size.height; ++y) {
    for (int x = 0; x < out_size.width; ++x) {
      const auto [sx, sy] = inverse(x + 0.5, y + 0.5);
      const int ix = static_cast<int>(std::floor(sx));
      const int iy = static_cast<int>(std::floor(sy));
      if (ix < 0 || iy < 0 || ix >= w || iy >= h) continue;
      const std::uint8_t alpha = p.at(ix, iy, 3);
      if (alpha == 0) continue;
      out.patch.at(x, y, 3) = alpha;
      if (in.target.get(ix, iy)) out.target.set(x, y);

      const double fx = std::clamp(sx - 0.5, 0.0, w - 1.0);
      const double fy = std::clamp(sy - 0.5, 0.0, h - 1.0);
      const int x0 = static_cast<int>(fx);
      const int y0 = static_cast<int>(fy);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double wx = fx - x0;
      const double wy = fy - y0;
      const int xs[4] = {x0, x1, x0, x1};
      const int ys[4] = {y0, y0, y1, y1};
      const double ws[4] = {(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy};
      double acc[3] = {0, 0, 0};
      double weight = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double a = ws[k] * p.at(xs[k], ys[k], 3);
        weight += a;
        for (int c = 0; c < 3; ++c) acc[c] += a * p.at(xs[k], ys[k], c);
      }
      for (int c = 0; c < 3; ++c) {
        const double v = weight > 0.0 ? acc[c] / weight : p.at(ix, iy, c);
        out.patch.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

// Exact sine/cosine at multiples of 90 degrees so right-angle rotations are
// pure index permutations.
std::pair<double, double> cos_sin(double degrees) {
  const double quarter = degrees / 90.0;
  const double nearest = std::round(quarter);
  if (std::abs(quarter - nearest) < 1e-12) {
    const int k = static_cast<int>(((static_cast<long long>(nearest) % 4) + 4) % 4);
    constexpr double kCos[4] = {1, 0, -1, 0};
    constexpr double kSin[4] = {0, 1, 0, -1};
    return {kCos[k], kSin[k]};
  }
  const double rad = degrees * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

Rect focus_region(const ExemplarCrop& crop) {
  if (crop.target.any()) return crop.target.bounding_box();
  Rect box{crop.patch.width(), crop.patch.height(), 0, 0};
  int x1 = -1, y1 = -1;
  for (int y = 0; y < crop.patch.height(); ++y) {
    for (int x = 0; x < crop.patch.width(); ++x) {
      if (crop.patch.at(x, y, 3) > 0) {
        box.x = std::min(box.x, x);
        box.y = std::min(box.y, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) return {0, 0, crop.patch.width(), crop.patch.height()};
  box.width = x1 - box.x + 1;
  box.height = y1 - box.y + 1;
  return box;
}

}  // namespace

ExemplarCrop crop_surroundings(const ExemplarCrop& crop, double left, double top, double right, double bottom) {
  const Rect focus = focus_region(crop);
  const int w = crop.patch.width();
  const int h = crop.patch.height();
  const int cut_left = static_cast<int>(std::floor(left * focus.x));
  const int cut_top = static_cast<int>(std::floor(top * focus.y));
  const int cut_right = static_cast<int>(std::floor(right * (w - focus.right())));
  const int cut_bottom = static_cast<int>(std::floor(bottom * (h - focus.bottom())));
  const Rect keep{cut_left, cut_top, w - cut_left - cut_right, h - cut_top - cut_bottom};
  if (keep == Rect{0, 0, w, h}) return crop;
  return {crop_image(crop.patch, keep), crop.cls, crop_mask(crop.target, keep), crop.source_id};
}

ExemplarCrop rotate_exemplar(const ExemplarCrop& crop, double angle_degrees) {
  const auto [c, s] = cos_sin(angle_degrees);
  if (c == 1.0 && s == 0.0) return crop;
  const double w = crop.patch.width();
  const double h = crop.patch.height();
  const double out_w_exact = std::abs(w * c) + std::abs(h * s);
  const double out_h_exact = std::abs(w * s) + std::abs(h * c);
  const Size out{std::max(1, static_cast<int>(std::ceil(out_w_exact - 1e-9))),
                 std::max(1, static_cast<int>(std::ceil(out_h_exact - 1e-9)))};
  const double cx_in = w / 2.0, cy_in = h / 2.0;
  const double cx_out = out.width / 2.0, cy_out = out.height / 2.0;
  // Counter-clockwise as displayed (y axis pointing down).
  return warp(crop, out, [&](double ox, double oy) {
    const double dx = ox - cx_out;
    const double dy = oy - cy_out;
    return std::pair{dx * c - dy * s + cx_in, dx * s + dy * c + cy_in};
  });
}

Size scaled_extent(Size size, double scale) {
  return {std::max(1, static_cast<int>(std::lround(size.width * scale))),
          std::max(1, static_cast<int>(std::lround(size.height * scale)))};
}

ExemplarCrop scale_exemplar(const ExemplarCrop& crop, double scale) {
  const Size out = scaled_extent(crop.patch.size(), scale);
  if (out == crop.patch.size()) return crop;
  const double rx = static_cast<double>(crop.patch.width()) / out.width;
  const double ry = static_cast<double>(crop.patch.height()) / out.height;
  return warp(crop, out, [&](double ox, double oy) { return std::pair{ox * rx, oy * ry}; });
}

TransformedExemplar apply_transform(const ExemplarCrop& crop, const TransformDraws& draws) {
  ExemplarCrop t = crop_surroundings(crop, draws.crop_left, draws.crop_top, draws.crop_right, draws.crop_bottom);
  t = rotate_exemplar(t, draws.angle_degrees);
  t = scale_exemplar(t, draws.scale);
  return {std::move(t.patch), std::move(t.target), draws.x, draws.y};
}

TransformOutcome transform_exemplar(const ExemplarCrop& crop, const SynthSettings& settings, RandomStream& rng) {
  TransformOutcome outcome;
  TransformDraws& d = outcome.draws;
  const auto& sc = settings.surround_crop;
  d.crop_left = rng.uniform(sc.min, sc.max);
  d.crop_top = rng.uniform(sc.min, sc.max);
  d.crop_right = rng.uniform(sc.min, sc.max);
  d.crop_bottom = rng.uniform(sc.min, sc.max);
  d.angle_degrees = rng.uniform(settings.rotation_degrees.min, settings.rotation_degrees.max);

  ExemplarCrop t = crop_surroundings(crop, d.crop_left, d.crop_top, d.crop_right, d.crop_bottom);
  t = rotate_exemplar(t, d.angle_degrees);

  bool fits = false;
  for (int attempt = 0; attempt < settings.scale_retries; ++attempt) {
    const double s = rng.uniform(settings.scale.min, settings.scale.max);
    const Size extent = scaled_extent(t.patch.size(), s);
    if (extent.width <= settings.canvas.width && extent.height <= settings.canvas.height) {
      d.scale = s;
      fits = true;
      break;
    }
    d.rejected_scales.push_back(s);
  }
  if (!fits) return outcome;

  t = scale_exemplar(t, d.scale);
  d.x = static_cast<int>(rng.uniform_int(0, settings.canvas.width - t.patch.width()));
  d.y = static_cast<int>(rng.uniform_int(0, settings.canvas.height - t.patch.height()));
  outcome.exemplar = TransformedExemplar{std::move(t.patch), std::move(t.target), d.x, d.y};
  return outcome;
}

namespace {

bool alpha_overlaps(const TransformedExemplar& e, int x, int y, const BinaryMask& occupied) {
  for (int py = 0; py < e.patch.height(); ++py) {
    for (int px = 0; px < e.patch.width(); ++px) {
      if (e.patch.at(px, py, 3) > 0 && occupied.get_or_false(x + px, y + py)) return true;
    }
  }
  return false;
}

BinaryMask placed_alpha(const TransformedExemplar& e, Size canvas) {
  BinaryMask out(canvas.width, canvas.height);
  for (int py = 0; py < e.patch.height(); ++py) {
    for (int px = 0; px < e.patch.width(); ++px) {
      const int cx = e.x + px, cy = e.y + py;
      if (e.patch.at(px, py, 3) > 0 && cx >= 0 && cy >= 0 && cx < canvas.width && cy < canvas.height) {
        out.set(cx, cy);
      }
    }
  }
  return out;
}

struct Layer {
  std::size_t record;
  ExemplarClass cls;
  TransformedExemplar exemplar;
};

SyntheticSample compose(RasterImage background, const std::vector<Layer>& layers, GenerationLog log) {
  SyntheticSample sample;
  const Size canvas = background.size();
  sample.image = std::move(background);
  for (const auto& layer : layers) {
    const auto& e = layer.exemplar;
    for (int py = 0; py < e.patch.height(); ++py) {
      for (int px = 0; px < e.patch.width(); ++px) {
        const int cx = e.x + px, cy = e.y + py;
        if (cx < 0 || cy < 0 || cx >= canvas.width || cy >= canvas.height) continue;
        const int a = e.patch.at(px, py, 3);
        if (a == 0) continue;
        for (int c = 0; c < 3; ++c) {
          const int bg = sample.image.at(cx, cy, c);
          sample.image.at(cx, cy, c) = static_cast<std::uint8_t>((a * e.patch.at(px, py, c) + (255 - a) * bg + 127) / 255);
        }
      }
    }
  }
  // Later pastes occlude earlier instances wherever their alpha is non-zero.
  BinaryMask covered(canvas.width, canvas.height);
  std::vector<std::pair<Instance, std::size_t>> reversed;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    if (const auto label = instance_label(it->cls)) {
      BinaryMask mask = place_mask(it->exemplar.target, canvas, it->exemplar.x, it->exemplar.y);
      mask_subtract_into(mask, covered);
      if (mask.any()) reversed.emplace_back(Instance{*label, std::move(mask), std::nullopt}, it->record);
    }
    mask_union_into(covered, placed_alpha(it->exemplar, canvas));
  }
  for (auto it = reversed.rbegin(); it != reversed.rend(); ++it) {
    sample.instances.push_back(std::move(it->first));
    sample.instance_sources.push_back(it->second);
  }
  sample.log = std::move(log);
  return sample;
}

}  // namespace

SyntheticSample generate_sample(const std::vector<ExemplarCrop>& library, const BackgroundPool& pool,
                                const SynthSettings& settings, std::size_t sample_index) {
  validate(settings);
  RandomStream background_rng(derive_seed(settings.seed, "synth.background", sample_index));
  RandomStream exemplar_rng(derive_seed(settings.seed, "synth.exemplars", sample_index));

  GenerationLog log;
  log.seed = settings.seed;
  log.sample_index = sample_index;
  log.canvas = settings.canvas;
  Collage collage = build_background(pool, settings.canvas, background_rng, settings.background_grid);
  log.cells = collage.cells;
  log.requested_exemplars =
      static_cast<int>(exemplar_rng.uniform_int(settings.exemplar_count.min, settings.exemplar_count.max));
  if (log.requested_exemplars > 0 && library.empty()) {
    throw Error(ErrorKind::Configuration, "exemplar library is empty");
  }

  BinaryMask occupied(settings.canvas.width, settings.canvas.height);
  std::vector<Layer> layers;
  for (int i = 0; i < log.requested_exemplars; ++i) {
    ExemplarRecord record;
    record.library_index =
        static_cast<std::size_t>(exemplar_rng.uniform_int(0, static_cast<std::int64_t>(library.size()) - 1));
    TransformOutcome outcome = transform_exemplar(library[record.library_index], settings, exemplar_rng);
    record.draws = std::move(outcome.draws);
    if (!outcome.exemplar) {
      record.skipped = true;
      log.warnings.push_back("exemplar " + std::to_string(i) + " (library " + std::to_string(record.library_index) +
                             ") skipped: no scale within " + std::to_string(settings.scale_retries) +
                             " draws fits the canvas");
      log.exemplars.push_back(std::move(record));
      continue;
    }
    TransformedExemplar& e = *outcome.exemplar;
    for (int retry = 0; retry < settings.placement_retries && alpha_overlaps(e, e.x, e.y, occupied); ++retry) {
      record.draws.rejected_placements.emplace_back(e.x, e.y);
      e.x = static_cast<int>(exemplar_rng.uniform_int(0, settings.canvas.width - e.patch.width()));
      e.y = static_cast<int>(exemplar_rng.uniform_int(0, settings.canvas.height - e.patch.height()));
    }
    record.draws.x = e.x;
    record.draws.y = e.y;
    mask_union_into(occupied, placed_alpha(e, settings.canvas));
    layers.push_back({log.exemplars.size(), library[record.library_index].cls, std::move(e)});
    log.exemplars.push_back(std::move(record));
  }
  return compose(std::move(collage.image), layers, std::move(log));
}

SyntheticSample replay_sample(const std::vector<ExemplarCrop>& library, const BackgroundPool& pool,
                              const GenerationLog& log) {
  RasterImage background = render_background(pool, log.canvas, log.cells);
  std::vector<Layer> layers;
  for (std::size_t i = 0; i < log.exemplars.size(); ++i) {
    const auto& record = log.exemplars[i];
    if (record.skipped) continue;
    if (record.library_index >= library.size()) {
      throw Error(ErrorKind::OutOfRange, "generation log references a missing library entry");
    }
    const auto& crop = library[record.library_index];
    layers.push_back({i, crop.cls, apply_transform(crop, record.draws)});
  }
  return compose(std::move(background), layers, log);
}

std::vector<SyntheticSample> generate_batch(const std::vector<ExemplarCrop>& library, const BackgroundPool& pool,
                                            const SynthSettings& settings, std::size_t first, std::size_t count,
                                            unsigned workers) {
  std::vector<SyntheticSample> samples(count);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::vector<std::exception_ptr> errors(workers);
  auto run = [&](unsigned worker) {
    try {
      for (std::size_t i = worker; i < count; i += workers) {
        samples[i] = generate_sample(library, pool, settings, first + i);
      }
    } catch (...) {
      errors[worker] = std::current_exception();
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(run, w);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return samples;
}

json log_to_json(const GenerationLog& log) {
  json cells = json::array();
  for (const auto& c : log.cells) {
    cells.push_back({{"cell", {c.cell.x, c.cell.y, c.cell.width, c.cell.height}},
                     {"pool_index", c.pool_index},
                     {"resized", {c.resized.width, c.resized.height}},
                     {"crop", {c.crop_x, c.crop_y}}});
  }
  json exemplars = json::array();
  for (const auto& r : log.exemplars) {
    const auto& d = r.draws;
    json placements = json::array();
    for (const auto& [x, y] : d.rejected_placements) placements.push_back({x, y});
    exemplars.push_back({{"library_index", r.library_index},
                         {"skipped", r.skipped},
                         {"surround_crop", {d.crop_left, d.crop_top, d.crop_right, d.crop_bottom}},
                         {"angle_degrees", d.angle_degrees},
                         {"rejected_scales", d.rejected_scales},
                         {"scale", d.scale},
                         {"rejected_placements", std::move(placements)},
                         {"x", d.x},
                         {"y", d.y}});
  }
  return {{"seed", log.seed},
          {"sample_index", log.sample_index},
          {"canvas", {log.canvas.width, log.canvas.height}},
          {"cells", std::move(cells)},
          {"requested_exemplars", log.requested_exemplars},
          {"exemplars", std::move(exemplars)},
          {"warnings", log.warnings}};
}

GenerationLog log_from_json(const json& node) {
  try {
    GenerationLog log;
    log.seed = node.at("seed").get<std::uint64_t>();
    log.sample_index = node.at("sample_index").get<std::size_t>();
    log.canvas = {node.at("canvas").at(0).get<int>(), node.at("canvas").at(1).get<int>()};
    for (const auto& c : node.at("cells")) {
      CollageCell cell;
      const auto& r = c.at("cell");
      cell.cell = {r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(), r.at(3).get<int>()};
      cell.pool_index = c.at("pool_index").get<std::size_t>();
      cell.resized = {c.at("resized").at(0).get<int>(), c.at("resized").at(1).get<int>()};
      cell.crop_x = c.at("crop").at(0).get<int>();
      cell.crop_y = c.at("crop").at(1).get<int>();
      log.cells.push_back(cell);
    }
    log.requested_exemplars = node.at("requested_exemplars").get<int>();
    for (const auto& e : node.at("exemplars")) {
      ExemplarRecord r;
      r.library_index = e.at("library_index").get<std::size_t>();
      r.skipped = e.at("skipped").get<bool>();
      const auto& sc = e.at("surround_crop");
      r.draws.crop_left = sc.at(0).get<double>();
      r.draws.crop_top = sc.at(1).get<double>();
      r.draws.crop_right = sc.at(2).get<double>();
      r.draws.crop_bottom = sc.at(3).get<double>();
      r.draws.angle_degrees = e.at("angle_degrees").get<double>();
      r.draws.rejected_scales = e.at("rejected_scales").get<std::vector<double>>();
      r.draws.scale = e.at("scale").get<double>();
      for (const auto& p : e.at("rejected_placements")) {
        r.draws.rejected_placements.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
      }
      r.draws.x = e.at("x").get<int>();
      r.draws.y = e.at("y").get<int>();
      log.exemplars.push_back(std::move(r));
    }
    log.warnings = node.at("warnings").get<std::vector<std::string>>();
    return log;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("generation log: ") + e.what());
  }
}

Size short_edge_size(Size size, int short_edge) {
  if (short_edge < 1) throw Error(ErrorKind::OutOfRange, "short-edge size must be positive");
  if (size.width <= size.height) {
    const long long h = std::llround(static_cast<double>(size.height) * short_edge / size.width);
    return {short_edge, static_cast<int>(std::max(1LL, h))};
  }
  const long long w = std::llround(static_cast<double>(size.width) * short_edge / size.height);
  return {static_cast<int>(std::max(1LL, w)), short_edge};
}

Augmented basic_augment(const RasterImage& image, const std::vector<Instance>& instances, const AugmentSpec& spec,
                        RandomStream& rng) {
  if (spec.short_edge_sizes.empty()) throw Error(ErrorKind::Configuration, "short-edge size list is empty");
  Augmented out;
  out.short_edge = spec.short_edge_sizes[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(spec.short_edge_sizes.size()) - 1))];
  const Size scaled = short_edge_size(image.size(), out.short_edge);
  out.flipped = rng.bernoulli(spec.hflip_probability);
  const Size crop = spec.crop_size.value_or(scaled);
  if (crop.width < 1 || crop.height < 1 || crop.width > scaled.width || crop.height > scaled.height) {
    throw Error(ErrorKind::OutOfRange, "crop size exceeds the rescaled image");
  }
  out.crop = {static_cast<int>(rng.uniform_int(0, scaled.width - crop.width)),
              static_cast<int>(rng.uniform_int(0, scaled.height - crop.height)), crop.width, crop.height};

  RasterImage img = resize_bilinear(image, scaled);
  if (out.flipped) img = flip_horizontal(img);
  out.image = out.crop == Rect{0, 0, scaled.width, scaled.height} ? std::move(img) : crop_image(img, out.crop);
  for (const auto& inst : instances) {
    if (inst.mask.size() != image.size()) {
      throw Error(ErrorKind::DimensionMismatch, "instance mask size differs from the image");
    }
    BinaryMask m = resize_nearest(inst.mask, scaled);
    if (out.flipped) m = flip_horizontal(m);
    m = crop_mask(m, out.crop);
    if (m.any()) out.instances.push_back({inst.label, std::move(m), inst.confidence});
  }
  return out;
}

}  // namespace damagekit::synth
