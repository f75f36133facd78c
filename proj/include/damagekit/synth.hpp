#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "damagekit/image.hpp"
#include "damagekit/labels.hpp"
#include "damagekit/random.hpp"

namespace damagekit::synth {

enum class ExemplarClass { Damage, Dirt, CleanStructure };

std::string_view to_string(ExemplarClass cls);
ExemplarClass parse_exemplar_class(std::string_view text);
// CleanStructure pastes are background and never produce an instance.
std::optional<ClassLabel> instance_label(ExemplarClass cls);

// RGBA patch: alpha is 255 on the structure and 0 where the crop was cleared.
// `target` marks the damage or dirt pixels proper and is empty for clean crops.
struct ExemplarCrop {
  RasterImage patch;
  ExemplarClass cls = ExemplarClass::Damage;
  BinaryMask target;
  std::string source_id;
};

void validate(const ExemplarCrop& crop);

// Exemplar library on disk: <name>.png (RGBA) next to <name>.json holding
// { "class": "damage"|"dirt"|"clean", "target_mask": {rle,width,height}, "source_id" }.
std::vector<ExemplarCrop> load_exemplar_library(const std::filesystem::path& directory);
void save_exemplar(const ExemplarCrop& crop, const std::filesystem::path& directory, const std::string& name);

template <typename T>
struct Range {
  T min{};
  T max{};
};

struct SynthSettings {
  Size canvas{1024, 1024};
  Range<int> exemplar_count{2, 8};
  Range<double> scale{0.3, 2.0};
  Range<double> rotation_degrees{-180.0, 180.0};
  // Fraction of each margin around the target that may be cut away.
  Range<double> surround_crop{0.0, 0.5};
  // Collage cells per axis.
  Range<int> background_grid{1, 3};
  int placement_retries = 10;
  int scale_retries = 10;
  std::uint64_t seed = 0;
};

void validate(const SynthSettings& settings);

// Images the collage is cut from. Directory pools load lazily and cache.
class BackgroundPool {
 public:
  static BackgroundPool from_directory(const std::filesystem::path& directory);
  static BackgroundPool from_images(std::vector<RasterImage> images);

  std::size_t size() const { return entries_->size(); }
  std::shared_ptr<const RasterImage> image(std::size_t index) const;

 private:
  struct Entry {
    std::filesystem::path path;
    mutable std::shared_ptr<const RasterImage> cached;
  };
  std::shared_ptr<std::vector<Entry>> entries_;
  std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
};

// One collage cell: canvas rectangle `cell` is filled from pool image
// `pool_index`, resized to `resized` and cropped at (`crop_x`, `crop_y`).
struct CollageCell {
  Rect cell;
  std::size_t pool_index = 0;
  Size resized;
  int crop_x = 0;
  int crop_y = 0;

  friend bool operator==(const CollageCell&, const CollageCell&) = default;
};

struct Collage {
  RasterImage image;
  std::vector<CollageCell> cells;
};

Collage build_background(const BackgroundPool& pool, Size canvas, RandomStream& rng, Range<int> grid = {1, 3});
RasterImage render_background(const BackgroundPool& pool, Size canvas, const std::vector<CollageCell>& cells);

// Every random draw made while transforming one exemplar.
struct TransformDraws {
  double crop_left = 0.0;
  double crop_top = 0.0;
  double crop_right = 0.0;
  double crop_bottom = 0.0;
  double angle_degrees = 0.0;
  std::vector<double> rejected_scales;
  double scale = 1.0;
  std::vector<std::pair<int, int>> rejected_placements;
  int x = 0;
  int y = 0;

  friend bool operator==(const TransformDraws&, const TransformDraws&) = default;
};

struct TransformedExemplar {
  RasterImage patch;  // RGBA
  BinaryMask target;
  int x = 0;
  int y = 0;
};

struct TransformOutcome {
  TransformDraws draws;
  // Empty when no scale draw fit the canvas within the retry budget.
  std::optional<TransformedExemplar> exemplar;
};

// Surround crop, rotation, scale, then a uniform placement fully inside the
// canvas. Colour is resampled bilinearly; alpha and target nearest-neighbour.
TransformOutcome transform_exemplar(const ExemplarCrop& crop, const SynthSettings& settings, RandomStream& rng);

// Deterministic geometry for recorded draws; no placement bounds check.
TransformedExemplar apply_transform(const ExemplarCrop& crop, const TransformDraws& draws);

// Individual geometric steps.
ExemplarCrop crop_surroundings(const ExemplarCrop& crop, double left, double top, double right, double bottom);
ExemplarCrop rotate_exemplar(const ExemplarCrop& crop, double angle_degrees);
ExemplarCrop scale_exemplar(const ExemplarCrop& crop, double scale);
Size scaled_extent(Size size, double scale);

struct ExemplarRecord {
  std::size_t library_index = 0;
  TransformDraws draws;
  bool skipped = false;

  friend bool operator==(const ExemplarRecord&, const ExemplarRecord&) = default;
};

struct GenerationLog {
  std::uint64_t seed = 0;
  std::size_t sample_index = 0;
  Size canvas;
  std::vector<CollageCell> cells;
  int requested_exemplars = 0;
  std::vector<ExemplarRecord> exemplars;
  std::vector<std::string> warnings;

  friend bool operator==(const GenerationLog&, const GenerationLog&) = default;
};

nlohmann::json log_to_json(const GenerationLog& log);
GenerationLog log_from_json(const nlohmann::json& node);

struct SyntheticSample {
  RasterImage image;
  std::vector<Instance> instances;
  // exemplars[instance_sources[i]] produced instances[i].
  std::vector<std::size_t> instance_sources;
  GenerationLog log;
};

// Background plus k pasted exemplars, alpha-composited in draw order. Each
// sample owns the RNG stream derived from (settings.seed, sample_index).
SyntheticSample generate_sample(const std::vector<ExemplarCrop>& library, const BackgroundPool& pool,
                                const SynthSettings& settings, std::size_t sample_index = 0);

// Rebuilds a sample from its log without drawing any random numbers.
SyntheticSample replay_sample(const std::vector<ExemplarCrop>& library, const BackgroundPool& pool,
                              const GenerationLog& log);

// Samples [first, first + count) using `workers` threads; output does not
// depend on the worker count.
std::vector<SyntheticSample> generate_batch(const std::vector<ExemplarCrop>& library, const BackgroundPool& pool,
                                            const SynthSettings& settings, std::size_t first, std::size_t count,
                                            unsigned workers);

struct AugmentSpec {
  std::vector<int> short_edge_sizes;
  double hflip_probability = 0.5;
  // Empty keeps the whole rescaled image.
  std::optional<Size> crop_size;
};

struct Augmented {
  RasterImage image;
  std::vector<Instance> instances;
  int short_edge = 0;
  bool flipped = false;
  Rect crop;
};

// Aspect-preserving size whose shorter side equals `short_edge`.
Size short_edge_size(Size size, int short_edge);

// Random short-edge rescale, horizontal flip and crop; masks follow the same
// geometry (nearest neighbour) and instances emptied by the crop are dropped.
Augmented basic_augment(const RasterImage& image, const std::vector<Instance>& instances, const AugmentSpec& spec,
                        RandomStream& rng);

}  // namespace damagekit::synth
