#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "damagekit/annot.hpp"
#include "damagekit/blend.hpp"
#include "damagekit/error.hpp"
#include "damagekit/eval.hpp"
#include "damagekit/synth.hpp"
#include "damagekit/tile.hpp"

namespace damagekit::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kDataError = 2, kRuntimeError = 3 };

int exit_code_for(ErrorKind kind);

struct Paths {
  std::filesystem::path annotations;
  std::filesystem::path dataset_root;
  std::filesystem::path exemplar_library;
  std::filesystem::path background_pool;
  std::filesystem::path output_dir;
};

struct TilingConfig {
  Size window{1024, 1024};
  int overlap = 256;
  std::size_t min_overlap_pixels = 1;
  // When set, the pipeline downsamples instead of splitting into windows.
  std::optional<double> downscale_factor;
};

struct MockConfig {
  int dilation_radius = 2;
  double false_positive_rate = 0.0;
};

struct EvalConfig {
  std::vector<double> thresholds = eval::default_thresholds();
  eval::ClassFilter class_filter = eval::kDefaultClassFilter;
  bool overlays = false;
};

struct SynthRunConfig {
  synth::SynthSettings settings;
  std::size_t count = 10;
  unsigned workers = 1;
};

// Declarative run configuration. Precedence: command-line flags, then the
// config document, then these defaults.
struct PipelineConfig {
  Paths paths;
  TilingConfig tiling;
  MockConfig mock;
  EvalConfig eval;
  SynthRunConfig synth;
  blend::SolverSettings blend;
  std::optional<std::uint64_t> seed;
};

// Throws Error(Configuration) naming the JSON pointer of the offending key.
PipelineConfig config_from_json(const nlohmann::json& document);
PipelineConfig load_config(const std::filesystem::path& path);

// One JSON object per line on the error stream.
class EventLog {
 public:
  explicit EventLog(std::ostream& stream) : stream_(stream) {}
  void emit(const std::string& event, nlohmann::json fields = nlohmann::json::object());

 private:
  std::ostream& stream_;
};

// Stages shared by the individual subcommands and `pipeline`.
std::string image_id_for(const annot::AnnotatedImage& image);
std::string file_stem_for(const std::string& image_id);

tile::WindowIndex run_tile(const RasterImage& image, const std::string& image_id, const TilingConfig& tiling,
                           const std::filesystem::path& out_dir, bool write_images);
void run_mock_detect_windows(const std::vector<Instance>& ground_truth, const tile::WindowIndex& index,
                             const tile::MockPerturbation& perturbation, const std::filesystem::path& out_dir);
tile::PredictionSet run_merge(const tile::WindowIndex& index, const std::filesystem::path& predictions_dir,
                              const tile::MergeSettings& settings, const std::filesystem::path& out_file);
eval::ThresholdSweep run_eval(const std::vector<eval::EvalPair>& pairs, const EvalConfig& config,
                              const std::filesystem::path& out_dir);

// Loads a canonical manifest or a VIA document (detected by content). VIA
// images get their sizes from files under `images_root`.
std::vector<annot::AnnotatedImage> load_annotations(const std::filesystem::path& path,
                                                    const std::filesystem::path& images_root,
                                                    const std::string& class_key = "class");
// Validation images when the manifest carries a split, otherwise all images.
std::vector<annot::AnnotatedImage> evaluation_images(const std::vector<annot::AnnotatedImage>& images);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Entry point; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace damagekit::cli
