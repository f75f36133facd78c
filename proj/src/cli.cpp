#include "damagekit/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "damagekit/image_io.hpp"
#include "damagekit/json_codec.hpp"
#include "damagekit/random.hpp"

namespace damagekit::cli {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::Configuration:
      return kUsageError;
    case ErrorKind::Convergence:
      return kRuntimeError;
    default:
      return kDataError;
  }
}

void EventLog::emit(const std::string& event, json fields) {
  json line{{"event", event}};
  for (auto& [k, v] : fields.items()) line[k] = v;
  stream_ << line.dump() << "\n";
  stream_.flush();
}

std::string image_id_for(const annot::AnnotatedImage& image) { return image.image_path; }

std::string file_stem_for(const std::string& image_id) {
  std::string stem = fs::path(image_id).replace_extension().generic_string();
  for (auto& c : stem) {
    if (c == '/' || c == '\\' || c == ':' || c == ' ') c = '_';
  }
  return stem.empty() ? "image" : stem;
}

namespace {

std::string window_file(std::size_t index, const char* ext) {
  std::ostringstream os;
  os << "window_" << std::setw(4) << std::setfill('0') << index << ext;
  return os.str();
}

std::string sample_name(std::size_t index) {
  std::ostringstream os;
  os << "sample_" << std::setw(6) << std::setfill('0') << index;
  return os.str();
}

Size parse_size(const std::string& text, const std::string& option) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) {
      const int v = std::stoi(text);
      return {v, v};
    }
    return {std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorKind::Usage, option + ": expected WIDTHxHEIGHT or N, got '" + text + "'");
  }
}

blend::Offset parse_offset(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument("comma");
    return {std::stoi(text.substr(0, comma)), std::stoi(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorKind::Usage, "--offset: expected dx,dy, got '" + text + "'");
  }
}

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorKind::Usage, "--thresholds: bad value '" + item + "'");
    }
  }
  return out;
}

eval::ClassFilter parse_class_filter(const std::string& text) {
  if (text == "all") return std::nullopt;
  if (auto label = try_parse_class_label(text)) return *label;
  throw Error(ErrorKind::Usage, "--class: expected damage, dirt or all");
}

bool looks_like_manifest(const std::string& text) {
  try {
    const json doc = json::parse(text);
    return doc.is_object() && doc.contains("version") && doc.contains("images");
  } catch (const json::exception&) {
    return false;
  }
}

std::uint64_t require_seed(const PipelineConfig& cfg, const char* command) {
  if (!cfg.seed) throw Error(ErrorKind::Configuration, std::string(command) + ": a seed is required (--seed or /seed)");
  return *cfg.seed;
}

tile::MockPerturbation perturbation_for(const PipelineConfig& cfg, const std::string& image_id) {
  return {cfg.mock.dilation_radius, derive_seed(cfg.seed.value_or(0), "mock-detect:" + image_id),
          cfg.mock.false_positive_rate};
}

const annot::AnnotatedImage& find_image(const std::vector<annot::AnnotatedImage>& images, const std::string& id) {
  if (id.empty()) {
    if (images.size() == 1) return images.front();
    throw Error(ErrorKind::Usage, "--image-id is required when the annotations hold several images");
  }
  for (const auto& img : images) {
    if (image_id_for(img) == id) return img;
  }
  throw Error(ErrorKind::Usage, "no annotated image with id '" + id + "'");
}

std::vector<fs::path> json_files_in(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<annot::AnnotatedImage> load_annotations(const fs::path& path, const fs::path& images_root,
                                                    const std::string& class_key) {
  const std::string text = read_text_file(path);
  if (looks_like_manifest(text)) {
    auto images = annot::read_manifest(text);
    bool unresolved = std::any_of(images.begin(), images.end(), [](const auto& i) { return !i.has_size(); });
    if (unresolved && !images_root.empty()) annot::resolve_image_sizes(images, images_root);
    return images;
  }
  auto images = annot::parse_via(text, {class_key});
  if (!images_root.empty()) annot::resolve_image_sizes(images, images_root);
  return images;
}

std::vector<annot::AnnotatedImage> evaluation_images(const std::vector<annot::AnnotatedImage>& images) {
  std::vector<annot::AnnotatedImage> validation;
  for (const auto& img : images) {
    if (img.split == annot::Split::Validation) validation.push_back(img);
  }
  return validation.empty() ? images : validation;
}

tile::WindowIndex run_tile(const RasterImage& image, const std::string& image_id, const TilingConfig& tiling,
                           const fs::path& out_dir, bool write_images) {
  tile::WindowIndex index;
  index.image_id = image_id;
  index.plan = tile::plan_tiling(image.size(), tiling.window, tiling.overlap);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < index.plan.windows.size(); ++i) {
    const std::string name = window_file(i, ".png");
    index.files.push_back(name);
    if (write_images) save_image(crop_image(image, index.plan.windows[i].rect()), out_dir / name);
  }
  write_text_file(out_dir / "windows.json", tile::write_window_index(index.plan, image_id, index.files));
  return index;
}

void run_mock_detect_windows(const std::vector<Instance>& ground_truth, const tile::WindowIndex& index,
                             const tile::MockPerturbation& perturbation, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < index.plan.windows.size(); ++i) {
    const auto& w = index.plan.windows[i];
    const auto fragments = tile::clip_to_window(ground_truth, w);
    const auto preds = tile::mock_detect(fragments, {w.width, w.height}, perturbation, index.image_id,
                                         tile::Frame::window_at(static_cast<int>(i)));
    write_text_file(out_dir / window_file(i, ".json"), tile::write_predictions(preds));
  }
}

tile::PredictionSet run_merge(const tile::WindowIndex& index, const fs::path& predictions_dir,
                              const tile::MergeSettings& settings, const fs::path& out_file) {
  std::vector<tile::PredictionSet> sets;
  for (const auto& file : json_files_in(predictions_dir)) {
    sets.push_back(tile::read_predictions(read_text_file(file)));
  }
  auto merged = tile::merge_predictions(sets, index.plan, settings);
  if (merged.image_id.empty()) merged.image_id = index.image_id;
  write_text_file(out_file, tile::write_predictions(merged));
  return merged;
}

eval::ThresholdSweep run_eval(const std::vector<eval::EvalPair>& pairs, const EvalConfig& config,
                              const fs::path& out_dir) {
  const auto sweep = eval::sweep(pairs, config.thresholds, config.class_filter);
  write_text_file(out_dir / "sweep.csv", eval::sweep_to_csv(sweep));
  json report = json::parse(eval::sweep_to_json(sweep, config.class_filter));
  json images = json::array();
  for (const auto& p : pairs) images.push_back(p.image_id);
  report["images"] = std::move(images);
  write_text_file(out_dir / "report.json", report.dump(2) + "\n");
  return sweep;
}

namespace {

// Options shared by several subcommands; unset values fall back to config.
struct Overrides {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> window;
  std::optional<int> overlap;
  std::optional<int> min_overlap;
  std::optional<double> downscale;
  std::optional<int> dilation;
  std::optional<double> fp_rate;
  std::optional<std::string> thresholds;
  std::optional<std::string> class_filter;
  std::optional<std::string> out;
  std::optional<std::string> annotations;
  std::optional<std::string> images_root;
  std::optional<std::string> library;
  std::optional<std::string> backgrounds;
  std::optional<std::size_t> count;
  std::optional<unsigned> workers;
  std::optional<std::string> canvas;
  std::optional<double> tolerance;
  std::optional<int> max_iterations;
  bool overlays = false;

  PipelineConfig resolve() const {
    PipelineConfig cfg = config_file.empty() ? PipelineConfig{} : load_config(config_file);
    if (seed) cfg.seed = *seed;
    if (window) cfg.tiling.window = parse_size(*window, "--window");
    if (overlap) cfg.tiling.overlap = *overlap;
    if (min_overlap) cfg.tiling.min_overlap_pixels = static_cast<std::size_t>(std::max(1, *min_overlap));
    if (downscale) cfg.tiling.downscale_factor = *downscale;
    if (dilation) cfg.mock.dilation_radius = *dilation;
    if (fp_rate) cfg.mock.false_positive_rate = *fp_rate;
    if (thresholds) cfg.eval.thresholds = parse_thresholds(*thresholds);
    if (class_filter) cfg.eval.class_filter = parse_class_filter(*class_filter);
    if (overlays) cfg.eval.overlays = true;
    if (out) cfg.paths.output_dir = *out;
    if (annotations) cfg.paths.annotations = *annotations;
    if (images_root) cfg.paths.dataset_root = *images_root;
    if (library) cfg.paths.exemplar_library = *library;
    if (backgrounds) cfg.paths.background_pool = *backgrounds;
    if (count) cfg.synth.count = *count;
    if (workers) cfg.synth.workers = *workers;
    if (canvas) cfg.synth.settings.canvas = parse_size(*canvas, "--canvas");
    if (tolerance) cfg.blend.tolerance = *tolerance;
    if (max_iterations) cfg.blend.max_iterations = *max_iterations;
    return cfg;
  }
};

void require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw Error(ErrorKind::Usage, std::string(what) + " is required");
}

fs::path output_dir(const PipelineConfig& cfg) {
  require_path(cfg.paths.output_dir, "--out");
  return cfg.paths.output_dir;
}

std::vector<eval::EvalPair> pairs_from_files(const std::vector<annot::AnnotatedImage>& images,
                                             const std::vector<fs::path>& prediction_files) {
  std::vector<tile::PredictionSet> sets;
  for (const auto& f : prediction_files) {
    if (fs::is_directory(f)) {
      for (const auto& inner : json_files_in(f)) sets.push_back(tile::read_predictions(read_text_file(inner)));
    } else {
      sets.push_back(tile::read_predictions(read_text_file(f)));
    }
  }
  std::vector<eval::EvalPair> pairs;
  for (const auto& img : images) {
    eval::EvalPair pair;
    pair.image_id = image_id_for(img);
    pair.ground_truth = img.ground_truth();
    const auto it = std::find_if(sets.begin(), sets.end(), [&](const auto& s) { return s.image_id == pair.image_id; });
    if (it != sets.end()) {
      if (!it->frame.is_full()) {
        throw Error(ErrorKind::DimensionMismatch, pair.image_id + ": evaluation needs full-frame (merged) predictions");
      }
      pair.predictions = *it;
    } else {
      pair.predictions = {pair.image_id, {img.width, img.height}, tile::Frame::full(), {}};
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

void write_overlays(const std::vector<eval::EvalPair>& pairs, const std::vector<annot::AnnotatedImage>& images,
                    const PipelineConfig& cfg, double threshold, const fs::path& out_dir) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const fs::path p(images[i].image_path);
    const RasterImage image = load_image(p.is_absolute() ? p : cfg.paths.dataset_root / p);
    save_image(eval::render_overlay(image, pairs[i], threshold, cfg.eval.class_filter),
               out_dir / "overlays" / (file_stem_for(pairs[i].image_id) + ".png"));
  }
}

json summary_json(const eval::ThresholdSweep& sweep) {
  const auto& first = sweep.rows.front();
  auto m = [](const eval::Metric& v) { return v ? json(*v) : json(nullptr); };
  json s{{"threshold", first.threshold},
         {"precision", m(first.pr.precision)},
         {"recall", m(first.pr.recall)},
         {"aggregate_iou", m(first.iou.iou())}};
  if (const auto* best = sweep.best_iou()) s["best_iou"] = *best->iou.iou();
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  EventLog log(err);
  CLI::App app{"Structural damage inspection toolkit", "damagekit"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config_file, "Declarative JSON config; flags override its keys");

  // validate-annotations
  auto* validate_cmd = app.add_subcommand("validate-annotations", "Parse VIA or manifest annotations and report counts");
  std::string va_class_key = "class";
  std::optional<std::string> va_manifest_out;
  std::optional<double> va_split;
  validate_cmd->add_option("--via,--annotations", o.annotations, "VIA project or canonical manifest")->required();
  validate_cmd->add_option("--images-root", o.images_root, "Directory the image paths are relative to");
  validate_cmd->add_option("--class-key", va_class_key, "Region attribute holding the class");
  validate_cmd->add_option("--manifest-out", va_manifest_out, "Write the canonical manifest here");
  validate_cmd->add_option("--split-fraction", va_split, "Validation fraction for a seeded split");
  validate_cmd->add_option("--seed", o.seed, "Master seed");

  // blend
  auto* blend_cmd = app.add_subcommand("blend", "Poisson seamless cloning of a source patch into a destination");
  std::string b_src, b_dst, b_mask, b_offset = "0,0", b_out;
  std::optional<std::string> b_label, b_annotation_out;
  blend_cmd->add_option("--src", b_src, "Source image")->required();
  blend_cmd->add_option("--dst", b_dst, "Destination image")->required();
  blend_cmd->add_option("--mask", b_mask, "Paste region in destination coordinates (nonzero = inside)")->required();
  blend_cmd->add_option("--offset", b_offset, "dx,dy mapping destination to source coordinates");
  blend_cmd->add_option("--out", b_out, "Output image")->required();
  blend_cmd->add_option("--tolerance", o.tolerance, "Relative residual tolerance");
  blend_cmd->add_option("--max-iterations", o.max_iterations, "Iteration cap");
  blend_cmd->add_option("--label", b_label, "Class of the pasted region (damage|dirt) for --annotation-out");
  blend_cmd->add_option("--annotation-out", b_annotation_out, "Write a manifest entry for the pasted region");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic collage training samples");
  synth_cmd->add_option("--library", o.library, "Exemplar library directory");
  synth_cmd->add_option("--backgrounds", o.backgrounds, "Background image pool directory");
  synth_cmd->add_option("--out", o.out, "Output directory");
  synth_cmd->add_option("--seed", o.seed, "Master seed (required)");
  synth_cmd->add_option("--count", o.count, "Number of samples");
  synth_cmd->add_option("--workers", o.workers, "Worker threads");
  synth_cmd->add_option("--canvas", o.canvas, "Canvas WIDTHxHEIGHT");

  // tile
  auto* tile_cmd = app.add_subcommand("tile", "Split an image into overlapping windows");
  std::string t_image;
  std::optional<std::string> t_image_id;
  bool t_index_only = false;
  tile_cmd->add_option("--image", t_image, "Input image")->required();
  tile_cmd->add_option("--image-id", t_image_id, "Identifier recorded in the window index");
  tile_cmd->add_option("--out", o.out, "Output directory");
  tile_cmd->add_option("--window", o.window, "Window WIDTHxHEIGHT or N");
  tile_cmd->add_option("--overlap", o.overlap, "Overlap in pixels");
  tile_cmd->add_flag("--index-only", t_index_only, "Write windows.json without window images");

  // mock-detect
  auto* mock_cmd = app.add_subcommand("mock-detect", "Seeded stand-in detector driven by ground truth");
  std::optional<std::string> m_image_id, m_windows;
  mock_cmd->add_option("--annotations", o.annotations, "VIA project or canonical manifest")->required();
  mock_cmd->add_option("--images-root", o.images_root, "Directory the image paths are relative to");
  mock_cmd->add_option("--image-id", m_image_id, "Annotated image to use");
  mock_cmd->add_option("--windows", m_windows, "windows.json from the tile command; omit for full frame");
  mock_cmd->add_option("--out", o.out, "Output directory (windows) or file (full frame)");
  mock_cmd->add_option("--dilation", o.dilation, "Dilation radius in pixels");
  mock_cmd->add_option("--fp-rate", o.fp_rate, "Fraction of predictions that are false positives");
  mock_cmd->add_option("--seed", o.seed, "Master seed");

  // merge
  auto* merge_cmd = app.add_subcommand("merge", "Offset and merge per-window predictions");
  std::string g_windows, g_predictions, g_out;
  merge_cmd->add_option("--windows", g_windows, "windows.json from the tile command")->required();
  merge_cmd->add_option("--predictions", g_predictions, "Directory of per-window prediction files")->required();
  merge_cmd->add_option("--out", g_out, "Merged prediction file")->required();
  merge_cmd->add_option("--min-overlap", o.min_overlap, "Shared pixels needed to merge");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Any-overlap precision/recall and aggregate IoU sweep");
  std::vector<std::string> e_predictions;
  double e_overlay_threshold = 0.5;
  eval_cmd->add_option("--annotations", o.annotations, "VIA project or canonical manifest")->required();
  eval_cmd->add_option("--images-root", o.images_root, "Directory the image paths are relative to");
  eval_cmd->add_option("--predictions", e_predictions, "Full-frame prediction files or directories")->required();
  eval_cmd->add_option("--out", o.out, "Report directory");
  eval_cmd->add_option("--thresholds", o.thresholds, "Comma-separated confidence thresholds");
  eval_cmd->add_option("--class", o.class_filter, "damage, dirt or all");
  eval_cmd->add_flag("--overlays", o.overlays, "Write colour overlays (needs --images-root)");
  eval_cmd->add_option("--overlay-threshold", e_overlay_threshold, "Confidence threshold for overlays");

  // measure
  auto* measure_cmd = app.add_subcommand("measure", "Physical area of detections from a reference component");
  std::optional<std::string> r_predictions, r_mask;
  double r_length = 0.0, r_pixels = 0.0, r_threshold = 0.0;
  std::optional<std::size_t> r_instance;
  measure_cmd->add_option("--predictions", r_predictions, "Full-frame prediction file");
  measure_cmd->add_option("--mask", r_mask, "Single mask image instead of predictions");
  measure_cmd->add_option("--reference-length", r_length, "Reference component length (physical units)")->required();
  measure_cmd->add_option("--reference-pixels", r_pixels, "Reference component extent in pixels")->required();
  measure_cmd->add_option("--instance", r_instance, "Only this instance index");
  measure_cmd->add_option("--threshold", r_threshold, "Skip predictions below this confidence");

  // pipeline
  auto* pipeline_cmd = app.add_subcommand("pipeline", "annotations -> tile -> mock-detect -> merge -> eval");
  pipeline_cmd->add_option("--annotations", o.annotations, "VIA project or canonical manifest");
  pipeline_cmd->add_option("--images-root", o.images_root, "Directory the image paths are relative to");
  pipeline_cmd->add_option("--out", o.out, "Output directory");
  pipeline_cmd->add_option("--window", o.window, "Window WIDTHxHEIGHT or N");
  pipeline_cmd->add_option("--overlap", o.overlap, "Overlap in pixels");
  pipeline_cmd->add_option("--downscale", o.downscale, "Downscale factor instead of windows");
  pipeline_cmd->add_option("--dilation", o.dilation, "Mock dilation radius");
  pipeline_cmd->add_option("--fp-rate", o.fp_rate, "Mock false-positive rate");
  pipeline_cmd->add_option("--seed", o.seed, "Master seed");
  pipeline_cmd->add_option("--thresholds", o.thresholds, "Comma-separated confidence thresholds");
  pipeline_cmd->add_option("--class", o.class_filter, "damage, dirt or all");

  std::vector<std::string> argv_storage{"damagekit"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    log.emit("error", {{"kind", "usage"}, {"message", e.what()}});
    err << app.help();
    return kUsageError;
  }

  try {
    const PipelineConfig cfg = o.resolve();

    if (validate_cmd->parsed()) {
      auto images = load_annotations(cfg.paths.annotations, cfg.paths.dataset_root, va_class_key);
      std::size_t damage = 0, dirt = 0;
      for (const auto& img : images) {
        for (const auto& inst : img.instances) (inst.label == ClassLabel::Damage ? damage : dirt)++;
      }
      out << "images=" << images.size() << " instances=" << damage + dirt << " damage=" << damage
          << " dirt=" << dirt << "\n";
      if (va_split) {
        const auto manifest = annot::split_manifest(images, *va_split, cfg.seed.value_or(0));
        out << "training=" << manifest.training.size() << " validation=" << manifest.validation.size() << "\n";
        if (va_manifest_out) write_text_file(*va_manifest_out, annot::write_manifest(manifest));
      } else if (va_manifest_out) {
        write_text_file(*va_manifest_out, annot::write_manifest(images));
      }
      log.emit("validate-annotations", {{"images", images.size()}, {"damage", damage}, {"dirt", dirt}});
      return kSuccess;
    }

    if (blend_cmd->parsed()) {
      blend::CloneTask task{load_image(b_src), load_image(b_dst), load_mask(b_mask), parse_offset(b_offset)};
      const auto result = blend::solve(task, cfg.blend);
      save_image(result.image, b_out);
      log.emit("blend", {{"iterations", result.iterations}, {"residual", result.residual}, {"out", b_out}});
      if (b_annotation_out) {
        if (!b_label) throw Error(ErrorKind::Usage, "--annotation-out requires --label");
        annot::AnnotatedImage entry;
        entry.image_path = fs::path(b_out).filename().string();
        entry.width = result.image.width();
        entry.height = result.image.height();
        entry.instances.push_back({parse_class_label(*b_label), task.region});
        write_text_file(*b_annotation_out, annot::write_manifest(std::vector{entry}));
      }
      return kSuccess;
    }

    if (synth_cmd->parsed()) {
      auto settings = cfg.synth.settings;
      settings.seed = require_seed(cfg, "synth");
      require_path(cfg.paths.exemplar_library, "--library");
      require_path(cfg.paths.background_pool, "--backgrounds");
      const fs::path dir = output_dir(cfg);
      const auto library = synth::load_exemplar_library(cfg.paths.exemplar_library);
      const auto pool = synth::BackgroundPool::from_directory(cfg.paths.background_pool);
      log.emit("synth.start", {{"seed", settings.seed}, {"count", cfg.synth.count}, {"library", library.size()},
                               {"backgrounds", pool.size()}});
      const auto samples = synth::generate_batch(library, pool, settings, 0, cfg.synth.count, cfg.synth.workers);
      std::vector<annot::AnnotatedImage> manifest;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const std::string name = sample_name(i);
        save_image(s.image, dir / "images" / (name + ".png"));
        write_text_file(dir / "logs" / (name + ".json"), synth::log_to_json(s.log).dump(2) + "\n");
        annot::AnnotatedImage entry{"images/" + name + ".png", s.image.width(), s.image.height(), {}, std::nullopt};
        for (const auto& inst : s.instances) entry.instances.push_back({inst.label, inst.mask});
        manifest.push_back(std::move(entry));
        for (const auto& w : s.log.warnings) log.emit("synth.warning", {{"sample", i}, {"message", w}});
      }
      write_text_file(dir / "manifest.json", annot::write_manifest(manifest));
      log.emit("synth.done", {{"samples", samples.size()}, {"out", dir.string()}});
      return kSuccess;
    }

    if (tile_cmd->parsed()) {
      const RasterImage image = load_image(t_image);
      const std::string id = t_image_id.value_or(fs::path(t_image).filename().string());
      const auto index = run_tile(image, id, cfg.tiling, output_dir(cfg), !t_index_only);
      out << "windows=" << index.plan.windows.size() << "\n";
      log.emit("tile", {{"image_id", id}, {"windows", index.plan.windows.size()}});
      return kSuccess;
    }

    if (mock_cmd->parsed()) {
      const auto images = load_annotations(cfg.paths.annotations, cfg.paths.dataset_root);
      const auto& img = find_image(images, m_image_id.value_or(""));
      const std::string id = image_id_for(img);
      const auto gt = img.ground_truth();
      const auto perturbation = perturbation_for(cfg, id);
      if (m_windows) {
        const auto index = tile::read_window_index(read_text_file(*m_windows));
        if (index.plan.image_size != Size{img.width, img.height}) {
          throw Error(ErrorKind::DimensionMismatch, "window index size differs from the annotated image");
        }
        run_mock_detect_windows(gt, index, perturbation, output_dir(cfg));
        log.emit("mock-detect", {{"image_id", id}, {"windows", index.plan.windows.size()}});
      } else {
        const auto preds = tile::mock_detect(gt, {img.width, img.height}, perturbation, id);
        write_text_file(output_dir(cfg), tile::write_predictions(preds));
        log.emit("mock-detect", {{"image_id", id}, {"instances", preds.instances.size()}});
      }
      return kSuccess;
    }

    if (merge_cmd->parsed()) {
      const auto index = tile::read_window_index(read_text_file(g_windows));
      const auto merged = run_merge(index, g_predictions, {cfg.tiling.min_overlap_pixels}, g_out);
      log.emit("merge", {{"image_id", merged.image_id}, {"instances", merged.instances.size()}});
      return kSuccess;
    }

    if (eval_cmd->parsed()) {
      const auto images = evaluation_images(load_annotations(cfg.paths.annotations, cfg.paths.dataset_root));
      std::vector<fs::path> files(e_predictions.begin(), e_predictions.end());
      const auto pairs = pairs_from_files(images, files);
      const fs::path dir = output_dir(cfg);
      const auto sweep = run_eval(pairs, cfg.eval, dir);
      if (cfg.eval.overlays) write_overlays(pairs, images, cfg, e_overlay_threshold, dir);
      const json s = summary_json(sweep);
      out << s.dump() << "\n";
      log.emit("eval", s);
      return kSuccess;
    }

    if (measure_cmd->parsed()) {
      const eval::ReferenceScale scale(r_length, r_pixels);
      std::vector<Instance> instances;
      if (r_mask) {
        instances.push_back({ClassLabel::Damage, load_mask(*r_mask), std::nullopt});
      } else if (r_predictions) {
        instances = tile::read_predictions(read_text_file(*r_predictions)).instances;
      } else {
        throw Error(ErrorKind::Usage, "measure needs --predictions or --mask");
      }
      for (std::size_t i = 0; i < instances.size(); ++i) {
        if (r_instance && *r_instance != i) continue;
        const auto& inst = instances[i];
        if (inst.confidence && *inst.confidence < r_threshold) continue;
        const auto m = eval::measure_area(inst, scale);
        json row{{"instance", i},
                 {"class", std::string(to_string(inst.label))},
                 {"pixels", m.pixels},
                 {"area", m.area},
                 {"units_per_pixel", scale.units_per_pixel()},
                 {"assumes_fronto_parallel", m.assumes_fronto_parallel}};
        if (inst.confidence) row["confidence"] = *inst.confidence;
        out << row.dump() << "\n";
      }
      return kSuccess;
    }

    if (pipeline_cmd->parsed()) {
      require_path(cfg.paths.annotations, "--annotations");
      const fs::path dir = output_dir(cfg);
      const auto images = evaluation_images(load_annotations(cfg.paths.annotations, cfg.paths.dataset_root));
      std::vector<eval::EvalPair> pairs;
      for (const auto& img : images) {
        const std::string id = image_id_for(img);
        const std::string stem = file_stem_for(id);
        const fs::path image_path = fs::path(img.image_path).is_absolute() ? fs::path(img.image_path)
                                                                           : cfg.paths.dataset_root / img.image_path;
        const RasterImage image = load_image(image_path);
        auto gt = img.ground_truth();
        const auto perturbation = perturbation_for(cfg, id);
        tile::PredictionSet merged;
        if (cfg.tiling.downscale_factor) {
          const double f = *cfg.tiling.downscale_factor;
          const RasterImage small = tile::downscale_image(image, f);
          const auto small_preds =
              tile::mock_detect(tile::downscale_instances(gt, f), small.size(), perturbation, id);
          merged = tile::upscale_predictions(small_preds, f, image.size());
          write_text_file(dir / "merged" / (stem + ".json"), tile::write_predictions(merged));
        } else {
          const auto index = run_tile(image, id, cfg.tiling, dir / "tiles" / stem, true);
          run_mock_detect_windows(gt, index, perturbation, dir / "predictions" / stem);
          merged = run_merge(index, dir / "predictions" / stem, {cfg.tiling.min_overlap_pixels},
                             dir / "merged" / (stem + ".json"));
        }
        log.emit("pipeline.image", {{"image_id", id}, {"ground_truth", gt.size()}, {"predictions", merged.instances.size()}});
        pairs.push_back({id, std::move(gt), std::move(merged)});
      }
      const auto sweep = run_eval(pairs, cfg.eval, dir / "eval");
      const json s = summary_json(sweep);
      out << s.dump() << "\n";
      log.emit("pipeline.done", s);
      return kSuccess;
    }
  } catch (const Error& e) {
    log.emit("error", {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}});
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    log.emit("error", {{"kind", "runtime"}, {"message", e.what()}});
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace damagekit::cli
