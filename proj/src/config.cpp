#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "damagekit/cli.hpp"
#include "damagekit/json_codec.hpp"

namespace damagekit::cli {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& pointer, const std::string& message) {
  throw Error(ErrorKind::Configuration, "config " + pointer + ": " + message);
}

void reject_unknown(const json& node, const std::string& pointer, std::initializer_list<const char*> known) {
  if (!node.is_object()) config_error(pointer.empty() ? "/" : pointer, "expected object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : node.items()) {
    if (!allowed.count(key)) config_error(pointer + "/" + key, "unknown key");
  }
}

int get_int(const json& v, const std::string& pointer) {
  if (!v.is_number_integer()) config_error(pointer, "expected integer");
  return v.get<int>();
}

double get_number(const json& v, const std::string& pointer) {
  if (!v.is_number()) config_error(pointer, "expected number");
  return v.get<double>();
}

template <typename T>
synth::Range<T> get_range(const json& v, const std::string& pointer) {
  if (!v.is_array() || v.size() != 2) config_error(pointer, "expected [min, max]");
  if constexpr (std::is_integral_v<T>) {
    return {get_int(v[0], pointer + "/0"), get_int(v[1], pointer + "/1")};
  } else {
    return {get_number(v[0], pointer + "/0"), get_number(v[1], pointer + "/1")};
  }
}

Size get_size(const json& v, const std::string& pointer) {
  if (!v.is_array() || v.size() != 2) config_error(pointer, "expected [width, height]");
  return {get_int(v[0], pointer + "/0"), get_int(v[1], pointer + "/1")};
}

std::filesystem::path get_path(const json& v, const std::string& pointer, const std::filesystem::path& base,
                               bool must_exist) {
  if (!v.is_string()) config_error(pointer, "expected path string");
  std::filesystem::path p(v.get<std::string>());
  if (p.is_relative() && !base.empty()) p = base / p;
  if (must_exist && !std::filesystem::exists(p)) config_error(pointer, "path does not exist: " + p.string());
  return p;
}

PipelineConfig parse(const json& doc, const std::filesystem::path& base) {
  PipelineConfig cfg;
  reject_unknown(doc, "", {"seed", "paths", "tiling", "mock", "eval", "synth", "blend"});
  if (doc.contains("seed")) {
    const auto& s = doc["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      config_error("/seed", "expected non-negative integer");
    }
    cfg.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("paths")) {
    const json& p = doc["paths"];
    reject_unknown(p, "/paths", {"annotations", "dataset_root", "exemplar_library", "background_pool", "output_dir"});
    if (p.contains("annotations")) cfg.paths.annotations = get_path(p["annotations"], "/paths/annotations", base, true);
    if (p.contains("dataset_root")) cfg.paths.dataset_root = get_path(p["dataset_root"], "/paths/dataset_root", base, true);
    if (p.contains("exemplar_library")) {
      cfg.paths.exemplar_library = get_path(p["exemplar_library"], "/paths/exemplar_library", base, true);
    }
    if (p.contains("background_pool")) {
      cfg.paths.background_pool = get_path(p["background_pool"], "/paths/background_pool", base, true);
    }
    if (p.contains("output_dir")) cfg.paths.output_dir = get_path(p["output_dir"], "/paths/output_dir", base, false);
  }
  if (doc.contains("tiling")) {
    const json& t = doc["tiling"];
    reject_unknown(t, "/tiling", {"window", "overlap", "min_overlap_pixels", "downscale_factor"});
    if (t.contains("window")) cfg.tiling.window = get_size(t["window"], "/tiling/window");
    if (t.contains("overlap")) cfg.tiling.overlap = get_int(t["overlap"], "/tiling/overlap");
    if (t.contains("min_overlap_pixels")) {
      const int m = get_int(t["min_overlap_pixels"], "/tiling/min_overlap_pixels");
      if (m < 1) config_error("/tiling/min_overlap_pixels", "must be >= 1");
      cfg.tiling.min_overlap_pixels = static_cast<std::size_t>(m);
    }
    if (t.contains("downscale_factor") && !t["downscale_factor"].is_null()) {
      const double f = get_number(t["downscale_factor"], "/tiling/downscale_factor");
      if (!(f > 0.0 && f <= 1.0)) config_error("/tiling/downscale_factor", "must lie in (0, 1]");
      cfg.tiling.downscale_factor = f;
    }
  }
  if (doc.contains("mock")) {
    const json& m = doc["mock"];
    reject_unknown(m, "/mock", {"dilation_radius", "false_positive_rate"});
    if (m.contains("dilation_radius")) cfg.mock.dilation_radius = get_int(m["dilation_radius"], "/mock/dilation_radius");
    if (m.contains("false_positive_rate")) {
      cfg.mock.false_positive_rate = get_number(m["false_positive_rate"], "/mock/false_positive_rate");
      if (!(cfg.mock.false_positive_rate >= 0.0 && cfg.mock.false_positive_rate < 1.0)) {
        config_error("/mock/false_positive_rate", "must lie in [0, 1)");
      }
    }
  }
  if (doc.contains("eval")) {
    const json& e = doc["eval"];
    reject_unknown(e, "/eval", {"thresholds", "class_filter", "overlays"});
    if (e.contains("thresholds")) {
      const json& t = e["thresholds"];
      cfg.eval.thresholds.clear();
      if (t.is_array()) {
        for (std::size_t i = 0; i < t.size(); ++i) {
          cfg.eval.thresholds.push_back(get_number(t[i], "/eval/thresholds/" + std::to_string(i)));
        }
      } else if (t.is_object() && t.contains("step")) {
        const double step = get_number(t["step"], "/eval/thresholds/step");
        if (!(step > 0.0 && step <= 1.0)) config_error("/eval/thresholds/step", "must lie in (0, 1]");
        const int n = static_cast<int>(std::floor(1.0 / step + 1e-9));
        for (int i = 0; i <= n; ++i) cfg.eval.thresholds.push_back(std::min(1.0, i * step));
      } else {
        config_error("/eval/thresholds", "expected array of numbers or {\"step\": s}");
      }
    }
    if (e.contains("class_filter")) {
      if (!e["class_filter"].is_string()) config_error("/eval/class_filter", "expected \"damage\", \"dirt\" or \"all\"");
      const auto v = e["class_filter"].get<std::string>();
      if (v == "all") {
        cfg.eval.class_filter = std::nullopt;
      } else if (auto label = try_parse_class_label(v)) {
        cfg.eval.class_filter = *label;
      } else {
        config_error("/eval/class_filter", "expected \"damage\", \"dirt\" or \"all\"");
      }
    }
    if (e.contains("overlays")) {
      if (!e["overlays"].is_boolean()) config_error("/eval/overlays", "expected boolean");
      cfg.eval.overlays = e["overlays"].get<bool>();
    }
  }
  if (doc.contains("synth")) {
    const json& s = doc["synth"];
    reject_unknown(s, "/synth",
                   {"canvas", "exemplar_count", "scale", "rotation_degrees", "surround_crop", "background_grid",
                    "placement_retries", "scale_retries", "count", "workers"});
    auto& st = cfg.synth.settings;
    if (s.contains("canvas")) st.canvas = get_size(s["canvas"], "/synth/canvas");
    if (s.contains("exemplar_count")) st.exemplar_count = get_range<int>(s["exemplar_count"], "/synth/exemplar_count");
    if (s.contains("scale")) st.scale = get_range<double>(s["scale"], "/synth/scale");
    if (s.contains("rotation_degrees")) {
      st.rotation_degrees = get_range<double>(s["rotation_degrees"], "/synth/rotation_degrees");
    }
    if (s.contains("surround_crop")) st.surround_crop = get_range<double>(s["surround_crop"], "/synth/surround_crop");
    if (s.contains("background_grid")) {
      st.background_grid = get_range<int>(s["background_grid"], "/synth/background_grid");
    }
    if (s.contains("placement_retries")) st.placement_retries = get_int(s["placement_retries"], "/synth/placement_retries");
    if (s.contains("scale_retries")) st.scale_retries = get_int(s["scale_retries"], "/synth/scale_retries");
    if (s.contains("count")) {
      const int c = get_int(s["count"], "/synth/count");
      if (c < 0) config_error("/synth/count", "must be >= 0");
      cfg.synth.count = static_cast<std::size_t>(c);
    }
    if (s.contains("workers")) {
      const int w = get_int(s["workers"], "/synth/workers");
      if (w < 1) config_error("/synth/workers", "must be >= 1");
      cfg.synth.workers = static_cast<unsigned>(w);
    }
  }
  if (doc.contains("blend")) {
    const json& b = doc["blend"];
    reject_unknown(b, "/blend", {"tolerance", "max_iterations", "relaxation"});
    if (b.contains("tolerance")) cfg.blend.tolerance = get_number(b["tolerance"], "/blend/tolerance");
    if (b.contains("max_iterations")) cfg.blend.max_iterations = get_int(b["max_iterations"], "/blend/max_iterations");
    if (b.contains("relaxation") && !b["relaxation"].is_null()) {
      cfg.blend.relaxation = get_number(b["relaxation"], "/blend/relaxation");
    }
  }
  return cfg;
}

}  // namespace

PipelineConfig config_from_json(const json& document) { return parse(document, {}); }

PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::Configuration, "config file not found: " + path.string());
  }
  json doc;
  try {
    doc = parse_json(read_text_file(path), path.string());
  } catch (const Error& e) {
    throw Error(ErrorKind::Configuration, e.what());
  }
  return parse(doc, path.parent_path());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

}  // namespace damagekit::cli
