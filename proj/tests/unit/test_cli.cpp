#include <doctest.h>

#include <filesystem>
#include <map>
#include <sstream>

#include <json.hpp>

#include "damagekit/cli.hpp"
#include "damagekit/image_io.hpp"
#include "oracles.hpp"

using namespace damagekit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kFixture = DAMAGEKIT_FIXTURE_DIR;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("damagekit_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = cli::read_text_file(e.path());
  return files;
}

}  // namespace

TEST_CASE("exit codes map error kinds") {
  CHECK(cli::exit_code_for(ErrorKind::Usage) == 1);
  CHECK(cli::exit_code_for(ErrorKind::Configuration) == 1);
  CHECK(cli::exit_code_for(ErrorKind::Parse) == 2);
  CHECK(cli::exit_code_for(ErrorKind::Io) == 2);
  CHECK(cli::exit_code_for(ErrorKind::Convergence) == 3);
}

TEST_CASE("usage errors exit 1 with a structured log line") {
  const auto none = run({});
  CHECK(none.code == 1);
  const auto unknown = run({"frobnicate"});
  CHECK(unknown.code == 1);
  const auto first_line = unknown.err.substr(0, unknown.err.find('\n'));
  const auto event = json::parse(first_line);
  CHECK(event["event"] == "error");
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("config errors name the offending key") {
  const auto dir = scratch("config");
  cli::write_text_file(dir / "bad.json", R"({"tiling": {"overlapp": 3}})");
  const auto r = run({"--config", (dir / "bad.json").string(), "tile", "--image", "x.png"});
  CHECK(r.code == 1);
  CHECK(r.err.find("/tiling/overlapp") != std::string::npos);

  CHECK_THROWS_AS(cli::config_from_json(json::parse(R"({"eval": {"class_filter": "rust"}})")), Error);
  CHECK_THROWS_AS(cli::config_from_json(json::parse(R"({"mock": {"false_positive_rate": 1.0}})")), Error);
  const auto cfg = cli::config_from_json(json::parse(R"({"seed": 5, "eval": {"thresholds": {"step": 0.25}}})"));
  CHECK(cfg.seed == 5u);
  CHECK(cfg.eval.thresholds == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  cli::write_text_file(dir / "missing.json", R"({"paths": {"annotations": "nope.json"}})");
  CHECK_THROWS_AS(cli::load_config(dir / "missing.json"), Error);
}

TEST_CASE("data errors exit 2") {
  const auto dir = scratch("data");
  cli::write_text_file(dir / "broken.json", "{\"_via_img_metadata\": {");
  CHECK(run({"validate-annotations", "--via", (dir / "broken.json").string()}).code == 2);
  CHECK(run({"tile", "--image", (dir / "absent.png").string(), "--out", dir.string()}).code == 2);
}

TEST_CASE("validate-annotations on the bundled fixture") {
  const auto dir = scratch("validate");
  const auto r = run({"validate-annotations", "--via", (kFixture / "via_project.json").string(), "--images-root",
                      (kFixture / "images").string(), "--split-fraction", "0.5", "--seed", "3", "--manifest-out",
                      (dir / "manifest.json").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("images=2 instances=7 damage=5 dirt=2") != std::string::npos);
  CHECK(r.out.find("training=1 validation=1") != std::string::npos);
  const auto manifest = json::parse(cli::read_text_file(dir / "manifest.json"));
  CHECK(manifest["images"].size() == 2);
  CHECK(manifest["images"][0]["width"].get<int>() > 0);
}

TEST_CASE("blend subcommand writes the clone and an optional annotation") {
  const auto dir = scratch("blend");
  RasterImage dst(5, 5, 3, 50), src(5, 5, 3, 50);
  src.at(2, 2, 0) = 90;
  BinaryMask region(5, 5);
  region.set(2, 2);
  save_image(dst, dir / "dst.png");
  save_image(src, dir / "src.png");
  save_mask(region, dir / "mask.png");
  const auto r = run({"blend", "--src", (dir / "src.png").string(), "--dst", (dir / "dst.png").string(), "--mask",
                      (dir / "mask.png").string(), "--offset", "0,0", "--out", (dir / "out.png").string(), "--label",
                      "damage", "--annotation-out", (dir / "out.json").string()});
  REQUIRE(r.code == 0);
  const auto out = load_image(dir / "out.png");
  CHECK(out.at(2, 2, 0) == 90);  // 50 + (4 * 40) / 4
  CHECK(out.at(2, 2, 1) == 50);
  CHECK(out.at(0, 0, 0) == 50);
  const auto entry = json::parse(cli::read_text_file(dir / "out.json"));
  CHECK(entry["images"][0]["instances"][0]["class"] == "damage");

  BinaryMask edge(5, 5);
  edge.set(0, 2);
  save_mask(edge, dir / "edge.png");
  CHECK(run({"blend", "--src", (dir / "src.png").string(), "--dst", (dir / "dst.png").string(), "--mask",
             (dir / "edge.png").string(), "--out", (dir / "o2.png").string()})
            .code == 2);
}

TEST_CASE("synth with the same seed produces byte-identical trees") {
  const auto dir = scratch("synth");
  std::mt19937_64 rng(4);
  for (int i = 0; i < 3; ++i) save_image(oracle::random_image(rng, 80, 60), dir / "bg" / ("b" + std::to_string(i) + ".png"));
  synth::ExemplarCrop e;
  e.cls = synth::ExemplarClass::Damage;
  e.patch = oracle::random_image(rng, 20, 16, 4);
  e.target = BinaryMask(20, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 20; ++x) {
      e.patch.at(x, y, 3) = 255;
      if (x > 4 && y > 4) e.target.set(x, y);
    }
  e.source_id = "cli-test";
  synth::save_exemplar(e, dir / "lib", "crack");
  auto args = [&](const std::string& out, const std::string& workers) {
    return std::vector<std::string>{"synth", "--library", (dir / "lib").string(), "--backgrounds", (dir / "bg").string(),
                                    "--out", (dir / out).string(), "--seed", "7", "--count", "4", "--canvas",
                                    "128x96", "--workers", workers};
  };
  REQUIRE(run(args("a", "1")).code == 0);
  REQUIRE(run(args("b", "1")).code == 0);
  REQUIRE(run(args("c", "3")).code == 0);
  const auto a = tree(dir / "a");
  CHECK(a.size() == 9);
  CHECK(a == tree(dir / "b"));
  CHECK(a == tree(dir / "c"));
  // Seed is mandatory.
  auto no_seed = args("d", "1");
  no_seed.erase(no_seed.begin() + 7, no_seed.begin() + 9);
  CHECK(run(no_seed).code == 1);
}

TEST_CASE("pipeline on the bundled fixture: full recall and equal to manual composition") {
  const auto dir = scratch("pipeline");
  const auto config = (kFixture / "config.json").string();
  const auto r = run({"--config", config, "pipeline", "--out", (dir / "auto").string()});
  REQUIRE(r.code == 0);
  const auto summary = json::parse(r.out);
  CHECK(summary["threshold"] == 0.0);
  CHECK(summary["recall"] == 1.0);
  CHECK(summary["precision"] == 1.0);

  const auto via = (kFixture / "via_project.json").string();
  const auto images = (kFixture / "images").string();
  const auto manual = dir / "manual";
  std::vector<std::string> merged_files;
  for (const std::string id : {"bridge_a.png", "bridge_b.png"}) {
    const std::string stem = cli::file_stem_for(id);
    REQUIRE(run({"--config", config, "tile", "--image", (kFixture / "images" / id).string(), "--image-id", id, "--out",
                 (manual / "tiles" / stem).string()})
                .code == 0);
    REQUIRE(run({"--config", config, "mock-detect", "--annotations", via, "--images-root", images, "--image-id", id,
                 "--windows", (manual / "tiles" / stem / "windows.json").string(), "--out",
                 (manual / "predictions" / stem).string()})
                .code == 0);
    merged_files.push_back((manual / "merged" / (stem + ".json")).string());
    REQUIRE(run({"--config", config, "merge", "--windows", (manual / "tiles" / stem / "windows.json").string(),
                 "--predictions", (manual / "predictions" / stem).string(), "--out", merged_files.back()})
                .code == 0);
  }
  std::vector<std::string> eval_args{"--config", config, "eval", "--annotations", via, "--images-root", images,
                                     "--out", (manual / "eval").string(), "--predictions"};
  eval_args.insert(eval_args.end(), merged_files.begin(), merged_files.end());
  REQUIRE(run(eval_args).code == 0);
  CHECK(tree(dir / "auto") == tree(manual));

  // Every interchange file the pipeline wrote passes the schema validator.
  for (const auto& [path, text] : tree(manual))
    if (path.rfind("predictions/", 0) == 0 || path.rfind("merged/", 0) == 0)
      CHECK(tile::validate_predictions(text).empty());
}

TEST_CASE("measure reports physical area") {
  const auto dir = scratch("measure");
  save_mask(oracle::rect_mask(100, 100, 0, 0, 50, 20), dir / "m.png");
  const auto r = run({"measure", "--mask", (dir / "m.png").string(), "--reference-length", "200",
                      "--reference-pixels", "400"});
  REQUIRE(r.code == 0);
  const auto row = json::parse(r.out);
  CHECK(row["pixels"] == 1000);
  CHECK(row["area"] == 250.0);
  CHECK(run({"measure", "--mask", (dir / "m.png").string(), "--reference-length", "0", "--reference-pixels", "4"})
            .code == 2);
}
