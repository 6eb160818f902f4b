#include "clis/cli.hpp"

#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "clis/clients.hpp"
#include "clis/example_pool.hpp"
#include "clis/png_io.hpp"
#include "clis/scene_graph.hpp"
#include "clis/toy_backends.hpp"
#include "test_util.hpp"

namespace clis {
namespace {

using test::insert_graph;
using test::read_file;
using test::read_lines;
using test::TempDir;
using test::two_object_graph;
using test::write_file;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = cli::run(std::move(args), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

TEST(Cli, HelpExitsZero) {
  CliResult r = run_cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("generate"), std::string::npos);
  EXPECT_NE(r.out.find("export"), std::string::npos);
}

TEST(Cli, BadInvocationsFailParseWithExitOne) {
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"--bogus"}).code, 1);
  EXPECT_EQ(run_cli({"pool"}).code, 1);  // needs build|stats
  CliResult r = run_cli({"generate", "--backend", "cloud"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--backend"), std::string::npos);
}

TEST(Cli, PoolBuildAndStats) {
  TempDir dir;
  SceneGraph sg = two_object_graph();
  write_file(dir / "annotations.jsonl", scene_graph_to_json(sg).dump() + "\n" +
                                            scene_graph_to_json(sg).dump() + "\n");

  CliResult build = run_cli({"pool", "build", "--annotations",
                             (dir / "annotations.jsonl").string(), "--out",
                             (dir / "pool.jsonl").string(), "--json"});
  ASSERT_EQ(build.code, 0) << build.err;
  nlohmann::json build_doc = nlohmann::json::parse(build.out);
  EXPECT_EQ(build_doc["documents"], 2);
  EXPECT_EQ(build_doc["examples"], 2);
  EXPECT_EQ(build_doc["keys"], 1);
  EXPECT_TRUE(build_doc["errors"].empty());

  CliResult stats =
      run_cli({"pool", "stats", "--pool", (dir / "pool.jsonl").string(), "--json"});
  ASSERT_EQ(stats.code, 0) << stats.err;
  nlohmann::json stats_doc = nlohmann::json::parse(stats.out);
  EXPECT_EQ(stats_doc["examples"], 2);
  ASSERT_EQ(stats_doc["buckets"].size(), 1u);
  EXPECT_EQ(stats_doc["buckets"][0]["subject"], "dog");
  EXPECT_EQ(stats_doc["buckets"][0]["relation"], "next to");
  EXPECT_EQ(stats_doc["buckets"][0]["count"], 2);
}

TEST(Cli, MissingInputFilesExitTwo) {
  TempDir dir;
  CliResult r = run_cli({"pool", "build", "--annotations",
                         (dir / "missing.jsonl").string(), "--out",
                         (dir / "pool.jsonl").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("cannot open"), std::string::npos) << r.err;

  EXPECT_EQ(run_cli({"report", "--run", (dir / "nowhere").string()}).code, 2);
}

TEST(Cli, ScoreLayoutAgainstItsOwnPoolIsPerfect) {
  TempDir dir;
  SceneGraph sg = two_object_graph();
  save_scene_graph(sg, dir / "scene.json");
  ExamplePool pool;
  insert_graph(pool, sg);
  save_pool(pool, dir / "pool.jsonl");

  CliResult r = run_cli({"score", "layout", "--scene", (dir / "scene.json").string(), "--pool",
                         (dir / "pool.jsonl").string(), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  nlohmann::json doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["scene_score"].get<double>(), 100.0);
  EXPECT_FALSE(doc["vacuous"].get<bool>());
  ASSERT_EQ(doc["triples"].size(), 1u);
  EXPECT_TRUE(doc["triples"][0]["matched"].get<bool>());
}

TEST(Cli, ScoreImageOnACleanToyRenderIsPerfect) {
  TempDir dir;
  SceneGraph sg = two_object_graph();
  save_scene_graph(sg, dir / "scene.json");
  toy::ToyImageGen gen;
  GeneratedImage img = gen.generate(image_request_for(sg, 5, 512, 512));
  write_png_file(img.pixels, (dir / "render.png").string());

  CliResult r = run_cli({"score", "image", "--image", (dir / "render.png").string(), "--scene",
                         (dir / "scene.json").string(), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["clis_i"].get<double>(), 100.0);
}

TEST(Cli, GenerateNeedsAConfigAndAPool) {
  TempDir dir;
  CliResult r = run_cli({"generate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("requires --config"), std::string::npos) << r.err;

  write_file(dir / "categories.json", R"({"dog": 4, "cat": 2})");
  nlohmann::json cfg = {{"out_dir", (dir / "out").string()},
                        {"categories", (dir / "categories.json").string()},
                        {"backend", "toy"}};
  write_file(dir / "config.json", cfg.dump());
  r = run_cli({"generate", "--config", (dir / "config.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("pool"), std::string::npos) << r.err;
}

nlohmann::json toy_config(const TempDir& dir, std::uint64_t seed) {
  return {{"out_dir", (dir / "out").string()},
          {"categories", (dir / "categories.json").string()},
          {"pool", (dir / "pool.jsonl").string()},
          {"lists", {{"count", 4}, {"min_len", 2}, {"max_len", 3}}},
          {"images_per_graph", 2},
          {"image_width", 64},
          {"image_height", 64},
          {"tau_l", 0.0},
          {"tau_i", 0.0},
          {"seed", seed},
          {"backend", "toy"},
          {"toy", {{"layout_scramble_rate", 0.0}}}};
}

TEST(Cli, GenerateFilterExportRenderReportChain) {
  TempDir dir;
  write_file(dir / "categories.json", R"({"dog": 8, "cat": 6, "ball": 4, "tree": 2})");
  write_file(dir / "pool.jsonl", "");  // empty pool: every triple takes the fallback
  write_file(dir / "config.json", toy_config(dir, 77).dump());

  CliResult gen = run_cli(
      {"generate", "--config", (dir / "config.json").string(), "--json", "--verbose"});
  ASSERT_EQ(gen.code, 0) << gen.err;
  nlohmann::json report = nlohmann::json::parse(gen.out);
  EXPECT_EQ(report["counts"]["lists"], 4);
  EXPECT_EQ(report["counts"]["graphs_built"], 4);
  EXPECT_EQ(report["counts"]["images_generated"], 8);
  EXPECT_EQ(report["counts"]["retained"], 8);  // thresholds are zero
  EXPECT_NE(gen.err.find("backend toy"), std::string::npos) << gen.err;

  auto out_dir = dir / "out";
  EXPECT_TRUE(std::filesystem::exists(out_dir / "raw_manifest.jsonl"));
  EXPECT_TRUE(std::filesystem::exists(out_dir / "manifest.jsonl"));
  EXPECT_TRUE(std::filesystem::exists(out_dir / "scene_graphs/item0000.json"));

  CliResult filter = run_cli({"filter", "--raw", (out_dir / "raw_manifest.jsonl").string(),
                              "--tau-l", "0", "--tau-i", "0", "--out",
                              (dir / "curated.jsonl").string(), "--json"});
  ASSERT_EQ(filter.code, 0) << filter.err;
  nlohmann::json filter_doc = nlohmann::json::parse(filter.out);
  EXPECT_EQ(filter_doc["items"], 4);
  EXPECT_EQ(filter_doc["retained"], 8);

  CliResult coco = run_cli({"export", "coco", "--manifest", (out_dir / "manifest.jsonl").string(),
                            "--out", (dir / "coco.json").string(), "--json"});
  ASSERT_EQ(coco.code, 0) << coco.err;
  EXPECT_EQ(nlohmann::json::parse(coco.out)["images"], 8);
  nlohmann::json coco_doc = nlohmann::json::parse(read_file(dir / "coco.json"));
  EXPECT_EQ(coco_doc["images"].size(), 8u);
  EXPECT_FALSE(coco_doc["annotations"].empty());
  for (const auto& cat : coco_doc["categories"]) {
    std::string name = cat["name"];
    EXPECT_TRUE(name == "dog" || name == "cat" || name == "ball" || name == "tree") << name;
  }

  CliResult qa = run_cli({"export", "qa", "--manifest", (out_dir / "manifest.jsonl").string(),
                          "--out", (dir / "qa.jsonl").string(), "--seed", "5", "--json"});
  ASSERT_EQ(qa.code, 0) << qa.err;
  int pairs = nlohmann::json::parse(qa.out)["pairs"].get<int>();
  EXPECT_GT(pairs, 0);
  EXPECT_EQ(static_cast<int>(read_lines(dir / "qa.jsonl").size()), pairs);

  CliResult render = run_cli({"render", "--scene", (out_dir / "scene_graphs/item0000.json").string(),
                              "--out", (dir / "item.svg").string(), "--width", "400", "--height",
                              "300", "--arrows"});
  ASSERT_EQ(render.code, 0) << render.err;
  EXPECT_EQ(read_file(dir / "item.svg").rfind("<svg", 0), 0u);

  CliResult summary = run_cli({"report", "--run", out_dir.string()});
  ASSERT_EQ(summary.code, 0) << summary.err;
  EXPECT_NE(summary.out.find("lists"), std::string::npos);
  EXPECT_NE(summary.out.find("retained"), std::string::npos);
}

TEST(Cli, SeedOverrideChangesTheRun) {
  TempDir dir;
  write_file(dir / "categories.json", R"({"dog": 8, "cat": 6, "ball": 4, "tree": 2})");
  write_file(dir / "pool.jsonl", "");
  write_file(dir / "config.json", toy_config(dir, 77).dump());

  ASSERT_EQ(run_cli({"generate", "--config", (dir / "config.json").string(), "--out",
                     (dir / "run_a").string()})
                .code,
            0);
  ASSERT_EQ(run_cli({"generate", "--config", (dir / "config.json").string(), "--out",
                     (dir / "run_b").string(), "--seed", "9001"})
                .code,
            0);
  ASSERT_EQ(run_cli({"generate", "--config", (dir / "config.json").string(), "--out",
                     (dir / "run_c").string()})
                .code,
            0);

  std::string a = read_file(dir / "run_a/raw_manifest.jsonl");
  std::string b = read_file(dir / "run_b/raw_manifest.jsonl");
  std::string c = read_file(dir / "run_c/raw_manifest.jsonl");
  EXPECT_NE(a, b);  // the override took effect
  EXPECT_EQ(a, c);  // same config, same bytes
}

}  // namespace
}  // namespace clis
