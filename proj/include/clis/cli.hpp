#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "clis/error.hpp"
#include "clis/example_pool.hpp"
#include "clis/export.hpp"
#include "clis/image_score.hpp"
#include "clis/layout_score.hpp"
#include "clis/pipeline.hpp"
#include "clis/png_io.hpp"
#include "clis/scene_graph.hpp"
#include "clis/toy_backends.hpp"

namespace clis::cli {

namespace detail {

inline nlohmann::json triples_json(const SceneLayoutScore& score) {
  nlohmann::json triples = nlohmann::json::array();
  for (const auto& t : score.triples) {
    triples.push_back({{"subject", t.subject_id},
                       {"relation", t.relation},
                       {"object", t.object_id},
                       {"size", t.size},
                       {"dist", t.dist},
                       {"dir", t.dir},
                       {"combined", t.combined},
                       {"matched", t.matched}});
  }
  return triples;
}

inline void print_table_row(std::ostream& out, const std::string& key, const std::string& value) {
  out << "  " << key;
  for (std::size_t i = key.size(); i < 24; ++i) out << ' ';
  out << value << "\n";
}

}  // namespace detail

/// Parses and executes one invocation. `args` excludes the program name.
/// Exit codes: 0 success, 1 validation/config errors, 2 runtime (client/IO)
/// failures.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Scene-graph data curation: generate, score, filter, export"};
  app.require_subcommand(1);
  // Let global options (--config, --json, ...) appear after the verb; the
  // flag is inherited by subcommands created below.
  app.fallthrough();

  std::string config_path;
  std::string backend;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool verbose = false;
  bool as_json = false;
  app.add_option("--config", config_path, "pipeline config file (JSON)");
  app.add_option("--backend", backend, "client backend: live, replay, or toy")
      ->check(CLI::IsMember({"live", "replay", "toy"}));
  app.add_option("--seed", seed, "root seed override")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_flag("--verbose", verbose, "log progress to stderr");
  app.add_flag("--json", as_json, "machine-readable JSON on stdout");

  // pool build | pool stats
  auto* pool_cmd = app.add_subcommand("pool", "layout example pool maintenance");
  pool_cmd->require_subcommand(1);
  auto* pool_build = pool_cmd->add_subcommand("build", "build a pool from annotation JSONL");
  std::string annotations_path, pool_out, synonyms_path;
  pool_build->add_option("--annotations", annotations_path, "scene-graph JSONL input")
      ->required();
  pool_build->add_option("--out", pool_out, "pool JSONL output")->required();
  pool_build->add_option("--synonyms", synonyms_path, "relation synonym map (JSON)");
  auto* pool_stats = pool_cmd->add_subcommand("stats", "summarize a pool file");
  std::string pool_path;
  pool_stats->add_option("--pool", pool_path, "pool JSONL")->required();

  // score layout | score image
  auto* score_cmd = app.add_subcommand("score", "score a scene graph or an image");
  score_cmd->require_subcommand(1);
  auto* score_layout = score_cmd->add_subcommand("layout", "layout plausibility score");
  std::string scene_path, score_pool_path, aggregation = "mean";
  score_layout->add_option("--scene", scene_path, "scene graph JSON")->required();
  score_layout->add_option("--pool", score_pool_path, "pool JSONL")->required();
  score_layout->add_option("--aggregation", aggregation, "triple aggregation: mean or min")
      ->check(CLI::IsMember({"mean", "min"}));
  auto* score_image = score_cmd->add_subcommand("image", "caption-alignment score");
  std::string image_path, image_scene_path;
  score_image->add_option("--image", image_path, "PNG image")->required();
  score_image->add_option("--scene", image_scene_path, "scene graph JSON")->required();

  // generate
  auto* generate = app.add_subcommand("generate", "run the curation pipeline");
  std::string generate_out;
  generate->add_option("--out", generate_out, "output directory override");

  // filter
  auto* filter = app.add_subcommand("filter", "re-threshold a scored raw manifest");
  std::string raw_manifest, filter_out;
  double tau_l = 0.0, tau_i = 0.0;
  filter->add_option("--raw", raw_manifest, "raw manifest JSONL")->required();
  filter->add_option("--tau-l", tau_l, "layout score threshold")->required();
  filter->add_option("--tau-i", tau_i, "image score threshold")->required();
  filter->add_option("--out", filter_out, "curated manifest output")->required();

  // export coco | export qa
  auto* export_cmd = app.add_subcommand("export", "export a curated manifest");
  export_cmd->require_subcommand(1);
  auto* export_coco_cmd = export_cmd->add_subcommand("coco", "COCO detection JSON");
  std::string manifest_path, export_out;
  export_coco_cmd->add_option("--manifest", manifest_path, "curated manifest JSONL")->required();
  export_coco_cmd->add_option("--out", export_out, "output JSON path")->required();
  auto* export_qa_cmd = export_cmd->add_subcommand("qa", "instruction-tuning QA JSONL");
  std::string qa_manifest_path, qa_out;
  export_qa_cmd->add_option("--manifest", qa_manifest_path, "curated manifest JSONL")
      ->required();
  export_qa_cmd->add_option("--out", qa_out, "output JSONL path")->required();

  // render
  auto* render = app.add_subcommand("render", "render a scene graph to SVG");
  std::string render_scene, render_out;
  int render_width = 512, render_height = 512;
  bool render_arrows = false;
  render->add_option("--scene", render_scene, "scene graph JSON")->required();
  render->add_option("--out", render_out, "output SVG path")->required();
  render->add_option("--width", render_width, "canvas width");
  render->add_option("--height", render_height, "canvas height");
  render->add_flag("--arrows", render_arrows, "draw relation arrows");

  // report
  auto* report_cmd = app.add_subcommand("report", "summarize a finished run");
  std::string run_dir;
  report_cmd->add_option("--run", run_dir, "run output directory")->required();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 1;
  }

  try {
    if (*pool_build) {
      RelationSynonyms synonyms;
      if (!synonyms_path.empty()) synonyms = load_relation_synonyms(synonyms_path);
      PoolBuildReport build_report;
      ExamplePool pool = build_pool_from_jsonl(annotations_path, &build_report,
                                               synonyms_path.empty() ? nullptr : &synonyms);
      save_pool(pool, pool_out);
      if (as_json) {
        nlohmann::json error_rows = nlohmann::json::array();
        for (const auto& e : build_report.errors)
          error_rows.push_back({{"source", e.source_id}, {"message", e.message}});
        out << nlohmann::json{{"documents", build_report.documents},
                              {"accepted", build_report.accepted},
                              {"examples", pool.size()},
                              {"keys", pool.key_count()},
                              {"errors", error_rows}}
                   .dump()
            << "\n";
      } else {
        out << "pool written to " << pool_out << "\n";
        detail::print_table_row(out, "documents", std::to_string(build_report.documents));
        detail::print_table_row(out, "examples", std::to_string(pool.size()));
        detail::print_table_row(out, "keys", std::to_string(pool.key_count()));
        detail::print_table_row(out, "errors", std::to_string(build_report.errors.size()));
        if (verbose) {
          for (const auto& e : build_report.errors)
            err << "  " << e.source_id << ": " << e.message << "\n";
        }
      }
      return 0;
    }

    if (*pool_stats) {
      ExamplePool pool = load_pool(pool_path);
      if (as_json) {
        nlohmann::json keys = nlohmann::json::array();
        for (const auto& [key, examples] : pool.buckets()) {
          keys.push_back({{"subject", key.s},
                          {"object", key.o},
                          {"relation", key.r},
                          {"count", examples.size()}});
        }
        out << nlohmann::json{{"examples", pool.size()},
                              {"keys", pool.key_count()},
                              {"buckets", keys}}
                   .dump()
            << "\n";
      } else {
        detail::print_table_row(out, "examples", std::to_string(pool.size()));
        detail::print_table_row(out, "keys", std::to_string(pool.key_count()));
        for (const auto& [key, examples] : pool.buckets()) {
          out << "  (" << key.s << ", " << key.r << ", " << key.o << "): " << examples.size()
              << "\n";
        }
      }
      return 0;
    }

    if (*score_layout) {
      SceneGraph sg = load_scene_graph(scene_path);
      ExamplePool pool = load_pool(score_pool_path);
      ClisLConfig score_cfg;
      score_cfg.aggregation = aggregation_from_string(aggregation);
      SceneLayoutScore score = clis_l_scene(sg, pool, score_cfg);
      if (as_json) {
        out << nlohmann::json{{"scene_score", score.score},
                              {"vacuous", score.vacuous},
                              {"triples", detail::triples_json(score)}}
                   .dump()
            << "\n";
      } else {
        detail::print_table_row(out, "scene_score", std::to_string(score.score));
        for (const auto& t : score.triples) {
          out << "  (" << t.subject_id << ", " << t.relation << ", " << t.object_id
              << "): " << t.combined << (t.matched ? "" : " [no pool match]") << "\n";
        }
        if (score.vacuous) out << "  warning: no relations; score is vacuous\n";
      }
      return 0;
    }

    if (*score_image) {
      SceneGraph sg = load_scene_graph(image_scene_path);
      GeneratedImage img;
      img.pixels = read_png_file(image_path);
      toy::ToyCaptioner captioner;
      toy::ToyJudge judge;
      double score = clis_i(img, sg, captioner, judge);
      if (as_json) {
        out << nlohmann::json{{"clis_i", score}}.dump() << "\n";
      } else {
        detail::print_table_row(out, "clis_i", std::to_string(score));
      }
      return 0;
    }

    if (*generate) {
      if (config_path.empty()) fail(ErrorKind::config, "generate requires --config");
      PipelineConfig cfg = PipelineConfig::load(config_path);
      if (!backend.empty()) cfg.backend = backend;
      if (seed_set) cfg.seed = seed;
      if (!generate_out.empty()) cfg.out_dir = generate_out;
      cfg.validate();
      if (cfg.pool_path.empty()) fail(ErrorKind::config, "config needs a pool path");
      ExamplePool pool = load_pool(cfg.pool_path);
      ClientSet clients = make_clients(cfg);
      if (verbose) err << "running " << cfg.list_count << " lists with backend " << cfg.backend
                       << "\n";
      RunReport report = run_pipeline(cfg, pool, clients);
      if (as_json) {
        nlohmann::json doc = report.to_json();
        doc["out_dir"] = report.out_dir.string();
        out << doc.dump() << "\n";
      } else {
        out << "run complete: " << report.out_dir.string() << "\n";
        detail::print_table_row(out, "lists", std::to_string(report.lists));
        detail::print_table_row(out, "graphs_built", std::to_string(report.graphs_built));
        detail::print_table_row(out, "layout_survivors",
                                std::to_string(report.layout_survivors));
        detail::print_table_row(out, "images_generated",
                                std::to_string(report.images_generated));
        detail::print_table_row(out, "retained", std::to_string(report.retained));
        for (const auto& [reason, count] : report.drops) {
          detail::print_table_row(out, "drop " + reason, std::to_string(count));
        }
      }
      return 0;
    }

    if (*filter) {
      FilterReport fr = filter_manifest(raw_manifest, tau_l, tau_i, filter_out);
      if (as_json) {
        out << nlohmann::json{{"items", fr.items},
                              {"layout_survivors", fr.layout_survivors},
                              {"retained", fr.retained}}
                   .dump()
            << "\n";
      } else {
        detail::print_table_row(out, "items", std::to_string(fr.items));
        detail::print_table_row(out, "layout_survivors", std::to_string(fr.layout_survivors));
        detail::print_table_row(out, "retained", std::to_string(fr.retained));
      }
      return 0;
    }

    if (*export_coco_cmd) {
      std::vector<ManifestRow> rows = load_curated_manifest(manifest_path, 0.0, 0.0);
      nlohmann::json doc =
          export_coco(rows, std::filesystem::path(manifest_path).parent_path());
      std::ofstream coco_out(export_out, std::ios::trunc);
      if (!coco_out) fail(ErrorKind::io, "cannot write " + export_out);
      coco_out << doc.dump(2) << "\n";
      if (as_json) {
        out << nlohmann::json{{"images", doc["images"].size()},
                              {"annotations", doc["annotations"].size()},
                              {"categories", doc["categories"].size()}}
                   .dump()
            << "\n";
      } else {
        out << "coco written to " << export_out << "\n";
      }
      return 0;
    }

    if (*export_qa_cmd) {
      std::vector<ManifestRow> rows = load_curated_manifest(qa_manifest_path, 0.0, 0.0);
      int written = export_qa_jsonl(rows, qa_out, seed);
      if (as_json) {
        out << nlohmann::json{{"pairs", written}}.dump() << "\n";
      } else {
        out << written << " pairs written to " << qa_out << "\n";
      }
      return 0;
    }

    if (*render) {
      SceneGraph sg = load_scene_graph(render_scene);
      std::string svg = render_svg(sg, render_width, render_height, render_arrows);
      std::ofstream svg_out(render_out, std::ios::trunc);
      if (!svg_out) fail(ErrorKind::io, "cannot write " + render_out);
      svg_out << svg;
      if (as_json) {
        out << nlohmann::json{{"out", render_out}, {"objects", sg.objects.size()}}.dump()
            << "\n";
      } else {
        out << "svg written to " << render_out << "\n";
      }
      return 0;
    }

    if (*report_cmd) {
      std::filesystem::path path = std::filesystem::path(run_dir) / "report.json";
      std::ifstream in(path);
      if (!in) fail(ErrorKind::io, "cannot open " + path.string());
      nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
      if (doc.is_discarded()) fail(ErrorKind::parse, "report is not valid JSON: " + path.string());
      if (as_json) {
        out << doc.dump() << "\n";
      } else {
        const auto& counts = doc["counts"];
        for (auto it = counts.begin(); it != counts.end(); ++it) {
          detail::print_table_row(out, it.key(), it.value().dump());
        }
        for (auto it = doc["drops"].begin(); it != doc["drops"].end(); ++it) {
          detail::print_table_row(out, "drop " + it.key(), it.value().dump());
        }
      }
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return (e.kind() == ErrorKind::client || e.kind() == ErrorKind::io) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  err << "no command executed\n";
  return 1;
}

}  // namespace clis::cli
