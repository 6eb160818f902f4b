#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "clis/clients.hpp"
#include "clis/error.hpp"
#include "clis/example_pool.hpp"
#include "clis/http_clients.hpp"
#include "clis/image_score.hpp"
#include "clis/layout_score.hpp"
#include "clis/png_io.hpp"
#include "clis/prompts.hpp"
#include "clis/replay.hpp"
#include "clis/response_parse.hpp"
#include "clis/rng.hpp"
#include "clis/scene_graph.hpp"
#include "clis/toy_backends.hpp"

namespace clis {

// ---------------------------------------------------------------------------
// Object-list sampling

struct CategoryTable {
  struct Entry {
    std::string category;
    double frequency = 0.0;
  };
  std::vector<Entry> entries;

  void validate() const {
    if (entries.empty()) fail(ErrorKind::config, "category table is empty");
    bool any_positive = false;
    for (const auto& e : entries) {
      if (e.category.empty()) fail(ErrorKind::config, "category table has a blank name");
      if (e.frequency < 0)
        fail(ErrorKind::config, "negative frequency for category " + e.category);
      if (e.frequency > 0) any_positive = true;
    }
    if (!any_positive) fail(ErrorKind::config, "category table has no positive frequency");
  }

  static CategoryTable from_json(const nlohmann::json& doc) {
    CategoryTable table;
    if (doc.is_object()) {
      for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (!it.value().is_number())
          fail(ErrorKind::config, "category frequency must be a number: " + it.key());
        table.entries.push_back({it.key(), it.value().get<double>()});
      }
    } else if (doc.is_array()) {
      for (const auto& row : doc) {
        if (!row.is_object() || !row.contains("category") || !row.contains("frequency"))
          fail(ErrorKind::config, "category row needs category and frequency");
        table.entries.push_back(
            {row["category"].get<std::string>(), row["frequency"].get<double>()});
      }
    } else {
      fail(ErrorKind::config, "category table must be a JSON object or array");
    }
    table.validate();
    return table;
  }

  static CategoryTable load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open category table: " + path.string());
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded())
      fail(ErrorKind::parse, "category table is not valid JSON: " + path.string());
    return from_json(doc);
  }
};

enum class SamplingStrategy { uniform, proportional, inverse_frequency };

inline SamplingStrategy sampling_strategy_from_string(std::string_view s) {
  if (s == "uniform") return SamplingStrategy::uniform;
  if (s == "proportional") return SamplingStrategy::proportional;
  if (s == "inverse-frequency") return SamplingStrategy::inverse_frequency;
  fail(ErrorKind::config, "unknown sampling strategy: " + std::string(s));
}

inline std::string_view to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::uniform: return "uniform";
    case SamplingStrategy::proportional: return "proportional";
    case SamplingStrategy::inverse_frequency: return "inverse-frequency";
  }
  return "?";
}

/// Draws n object lists with lengths uniform in [len_min, len_max] and
/// categories sampled per strategy (with replacement; repeats are legal and
/// exercise the count questions downstream). Inverse-frequency weights each
/// category 1/frequency to boost rare ones, so zero frequencies are an error
/// under that strategy.
inline std::vector<ObjectList> sample_object_lists(const CategoryTable& table,
                                                   SamplingStrategy strategy, int n, int len_min,
                                                   int len_max, std::uint64_t seed) {
  table.validate();
  if (n < 1) fail(ErrorKind::argument, "list count must be >= 1");
  if (len_min < 1 || len_max < len_min)
    fail(ErrorKind::argument, "bad list length range");

  std::vector<double> cumulative;
  cumulative.reserve(table.entries.size());
  double total = 0.0;
  for (const auto& e : table.entries) {
    double w = 0.0;
    switch (strategy) {
      case SamplingStrategy::uniform:
        w = 1.0;
        break;
      case SamplingStrategy::proportional:
        w = e.frequency;
        break;
      case SamplingStrategy::inverse_frequency:
        if (e.frequency <= 0)
          fail(ErrorKind::config,
               "inverse-frequency sampling needs positive frequency for " + e.category);
        w = 1.0 / e.frequency;
        break;
    }
    total += w;
    cumulative.push_back(total);
  }
  if (total <= 0) fail(ErrorKind::config, "sampling weights sum to zero");

  SplitMix64 rng(derive_seed(seed, "object-list-sampler"));
  std::vector<ObjectList> lists;
  lists.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ObjectList list;
    std::uint64_t len = rng.next_in(static_cast<std::uint64_t>(len_min),
                                    static_cast<std::uint64_t>(len_max));
    for (std::uint64_t k = 0; k < len; ++k) {
      double u = rng.next_double() * total;
      auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
      std::size_t idx = std::min(static_cast<std::size_t>(it - cumulative.begin()),
                                 table.entries.size() - 1);
      list.entries.push_back(table.entries[idx].category);
    }
    lists.push_back(std::move(list));
  }
  return lists;
}

// ---------------------------------------------------------------------------
// Configuration

struct ToyOptions {
  double layout_scramble_rate = 0.25;
  double defect_rate = 0.0;
  double malform_rate = 0.0;
};

struct PipelineConfig {
  double tau_l = 70.0;
  double tau_i = 80.0;
  int images_per_graph = 4;
  int image_width = 256;
  int image_height = 256;
  std::uint64_t seed = 0;
  int concurrency = 1;
  int regen_rounds = 2;  // extra attempts after the first failed parse

  ClisLConfig layout_score;
  JudgeWeights judge_weights;

  SamplingStrategy strategy = SamplingStrategy::uniform;
  int list_count = 20;
  int len_min = 2;
  int len_max = 6;

  std::filesystem::path categories_path;
  std::filesystem::path pool_path;
  std::filesystem::path out_dir;
  std::filesystem::path prompt_dir;  // empty = builtin templates

  std::string backend = "toy";  // toy | replay | live
  ToyOptions toy;
  std::filesystem::path text_cassette;   // replay source
  std::filesystem::path image_cassette;  // optional replay source
  bool record = false;
  std::filesystem::path record_cassette;  // defaults to <out>/text_cassette.jsonl

  double temperature_description = 0.7;
  double temperature_layout = 0.2;

  void validate() const {
    if (tau_l < 0 || tau_i < 0) fail(ErrorKind::config, "thresholds must be >= 0");
    if (images_per_graph < 1) fail(ErrorKind::config, "images_per_graph must be >= 1");
    if (image_width < 16 || image_height < 16)
      fail(ErrorKind::config, "image dimensions must be at least 16");
    if (concurrency < 1) fail(ErrorKind::config, "concurrency must be >= 1");
    if (regen_rounds < 0) fail(ErrorKind::config, "regen_rounds must be >= 0");
    if (list_count < 1) fail(ErrorKind::config, "list count must be >= 1");
    if (len_min < 1 || len_max < len_min) fail(ErrorKind::config, "bad list length range");
    if (out_dir.empty()) fail(ErrorKind::config, "out_dir is required");
    layout_score.validate();
    judge_weights.validate();
    if (backend != "toy" && backend != "replay" && backend != "live")
      fail(ErrorKind::config, "backend must be toy, replay, or live");
    if (backend == "replay" && text_cassette.empty())
      fail(ErrorKind::config, "replay backend needs a text cassette");
  }

  static PipelineConfig from_json(const nlohmann::json& doc);
  static PipelineConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open config: " + path.string());
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) fail(ErrorKind::parse, "config is not valid JSON: " + path.string());
    return from_json(doc);
  }

  nlohmann::json endpoints_json;  // raw endpoint config, used for live backend
};

inline HttpEndpoint endpoint_from_json(const nlohmann::json& doc) {
  HttpEndpoint ep;
  if (doc.contains("base_url")) ep.base_url = doc["base_url"].get<std::string>();
  if (doc.contains("path")) ep.path = doc["path"].get<std::string>();
  if (doc.contains("auth_token")) ep.auth_token = doc["auth_token"].get<std::string>();
  if (doc.contains("timeout_ms")) ep.timeout_ms = doc["timeout_ms"].get<int>();
  if (doc.contains("retries")) ep.retries = doc["retries"].get<int>();
  ep.validate();
  return ep;
}

inline PipelineConfig PipelineConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorKind::config, "config must be a JSON object");
  PipelineConfig cfg;
  auto num = [&](const char* key, double& out) {
    if (doc.contains(key)) {
      if (!doc[key].is_number()) fail(ErrorKind::config, std::string(key) + " must be a number");
      out = doc[key].get<double>();
    }
  };
  auto integer = [&](const char* key, int& out) {
    if (doc.contains(key)) {
      if (!doc[key].is_number_integer())
        fail(ErrorKind::config, std::string(key) + " must be an integer");
      out = doc[key].get<int>();
    }
  };
  num("tau_l", cfg.tau_l);
  num("tau_i", cfg.tau_i);
  integer("images_per_graph", cfg.images_per_graph);
  integer("image_width", cfg.image_width);
  integer("image_height", cfg.image_height);
  integer("concurrency", cfg.concurrency);
  integer("regen_rounds", cfg.regen_rounds);
  if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();

  if (doc.contains("lists")) {
    const auto& lists = doc["lists"];
    if (lists.contains("count")) cfg.list_count = lists["count"].get<int>();
    if (lists.contains("min_len")) cfg.len_min = lists["min_len"].get<int>();
    if (lists.contains("max_len")) cfg.len_max = lists["max_len"].get<int>();
    if (lists.contains("strategy"))
      cfg.strategy = sampling_strategy_from_string(lists["strategy"].get<std::string>());
  }

  if (doc.contains("layout_score")) {
    const auto& ls = doc["layout_score"];
    if (ls.contains("alpha")) cfg.layout_score.weights.alpha = ls["alpha"].get<double>();
    if (ls.contains("beta")) cfg.layout_score.weights.beta = ls["beta"].get<double>();
    if (ls.contains("w_size")) cfg.layout_score.weights.w_size = ls["w_size"].get<double>();
    if (ls.contains("w_dist")) cfg.layout_score.weights.w_dist = ls["w_dist"].get<double>();
    if (ls.contains("w_dir")) cfg.layout_score.weights.w_dir = ls["w_dir"].get<double>();
    if (ls.contains("fallback")) cfg.layout_score.fallback = ls["fallback"].get<double>();
    if (ls.contains("aggregation"))
      cfg.layout_score.aggregation =
          aggregation_from_string(ls["aggregation"].get<std::string>());
  }
  if (doc.contains("judge_weights")) {
    const auto& jw = doc["judge_weights"];
    if (jw.contains("categories")) cfg.judge_weights.categories = jw["categories"].get<double>();
    if (jw.contains("attributes")) cfg.judge_weights.attributes = jw["attributes"].get<double>();
    if (jw.contains("caption")) cfg.judge_weights.caption = jw["caption"].get<double>();
  }

  if (doc.contains("categories")) cfg.categories_path = doc["categories"].get<std::string>();
  if (doc.contains("pool")) cfg.pool_path = doc["pool"].get<std::string>();
  if (doc.contains("out_dir")) cfg.out_dir = doc["out_dir"].get<std::string>();
  if (doc.contains("prompt_dir")) cfg.prompt_dir = doc["prompt_dir"].get<std::string>();
  if (doc.contains("backend")) cfg.backend = doc["backend"].get<std::string>();

  if (doc.contains("toy")) {
    const auto& toy = doc["toy"];
    if (toy.contains("layout_scramble_rate"))
      cfg.toy.layout_scramble_rate = toy["layout_scramble_rate"].get<double>();
    if (toy.contains("defect_rate")) cfg.toy.defect_rate = toy["defect_rate"].get<double>();
    if (toy.contains("malform_rate")) cfg.toy.malform_rate = toy["malform_rate"].get<double>();
  }
  if (doc.contains("replay")) {
    const auto& rp = doc["replay"];
    if (rp.contains("text_cassette"))
      cfg.text_cassette = rp["text_cassette"].get<std::string>();
    if (rp.contains("image_cassette"))
      cfg.image_cassette = rp["image_cassette"].get<std::string>();
  }
  if (doc.contains("record")) {
    const auto& rec = doc["record"];
    if (rec.contains("enabled")) cfg.record = rec["enabled"].get<bool>();
    if (rec.contains("text_cassette"))
      cfg.record_cassette = rec["text_cassette"].get<std::string>();
  }
  if (doc.contains("endpoints")) cfg.endpoints_json = doc["endpoints"];
  if (doc.contains("temperature")) {
    const auto& t = doc["temperature"];
    if (t.contains("description"))
      cfg.temperature_description = t["description"].get<double>();
    if (t.contains("layout")) cfg.temperature_layout = t["layout"].get<double>();
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Client wiring

struct ClientSet {
  std::shared_ptr<TextGenClient> text;
  std::shared_ptr<ImageGenClient> image;
  std::shared_ptr<CaptionClient> caption;
  std::shared_ptr<JudgeClient> judge;
  std::shared_ptr<Cassette> recording;  // set when the text client records
};

/// Builds the client set the config asks for. Replay mode keeps toy
/// image/caption/judge backends unless an image cassette is given, so a
/// recorded text session is enough to re-run a whole batch offline.
inline ClientSet make_clients(const PipelineConfig& cfg) {
  ClientSet set;
  if (cfg.backend == "toy") {
    toy::ToyTextGen::Options text_opts;
    text_opts.layout_scramble_rate = cfg.toy.layout_scramble_rate;
    text_opts.malform_rate = cfg.toy.malform_rate;
    set.text = std::make_shared<toy::ToyTextGen>(text_opts);
  } else if (cfg.backend == "replay") {
    auto tape = std::make_shared<Cassette>(Cassette::load(cfg.text_cassette));
    set.text = std::make_shared<ReplayTextGenClient>(tape);
  } else {
    if (!cfg.endpoints_json.is_object() || !cfg.endpoints_json.contains("text"))
      fail(ErrorKind::config, "live backend needs endpoints.text");
    set.text = std::make_shared<HttpTextGenClient>(endpoint_from_json(cfg.endpoints_json["text"]));
  }

  if (cfg.backend == "live" && cfg.endpoints_json.is_object() &&
      cfg.endpoints_json.contains("image")) {
    set.image =
        std::make_shared<HttpImageGenClient>(endpoint_from_json(cfg.endpoints_json["image"]));
  } else if (cfg.backend == "replay" && !cfg.image_cassette.empty()) {
    auto tape = std::make_shared<Cassette>(Cassette::load(cfg.image_cassette));
    set.image = std::make_shared<ReplayImageGenClient>(tape);
  } else {
    toy::ToyImageGen::Options img_opts;
    img_opts.defect_rate = cfg.toy.defect_rate;
    set.image = std::make_shared<toy::ToyImageGen>(img_opts);
  }

  if (cfg.backend == "live" && cfg.endpoints_json.is_object() &&
      cfg.endpoints_json.contains("caption")) {
    set.caption =
        std::make_shared<HttpCaptionClient>(endpoint_from_json(cfg.endpoints_json["caption"]));
  } else {
    set.caption = std::make_shared<toy::ToyCaptioner>();
  }
  if (cfg.backend == "live" && cfg.endpoints_json.is_object() &&
      cfg.endpoints_json.contains("judge")) {
    set.judge = std::make_shared<HttpJudgeClient>(endpoint_from_json(cfg.endpoints_json["judge"]));
  } else {
    set.judge = std::make_shared<toy::ToyJudge>();
  }

  if (cfg.record) {
    set.recording = std::make_shared<Cassette>();
    set.text = std::make_shared<RecordingTextGenClient>(set.text, set.recording);
  }
  return set;
}

// ---------------------------------------------------------------------------
// Run

namespace drop_reason {
inline constexpr std::string_view kParseFail = "parse-fail";
inline constexpr std::string_view kLayoutInvalid = "layout-invalid";
inline constexpr std::string_view kBelowTauL = "below-tau-l";
inline constexpr std::string_view kBelowTauI = "below-tau-i";
inline constexpr std::string_view kClientError = "client-error";
}  // namespace drop_reason

struct ScoredImage {
  std::string file;  // relative to out_dir
  std::uint64_t seed = 0;
  double clis_i = 0.0;
  bool retained = false;
};

struct ItemResult {
  std::string item_id;
  std::vector<std::string> objects;
  std::string status;       // "scored" or "dropped"
  std::string drop_reason;  // set when dropped before image scoring
  std::string detail;       // human-readable failure context
  std::optional<SceneGraph> graph;
  double clis_l = 0.0;
  bool clis_l_vacuous = false;
  bool layout_survivor = false;
  std::vector<ScoredImage> images;
  std::vector<std::string> image_failures;
  std::vector<GeneratedImage> rendered;  // pixel data matching `images`, caller writes it
};

struct RunReport {
  int lists = 0;
  int graphs_built = 0;
  int layout_survivors = 0;
  int images_generated = 0;
  int retained = 0;
  std::map<std::string, int> drops;
  std::vector<int> clis_l_histogram = std::vector<int>(10, 0);
  std::vector<int> clis_i_histogram = std::vector<int>(10, 0);
  double duration_ms = 0.0;
  std::filesystem::path out_dir;

  nlohmann::json to_json() const {
    nlohmann::json drops_json = nlohmann::json::object();
    for (const auto& [reason, count] : drops) drops_json[reason] = count;
    return {{"counts",
             {{"lists", lists},
              {"graphs_built", graphs_built},
              {"layout_survivors", layout_survivors},
              {"images_generated", images_generated},
              {"retained", retained}}},
            {"drops", drops_json},
            {"clis_l_histogram", clis_l_histogram},
            {"clis_i_histogram", clis_i_histogram},
            {"duration_ms", duration_ms}};
  }
};

namespace detail {

inline void bump_histogram(std::vector<int>& bins, double score) {
  int idx = static_cast<int>(score / 10.0);
  bins[std::clamp(idx, 0, 9)] += 1;
}

inline std::string item_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "item%04d", index);
  return buf;
}

/// Calls the text client and parses, retrying with fresh seeds up to
/// regen_rounds extra times. Throws the last parse/binding error when every
/// round fails.
template <typename ParseFn>
auto generate_and_parse(TextGenClient& text, const std::string& prompt, double temperature,
                        std::uint64_t item_seed, std::string_view stage, int regen_rounds,
                        ParseFn&& parse) {
  std::optional<Error> last;
  for (int round = 0; round <= regen_rounds; ++round) {
    GenerationRequest req;
    req.prompt = prompt;
    req.temperature = temperature;
    req.seed = derive_seed(item_seed, std::string(stage) + "-round" + std::to_string(round));
    RetryPolicy policy;
    policy.sleep = false;
    GenerationResponse resp = with_retries(policy, [&] { return text.generate(req); });
    try {
      return parse(resp.text);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::parse:
        case ErrorKind::binding:
        case ErrorKind::layout:
        case ErrorKind::graph:
          last = e;
          continue;
        default:
          throw;
      }
    }
  }
  throw *last;
}

}  // namespace detail

/// Runs one item through description -> layout -> validation -> layout score
/// -> (if it clears tau_l) image generation and image scoring. Never touches
/// the filesystem; the caller owns all writes.
inline ItemResult run_item(const PipelineConfig& cfg, const PromptLibrary& prompts,
                           const ExamplePool& pool, const ClientSet& clients,
                           const ObjectList& list, int index) {
  ItemResult result;
  result.item_id = detail::item_name(index);
  result.objects = list.entries;
  std::uint64_t item_seed = derive_seed(cfg.seed, result.item_id);

  try {
    std::string desc_prompt = render_description_prompt(prompts, list);
    DescriptionDoc doc;
    try {
      doc = detail::generate_and_parse(
          *clients.text, desc_prompt, cfg.temperature_description, item_seed, "description",
          cfg.regen_rounds, [](const std::string& raw) { return parse_description_response(raw); });
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::parse) {
        result.status = "dropped";
        result.drop_reason = drop_reason::kParseFail;
        result.detail = e.what();
        return result;
      }
      throw;
    }

    std::string layout_prompt =
        render_layout_prompt(prompts, description_doc_to_json(doc).dump());
    SceneGraph sg;
    try {
      sg = detail::generate_and_parse(*clients.text, layout_prompt, cfg.temperature_layout,
                                      item_seed, "layout", cfg.regen_rounds,
                                      [&](const std::string& raw) {
                                        return assemble_scene_graph(doc,
                                                                    parse_layout_response(raw));
                                      });
    } catch (const Error& e) {
      result.status = "dropped";
      result.drop_reason = e.kind() == ErrorKind::parse ? drop_reason::kParseFail
                                                        : drop_reason::kLayoutInvalid;
      result.detail = e.what();
      return result;
    }
    sg.source_id = result.item_id;
    result.graph = sg;

    SceneLayoutScore layout = clis_l_scene(sg, pool, cfg.layout_score);
    result.clis_l = layout.score;
    result.clis_l_vacuous = layout.vacuous;
    if (layout.score < cfg.tau_l) {
      result.status = "dropped";
      result.drop_reason = drop_reason::kBelowTauL;
      return result;
    }
    result.layout_survivor = true;

    ImageBatch batch = generate_images(*clients.image, sg, cfg.images_per_graph,
                                       derive_seed(item_seed, "images"), cfg.image_width,
                                       cfg.image_height);
    result.image_failures = batch.failures;
    for (std::size_t j = 0; j < batch.images.size(); ++j) {
      ScoredImage scored;
      scored.file = "images/" + result.item_id + "_img" + std::to_string(j) + ".png";
      scored.seed = batch.images[j].source_seed;
      scored.clis_i =
          clis_i(batch.images[j], sg, *clients.caption, *clients.judge, cfg.judge_weights);
      scored.retained = scored.clis_i >= cfg.tau_i;
      result.images.push_back(scored);
    }
    result.status = "scored";
    // Keep the pixel data alive for the caller to write out.
    result.rendered = std::move(batch.images);
  } catch (const Error& e) {
    result.status = "dropped";
    result.drop_reason = drop_reason::kClientError;
    result.detail = e.what();
  }
  return result;
}

namespace detail {

inline nlohmann::json raw_row_json(const ItemResult& r) {
  nlohmann::json row = {{"item", r.item_id}, {"objects", r.objects}, {"status", r.status}};
  if (!r.drop_reason.empty()) row["drop_reason"] = r.drop_reason;
  if (!r.detail.empty()) row["detail"] = r.detail;
  if (r.graph) {
    row["scene_graph"] = scene_graph_to_json(*r.graph);
    row["clis_l"] = r.clis_l;
    row["clis_l_vacuous"] = r.clis_l_vacuous;
  }
  if (!r.images.empty()) {
    nlohmann::json images = nlohmann::json::array();
    for (const auto& img : r.images) {
      images.push_back({{"file", img.file},
                        {"seed", img.seed},
                        {"clis_i", img.clis_i},
                        {"retained", img.retained}});
    }
    row["images"] = images;
  }
  if (!r.image_failures.empty()) row["image_failures"] = r.image_failures;
  return row;
}

/// One curated line per retained image. Built from the same fields whether it
/// comes from a fresh run or a re-filter, so the bytes match either way.
inline nlohmann::json curated_row_json(const std::string& item_id,
                                       const nlohmann::json& scene_graph, double clis_l,
                                       const nlohmann::json& image_entry, int width, int height,
                                       const nlohmann::json& provenance) {
  return {{"item", item_id},
          {"image", image_entry["file"]},
          {"width", width},
          {"height", height},
          {"scene_graph", scene_graph},
          {"clis_l", clis_l},
          {"clis_i", image_entry["clis_i"]},
          {"provenance", provenance}};
}

inline nlohmann::json provenance_json(const PipelineConfig& cfg, const ClientSet& clients,
                                      std::uint64_t image_seed) {
  nlohmann::json p = {{"root_seed", cfg.seed},
                      {"image_seed", image_seed},
                      {"backend", cfg.backend},
                      {"text_backend", clients.text->id()},
                      {"image_backend", clients.image->id()},
                      {"caption_backend", clients.caption->id()},
                      {"judge_backend", clients.judge->id()}};
  // Deterministic modes promise byte-identical manifests across reruns, so
  // wall-clock provenance only appears on live runs.
  if (cfg.backend == "live") {
    p["recorded_at"] = static_cast<std::int64_t>(
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());
  }
  return p;
}

}  // namespace detail

/// Full batch run: sample lists, process every item, write images, scene
/// graphs, both manifests, and the report under cfg.out_dir.
inline RunReport run_pipeline(const PipelineConfig& cfg, const ExamplePool& pool,
                              const ClientSet& clients) {
  cfg.validate();
  auto started = std::chrono::steady_clock::now();

  PromptLibrary prompts =
      cfg.prompt_dir.empty() ? PromptLibrary::builtin() : PromptLibrary::from_dir(cfg.prompt_dir);
  CategoryTable table = CategoryTable::load(cfg.categories_path);
  std::vector<ObjectList> lists = sample_object_lists(table, cfg.strategy, cfg.list_count,
                                                      cfg.len_min, cfg.len_max, cfg.seed);

  std::vector<ItemResult> results(lists.size());
  std::atomic<std::size_t> next{0};
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.concurrency),
                                              lists.size());
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= lists.size()) return;
      results[i] = run_item(cfg, prompts, pool, clients, lists[i], static_cast<int>(i));
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir / "images");
  fs::create_directories(cfg.out_dir / "scene_graphs");

  RunReport report;
  report.lists = static_cast<int>(lists.size());
  report.out_dir = cfg.out_dir;

  std::ofstream raw(cfg.out_dir / "raw_manifest.jsonl", std::ios::trunc);
  std::ofstream curated(cfg.out_dir / "manifest.jsonl", std::ios::trunc);
  if (!raw || !curated) fail(ErrorKind::io, "cannot write manifests in " + cfg.out_dir.string());

  for (const ItemResult& r : results) {
    if (r.graph) {
      report.graphs_built += 1;
      detail::bump_histogram(report.clis_l_histogram, r.clis_l);
      save_scene_graph(*r.graph,
                       (cfg.out_dir / "scene_graphs" / (r.item_id + ".json")).string());
    }
    if (r.layout_survivor) report.layout_survivors += 1;
    if (!r.drop_reason.empty()) report.drops[std::string(r.drop_reason)] += 1;
    for (const auto& failure : r.image_failures) {
      (void)failure;
      report.drops[std::string(drop_reason::kClientError)] += 1;
    }

    for (std::size_t j = 0; j < r.images.size(); ++j) {
      report.images_generated += 1;
      detail::bump_histogram(report.clis_i_histogram, r.images[j].clis_i);
      write_png_file(r.rendered[j].pixels, (cfg.out_dir / r.images[j].file).string());
      if (!r.images[j].retained)
        report.drops[std::string(drop_reason::kBelowTauI)] += 1;
    }

    nlohmann::json raw_row = detail::raw_row_json(r);
    raw << raw_row.dump() << "\n";

    if (r.status == "scored" && r.graph) {
      for (const auto& img : r.images) {
        if (!img.retained) continue;
        report.retained += 1;
        curated << detail::curated_row_json(
                       r.item_id, scene_graph_to_json(*r.graph), r.clis_l,
                       {{"file", img.file}, {"clis_i", img.clis_i}}, cfg.image_width,
                       cfg.image_height, detail::provenance_json(cfg, clients, img.seed))
                       .dump()
                << "\n";
      }
    }
  }
  raw.close();
  curated.close();

  if (clients.recording) {
    fs::path tape_path = cfg.record_cassette.empty() ? cfg.out_dir / "text_cassette.jsonl"
                                                     : cfg.record_cassette;
    clients.recording->save(tape_path);
  }

  report.duration_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - started)
                           .count();
  std::ofstream report_out(cfg.out_dir / "report.json", std::ios::trunc);
  if (!report_out) fail(ErrorKind::io, "cannot write report in " + cfg.out_dir.string());
  report_out << report.to_json().dump(2) << "\n";
  return report;
}

// ---------------------------------------------------------------------------
// Re-filtering and verification

struct FilterReport {
  int items = 0;
  int layout_survivors = 0;
  int retained = 0;
};

/// Re-thresholds an already-scored raw manifest without touching any client.
/// Writes a curated manifest in the same format as a fresh run.
inline FilterReport filter_manifest(const std::filesystem::path& raw_path, double tau_l,
                                    double tau_i, const std::filesystem::path& out_path) {
  std::ifstream in(raw_path);
  if (!in) fail(ErrorKind::io, "cannot open raw manifest: " + raw_path.string());
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write manifest: " + out_path.string());

  FilterReport report;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded())
      fail(ErrorKind::parse,
           "bad manifest line " + std::to_string(line_no) + " in " + raw_path.string());
    report.items += 1;
    if (!row.contains("clis_l") || !row.contains("scene_graph")) continue;
    if (row["clis_l"].get<double>() < tau_l) continue;
    report.layout_survivors += 1;
    if (!row.contains("images")) continue;
    for (const auto& img : row["images"]) {
      if (img["clis_i"].get<double>() < tau_i) continue;
      report.retained += 1;
      // Raw rows do not carry provenance/dimensions; keep the filtered rows
      // self-describing with what is known.
      nlohmann::json curated = {{"item", row["item"]},
                                {"image", img["file"]},
                                {"scene_graph", row["scene_graph"]},
                                {"clis_l", row["clis_l"]},
                                {"clis_i", img["clis_i"]}};
      out << curated.dump() << "\n";
    }
  }
  return report;
}

struct ManifestRow {
  std::string item;
  std::string image;
  SceneGraph graph;
  double clis_l = 0.0;
  double clis_i = 0.0;
  int width = 0;
  int height = 0;
};

/// Loads a curated manifest and enforces the retention invariant: every row
/// parses, has a valid scene graph, and meets both thresholds.
inline std::vector<ManifestRow> load_curated_manifest(const std::filesystem::path& path,
                                                      double tau_l, double tau_i) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open manifest: " + path.string());
  std::vector<ManifestRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded())
      fail(ErrorKind::parse,
           "bad manifest line " + std::to_string(line_no) + " in " + path.string());
    ManifestRow out;
    out.item = row.at("item").get<std::string>();
    out.image = row.at("image").get<std::string>();
    out.graph = scene_graph_from_json(row.at("scene_graph"));
    out.clis_l = row.at("clis_l").get<double>();
    out.clis_i = row.at("clis_i").get<double>();
    if (row.contains("width")) out.width = row["width"].get<int>();
    if (row.contains("height")) out.height = row["height"].get<int>();
    if (out.clis_l < tau_l || out.clis_i < tau_i)
      fail(ErrorKind::graph, "manifest row " + out.item + " violates thresholds");
    rows.push_back(std::move(out));
  }
  return rows;
}

}  // namespace clis
