#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "clis/clients.hpp"
#include "clis/error.hpp"
#include "clis/prompts.hpp"
#include "clis/raster.hpp"
#include "clis/response_parse.hpp"
#include "clis/rng.hpp"
#include "clis/scene_graph.hpp"

namespace clis::toy {

namespace tag {

// Category tags are embedded as a horizontal pixel run starting at the object
// rectangle's origin: two fixed marker pixels, a length pixel, then one pixel
// per character (code in the red channel). The sentinel G/B pair keeps fill
// colors from being misread as tag bytes.
inline constexpr Rgb kMarkerA{7, 91, 53};
inline constexpr Rgb kMarkerB{211, 17, 97};
inline constexpr std::uint8_t kSentinelG = 13;
inline constexpr std::uint8_t kSentinelB = 241;

inline void write(Raster& img, int x0, int y0, std::string_view text) {
  if (text.size() > 255) text = text.substr(0, 255);
  int needed = static_cast<int>(text.size()) + 3;
  if (y0 < 0 || y0 >= img.height || x0 < 0 || x0 + needed > img.width) return;
  img.set(x0, y0, kMarkerA);
  img.set(x0 + 1, y0, kMarkerB);
  img.set(x0 + 2, y0, {static_cast<std::uint8_t>(text.size()), kSentinelG, kSentinelB});
  for (std::size_t i = 0; i < text.size(); ++i) {
    img.set(x0 + 3 + static_cast<int>(i), y0,
            {static_cast<std::uint8_t>(text[i]), kSentinelG, kSentinelB});
  }
}

inline bool is_tag_pixel(Rgb c) {
  return c == kMarkerA || c == kMarkerB || (c.g == kSentinelG && c.b == kSentinelB);
}

/// All complete tags in row-major scan order.
inline std::vector<std::string> scan(const Raster& img) {
  std::vector<std::string> out;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x + 2 < img.width; ++x) {
      if (!(img.get(x, y) == kMarkerA) || !(img.get(x + 1, y) == kMarkerB)) continue;
      Rgb len_px = img.get(x + 2, y);
      if (len_px.g != kSentinelG || len_px.b != kSentinelB) continue;
      int len = len_px.r;
      if (x + 3 + len > img.width) continue;  // truncated by a crop edge
      std::string text;
      bool ok = true;
      for (int i = 0; i < len; ++i) {
        Rgb c = img.get(x + 3 + i, y);
        if (c.g != kSentinelG || c.b != kSentinelB) {
          ok = false;
          break;
        }
        text += static_cast<char>(c.r);
      }
      if (ok) {
        out.push_back(std::move(text));
        x += 2 + len;
      }
    }
  }
  return out;
}

}  // namespace tag

namespace detail {

/// Splits an instance phrase like "red dog" into its color token (if the
/// first word names a known color) and the remaining category text.
inline std::pair<const NamedColor*, std::string> split_phrase(std::string_view text) {
  std::size_t space = text.find(' ');
  if (space != std::string_view::npos) {
    if (const NamedColor* c = find_color(text.substr(0, space))) {
      return {c, std::string(text.substr(space + 1))};
    }
  }
  if (const NamedColor* c = find_color(text)) return {c, std::string(text)};
  return {nullptr, std::string(text)};
}

inline BBox clamp_box(BBox b) {
  b.w = std::clamp(b.w, 0.02, 0.98);
  b.h = std::clamp(b.h, 0.02, 0.98);
  b.x = std::clamp(b.x, 0.005, 0.99 - b.w);
  b.y = std::clamp(b.y, 0.005, 0.99 - b.h);
  return b;
}

}  // namespace detail

/// Offline stand-in for the two LLM generation stages. Recognizes which stage
/// a prompt belongs to by its fixed request sentence, reads the input that the
/// renderer appended after it, and answers with deterministic JSON wrapped in
/// a markdown fence (so the lenient parser gets exercised).
class ToyTextGen : public TextGenClient {
 public:
  struct Options {
    double layout_scramble_rate = 0.25;  // per-object chance of a random box
    double malform_rate = 0.0;           // per-request chance of a useless reply
  };

  ToyTextGen() : opts_{} {}
  explicit ToyTextGen(Options opts) : opts_(opts) {}

  std::string id() const override { return "toy-textgen"; }

  GenerationResponse generate(const GenerationRequest& req) override {
    static constexpr std::string_view kDescMarker =
        "Please provide a json format with description based on the following object list.";
    static constexpr std::string_view kLayoutMarker =
        "Please provide a json format with Layout based on the following prompt.";

    SplitMix64 rng(derive_seed(req.seed, req.prompt));
    if (rng.next_double() < opts_.malform_rate) {
      return {"I am sorry, I cannot help with that request.", 0.0, id()};
    }

    std::size_t pos;
    std::string body;
    if ((pos = req.prompt.find(kLayoutMarker)) != std::string::npos) {
      body = layout_json(req.prompt.substr(pos + kLayoutMarker.size()), rng);
    } else if ((pos = req.prompt.find(kDescMarker)) != std::string::npos) {
      body = description_json(req.prompt.substr(pos + kDescMarker.size()), rng);
    } else {
      fail(ErrorKind::client, "toy text backend: unrecognized prompt");
    }
    return {"Here is the result:\n```json\n" + body + "\n```\n", 0.0, id()};
  }

 private:
  std::string description_json(std::string_view input, SplitMix64& rng) const {
    std::optional<nlohmann::json> arr = extract_first_json(input);
    if (!arr || !arr->is_array() || arr->empty())
      fail(ErrorKind::client, "toy text backend: no object list in prompt");
    std::vector<std::string> names;
    for (const auto& v : *arr) {
      if (!v.is_string()) fail(ErrorKind::client, "toy text backend: non-string object name");
      names.push_back(v.get<std::string>());
    }

    auto colors = color_table();
    static constexpr std::string_view kRelations[] = {"next to", "above", "on", "left of"};

    nlohmann::json objects = nlohmann::json::array();
    std::vector<std::string> attrs;
    for (const auto& name : names) {
      std::string color(colors[rng.next_below(colors.size())].name);
      objects.push_back({{"name", name}, {"attribute", color}, {"color", color}});
      attrs.push_back(color);
    }

    nlohmann::json relations = nlohmann::json::array();
    std::string rel_sentence;
    for (std::size_t i = 0; i + 1 < names.size(); ++i) {
      std::string rel(kRelations[rng.next_below(std::size(kRelations))]);
      relations.push_back({{"subject", names[i]}, {"relation", rel}, {"object", names[i + 1]}});
      if (i == 0)
        rel_sentence = " The " + names[0] + " is " + rel + " the " + names[1] + ".";
    }

    nlohmann::json groups = nlohmann::json::array();
    if (names.size() > 1) groups.push_back(names);

    std::string caption = "The image shows ";
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (i > 0) caption += i + 1 == names.size() ? " and " : ", ";
      caption += "a " + attrs[i] + " (" + names[i] + ")";
    }
    caption += "." + rel_sentence;

    nlohmann::json doc = {{"objects", objects},
                          {"groups", groups},
                          {"relationships", relations},
                          {"caption", caption}};
    return doc.dump(2);
  }

  std::string layout_json(std::string_view input, SplitMix64& rng) const {
    DescriptionDoc doc;
    try {
      doc = parse_description_response(input);
    } catch (const Error& e) {
      fail(ErrorKind::client, std::string("toy text backend: bad layout prompt: ") + e.what());
    }

    std::size_t n = doc.objects.size();
    double slot = 0.9 / static_cast<double>(n);
    std::vector<BBox> boxes(n);
    double bottom = 0.7 + 0.15 * rng.next_double();
    for (std::size_t i = 0; i < n; ++i) {
      BBox b;
      b.w = slot * (0.55 + 0.25 * rng.next_double());
      b.h = 0.22 + 0.2 * rng.next_double();
      b.x = 0.05 + slot * static_cast<double>(i) + (slot - b.w) * 0.5;
      b.y = bottom - b.h;
      boxes[i] = detail::clamp_box(b);
    }

    // First-match name lookup mirrors how relations bind downstream.
    auto index_of = [&](const std::string& name) -> std::size_t {
      for (std::size_t i = 0; i < n; ++i) {
        if (doc.objects[i].name == name) return i;
      }
      return n;
    };
    for (const auto& rel : doc.relations) {
      std::size_t s = index_of(rel.subject);
      std::size_t o = index_of(rel.object);
      if (s >= n || o >= n || s == o) continue;
      BBox& sb = boxes[s];
      const BBox& ob = boxes[o];
      if (rel.relation == "on") {
        sb.w = std::min(sb.w, 0.7 * ob.w);
        sb.x = ob.x + (ob.w - sb.w) / 2;
        sb.y = ob.y - sb.h - 0.005;
      } else if (rel.relation == "above" || rel.relation == "over") {
        sb.x = ob.x + (ob.w - sb.w) / 2;
        sb.y = ob.y - sb.h - (0.05 + 0.1 * rng.next_double());
      } else if (rel.relation == "below" || rel.relation == "under") {
        sb.x = ob.x + (ob.w - sb.w) / 2;
        sb.y = ob.y + ob.h + (0.05 + 0.1 * rng.next_double());
      } else if (rel.relation == "left of") {
        sb.x = ob.x - sb.w - (0.02 + 0.05 * rng.next_double());
        sb.y = ob.y + ob.h - sb.h;
      } else if (rel.relation == "right of") {
        sb.x = ob.x + ob.w + (0.02 + 0.05 * rng.next_double());
        sb.y = ob.y + ob.h - sb.h;
      } else if (rel.relation == "next to" || rel.relation == "beside" ||
                 rel.relation == "near") {
        sb.x = ob.x - sb.w - 0.03;
        if (sb.x < 0.005) sb.x = ob.x + ob.w + 0.03;
        sb.y = ob.y + ob.h - sb.h;
      }
      sb = detail::clamp_box(sb);
    }

    for (BBox& b : boxes) {
      if (rng.next_double() < opts_.layout_scramble_rate) {
        b.w = 0.05 + 0.5 * rng.next_double();
        b.h = 0.05 + 0.5 * rng.next_double();
        b.x = 0.005 + (0.985 - b.w) * rng.next_double();
        b.y = 0.005 + (0.985 - b.h) * rng.next_double();
        b = detail::clamp_box(b);
      }
    }

    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i) {
      arr.push_back({{"object", doc.objects[i].name},
                     {"bbox", {boxes[i].x, boxes[i].y, boxes[i].w, boxes[i].h}}});
    }
    return arr.dump(2);
  }

  Options opts_;
};

/// Offline image generator: each instance becomes a filled rectangle of its
/// color token with the category embedded as a pixel tag at the rectangle
/// origin. Tags are written after every fill so overlap cannot erase them.
class ToyImageGen : public ImageGenClient {
 public:
  struct Options {
    double defect_rate = 0.0;  // per-image chance of one injected defect
  };

  ToyImageGen() : opts_{} {}
  explicit ToyImageGen(Options opts) : opts_(opts) {}

  std::string id() const override { return "toy-imagegen"; }

  GeneratedImage generate(const ImageRequest& req) override {
    if (req.width <= 0 || req.height <= 0)
      fail(ErrorKind::client, "toy image backend: bad dimensions");

    std::string fingerprint = req.caption;
    for (const auto& inst : req.instances) fingerprint += "|" + inst.text;
    SplitMix64 rng(derive_seed(req.seed, fingerprint));

    // Decide the defect up front so drawing order cannot shift it.
    std::size_t victim = req.instances.size();
    bool wrong_color = false;
    if (!req.instances.empty() && rng.next_double() < opts_.defect_rate) {
      victim = rng.next_below(req.instances.size());
      wrong_color = rng.next() % 2 == 0;
    }

    Raster img(req.width, req.height);
    std::vector<std::pair<PixelRect, std::string>> tags;
    for (std::size_t i = 0; i < req.instances.size(); ++i) {
      const auto& inst = req.instances[i];
      if (i == victim && !wrong_color) continue;  // omitted object

      auto [color, category] = detail::split_phrase(inst.text);
      Rgb fill = color ? color->rgb : Rgb{128, 128, 128};
      if (i == victim && wrong_color) {
        auto colors = color_table();
        std::size_t pick = rng.next_below(colors.size() - 1);
        if (color && colors[pick].name == color->name) ++pick;
        fill = colors[pick].rgb;
      }
      PixelRect rect = to_pixel_rect(inst.bbox, req.width, req.height);
      fill_rect(img, rect, fill);
      tags.emplace_back(rect, category);
    }
    for (const auto& [rect, category] : tags) tag::write(img, rect.x, rect.y, category);

    GeneratedImage out;
    out.pixels = std::move(img);
    out.source_seed = req.seed;
    return out;
  }

 private:
  Options opts_;
};

/// Offline captioner: reads embedded category tags plus the dominant fill
/// color. Region instructions (the instruction text contains "region") yield
/// "a <color> <category>" for the first tag found; whole-image instructions
/// list every category in scan order.
class ToyCaptioner : public CaptionClient {
 public:
  std::string id() const override { return "toy-captioner"; }

  std::string caption(const Raster& image, const std::string& instruction) override {
    std::vector<std::string> tags = tag::scan(image);
    bool region = instruction.find("region") != std::string::npos;
    if (region) {
      if (tags.empty()) return "an empty region";
      std::string_view color = dominant_color(image);
      if (color.empty()) return "a " + tags.front();
      return "a " + std::string(color) + " " + tags.front();
    }
    if (tags.empty()) return "a blank image";
    std::string out = "A photo showing ";
    for (std::size_t i = 0; i < tags.size(); ++i) {
      if (i > 0) out += i + 1 == tags.size() ? " and " : ", ";
      out += "a " + tags[i];
    }
    return out + ".";
  }

 private:
  static std::string_view dominant_color(const Raster& img) {
    std::map<std::string_view, std::size_t> counts;
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        Rgb c = img.get(x, y);
        if (tag::is_tag_pixel(c)) continue;
        if (c == Rgb{255, 255, 255}) continue;  // canvas background
        ++counts[nearest_color_name(c)];
      }
    }
    std::string_view best;
    std::size_t best_n = 0;
    for (const auto& [name, n] : counts) {
      if (n > best_n) {
        best_n = n;
        best = name;
      }
    }
    return best;
  }
};

/// Offline judge: weighted field-match fraction. Tracked fields are each
/// object's category in its region caption, each color token in its region
/// caption, and all categories appearing in the global caption. Group weights
/// are split evenly across their fields and the score is normalized by the
/// weight actually present, so e.g. equal category/attribute weights over two
/// colored objects give four fields worth 25 points each.
class ToyJudge : public JudgeClient {
 public:
  std::string id() const override { return "toy-judge"; }

  double judge(const PredictedDescription& predicted, const SceneGraph& target,
               const JudgeWeights& weights) override {
    weights.validate();
    if (target.objects.empty()) fail(ErrorKind::argument, "scene graph has no objects");

    auto region_text = [&](const std::string& object_id) -> const std::string* {
      for (const auto& r : predicted.regions) {
        if (r.object_id == object_id) return &r.text;
      }
      return nullptr;
    };
    auto contains = [](const std::string& haystack, const std::string& needle) {
      return !needle.empty() && haystack.find(needle) != std::string::npos;
    };

    std::size_t colored = 0;
    for (const auto& obj : target.objects) {
      if (obj.color) ++colored;
    }

    double total = 0.0;
    double passed = 0.0;

    double per_category = weights.categories / static_cast<double>(target.objects.size());
    for (const auto& obj : target.objects) {
      total += per_category;
      const std::string* text = region_text(obj.id);
      if (text && contains(*text, obj.category)) passed += per_category;
    }

    if (colored > 0) {
      double per_color = weights.attributes / static_cast<double>(colored);
      for (const auto& obj : target.objects) {
        if (!obj.color) continue;
        total += per_color;
        const std::string* text = region_text(obj.id);
        if (text && contains(*text, *obj.color)) passed += per_color;
      }
    }

    total += weights.caption;
    bool all_in_caption = true;
    for (const auto& obj : target.objects) {
      if (!contains(predicted.global_caption, obj.category)) {
        all_in_caption = false;
        break;
      }
    }
    if (all_in_caption) passed += weights.caption;

    if (total <= 0) fail(ErrorKind::config, "judge weights leave no scorable field");
    return 100.0 * (passed / total);
  }
};

}  // namespace clis::toy
