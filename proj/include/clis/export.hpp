#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "clis/error.hpp"
#include "clis/pipeline.hpp"
#include "clis/raster.hpp"
#include "clis/rng.hpp"
#include "clis/scene_graph.hpp"

namespace clis {

// ---------------------------------------------------------------------------
// Question/answer templates. The acceptance suite pins these strings, so any
// edit is a deliberate format change.

namespace qa_text {

inline constexpr std::array<std::string_view, 8> kLocalizationQuestions = {
    "Where is the object described {attribute} located in the image in terms of the bounding "
    "box?",
    "What is the location of object described {attribute} in terms of the bounding box?",
    "Localize the object described {attribute} in terms of bounding box.",
    "Provide a bounding box for the object described {attribute}.",
    "Generate a bounding box for the object described {attribute}.",
    "Describe the object located at {layout}.",
    "Provide a caption for the object at {layout}.",
    "What is at location {layout} in image?",
};
inline constexpr std::string_view kLocalizationBoxAnswer = "It is located at {layout}.";
inline constexpr std::string_view kLocalizationTextAnswer = "There is a {attribute}.";

inline constexpr std::array<std::string_view, 6> kAttributeQuestions = {
    "What is the color of {obj}?",
    "What color is the {obj}?",
    "What color do you think the {obj} is?",
    "Which color is the {obj}?",
    "What is the number of {obj}?",
    "What is the total count of {obj} in the image?",
};
inline constexpr std::string_view kColorAnswer = "{color}.";
inline constexpr std::string_view kCountAnswer = "{number}.";

inline constexpr std::string_view kRelationQuestion =
    "What is the relationship between the subject described {attribute1} and the object "
    "described {attribute2}?";
inline constexpr std::string_view kRelationAnswer = "{subject} {relation} {object}.";

}  // namespace qa_text

enum class QATask { localization, attribute, relation };

inline std::string_view to_string(QATask t) {
  switch (t) {
    case QATask::localization: return "localization";
    case QATask::attribute: return "attribute";
    case QATask::relation: return "relation";
  }
  return "?";
}

struct QAPair {
  QATask task = QATask::localization;
  std::string question;
  std::string answer;
  std::string image_ref;
  std::optional<BBox> grounding;
};

/// "[x, y, w, h]" with three decimals, trailing zeros trimmed.
inline std::string format_layout(const BBox& b) {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s = buf;
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  return "[" + fmt(b.x) + ", " + fmt(b.y) + ", " + fmt(b.w) + ", " + fmt(b.h) + "]";
}

namespace detail {

inline std::string fill_slot(std::string_view tpl, std::string_view slot,
                             std::string_view value) {
  std::string out(tpl);
  std::size_t pos = out.find(slot);
  if (pos == std::string::npos)
    fail(ErrorKind::argument, "template has no slot " + std::string(slot));
  out.replace(pos, slot.size(), value);
  return out;
}

/// Collapses the doubled article the raw templates produce when the object
/// phrase already starts with one ("There is a a brown dog.").
inline std::string dedup_article(std::string text) {
  std::size_t pos;
  while ((pos = text.find(" a a ")) != std::string::npos) text.erase(pos, 2);
  if (text.rfind("a a ", 0) == 0) text.erase(0, 2);
  return text;
}

/// The noun phrase the templates call {attribute}: article + attribute text +
/// category, e.g. "a brown dog".
inline std::optional<std::string> attribute_phrase(const SceneObject& obj) {
  if (obj.attribute.empty()) return std::nullopt;
  return "a " + obj.attribute + " " + obj.category;
}

}  // namespace detail

enum class LocalizationDirection { box_from_text, text_from_box };

/// Builds one localization pair. Variants 1-5 ask for the box of a described
/// object; 6-8 describe the object at a box. Objects without attribute text
/// are skipped (nullopt), matching how captions introduce objects.
inline std::optional<QAPair> build_localization_qa(const SceneObject& obj,
                                                   LocalizationDirection direction, int variant) {
  std::optional<std::string> phrase = detail::attribute_phrase(obj);
  if (!phrase) return std::nullopt;
  std::string layout = format_layout(obj.layout);

  QAPair qa;
  qa.task = QATask::localization;
  qa.grounding = obj.layout;
  if (direction == LocalizationDirection::box_from_text) {
    if (variant < 1 || variant > 5) fail(ErrorKind::argument, "box-from-text variant must be 1-5");
    qa.question = detail::fill_slot(qa_text::kLocalizationQuestions[variant - 1], "{attribute}",
                                    *phrase);
    qa.answer = detail::fill_slot(qa_text::kLocalizationBoxAnswer, "{layout}", layout);
  } else {
    if (variant < 6 || variant > 8) fail(ErrorKind::argument, "text-from-box variant must be 6-8");
    qa.question =
        detail::fill_slot(qa_text::kLocalizationQuestions[variant - 1], "{layout}", layout);
    qa.answer = detail::dedup_article(
        detail::fill_slot(qa_text::kLocalizationTextAnswer, "{attribute}", *phrase));
  }
  return qa;
}

enum class AttributeKind { color, count };

/// Builds one attribute-binding pair. For color questions `target` is an
/// object id (skipped when the object has no color token); for count
/// questions it is a category (skipped when absent from the scene).
inline std::optional<QAPair> build_attribute_qa(const SceneGraph& sg, const std::string& target,
                                                AttributeKind kind, int variant) {
  QAPair qa;
  qa.task = QATask::attribute;
  if (kind == AttributeKind::color) {
    if (variant < 1 || variant > 4) fail(ErrorKind::argument, "color variant must be 1-4");
    const SceneObject* obj = sg.find(target);
    if (!obj) fail(ErrorKind::argument, "no object with id " + target);
    if (!obj->color) return std::nullopt;
    qa.question =
        detail::fill_slot(qa_text::kAttributeQuestions[variant - 1], "{obj}", obj->category);
    qa.answer = detail::fill_slot(qa_text::kColorAnswer, "{color}", *obj->color);
    qa.grounding = obj->layout;
  } else {
    if (variant < 5 || variant > 6) fail(ErrorKind::argument, "count variant must be 5-6");
    int count = sg.count_category(target);
    if (count == 0) return std::nullopt;
    qa.question = detail::fill_slot(qa_text::kAttributeQuestions[variant - 1], "{obj}", target);
    qa.answer = detail::fill_slot(qa_text::kCountAnswer, "{number}", std::to_string(count));
  }
  return qa;
}

/// Builds one relation-reasoning pair; both endpoints need attribute text.
inline std::optional<QAPair> build_relation_qa(const RelationTriple& triple,
                                               const SceneGraph& sg) {
  const SceneObject* subject = sg.find(triple.subject_id);
  const SceneObject* object = sg.find(triple.object_id);
  if (!subject || !object)
    fail(ErrorKind::argument, "relation endpoints missing from scene graph");
  std::optional<std::string> sub_phrase = detail::attribute_phrase(*subject);
  std::optional<std::string> obj_phrase = detail::attribute_phrase(*object);
  if (!sub_phrase || !obj_phrase) return std::nullopt;

  QAPair qa;
  qa.task = QATask::relation;
  qa.question = detail::fill_slot(
      detail::fill_slot(qa_text::kRelationQuestion, "{attribute1}", *sub_phrase), "{attribute2}",
      *obj_phrase);
  std::string answer = detail::fill_slot(qa_text::kRelationAnswer, "{subject}", subject->category);
  answer = detail::fill_slot(answer, "{relation}", triple.relation);
  qa.answer = detail::fill_slot(answer, "{object}", object->category);
  return qa;
}

// ---------------------------------------------------------------------------
// COCO detection export

/// Standard COCO detection document for a curated manifest. Category ids are
/// assigned alphabetically from 1; image and annotation ids follow manifest
/// order from 1. Pixel boxes use the same half-up rounding as the renderer.
inline nlohmann::json export_coco(const std::vector<ManifestRow>& rows,
                                  const std::filesystem::path& manifest_dir) {
  std::set<std::string> category_names;
  for (const auto& row : rows) {
    for (const auto& obj : row.graph.objects) category_names.insert(obj.category);
  }
  std::map<std::string, int> category_ids;
  nlohmann::json categories = nlohmann::json::array();
  int next_cat = 1;
  for (const auto& name : category_names) {
    category_ids[name] = next_cat;
    categories.push_back({{"id", next_cat}, {"name", name}, {"supercategory", "object"}});
    ++next_cat;
  }

  nlohmann::json images = nlohmann::json::array();
  nlohmann::json annotations = nlohmann::json::array();
  int image_id = 0;
  int annotation_id = 0;
  for (const auto& row : rows) {
    std::filesystem::path image_path = manifest_dir / row.image;
    if (!std::filesystem::exists(image_path))
      fail(ErrorKind::io, "sample " + row.item + " is missing its image: " + image_path.string());
    int width = row.width;
    int height = row.height;
    if (width <= 0 || height <= 0) {
      Raster img = read_png_file(image_path.string());
      width = img.width;
      height = img.height;
    }
    ++image_id;
    images.push_back({{"id", image_id},
                      {"file_name", row.image},
                      {"width", width},
                      {"height", height}});
    for (const auto& obj : row.graph.objects) {
      PixelRect r = to_pixel_rect(obj.layout, width, height);
      ++annotation_id;
      annotations.push_back({{"id", annotation_id},
                             {"image_id", image_id},
                             {"category_id", category_ids.at(obj.category)},
                             {"bbox", {r.x, r.y, r.w, r.h}},
                             {"area", r.w * r.h},
                             {"iscrowd", 0}});
    }
  }
  return {{"images", images}, {"annotations", annotations}, {"categories", categories}};
}

// ---------------------------------------------------------------------------
// QA JSONL export

/// Emits instruction-tuning pairs for every manifest row: one localization
/// question per object (direction and variant drawn from the seed), color and
/// count questions where applicable, and one relation question per triple.
inline int export_qa_jsonl(const std::vector<ManifestRow>& rows,
                           const std::filesystem::path& out_path, std::uint64_t seed) {
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write qa file: " + out_path.string());

  int written = 0;
  auto emit = [&](const std::optional<QAPair>& qa, const std::string& image_ref) {
    if (!qa) return;
    nlohmann::json row = {{"image", image_ref},
                          {"task", std::string(to_string(qa->task))},
                          {"question", qa->question},
                          {"answer", qa->answer}};
    if (qa->grounding) {
      row["grounding"] = {qa->grounding->x, qa->grounding->y, qa->grounding->w,
                          qa->grounding->h};
    }
    out << row.dump() << "\n";
    ++written;
  };

  for (const auto& row : rows) {
    SplitMix64 rng(derive_seed(seed, "qa/" + row.item + "/" + row.image));
    for (const auto& obj : row.graph.objects) {
      bool box_from_text = rng.next() % 2 == 0;
      if (box_from_text) {
        int variant = static_cast<int>(rng.next_in(1, 5));
        emit(build_localization_qa(obj, LocalizationDirection::box_from_text, variant),
             row.image);
      } else {
        int variant = static_cast<int>(rng.next_in(6, 8));
        emit(build_localization_qa(obj, LocalizationDirection::text_from_box, variant),
             row.image);
      }
      if (obj.color) {
        int variant = static_cast<int>(rng.next_in(1, 4));
        emit(build_attribute_qa(row.graph, obj.id, AttributeKind::color, variant), row.image);
      }
    }
    std::set<std::string> seen;
    for (const auto& obj : row.graph.objects) {
      if (!seen.insert(obj.category).second) continue;
      int variant = static_cast<int>(rng.next_in(5, 6));
      emit(build_attribute_qa(row.graph, obj.category, AttributeKind::count, variant), row.image);
    }
    for (const auto& triple : row.graph.relations) {
      emit(build_relation_qa(triple, row.graph), row.image);
    }
  }
  return written;
}

// ---------------------------------------------------------------------------
// SVG rendering

/// Layout inspection render: one labeled rectangle per object, colors picked
/// by category hash; optional center-to-center relation arrows.
inline std::string render_svg(const SceneGraph& sg, int width, int height,
                              bool arrows = false) {
  validate_scene_graph(sg);
  if (width <= 0 || height <= 0) fail(ErrorKind::argument, "canvas must be positive");

  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s = buf;
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  auto color_of = [](const std::string& category) {
    auto colors = color_table();
    Rgb c = colors[fnv1a64(category) % colors.size()].rgb;
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return std::string(buf);
  };
  auto escape = [](const std::string& text) {
    std::string out;
    for (char c : text) {
      switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        default: out += c;
      }
    }
    return out;
  };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(width) + "\" height=\"" + std::to_string(height) +
                    "\" viewBox=\"0 0 " + std::to_string(width) + " " + std::to_string(height) +
                    "\">\n";
  if (arrows) {
    svg += "  <defs><marker id=\"arrow\" markerWidth=\"8\" markerHeight=\"8\" refX=\"6\" "
           "refY=\"3\" orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 z\"/></marker></defs>\n";
  }
  for (const auto& obj : sg.objects) {
    std::string color = color_of(obj.category);
    svg += "  <rect x=\"" + fmt(obj.layout.x * width) + "\" y=\"" + fmt(obj.layout.y * height) +
           "\" width=\"" + fmt(obj.layout.w * width) + "\" height=\"" +
           fmt(obj.layout.h * height) + "\" fill=\"" + color + "\" fill-opacity=\"0.25\" " +
           "stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "  <text x=\"" + fmt(obj.layout.x * width + 4) + "\" y=\"" +
           fmt(obj.layout.y * height + 14) + "\" font-size=\"12\" font-family=\"sans-serif\">" +
           escape(obj.category + " (" + obj.id + ")") + "</text>\n";
  }
  if (arrows) {
    for (const auto& rel : sg.relations) {
      const SceneObject* s = sg.find(rel.subject_id);
      const SceneObject* o = sg.find(rel.object_id);
      Vec2 cs = center(s->layout);
      Vec2 co = center(o->layout);
      svg += "  <line x1=\"" + fmt(cs.x * width) + "\" y1=\"" + fmt(cs.y * height) + "\" x2=\"" +
             fmt(co.x * width) + "\" y2=\"" + fmt(co.y * height) +
             "\" stroke=\"#333333\" stroke-width=\"1.5\" marker-end=\"url(#arrow)\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace clis
