#pragma once

#include <algorithm>
#include <cctype>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "clis/error.hpp"
#include "clis/scene_graph.hpp"

namespace clis {

/// Intermediate form of a parsed description response, before layouts exist.
struct DescribedObject {
  std::string name;
  std::string attribute;
  std::optional<std::string> color;
};

struct DescribedRelation {
  std::string subject;
  std::string relation;
  std::string object;
};

struct DescriptionDoc {
  std::vector<DescribedObject> objects;
  std::vector<std::vector<std::string>> groups;  // object names
  std::vector<DescribedRelation> relations;
  std::string caption;
};

namespace detail {

inline std::string snippet(std::string_view raw, std::size_t limit = 160) {
  std::string s(raw.substr(0, limit));
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  if (raw.size() > limit) s += "...";
  return s;
}

/// Scans a balanced JSON value starting at `start` (must be '{' or '[').
/// Returns one past the end index, or npos if unbalanced.
inline std::size_t scan_balanced(std::string_view text, std::size_t start) {
  char open = text[start];
  char close = open == '{' ? '}' : ']';
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == open) {
      ++depth;
    } else if (c == close) {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace detail

/// Pulls the first well-formed JSON object or array out of free-form model
/// output, skipping prose and markdown fences. Returns nullopt if none parses.
inline std::optional<nlohmann::json> extract_first_json(std::string_view raw) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '{' && raw[i] != '[') continue;
    std::size_t end = detail::scan_balanced(raw, i);
    if (end == std::string_view::npos) continue;
    nlohmann::json parsed =
        nlohmann::json::parse(raw.substr(i, end - i), nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded()) return parsed;
    // A balanced but invalid candidate: resume after its opening bracket.
  }
  return std::nullopt;
}

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Case-insensitive object key lookup.
inline const nlohmann::json* find_key(const nlohmann::json& obj, std::string_view key) {
  if (!obj.is_object()) return nullptr;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (lower(it.key()) == key) return &it.value();
  }
  return nullptr;
}

inline std::string require_string(const nlohmann::json& obj, std::string_view key,
                                  std::string_view what) {
  const nlohmann::json* v = find_key(obj, key);
  if (!v || !v->is_string())
    fail(ErrorKind::parse, std::string(what) + " missing field: " + std::string(key));
  return v->get<std::string>();
}

/// Trim, lowercase, collapse runs of whitespace. Shared by layout binding and
/// relation resolution so "Dog " and "dog" are one name.
inline std::string normalize_name(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

}  // namespace detail

inline DescriptionDoc parse_description_response(std::string_view raw) {
  std::optional<nlohmann::json> doc = extract_first_json(raw);
  if (!doc || !doc->is_object())
    fail(ErrorKind::parse, "no JSON object in response: " + detail::snippet(raw));

  DescriptionDoc out;
  const nlohmann::json* objects = detail::find_key(*doc, "objects");
  if (!objects || !objects->is_array() || objects->empty())
    fail(ErrorKind::parse, "missing field: objects in response: " + detail::snippet(raw));
  for (const auto& entry : *objects) {
    DescribedObject obj;
    obj.name = detail::require_string(entry, "name", "object entry");
    if (const auto* attr = detail::find_key(entry, "attribute"); attr && attr->is_string())
      obj.attribute = attr->get<std::string>();
    if (const auto* color = detail::find_key(entry, "color"); color && color->is_string() &&
                                                              !color->get<std::string>().empty())
      obj.color = color->get<std::string>();
    out.objects.push_back(std::move(obj));
  }

  if (const auto* groups = detail::find_key(*doc, "groups"); groups && groups->is_array()) {
    for (const auto& group : *groups) {
      if (!group.is_array()) continue;
      std::vector<std::string> names;
      for (const auto& name : group) {
        if (name.is_string()) names.push_back(name.get<std::string>());
      }
      if (!names.empty()) out.groups.push_back(std::move(names));
    }
  }

  const nlohmann::json* rels = detail::find_key(*doc, "relationships");
  if (!rels) rels = detail::find_key(*doc, "relations");
  if (rels && rels->is_array()) {
    for (const auto& rel : *rels) {
      DescribedRelation r;
      r.subject = detail::require_string(rel, "subject", "relation entry");
      r.relation = detail::require_string(rel, "relation", "relation entry");
      r.object = detail::require_string(rel, "object", "relation entry");
      out.relations.push_back(std::move(r));
    }
  }

  const nlohmann::json* caption = detail::find_key(*doc, "caption");
  if (!caption || !caption->is_string() || caption->get<std::string>().empty())
    fail(ErrorKind::parse, "missing field: caption in response: " + detail::snippet(raw));
  out.caption = caption->get<std::string>();
  return out;
}

/// Canonical JSON form of a parsed description; what the layout request
/// carries downstream.
inline nlohmann::json description_doc_to_json(const DescriptionDoc& doc) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& obj : doc.objects) {
    nlohmann::json entry = {{"name", obj.name}, {"attribute", obj.attribute}};
    if (obj.color) entry["color"] = *obj.color;
    objects.push_back(std::move(entry));
  }
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& group : doc.groups) groups.push_back(group);
  nlohmann::json relations = nlohmann::json::array();
  for (const auto& rel : doc.relations) {
    relations.push_back(
        {{"subject", rel.subject}, {"relation", rel.relation}, {"object", rel.object}});
  }
  return {{"objects", objects},
          {"groups", groups},
          {"relationships", relations},
          {"caption", doc.caption}};
}

/// One parsed layout line: object name as the model wrote it, plus its box.
using NamedLayout = std::pair<std::string, BBox>;

inline std::vector<NamedLayout> parse_layout_response(std::string_view raw) {
  std::optional<nlohmann::json> doc = extract_first_json(raw);
  if (!doc) fail(ErrorKind::parse, "no JSON in response: " + detail::snippet(raw));
  const nlohmann::json* arr = doc->is_array() ? &*doc : detail::find_key(*doc, "layout");
  if (!arr || !arr->is_array() || arr->empty())
    fail(ErrorKind::parse, "no layout array in response: " + detail::snippet(raw));

  std::vector<NamedLayout> out;
  for (const auto& entry : *arr) {
    std::string name = detail::require_string(entry, "object", "layout entry");
    const nlohmann::json* bbox = detail::find_key(entry, "bbox");
    if (!bbox || !bbox->is_array() || bbox->size() != 4)
      fail(ErrorKind::parse, "layout entry for '" + name + "' has no bbox[4]");
    std::array<double, 4> vals{};
    for (std::size_t i = 0; i < 4; ++i) {
      if (!(*bbox)[i].is_number())
        fail(ErrorKind::parse, "layout entry for '" + name + "' has non-numeric bbox");
      vals[i] = (*bbox)[i].get<double>();
    }
    out.emplace_back(std::move(name), validate_bbox(vals));
  }
  return out;
}

inline nlohmann::json layouts_to_json(const std::vector<NamedLayout>& layouts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [name, box] : layouts) {
    arr.push_back({{"object", name}, {"bbox", {box.x, box.y, box.w, box.h}}});
  }
  return arr;
}

/// Joins a parsed description with a parsed layout list into a scene graph.
/// Objects get ids o1..oN in description order. Duplicate names bind
/// first-come-first-served: the k-th layout named "dog" goes to the k-th
/// described "dog".
inline SceneGraph assemble_scene_graph(const DescriptionDoc& doc,
                                       const std::vector<NamedLayout>& layouts) {
  SceneGraph sg;
  sg.caption = doc.caption;

  std::map<std::string, std::deque<std::size_t>> unbound;  // normalized name -> object index
  std::map<std::string, std::string> first_id;             // normalized name -> first object id
  std::vector<bool> has_layout(doc.objects.size(), false);

  for (std::size_t i = 0; i < doc.objects.size(); ++i) {
    const auto& src = doc.objects[i];
    SceneObject obj;
    obj.id = "o" + std::to_string(i + 1);
    obj.category = src.name;
    obj.attribute = src.attribute;
    obj.color = src.color;
    std::string key = detail::normalize_name(src.name);
    if (key.empty()) fail(ErrorKind::binding, "object with blank name");
    unbound[key].push_back(i);
    first_id.emplace(key, obj.id);
    sg.objects.push_back(std::move(obj));
  }

  for (const auto& [name, box] : layouts) {
    std::string key = detail::normalize_name(name);
    auto it = unbound.find(key);
    if (it == unbound.end() || it->second.empty())
      fail(ErrorKind::binding, "layout names unknown object: " + name);
    std::size_t idx = it->second.front();
    it->second.pop_front();
    sg.objects[idx].layout = box;
    has_layout[idx] = true;
  }
  for (std::size_t i = 0; i < doc.objects.size(); ++i) {
    if (!has_layout[i])
      fail(ErrorKind::binding, "no layout for object: " + doc.objects[i].name);
  }

  auto resolve = [&](const std::string& name, std::string_view role) {
    auto it = first_id.find(detail::normalize_name(name));
    if (it == first_id.end())
      fail(ErrorKind::binding, std::string(role) + " names unknown object: " + name);
    return it->second;
  };
  for (const auto& rel : doc.relations) {
    std::string s = resolve(rel.subject, "relation subject");
    std::string o = resolve(rel.object, "relation object");
    if (s == o) continue;  // self-relations carry no layout signal; drop quietly
    sg.relations.push_back({s, rel.relation, o});
  }
  for (const auto& group : doc.groups) {
    std::vector<std::string> ids;
    for (const auto& name : group) ids.push_back(resolve(name, "group member"));
    sg.groups.push_back(std::move(ids));
  }

  validate_scene_graph(sg);
  return sg;
}

}  // namespace clis
