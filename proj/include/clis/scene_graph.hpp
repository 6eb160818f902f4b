#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "clis/error.hpp"
#include "clis/geometry.hpp"

namespace clis {

struct SceneObject {
  std::string id;         // unique within the owning graph
  std::string category;   // noun phrase, e.g. "elephant"
  std::string attribute;  // descriptive phrase, e.g. "a gray elephant"
  std::optional<std::string> color;  // canonical color token when known
  BBox layout;

  bool operator==(const SceneObject&) const = default;
};

struct RelationTriple {
  std::string subject_id;
  std::string relation;
  std::string object_id;

  bool operator==(const RelationTriple&) const = default;
};

struct SceneGraph {
  std::optional<std::string> source_id;  // provenance, e.g. annotation id
  std::vector<SceneObject> objects;
  std::vector<RelationTriple> relations;
  std::vector<std::vector<std::string>> groups;  // member object ids
  std::string caption;

  bool operator==(const SceneGraph&) const = default;

  const SceneObject* find(std::string_view id) const {
    for (const auto& o : objects) {
      if (o.id == id) return &o;
    }
    return nullptr;
  }

  std::size_t count_category(std::string_view category) const {
    std::size_t n = 0;
    for (const auto& o : objects) {
      if (o.category == category) ++n;
    }
    return n;
  }
};

struct ObjectList {
  std::vector<std::string> entries;  // duplicates mean multiple instances
};

/// Checks the unit-square constraints: all of x, y, w, h, x+w, y+h must be
/// strictly inside (0, 1). Throws Error(layout) naming the failed constraint.
inline BBox validate_bbox(double x, double y, double w, double h) {
  auto reject = [&](const char* what) {
    std::ostringstream os;
    os << what << " in bbox [" << x << ", " << y << ", " << w << ", " << h
       << "]";
    fail(ErrorKind::layout, os.str());
  };
  if (!(x > 0.0)) reject("x must be > 0");
  if (!(y > 0.0)) reject("y must be > 0");
  if (!(w > 0.0)) reject("w must be > 0");
  if (!(h > 0.0)) reject("h must be > 0");
  if (!(x < 1.0)) reject("x must be < 1");
  if (!(y < 1.0)) reject("y must be < 1");
  if (!(x + w < 1.0)) reject("x+w must be < 1");
  if (!(y + h < 1.0)) reject("y+h must be < 1");
  return BBox{x, y, w, h};
}

inline BBox validate_bbox(const std::array<double, 4>& v) {
  return validate_bbox(v[0], v[1], v[2], v[3]);
}

/// Full structural validation. Idempotent: a graph that passes comes back
/// unchanged.
inline SceneGraph validate_scene_graph(SceneGraph sg) {
  if (sg.objects.empty()) {
    fail(ErrorKind::graph, "scene graph has no objects");
  }
  std::unordered_set<std::string> ids;
  for (const auto& o : sg.objects) {
    if (o.id.empty()) fail(ErrorKind::graph, "object with empty id");
    if (!ids.insert(o.id).second) {
      fail(ErrorKind::graph, "duplicate object id \"" + o.id + "\"");
    }
    if (o.category.empty()) {
      fail(ErrorKind::graph, "object \"" + o.id + "\" has empty category");
    }
    try {
      validate_bbox(o.layout.x, o.layout.y, o.layout.w, o.layout.h);
    } catch (const Error& e) {
      fail(ErrorKind::graph,
           "object \"" + o.id + "\" has missing or invalid layout (" +
               e.what() + ")");
    }
  }
  for (const auto& r : sg.relations) {
    if (r.subject_id == r.object_id) {
      fail(ErrorKind::graph,
           "relation \"" + r.relation + "\" relates \"" + r.subject_id +
               "\" to itself");
    }
    for (const auto& end : {r.subject_id, r.object_id}) {
      if (!ids.contains(end)) {
        fail(ErrorKind::graph,
             "relation \"" + r.relation + "\" references unknown id \"" + end +
                 "\"");
      }
    }
    if (r.relation.empty()) fail(ErrorKind::graph, "relation with empty phrase");
  }
  for (const auto& group : sg.groups) {
    for (const auto& member : group) {
      if (!ids.contains(member)) {
        fail(ErrorKind::graph, "group references unknown id \"" + member + "\"");
      }
    }
  }
  if (sg.caption.empty()) fail(ErrorKind::graph, "caption is empty");
  return sg;
}

// --- JSON document format -------------------------------------------------
//
// {
//   "id": "...",                         // optional provenance
//   "objects": [{"id", "category", "attribute", "color"?, "bbox": [4]}],
//   "relations": [{"subject", "relation", "object"}],
//   "groups": [["id", ...], ...],
//   "caption": "..."
// }

inline nlohmann::json scene_graph_to_json(const SceneGraph& sg) {
  nlohmann::json doc;
  if (sg.source_id) doc["id"] = *sg.source_id;
  doc["objects"] = nlohmann::json::array();
  for (const auto& o : sg.objects) {
    nlohmann::json jo = {
        {"id", o.id},
        {"category", o.category},
        {"attribute", o.attribute},
        {"bbox", {o.layout.x, o.layout.y, o.layout.w, o.layout.h}},
    };
    if (o.color) jo["color"] = *o.color;
    doc["objects"].push_back(std::move(jo));
  }
  doc["relations"] = nlohmann::json::array();
  for (const auto& r : sg.relations) {
    doc["relations"].push_back(
        {{"subject", r.subject_id}, {"relation", r.relation}, {"object", r.object_id}});
  }
  doc["groups"] = sg.groups;
  doc["caption"] = sg.caption;
  return doc;
}

inline SceneGraph scene_graph_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorKind::graph, "scene graph document is not an object");
  SceneGraph sg;
  if (doc.contains("id") && doc["id"].is_string()) {
    sg.source_id = doc["id"].get<std::string>();
  }
  if (!doc.contains("objects") || !doc["objects"].is_array()) {
    fail(ErrorKind::graph, "missing field: objects");
  }
  for (const auto& jo : doc["objects"]) {
    SceneObject o;
    o.id = jo.value("id", "");
    o.category = jo.value("category", "");
    o.attribute = jo.value("attribute", "");
    if (jo.contains("color") && jo["color"].is_string()) {
      o.color = jo["color"].get<std::string>();
    }
    if (!jo.contains("bbox") || !jo["bbox"].is_array() || jo["bbox"].size() != 4) {
      fail(ErrorKind::graph, "object \"" + o.id + "\" has missing or invalid layout");
    }
    o.layout = BBox{jo["bbox"][0].get<double>(), jo["bbox"][1].get<double>(),
                    jo["bbox"][2].get<double>(), jo["bbox"][3].get<double>()};
    sg.objects.push_back(std::move(o));
  }
  if (doc.contains("relations")) {
    for (const auto& jr : doc["relations"]) {
      sg.relations.push_back(RelationTriple{jr.value("subject", ""),
                                            jr.value("relation", ""),
                                            jr.value("object", "")});
    }
  }
  if (doc.contains("groups")) {
    sg.groups = doc["groups"].get<std::vector<std::vector<std::string>>>();
  }
  if (!doc.contains("caption") || !doc["caption"].is_string()) {
    fail(ErrorKind::graph, "missing field: caption");
  }
  sg.caption = doc["caption"].get<std::string>();
  return validate_scene_graph(std::move(sg));
}

inline SceneGraph load_scene_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open scene graph file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, "invalid JSON in " + path.string() + ": " + e.what());
  }
  return scene_graph_from_json(doc);
}

inline void save_scene_graph(const SceneGraph& sg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write scene graph file " + path.string());
  out << scene_graph_to_json(sg).dump(2) << "\n";
}

}  // namespace clis
