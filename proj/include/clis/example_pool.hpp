#pragma once

#include <cctype>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "clis/error.hpp"
#include "clis/scene_graph.hpp"

namespace clis {

/// Canonical relation key: lowercase, punctuation stripped, whitespace
/// collapsed. An optional synonym table then maps whole phrases
/// ("on top of" -> "on").
inline std::string normalize_relation(
    std::string_view phrase,
    const std::unordered_map<std::string, std::string>* synonyms = nullptr) {
  if (phrase.empty()) fail(ErrorKind::argument, "empty relation phrase");
  std::string key;
  key.reserve(phrase.size());
  bool pending_space = false;
  for (unsigned char c : phrase) {
    if (std::isalnum(c)) {
      if (pending_space && !key.empty()) key.push_back(' ');
      pending_space = false;
      key.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      pending_space = true;
    }
    // punctuation dropped
  }
  if (key.empty()) {
    fail(ErrorKind::argument,
         "relation phrase \"" + std::string(phrase) + "\" is empty after normalization");
  }
  if (synonyms) {
    if (auto it = synonyms->find(key); it != synonyms->end()) return it->second;
  }
  return key;
}

using RelationSynonyms = std::unordered_map<std::string, std::string>;

/// Synonym file: JSON object {"phrase": "canonical", ...}. Both sides are
/// normalized so the table works regardless of input casing.
inline RelationSynonyms load_relation_synonyms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open synonyms file " + path.string());
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    fail(ErrorKind::parse, "synonyms file must be a JSON object: " + path.string());
  RelationSynonyms out;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!it.value().is_string())
      fail(ErrorKind::parse, "synonym value for \"" + it.key() + "\" must be a string");
    out[normalize_relation(it.key())] = normalize_relation(it.value().get<std::string>());
  }
  return out;
}

/// One real-annotation layout pair, the unit CLIS-L compares against.
struct LayoutExample {
  std::string subject_category;
  std::string object_category;
  std::string relation;  // canonical key
  BBox subject_box;
  BBox object_box;
  std::string source_id;

  bool operator==(const LayoutExample&) const = default;
};

struct PoolKey {
  std::string s, o, r;
  bool operator==(const PoolKey&) const = default;
};

struct PoolKeyHash {
  std::size_t operator()(const PoolKey& k) const {
    std::size_t h = std::hash<std::string>{}(k.s);
    h = h * 1000003 ^ std::hash<std::string>{}(k.o);
    h = h * 1000003 ^ std::hash<std::string>{}(k.r);
    return h;
  }
};

/// Immutable after build; lookups are exact on all three key parts and keep
/// insertion order inside a bucket.
class ExamplePool {
 public:
  void insert(LayoutExample ex) {
    PoolKey key{ex.subject_category, ex.object_category, ex.relation};
    index_[key].push_back(std::move(ex));
    ++size_;
  }

  std::span<const LayoutExample> lookup(
      std::string_view s_cat, std::string_view o_cat, std::string_view relation,
      const std::unordered_map<std::string, std::string>* synonyms = nullptr) const {
    PoolKey key{std::string(s_cat), std::string(o_cat),
                normalize_relation(relation, synonyms)};
    auto it = index_.find(key);
    if (it == index_.end()) return {};
    return it->second;
  }

  std::size_t size() const { return size_; }
  std::size_t key_count() const { return index_.size(); }

  // Deterministically ordered (key-sorted) view, for stats and persistence.
  std::vector<std::pair<PoolKey, std::span<const LayoutExample>>> buckets() const {
    std::map<std::tuple<std::string_view, std::string_view, std::string_view>,
             const std::vector<LayoutExample>*>
        sorted;
    for (const auto& [key, examples] : index_) {
      sorted[{key.s, key.o, key.r}] = &examples;
    }
    std::vector<std::pair<PoolKey, std::span<const LayoutExample>>> out;
    out.reserve(sorted.size());
    for (const auto& [key, examples] : sorted) {
      out.push_back({PoolKey{std::string(std::get<0>(key)), std::string(std::get<1>(key)),
                             std::string(std::get<2>(key))},
                     *examples});
    }
    return out;
  }

 private:
  std::unordered_map<PoolKey, std::vector<LayoutExample>, PoolKeyHash> index_;
  std::size_t size_ = 0;
};

struct PoolBuildError {
  std::string source_id;
  std::string message;
};

struct PoolBuildReport {
  std::size_t documents = 0;
  std::size_t accepted = 0;
  std::vector<PoolBuildError> errors;
};

/// One LayoutExample per relation triple of each valid document. Malformed
/// documents land in the report and the build continues.
inline ExamplePool build_pool(
    const std::vector<nlohmann::json>& documents, PoolBuildReport* report = nullptr,
    const std::unordered_map<std::string, std::string>* synonyms = nullptr) {
  ExamplePool pool;
  std::size_t line = 0;
  for (const auto& doc : documents) {
    ++line;
    if (report) ++report->documents;
    std::string fallback_id = "doc" + std::to_string(line);
    try {
      SceneGraph sg = scene_graph_from_json(doc);
      std::string src = sg.source_id.value_or(fallback_id);
      for (const auto& triple : sg.relations) {
        const SceneObject* subject = sg.find(triple.subject_id);
        const SceneObject* object = sg.find(triple.object_id);
        pool.insert(LayoutExample{subject->category, object->category,
                                  normalize_relation(triple.relation, synonyms),
                                  subject->layout, object->layout, src});
      }
      if (report) ++report->accepted;
    } catch (const Error& e) {
      if (report) report->errors.push_back({fallback_id, e.what()});
    }
  }
  return pool;
}

inline ExamplePool build_pool_from_jsonl(
    const std::filesystem::path& path, PoolBuildReport* report = nullptr,
    const std::unordered_map<std::string, std::string>* synonyms = nullptr) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open annotations file " + path.string());
  std::vector<nlohmann::json> docs;
  std::string linebuf;
  std::size_t lineno = 0;
  while (std::getline(in, linebuf)) {
    ++lineno;
    if (linebuf.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      docs.push_back(nlohmann::json::parse(linebuf));
    } catch (const nlohmann::json::exception& e) {
      if (report) {
        report->documents++;
        report->errors.push_back({"line" + std::to_string(lineno), e.what()});
      }
    }
  }
  return build_pool(docs, report, synonyms);
}

// Pool file: JSON Lines, one example per line.
// {"s": ..., "o": ..., "r": ..., "sbox": [4], "obox": [4], "src": ...}

inline void save_pool(const ExamplePool& pool, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write pool file " + path.string());
  for (const auto& [key, examples] : pool.buckets()) {
    for (const auto& ex : examples) {
      nlohmann::json row = {
          {"s", ex.subject_category},
          {"o", ex.object_category},
          {"r", ex.relation},
          {"sbox", {ex.subject_box.x, ex.subject_box.y, ex.subject_box.w, ex.subject_box.h}},
          {"obox", {ex.object_box.x, ex.object_box.y, ex.object_box.w, ex.object_box.h}},
          {"src", ex.source_id},
      };
      out << row.dump() << "\n";
    }
  }
}

inline ExamplePool load_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open pool file " + path.string());
  ExamplePool pool;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::parse,
           "pool file " + path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
    auto box = [&](const char* field) {
      const auto& v = row.at(field);
      return validate_bbox(v[0].get<double>(), v[1].get<double>(), v[2].get<double>(),
                           v[3].get<double>());
    };
    try {
      pool.insert(LayoutExample{row.at("s").get<std::string>(), row.at("o").get<std::string>(),
                                row.at("r").get<std::string>(), box("sbox"), box("obox"),
                                row.value("src", "")});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::parse,
           "pool file " + path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return pool;
}

}  // namespace clis
