#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "clis/base64.hpp"
#include "clis/clients.hpp"
#include "clis/error.hpp"
#include "clis/png_io.hpp"
#include "clis/rng.hpp"

namespace clis {

inline nlohmann::json canonical_request_json(const GenerationRequest& req) {
  return {{"prompt", req.prompt},
          {"temperature", req.temperature},
          {"max_tokens", req.max_tokens},
          {"seed", req.seed}};
}

inline nlohmann::json canonical_request_json(const ImageRequest& req) {
  nlohmann::json instances = nlohmann::json::array();
  for (const auto& inst : req.instances) {
    instances.push_back(
        {{"text", inst.text},
         {"bbox", {inst.bbox.x, inst.bbox.y, inst.bbox.w, inst.bbox.h}}});
  }
  return {{"caption", req.caption},
          {"instances", instances},
          {"seed", req.seed},
          {"width", req.width},
          {"height", req.height}};
}

/// Cassette key: hash of the canonical request JSON. nlohmann dumps object
/// keys sorted, so the digest is stable across processes.
inline std::string request_hash(const nlohmann::json& canonical) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical.dump())));
  return buf;
}

/// JSON Lines store of {hash, response} pairs. Not internally synchronized;
/// concurrent writers (the recording wrappers) bring their own lock.
class Cassette {
 public:
  Cassette() = default;

  static Cassette load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open cassette: " + path.string());
    Cassette c;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
      if (row.is_discarded() || !row.contains("hash") || !row.contains("response"))
        fail(ErrorKind::parse,
             "bad cassette line " + std::to_string(line_no) + " in " + path.string());
      c.entries_[row["hash"].get<std::string>()] = row["response"];
    }
    return c;
  }

  void put(const std::string& hash, nlohmann::json response) {
    entries_[hash] = std::move(response);
  }

  const nlohmann::json* find(const std::string& hash) const {
    auto it = entries_.find(hash);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return entries_.size(); }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write cassette: " + path.string());
    for (const auto& [hash, response] : ordered()) {
      out << nlohmann::json{{"hash", hash}, {"response", response}}.dump() << "\n";
    }
  }

 private:
  std::vector<std::pair<std::string, nlohmann::json>> ordered() const {
    std::vector<std::pair<std::string, nlohmann::json>> rows(entries_.begin(), entries_.end());
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return rows;
  }

  std::unordered_map<std::string, nlohmann::json> entries_;
};

/// Passes requests through to a live client and captures every response.
class RecordingTextGenClient : public TextGenClient {
 public:
  RecordingTextGenClient(std::shared_ptr<TextGenClient> inner, std::shared_ptr<Cassette> tape)
      : inner_(std::move(inner)), tape_(std::move(tape)) {}

  std::string id() const override { return inner_->id() + "+record"; }

  GenerationResponse generate(const GenerationRequest& req) override {
    GenerationResponse resp = inner_->generate(req);
    std::lock_guard lock(mu_);
    tape_->put(request_hash(canonical_request_json(req)),
               {{"text", resp.text}, {"backend_id", resp.backend_id}});
    return resp;
  }

 private:
  std::shared_ptr<TextGenClient> inner_;
  std::shared_ptr<Cassette> tape_;
  std::mutex mu_;
};

/// Serves previously recorded responses; any unrecorded request is an error.
class ReplayTextGenClient : public TextGenClient {
 public:
  explicit ReplayTextGenClient(std::shared_ptr<const Cassette> tape) : tape_(std::move(tape)) {}

  std::string id() const override { return "replay-textgen"; }

  GenerationResponse generate(const GenerationRequest& req) override {
    std::string hash = request_hash(canonical_request_json(req));
    const nlohmann::json* row = tape_->find(hash);
    if (!row) fail(ErrorKind::client, "replay miss for request " + hash);
    GenerationResponse resp;
    resp.text = (*row)["text"].get<std::string>();
    if (row->contains("backend_id")) resp.backend_id = (*row)["backend_id"].get<std::string>();
    return resp;
  }

 private:
  std::shared_ptr<const Cassette> tape_;
};

class RecordingImageGenClient : public ImageGenClient {
 public:
  RecordingImageGenClient(std::shared_ptr<ImageGenClient> inner, std::shared_ptr<Cassette> tape)
      : inner_(std::move(inner)), tape_(std::move(tape)) {}

  std::string id() const override { return inner_->id() + "+record"; }

  GeneratedImage generate(const ImageRequest& req) override {
    GeneratedImage img = inner_->generate(req);
    std::lock_guard lock(mu_);
    tape_->put(request_hash(canonical_request_json(req)),
               {{"image", base64_encode(encode_png(img.pixels))}});
    return img;
  }

 private:
  std::shared_ptr<ImageGenClient> inner_;
  std::shared_ptr<Cassette> tape_;
  std::mutex mu_;
};

class ReplayImageGenClient : public ImageGenClient {
 public:
  explicit ReplayImageGenClient(std::shared_ptr<const Cassette> tape) : tape_(std::move(tape)) {}

  std::string id() const override { return "replay-imagegen"; }

  GeneratedImage generate(const ImageRequest& req) override {
    std::string hash = request_hash(canonical_request_json(req));
    const nlohmann::json* row = tape_->find(hash);
    if (!row) fail(ErrorKind::client, "replay miss for request " + hash);
    GeneratedImage img;
    img.pixels = decode_png(base64_decode((*row)["image"].get<std::string>()));
    img.source_seed = req.seed;
    return img;
  }

 private:
  std::shared_ptr<const Cassette> tape_;
};

}  // namespace clis
