#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "clis/error.hpp"
#include "clis/raster.hpp"
#include "clis/scene_graph.hpp"

namespace clis {

struct GenerationRequest {
  std::string prompt;
  double temperature = 0.7;
  int max_tokens = 2048;
  std::uint64_t seed = 0;
};

struct GenerationResponse {
  std::string text;
  double latency_ms = 0.0;
  std::string backend_id;
};

class TextGenClient {
 public:
  virtual ~TextGenClient() = default;
  virtual GenerationResponse generate(const GenerationRequest& req) = 0;
  virtual std::string id() const = 0;
};

/// One object to place when synthesizing an image.
struct ImageInstance {
  std::string text;  // short phrase, e.g. "a red cup"
  BBox bbox;
};

struct ImageRequest {
  std::string caption;
  std::vector<ImageInstance> instances;
  std::uint64_t seed = 0;
  int width = 512;
  int height = 512;
};

struct GeneratedImage {
  Raster pixels;
  std::uint64_t source_seed = 0;
  std::string scene_graph_ref;
};

class ImageGenClient {
 public:
  virtual ~ImageGenClient() = default;
  virtual GeneratedImage generate(const ImageRequest& req) = 0;
  virtual std::string id() const = 0;
};

class CaptionClient {
 public:
  virtual ~CaptionClient() = default;
  virtual std::string caption(const Raster& image, const std::string& instruction) = 0;
  virtual std::string id() const = 0;
};

struct RegionCaption {
  std::string object_id;
  std::string text;
};

/// What the captioner saw: one global caption plus one caption per object crop.
struct PredictedDescription {
  std::string global_caption;
  std::vector<RegionCaption> regions;
};

struct JudgeWeights {
  double categories = 0.5;
  double attributes = 0.3;
  double caption = 0.2;

  void validate() const {
    if (categories < 0 || attributes < 0 || caption < 0)
      fail(ErrorKind::config, "judge weights must be non-negative");
    if (categories + attributes + caption <= 0)
      fail(ErrorKind::config, "judge weights must not all be zero");
  }
};

class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  /// Returns a consistency score in [0, 100].
  virtual double judge(const PredictedDescription& predicted, const SceneGraph& target,
                       const JudgeWeights& weights) = 0;
  virtual std::string id() const = 0;
};

struct ImageBatch {
  std::vector<GeneratedImage> images;
  std::vector<std::string> failures;  // human-readable, one per failed draw
};

inline std::string instance_phrase(const SceneObject& obj) {
  std::string text;
  if (obj.color) {
    text = *obj.color + " " + obj.category;
  } else if (!obj.attribute.empty()) {
    text = obj.attribute + " " + obj.category;
  } else {
    text = obj.category;
  }
  return text;
}

inline ImageRequest image_request_for(const SceneGraph& sg, std::uint64_t seed, int width,
                                      int height) {
  ImageRequest req;
  req.caption = sg.caption;
  req.seed = seed;
  req.width = width;
  req.height = height;
  for (const auto& obj : sg.objects) {
    req.instances.push_back({instance_phrase(obj), obj.layout});
  }
  return req;
}

/// Draws `n` images for one scene graph with consecutive seeds. Failed draws
/// are recorded, not fatal; the caller decides how many survivors it needs.
inline ImageBatch generate_images(ImageGenClient& client, const SceneGraph& sg, int n,
                                  std::uint64_t seed, int width = 512, int height = 512) {
  if (n <= 0) fail(ErrorKind::argument, "image count must be positive");
  ImageBatch batch;
  for (int i = 0; i < n; ++i) {
    ImageRequest req = image_request_for(sg, seed + static_cast<std::uint64_t>(i), width, height);
    try {
      GeneratedImage img = client.generate(req);
      img.source_seed = req.seed;
      if (sg.source_id) img.scene_graph_ref = *sg.source_id;
      batch.images.push_back(std::move(img));
    } catch (const Error& e) {
      batch.failures.push_back("seed " + std::to_string(req.seed) + ": " + e.what());
    }
  }
  return batch;
}

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{100};
  bool sleep = true;  // tests disable real sleeping
};

/// Runs `op` with exponential backoff. Only client errors are retried; other
/// error kinds indicate caller bugs and propagate immediately.
template <typename F>
auto with_retries(const RetryPolicy& policy, F&& op) -> decltype(op()) {
  if (policy.attempts <= 0) fail(ErrorKind::config, "retry attempts must be positive");
  std::chrono::milliseconds backoff = policy.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return op();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::client || attempt >= policy.attempts) {
        if (attempt > 1) {
          fail(e.kind(), std::string(e.what()) + " (after " + std::to_string(attempt) +
                             " attempts)");
        }
        throw;
      }
      if (policy.sleep) std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
}

}  // namespace clis
