#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "clis/base64.hpp"
#include "clis/clients.hpp"
#include "clis/error.hpp"
#include "clis/png_io.hpp"
#include "clis/replay.hpp"
#include "clis/scene_graph.hpp"

namespace clis {

struct HttpEndpoint {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  std::string path = "/v1/generate";
  std::string auth_token;  // sent as a bearer token when non-empty
  int timeout_ms = 30000;
  int retries = 3;

  void validate() const {
    if (base_url.empty()) fail(ErrorKind::config, "endpoint base_url is empty");
    if (path.empty() || path.front() != '/')
      fail(ErrorKind::config, "endpoint path must start with '/'");
    if (timeout_ms <= 0) fail(ErrorKind::config, "endpoint timeout must be positive");
    if (retries <= 0) fail(ErrorKind::config, "endpoint retries must be positive");
  }
};

namespace detail {

/// One POST with JSON in/out. httplib clients are not safe for concurrent
/// use of one connection, so calls are serialized per endpoint instance.
class JsonHttpCaller {
 public:
  explicit JsonHttpCaller(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    endpoint_.validate();
  }

  nlohmann::json post(const nlohmann::json& body) {
    RetryPolicy policy;
    policy.attempts = endpoint_.retries;
    return with_retries(policy, [&] { return post_once(body); });
  }

  const HttpEndpoint& endpoint() const { return endpoint_; }

 private:
  nlohmann::json post_once(const nlohmann::json& body) {
    std::lock_guard lock(mu_);
    httplib::Client cli(endpoint_.base_url);
    cli.set_connection_timeout(std::chrono::milliseconds(endpoint_.timeout_ms));
    cli.set_read_timeout(std::chrono::milliseconds(endpoint_.timeout_ms));
    httplib::Headers headers;
    if (!endpoint_.auth_token.empty())
      headers.emplace("Authorization", "Bearer " + endpoint_.auth_token);

    auto res = cli.Post(endpoint_.path, headers, body.dump(), "application/json");
    if (!res)
      fail(ErrorKind::client,
           "request to " + endpoint_.base_url + endpoint_.path + " failed: " +
               httplib::to_string(res.error()));
    if (res->status != 200)
      fail(ErrorKind::client, "request to " + endpoint_.base_url + endpoint_.path +
                                  " returned status " + std::to_string(res->status));
    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded())
      fail(ErrorKind::malformed_response,
           "non-JSON response from " + endpoint_.base_url + endpoint_.path);
    return parsed;
  }

  HttpEndpoint endpoint_;
  std::mutex mu_;
};

}  // namespace detail

class HttpTextGenClient : public TextGenClient {
 public:
  explicit HttpTextGenClient(HttpEndpoint endpoint) : caller_(std::move(endpoint)) {}

  std::string id() const override { return "http:" + caller_.endpoint().base_url; }

  GenerationResponse generate(const GenerationRequest& req) override {
    auto start = std::chrono::steady_clock::now();
    nlohmann::json resp = caller_.post(canonical_request_json(req));
    if (!resp.contains("text") || !resp["text"].is_string() ||
        resp["text"].get<std::string>().empty())
      fail(ErrorKind::malformed_response, "text endpoint returned no text");
    GenerationResponse out;
    out.text = resp["text"].get<std::string>();
    out.backend_id = id();
    out.latency_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    return out;
  }

 private:
  detail::JsonHttpCaller caller_;
};

class HttpImageGenClient : public ImageGenClient {
 public:
  explicit HttpImageGenClient(HttpEndpoint endpoint) : caller_(std::move(endpoint)) {}

  std::string id() const override { return "http:" + caller_.endpoint().base_url; }

  GeneratedImage generate(const ImageRequest& req) override {
    nlohmann::json resp = caller_.post(canonical_request_json(req));
    if (!resp.contains("image") || !resp["image"].is_string())
      fail(ErrorKind::malformed_response, "image endpoint returned no image");
    GeneratedImage out;
    out.pixels = decode_png(base64_decode(resp["image"].get<std::string>()));
    out.source_seed = req.seed;
    return out;
  }

 private:
  detail::JsonHttpCaller caller_;
};

class HttpCaptionClient : public CaptionClient {
 public:
  explicit HttpCaptionClient(HttpEndpoint endpoint) : caller_(std::move(endpoint)) {}

  std::string id() const override { return "http:" + caller_.endpoint().base_url; }

  std::string caption(const Raster& image, const std::string& instruction) override {
    nlohmann::json body = {{"image", base64_encode(encode_png(image))},
                           {"instruction", instruction}};
    nlohmann::json resp = caller_.post(body);
    if (!resp.contains("caption") || !resp["caption"].is_string())
      fail(ErrorKind::malformed_response, "caption endpoint returned no caption");
    return resp["caption"].get<std::string>();
  }

 private:
  detail::JsonHttpCaller caller_;
};

class HttpJudgeClient : public JudgeClient {
 public:
  explicit HttpJudgeClient(HttpEndpoint endpoint) : caller_(std::move(endpoint)) {}

  std::string id() const override { return "http:" + caller_.endpoint().base_url; }

  double judge(const PredictedDescription& predicted, const SceneGraph& target,
               const JudgeWeights& weights) override {
    nlohmann::json regions = nlohmann::json::array();
    for (const auto& r : predicted.regions)
      regions.push_back({{"object_id", r.object_id}, {"text", r.text}});
    nlohmann::json body = {
        {"predicted", {{"global_caption", predicted.global_caption}, {"regions", regions}}},
        {"target", scene_graph_to_json(target)},
        {"weights",
         {{"categories", weights.categories},
          {"attributes", weights.attributes},
          {"caption", weights.caption}}}};
    nlohmann::json resp = caller_.post(body);
    if (!resp.contains("score") || !resp["score"].is_number())
      fail(ErrorKind::malformed_response, "judge endpoint returned no score");
    return resp["score"].get<double>();
  }

 private:
  detail::JsonHttpCaller caller_;
};

}  // namespace clis
