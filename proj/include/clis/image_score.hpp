#pragma once

#include <string>
#include <string_view>

#include "clis/clients.hpp"
#include "clis/error.hpp"
#include "clis/raster.hpp"
#include "clis/scene_graph.hpp"

namespace clis {

inline constexpr std::string_view kGlobalInstruction =
    "Describe the image in one or two sentences.";
inline constexpr std::string_view kRegionInstruction =
    "Describe the main object in this image region.";

/// Captions the whole image plus each object's layout crop. Region captions
/// come back in scene-graph object order, one per object.
inline PredictedDescription describe(CaptionClient& captioner, const GeneratedImage& img,
                                     const SceneGraph& sg) {
  if (img.pixels.width <= 0 || img.pixels.height <= 0)
    fail(ErrorKind::argument, "image has no pixels");
  validate_scene_graph(sg);

  PredictedDescription out;
  out.global_caption = captioner.caption(img.pixels, std::string(kGlobalInstruction));
  if (out.global_caption.empty())
    fail(ErrorKind::malformed_response, "captioner returned empty global caption");
  for (const auto& obj : sg.objects) {
    Raster crop = crop_region(img.pixels, obj.layout);
    std::string text = captioner.caption(crop, std::string(kRegionInstruction));
    if (text.empty())
      fail(ErrorKind::malformed_response,
           "captioner returned empty caption for region " + obj.id);
    out.regions.push_back({obj.id, std::move(text)});
  }
  return out;
}

/// Caption-alignment score: how well what a captioner sees in the image
/// matches the scene graph that conditioned it, per the judge. Always in
/// [0, 100]; higher is better aligned.
inline double clis_i(const GeneratedImage& img, const SceneGraph& sg, CaptionClient& captioner,
                     JudgeClient& judge, const JudgeWeights& weights = {}) {
  weights.validate();
  PredictedDescription predicted = describe(captioner, img, sg);
  double score = judge.judge(predicted, sg, weights);
  if (!(score >= 0.0 && score <= 100.0))
    fail(ErrorKind::malformed_response,
         "judge returned out-of-range score " + std::to_string(score));
  return score;
}

}  // namespace clis
