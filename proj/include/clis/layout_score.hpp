#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "clis/error.hpp"
#include "clis/example_pool.hpp"
#include "clis/geometry.hpp"
#include "clis/scene_graph.hpp"

namespace clis {

/// Weights of the layout score. alpha/beta split the distance term between
/// IoU and center-distance similarity; w_size/w_dist/w_dir combine the three
/// component scores. Each pair/triple must sum to 1 (within 1e-9); internally
/// the last weight of each group is treated as the exact complement so that a
/// perfect pool match scores exactly 1.
struct ClisLWeights {
  double alpha = 0.5;
  double beta = 0.5;
  double w_size = 1.0 / 3.0;
  double w_dist = 1.0 / 3.0;
  double w_dir = 1.0 / 3.0;

  void validate() const {
    for (double w : {alpha, beta, w_size, w_dist, w_dir}) {
      if (!(w >= 0.0)) fail(ErrorKind::config, "layout score weights must be >= 0");
    }
    if (std::abs(alpha + beta - 1.0) > 1e-9) {
      fail(ErrorKind::config, "alpha + beta must equal 1");
    }
    if (std::abs(w_size + w_dist + w_dir - 1.0) > 1e-9) {
      fail(ErrorKind::config, "w_size + w_dist + w_dir must equal 1");
    }
  }
};

enum class Aggregation { mean, min };

inline Aggregation aggregation_from_string(std::string_view s) {
  if (s == "mean") return Aggregation::mean;
  if (s == "min") return Aggregation::min;
  fail(ErrorKind::config, "unknown aggregation \"" + std::string(s) + "\" (mean|min)");
}

struct ClisLConfig {
  ClisLWeights weights;
  double fallback = 0.5;  // neutral score for triples with no pool match
  Aggregation aggregation = Aggregation::mean;

  void validate() const {
    weights.validate();
    if (fallback < 0.0 || fallback > 1.0) {
      fail(ErrorKind::config, "fallback must be in [0, 1]");
    }
  }
};

struct TripleScore {
  std::string subject_id;
  std::string relation;
  std::string object_id;
  double size = 0.0;
  double dist = 0.0;
  double dir = 0.0;
  double combined = 0.0;
  bool matched = false;  // false -> combined is the configured fallback
};

namespace detail {
inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Cosine of the angle between two direction vectors, mapped onto [0, 1].
// Zero vectors (coincident centers): both zero reads as "same direction",
// exactly one zero as indifferent.
inline double direction_similarity(const Vec2& u, const Vec2& v) {
  bool u0 = (u.x == 0.0 && u.y == 0.0);
  bool v0 = (v.x == 0.0 && v.y == 0.0);
  if (u0 && v0) return 1.0;
  if (u0 || v0) return 0.5;
  if (u == v) return 1.0;
  if (u.x == -v.x && u.y == -v.y) return 0.0;
  double c = std::clamp(u.x * v.x + u.y * v.y, -1.0, 1.0);
  return (c + 1.0) / 2.0;
}
}  // namespace detail

/// Best size-ratio similarity over the candidate examples.
inline double size_score(const BBox& s, const BBox& o,
                         std::span<const LayoutExample> examples) {
  if (examples.empty()) fail(ErrorKind::pool_miss, "size_score over empty example list");
  double query = area(s) / area(o);
  double best = 0.0;
  for (const auto& ex : examples) {
    best = std::max(best, sim_score(query, area(ex.subject_box) / area(ex.object_box)));
  }
  return detail::clamp01(best);
}

/// Best distance similarity: the IoU and center-distance similarities are
/// blended per example (the max runs over the blend, not per term).
inline double dist_score(const BBox& s, const BBox& o,
                         std::span<const LayoutExample> examples, double alpha,
                         double beta) {
  if (examples.empty()) fail(ErrorKind::pool_miss, "dist_score over empty example list");
  if (std::abs(alpha + beta - 1.0) > 1e-9) {
    fail(ErrorKind::config, "alpha + beta must equal 1");
  }
  double query_iou = iou(s, o);
  double query_rd = rel_dist(s, o);
  double best = 0.0;
  for (const auto& ex : examples) {
    double s_iou = sim_score(query_iou, iou(ex.subject_box, ex.object_box));
    double s_rd = sim_score(query_rd, rel_dist(ex.subject_box, ex.object_box));
    // alpha*s_iou + beta*s_rd, written so identical sims combine exactly
    best = std::max(best, s_iou + beta * (s_rd - s_iou));
  }
  return detail::clamp01(best);
}

/// Best direction similarity over the candidate examples.
inline double dir_score(const BBox& s, const BBox& o,
                        std::span<const LayoutExample> examples) {
  if (examples.empty()) fail(ErrorKind::pool_miss, "dir_score over empty example list");
  Vec2 query = direction(s, o);
  double best = 0.0;
  for (const auto& ex : examples) {
    best = std::max(best, detail::direction_similarity(
                              query, direction(ex.subject_box, ex.object_box)));
  }
  return detail::clamp01(best);
}

/// Scores one relation triple against the pool. A pool miss yields the
/// configured neutral fallback with matched=false rather than an error —
/// rare category pairs are the point of the pipeline, not a failure mode.
inline TripleScore clis_l_triple(const RelationTriple& triple, const SceneGraph& sg,
                                 const ExamplePool& pool, const ClisLConfig& config) {
  config.validate();
  const SceneObject* subject = sg.find(triple.subject_id);
  const SceneObject* object = sg.find(triple.object_id);
  if (!subject || !object) {
    fail(ErrorKind::graph, "triple references unknown object id");
  }
  TripleScore out;
  out.subject_id = triple.subject_id;
  out.relation = triple.relation;
  out.object_id = triple.object_id;
  auto examples = pool.lookup(subject->category, object->category, triple.relation);
  if (examples.empty()) {
    out.combined = config.fallback;
    out.matched = false;
    return out;
  }
  const auto& w = config.weights;
  out.size = size_score(subject->layout, object->layout, examples);
  out.dist = dist_score(subject->layout, object->layout, examples, w.alpha, w.beta);
  out.dir = dir_score(subject->layout, object->layout, examples);
  // w_size*size + w_dist*dist + w_dir*dir with w_size as the complement,
  // so three component scores of 1 combine to exactly 1
  out.combined = detail::clamp01(out.size + w.w_dist * (out.dist - out.size) +
                                 w.w_dir * (out.dir - out.size));
  out.matched = true;
  return out;
}

struct SceneLayoutScore {
  double score = 0.0;  // [0, 100]
  std::vector<TripleScore> triples;
  bool vacuous = false;  // no relations to score; 100 by convention
};

inline SceneLayoutScore clis_l_scene(const SceneGraph& sg, const ExamplePool& pool,
                                     const ClisLConfig& config) {
  config.validate();
  SceneLayoutScore out;
  if (sg.relations.empty()) {
    out.score = 100.0;
    out.vacuous = true;
    return out;
  }
  out.triples.reserve(sg.relations.size());
  for (const auto& triple : sg.relations) {
    out.triples.push_back(clis_l_triple(triple, sg, pool, config));
  }
  double agg;
  if (config.aggregation == Aggregation::min) {
    agg = out.triples.front().combined;
    for (const auto& t : out.triples) agg = std::min(agg, t.combined);
  } else {
    double sum = 0.0;
    for (const auto& t : out.triples) sum += t.combined;
    agg = sum / static_cast<double>(out.triples.size());
  }
  out.score = agg * 100.0;
  return out;
}

}  // namespace clis
