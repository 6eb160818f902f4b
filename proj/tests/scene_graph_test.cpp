#include "clis/scene_graph.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "test_util.hpp"

namespace clis {
namespace {

using test::box;
using test::expect_error;
using test::object;
using test::TempDir;
using test::two_object_graph;

TEST(ValidateBbox, AcceptsInteriorBox) {
  BBox b = validate_bbox(0.1, 0.2, 0.3, 0.4);
  EXPECT_EQ(b, box(0.1, 0.2, 0.3, 0.4));
  EXPECT_EQ(validate_bbox({0.1, 0.2, 0.3, 0.4}), b);
}

TEST(ValidateBbox, NamesTheViolatedConstraint) {
  struct Case {
    double x, y, w, h;
    const char* expected;
  };
  const Case cases[] = {
      {0.0, 0.1, 0.1, 0.1, "x must be > 0"},
      {-0.2, 0.1, 0.1, 0.1, "x must be > 0"},
      {0.1, 0.0, 0.1, 0.1, "y must be > 0"},
      {0.1, 0.1, 0.0, 0.1, "w must be > 0"},
      {0.1, 0.1, -0.5, 0.1, "w must be > 0"},
      {0.1, 0.1, 0.1, 0.0, "h must be > 0"},
      {1.0, 0.1, 0.1, 0.1, "x must be < 1"},
      {0.1, 1.2, 0.1, 0.1, "y must be < 1"},
      {0.5, 0.1, 0.5, 0.1, "x+w must be < 1"},
      {0.1, 0.5, 0.1, 0.5, "y+h must be < 1"},
  };
  for (const auto& c : cases) {
    std::string msg = expect_error([&] { validate_bbox(c.x, c.y, c.w, c.h); }, ErrorKind::layout);
    EXPECT_NE(msg.find(c.expected), std::string::npos) << msg;
  }
}

TEST(ValidateBbox, BoundaryJustInsidePasses) {
  EXPECT_NO_THROW(validate_bbox(0.001, 0.001, 0.997, 0.997));
  expect_error([] { validate_bbox(0.001, 0.001, 0.999, 0.1); }, ErrorKind::layout);
}

TEST(ValidateSceneGraph, AcceptsWellFormedGraph) {
  SceneGraph sg = two_object_graph();
  SceneGraph out = validate_scene_graph(sg);
  EXPECT_EQ(out, sg);  // idempotent: comes back unchanged
}

TEST(ValidateSceneGraph, RejectsStructuralDefects) {
  auto base = two_object_graph();

  {
    SceneGraph sg;
    sg.caption = "x";
    std::string msg = expect_error([&] { validate_scene_graph(sg); }, ErrorKind::graph);
    EXPECT_NE(msg.find("no objects"), std::string::npos) << msg;
  }
  {
    SceneGraph sg = base;
    sg.objects[1].id = "o1";
    std::string msg = expect_error([&] { validate_scene_graph(sg); }, ErrorKind::graph);
    EXPECT_NE(msg.find("duplicate object id"), std::string::npos) << msg;
  }
  {
    SceneGraph sg = base;
    sg.objects[0].id = "";
    expect_error([&] { validate_scene_graph(sg); }, ErrorKind::graph);
  }
  {
    SceneGraph sg = base;
    sg.objects[0].category = "";
    std::string msg = expect_error([&] { validate_scene_graph(sg); }, ErrorKind::graph);
    EXPECT_NE(msg.find("empty category"), std::string::npos) << msg;
  }
  {
    SceneGraph sg = base;
    sg.objects[1].layout = BBox{0.5, 0.5, 0.9, 0.1};
    std::string msg = expect_error([&] { validate_scene_graph(sg); }, ErrorKind::graph);
    EXPECT_NE(msg.find("\"o2\""), std::string::npos) << msg;
    EXPECT_NE(msg.find("x+w must be < 1"), std::string::npos) << msg;
  }
  {
    SceneGraph sg = base;
    sg.relations[0].object_id = "o1";
    std::string msg = expect_error([&] { validate_scene_graph(sg); }, ErrorKind::graph);
    EXPECT_NE(msg.find("itself"), std::string::npos) << msg;
  }
  {
    SceneGraph sg = base;
    sg.relations[0].object_id = "o9";
    std::string msg = expect_error([&] { validate_scene_graph(sg); }, ErrorKind::graph);
    EXPECT_NE(msg.find("unknown id \"o9\""), std::string::npos) << msg;
  }
  {
    SceneGraph sg = base;
    sg.relations[0].relation = "";
    expect_error([&] { validate_scene_graph(sg); }, ErrorKind::graph);
  }
  {
    SceneGraph sg = base;
    sg.groups.push_back({"o1", "ghost"});
    std::string msg = expect_error([&] { validate_scene_graph(sg); }, ErrorKind::graph);
    EXPECT_NE(msg.find("\"ghost\""), std::string::npos) << msg;
  }
  {
    SceneGraph sg = base;
    sg.caption = "";
    expect_error([&] { validate_scene_graph(sg); }, ErrorKind::graph);
  }
}

TEST(SceneGraphJson, RoundTripsEveryField) {
  SceneGraph sg = two_object_graph();
  sg.objects[0].color = std::nullopt;  // color is optional and must stay optional

  nlohmann::json doc = scene_graph_to_json(sg);
  EXPECT_FALSE(doc["objects"][0].contains("color"));
  EXPECT_EQ(doc["objects"][1]["color"], "red");

  SceneGraph back = scene_graph_from_json(doc);
  EXPECT_EQ(back, sg);
}

TEST(SceneGraphJson, RejectsMissingFields) {
  nlohmann::json valid = scene_graph_to_json(two_object_graph());

  {
    nlohmann::json doc = valid;
    doc.erase("objects");
    std::string msg = expect_error([&] { scene_graph_from_json(doc); }, ErrorKind::graph);
    EXPECT_NE(msg.find("missing field: objects"), std::string::npos) << msg;
  }
  {
    nlohmann::json doc = valid;
    doc.erase("caption");
    std::string msg = expect_error([&] { scene_graph_from_json(doc); }, ErrorKind::graph);
    EXPECT_NE(msg.find("missing field: caption"), std::string::npos) << msg;
  }
  {
    nlohmann::json doc = valid;
    doc["objects"][0]["bbox"] = {0.1, 0.2, 0.3};
    std::string msg = expect_error([&] { scene_graph_from_json(doc); }, ErrorKind::graph);
    EXPECT_NE(msg.find("invalid layout"), std::string::npos) << msg;
  }
  expect_error([] { scene_graph_from_json(nlohmann::json::array()); }, ErrorKind::graph);
}

TEST(SceneGraphJson, RelationsAndGroupsAreOptionalInInput) {
  nlohmann::json doc = scene_graph_to_json(two_object_graph());
  doc.erase("relations");
  doc.erase("groups");
  SceneGraph sg = scene_graph_from_json(doc);
  EXPECT_TRUE(sg.relations.empty());
  EXPECT_TRUE(sg.groups.empty());
}

TEST(SceneGraphFiles, SaveLoadRoundTrip) {
  TempDir dir;
  SceneGraph sg = two_object_graph();
  auto path = dir / "graph.json";
  save_scene_graph(sg, path);
  EXPECT_EQ(load_scene_graph(path), sg);
}

TEST(SceneGraphFiles, LoadErrors) {
  TempDir dir;
  expect_error([&] { load_scene_graph(dir / "absent.json"); }, ErrorKind::io);

  auto bad = dir / "bad.json";
  test::write_file(bad, "not json at all");
  expect_error([&] { load_scene_graph(bad); }, ErrorKind::parse);
}

TEST(SceneGraph, FindAndCountCategory) {
  SceneGraph sg = two_object_graph();
  sg.objects.push_back(object("o3", "dog", box(0.7, 0.7, 0.1, 0.1)));
  ASSERT_NE(sg.find("o2"), nullptr);
  EXPECT_EQ(sg.find("o2")->category, "ball");
  EXPECT_EQ(sg.find("nope"), nullptr);
  EXPECT_EQ(sg.count_category("dog"), 2u);
  EXPECT_EQ(sg.count_category("ball"), 1u);
  EXPECT_EQ(sg.count_category("bird"), 0u);
}

}  // namespace
}  // namespace clis
