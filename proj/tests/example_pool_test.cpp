#include "clis/example_pool.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "test_util.hpp"

namespace clis {
namespace {

using test::box;
using test::expect_error;
using test::TempDir;
using test::two_object_graph;

TEST(NormalizeRelation, CanonicalizesCaseWhitespaceAndPunctuation) {
  EXPECT_EQ(normalize_relation("  On TOP of "), "on top of");
  EXPECT_EQ(normalize_relation("next   to"), "next to");
  EXPECT_EQ(normalize_relation("ABOVE."), "above");
  EXPECT_EQ(normalize_relation("Left-of"), "leftof");  // punctuation is dropped, not spaced
  EXPECT_EQ(normalize_relation("on"), "on");
}

TEST(NormalizeRelation, RejectsEmptyPhrases) {
  expect_error([] { normalize_relation(""); }, ErrorKind::argument);
  std::string msg = expect_error([] { normalize_relation("..."); }, ErrorKind::argument);
  EXPECT_NE(msg.find("empty after normalization"), std::string::npos) << msg;
}

TEST(NormalizeRelation, AppliesSynonymsAfterNormalizing) {
  RelationSynonyms syn{{"on top of", "on"}, {"beside", "next to"}};
  EXPECT_EQ(normalize_relation("On TOP of", &syn), "on");
  EXPECT_EQ(normalize_relation("Beside.", &syn), "next to");
  EXPECT_EQ(normalize_relation("under", &syn), "under");  // unmapped passes through
}

TEST(LoadRelationSynonyms, NormalizesBothSides) {
  TempDir dir;
  auto path = dir / "synonyms.json";
  test::write_file(path, R"({"On Top Of": "ON", "  beside ": "next to"})");
  RelationSynonyms syn = load_relation_synonyms(path);
  EXPECT_EQ(syn.at("on top of"), "on");
  EXPECT_EQ(syn.at("beside"), "next to");

  expect_error([&] { load_relation_synonyms(dir / "absent.json"); }, ErrorKind::io);
  test::write_file(dir / "list.json", "[1, 2]");
  expect_error([&] { load_relation_synonyms(dir / "list.json"); }, ErrorKind::parse);
  test::write_file(dir / "nonstring.json", R"({"a": 3})");
  expect_error([&] { load_relation_synonyms(dir / "nonstring.json"); }, ErrorKind::parse);
}

nlohmann::json second_graph_doc() {
  SceneGraph sg;
  sg.source_id = "g2";
  sg.objects.push_back(test::object("a", "cat", box(0.2, 0.2, 0.2, 0.2)));
  sg.objects.push_back(test::object("b", "mat", box(0.15, 0.45, 0.4, 0.2)));
  sg.objects.push_back(test::object("c", "lamp", box(0.7, 0.1, 0.1, 0.5)));
  sg.relations.push_back({"a", "On", "b"});
  sg.relations.push_back({"c", "next to", "b"});
  sg.caption = "A (cat) on a (mat) beside a (lamp).";
  return scene_graph_to_json(sg);
}

TEST(BuildPool, OneExamplePerTripleAndErrorsAreReported) {
  nlohmann::json bad = scene_graph_to_json(two_object_graph());
  bad.erase("caption");

  PoolBuildReport report;
  ExamplePool pool =
      build_pool({scene_graph_to_json(two_object_graph()), second_graph_doc(), bad}, &report);

  EXPECT_EQ(report.documents, 3u);
  EXPECT_EQ(report.accepted, 2u);
  ASSERT_EQ(report.errors.size(), 1u);
  EXPECT_EQ(report.errors[0].source_id, "doc3");
  EXPECT_NE(report.errors[0].message.find("caption"), std::string::npos);

  EXPECT_EQ(pool.size(), 3u);  // 1 + 2 relations
  EXPECT_EQ(pool.key_count(), 3u);

  auto hits = pool.lookup("cat", "mat", "on");  // "On" was normalized at build time
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].source_id, "g2");
  EXPECT_EQ(hits[0].subject_box, box(0.2, 0.2, 0.2, 0.2));

  EXPECT_TRUE(pool.lookup("cat", "mat", "under").empty());
  EXPECT_TRUE(pool.lookup("mat", "cat", "on").empty());  // key is ordered
}

TEST(BuildPool, LookupNormalizesTheQueryRelation) {
  ExamplePool pool = build_pool({second_graph_doc()});
  EXPECT_EQ(pool.lookup("cat", "mat", "  ON. ").size(), 1u);
  RelationSynonyms syn{{"on top of", "on"}};
  EXPECT_EQ(pool.lookup("cat", "mat", "on top of", &syn).size(), 1u);
}

TEST(BuildPool, SynonymsCollapseKeysAtBuildTime) {
  SceneGraph sg = two_object_graph();
  sg.relations[0].relation = "beside";
  RelationSynonyms syn{{"beside", "next to"}};
  ExamplePool pool = build_pool({scene_graph_to_json(sg)}, nullptr, &syn);
  EXPECT_EQ(pool.lookup("dog", "ball", "next to").size(), 1u);
}

TEST(BuildPool, BucketKeepsInsertionOrder) {
  ExamplePool pool;
  for (int i = 0; i < 3; ++i) {
    pool.insert(LayoutExample{"dog", "ball", "next to", box(0.1 + 0.1 * i, 0.1, 0.1, 0.1),
                              box(0.5, 0.5, 0.1, 0.1), "src" + std::to_string(i)});
  }
  auto hits = pool.lookup("dog", "ball", "next to");
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].source_id, "src0");
  EXPECT_EQ(hits[2].source_id, "src2");
}

TEST(BuildPoolFromJsonl, SkipsBlankLinesAndRecordsBadOnes) {
  TempDir dir;
  auto path = dir / "annotations.jsonl";
  test::write_file(path, scene_graph_to_json(two_object_graph()).dump() + "\n" +
                             "this is not json\n" + "\n" + second_graph_doc().dump() + "\n");

  PoolBuildReport report;
  ExamplePool pool = build_pool_from_jsonl(path, &report);
  EXPECT_EQ(pool.size(), 3u);
  EXPECT_EQ(report.documents, 3u);  // two parsed documents plus the bad line
  EXPECT_EQ(report.accepted, 2u);
  ASSERT_EQ(report.errors.size(), 1u);
  EXPECT_EQ(report.errors[0].source_id, "line2");

  expect_error([&] { build_pool_from_jsonl(dir / "absent.jsonl"); }, ErrorKind::io);
}

TEST(PoolFiles, SaveLoadRoundTripAndDeterministicBytes) {
  TempDir dir;
  ExamplePool pool = build_pool({scene_graph_to_json(two_object_graph()), second_graph_doc()});

  auto p1 = dir / "pool1.jsonl";
  auto p2 = dir / "pool2.jsonl";
  save_pool(pool, p1);
  save_pool(pool, p2);
  EXPECT_EQ(test::read_file(p1), test::read_file(p2));

  ExamplePool loaded = load_pool(p1);
  EXPECT_EQ(loaded.size(), pool.size());
  EXPECT_EQ(loaded.key_count(), pool.key_count());
  auto original = pool.buckets();
  auto reread = loaded.buckets();
  ASSERT_EQ(original.size(), reread.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    EXPECT_EQ(original[i].first, reread[i].first);
    ASSERT_EQ(original[i].second.size(), reread[i].second.size());
    for (std::size_t j = 0; j < original[i].second.size(); ++j) {
      EXPECT_EQ(original[i].second[j], reread[i].second[j]);
    }
  }
}

TEST(PoolFiles, LoadErrorsNameTheLine) {
  TempDir dir;
  expect_error([&] { load_pool(dir / "absent.jsonl"); }, ErrorKind::io);

  auto garbled = dir / "garbled.jsonl";
  test::write_file(garbled, "{\"s\": \"dog\"\n");
  std::string msg = expect_error([&] { load_pool(garbled); }, ErrorKind::parse);
  EXPECT_NE(msg.find("line 1"), std::string::npos) << msg;

  auto missing_field = dir / "missing.jsonl";
  test::write_file(missing_field, R"({"s": "dog", "o": "ball", "r": "on"})" "\n");
  expect_error([&] { load_pool(missing_field); }, ErrorKind::parse);

  auto bad_box = dir / "badbox.jsonl";
  test::write_file(bad_box,
                   R"({"s": "dog", "o": "ball", "r": "on", "sbox": [0, 0.1, 0.1, 0.1], )"
                   R"("obox": [0.5, 0.5, 0.1, 0.1], "src": "x"})" "\n");
  expect_error([&] { load_pool(bad_box); }, ErrorKind::layout);
}

TEST(Pool, BucketsAreKeySorted) {
  ExamplePool pool;
  pool.insert(LayoutExample{"zebra", "rock", "on", box(0.1, 0.1, 0.2, 0.2),
                            box(0.1, 0.4, 0.3, 0.3), "a"});
  pool.insert(LayoutExample{"ant", "leaf", "under", box(0.1, 0.1, 0.1, 0.1),
                            box(0.1, 0.3, 0.2, 0.2), "b"});
  pool.insert(LayoutExample{"ant", "leaf", "on", box(0.2, 0.2, 0.1, 0.1),
                            box(0.2, 0.4, 0.2, 0.2), "c"});

  auto buckets = pool.buckets();
  ASSERT_EQ(buckets.size(), 3u);
  EXPECT_EQ(buckets[0].first, (PoolKey{"ant", "leaf", "on"}));
  EXPECT_EQ(buckets[1].first, (PoolKey{"ant", "leaf", "under"}));
  EXPECT_EQ(buckets[2].first, (PoolKey{"zebra", "rock", "on"}));
}

}  // namespace
}  // namespace clis
