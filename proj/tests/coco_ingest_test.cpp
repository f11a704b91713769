#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "countvqa/coco_ingest.hpp"
#include "support/test_support.hpp"

namespace countvqa {
namespace {

const std::filesystem::path kFixtures = COUNTVQA_FIXTURE_DIR;

json doc(json images, json annotations, json categories) {
  return json{{"images", std::move(images)}, {"annotations", std::move(annotations)},
              {"categories", std::move(categories)}};
}

json ann(int image, int category, int crowd = 0) {
  return json{{"image_id", image}, {"category_id", category}, {"iscrowd", crowd}, {"bbox", {0, 0, 10, 10}}};
}

TEST(LoadAnnotations, MiniFixtureHasKnownShape) {
  const auto a = load_annotations(kFixtures / "mini_instances.json");
  EXPECT_EQ(a.images.size(), 3u);
  EXPECT_EQ(a.categories.size(), 2u);
  EXPECT_EQ(a.annotations.size(), 7u);
}

TEST(LoadAnnotations, UnknownCategoryIsIntegrityError) {
  const auto j = doc({{{"id", 1}, {"file_name", "a.jpg"}}}, {ann(1, 99)}, {{{"id", 1}, {"name", "dog"}}});
  try {
    annotations_from_json(j);
    FAIL() << "expected IntegrityError";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("99"), std::string::npos) << e.what();
  }
}

TEST(LoadAnnotations, UnknownImageIsIntegrityError) {
  const auto j = doc({{{"id", 1}, {"file_name", "a.jpg"}}}, {ann(7, 1)}, {{{"id", 1}, {"name", "dog"}}});
  EXPECT_THROW(annotations_from_json(j), IntegrityError);
}

TEST(LoadAnnotations, DuplicateCategoryNameRejected) {
  const auto j = doc(json::array(), json::array(), {{{"id", 1}, {"name", "dog"}}, {{"id", 2}, {"name", "dog"}}});
  EXPECT_THROW(annotations_from_json(j), IntegrityError);
}

TEST(LoadAnnotations, MalformedJsonReportsByteOffset) {
  testing::TempDir dir;
  const auto path = dir / "bad.json";
  write_text_atomic(path, "{\"images\": [ {\"id\": 1,, } ]}");
  try {
    load_annotations(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GT(e.byte_offset(), 10u);
    EXPECT_LT(e.byte_offset(), 30u);
  }
}

TEST(LoadAnnotations, EmptyListsGiveEmptyDataset) {
  const auto a = annotations_from_json(doc(json::array(), json::array(), json::array()));
  EXPECT_TRUE(build_count_dataset(a).empty());
}

TEST(LoadAnnotations, ExtraFieldsIgnored) {
  auto j = doc({{{"id", 1}, {"file_name", "a.jpg"}, {"coco_url", "x"}}}, {ann(1, 1)},
               {{{"id", 1}, {"name", "dog"}, {"supercategory", "animal"}}});
  j["licenses"] = json::array();
  j["annotations"][0]["segmentation"] = json::array();
  EXPECT_EQ(build_count_dataset(annotations_from_json(j)).size(), 1u);
}

TEST(BuildCountDataset, CountsPerImageAndCategory) {
  const auto j = doc({{{"id", 5}, {"file_name", "five.jpg"}}}, {ann(5, 18), ann(5, 18), ann(5, 18)},
                     {{{"id", 18}, {"name", "dog"}}});
  const auto d = build_count_dataset(annotations_from_json(j));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0], (CountInstance{5, "five.jpg", "dog", 3}));
}

TEST(BuildCountDataset, CrowdExcludesThePairOnly) {
  // Mini fixture: image 2 has two person boxes, one crowd -> nothing.
  // Image 3 has one crowd person and two dogs -> only (3, dog, 2).
  const auto d = build_count_dataset(load_annotations(kFixtures / "mini_instances.json"));
  const std::vector<CountInstance> expected{{1, "img_001.jpg", "dog", 2}, {3, "img_003.jpg", "dog", 2}};
  EXPECT_EQ(d, expected);
}

// Random annotation files checked against a direct recount.
TEST(BuildCountDataset, MatchesBruteForceRecountAndIgnoresOrder) {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 50; ++trial) {
    json images = json::array(), cats = json::array(), anns = json::array();
    const int n_img = 1 + static_cast<int>(gen() % 8);
    const int n_cat = 1 + static_cast<int>(gen() % 5);
    for (int i = 1; i <= n_img; ++i) images.push_back({{"id", i}, {"file_name", std::to_string(i) + ".jpg"}});
    for (int c = 1; c <= n_cat; ++c) cats.push_back({{"id", c * 10}, {"name", "c" + std::to_string(c)}});
    const int n_ann = static_cast<int>(gen() % 40);
    for (int k = 0; k < n_ann; ++k) {
      anns.push_back(ann(1 + static_cast<int>(gen() % n_img), 10 * (1 + static_cast<int>(gen() % n_cat)),
                         gen() % 10 == 0 ? 1 : 0));
    }
    const auto d = build_count_dataset(annotations_from_json(doc(images, anns, cats)));

    std::map<std::pair<int, int>, std::pair<int, bool>> recount;
    for (const auto& a : anns) {
      auto& r = recount[{a["image_id"].get<int>(), a["category_id"].get<int>()}];
      if (a["iscrowd"] == 1) r.second = true; else ++r.first;
    }
    std::map<std::string, int> per_category;
    for (const auto& [key, r] : recount) {
      if (!r.second) per_category["c" + std::to_string(key.second / 10)] += r.first;
    }
    std::map<std::string, int> got;
    for (const auto& ci : d) {
      EXPECT_GE(ci.count, 1);
      EXPECT_FALSE(recount.at({static_cast<int>(ci.image_id), 10 * std::stoi(ci.category.substr(1))}).second);
      got[ci.category] += ci.count;
    }
    std::erase_if(per_category, [](const auto& kv) { return kv.second == 0; });
    EXPECT_EQ(got, per_category);
    EXPECT_TRUE(std::is_sorted(d.begin(), d.end(), instance_less));

    std::shuffle(anns.begin(), anns.end(), gen);
    EXPECT_EQ(build_count_dataset(annotations_from_json(doc(images, anns, cats))), d);
  }
}

TEST(InstanceJsonl, RoundTripsThroughFile) {
  testing::TempDir dir;
  const auto d = build_count_dataset(load_annotations(kFixtures / "pipeline_instances.json"));
  write_instances(dir / "d.jsonl", d);
  EXPECT_EQ(read_instances(dir / "d.jsonl"), d);
}

TEST(InstanceJsonl, WrongSchemaRejected) {
  testing::TempDir dir;
  write_text_atomic(dir / "d.jsonl", R"({"schema":"ci/2","image_id":1,"image_ref":"a","category":"dog","count":1})" "\n");
  EXPECT_THROW(read_instances(dir / "d.jsonl"), SchemaError);
}

}  // namespace
}  // namespace countvqa
