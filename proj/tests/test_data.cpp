#include <array>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "facekit/core/error.hpp"
#include "facekit/data/image.hpp"
#include "facekit/data/manifest.hpp"
#include "facekit/data/ops.hpp"
#include "facekit/data/types.hpp"
#include "helpers.hpp"

using namespace facekit;
using data::Dataset;
using data::RemapTable;
using data::Sample;
using data::TaskKind;
using testutil::make_sample;
using testutil::TempDir;
using testutil::unified_schema;

namespace {

Dataset small_dataset(const std::vector<std::array<std::string, 3>>& rows) {
  Dataset d;
  d.name = "mem";
  d.schema = unified_schema();
  std::uint64_t i = 0;
  for (const auto& r : rows) {
    d.samples.push_back(
        make_sample("s" + std::to_string(i), r[0], r[1], r[2], i));
    ++i;
  }
  return d;
}

std::map<std::string, std::size_t> label_histogram(const Dataset& d,
                                                   TaskKind task) {
  std::map<std::string, std::size_t> h;
  for (const auto& s : d.samples) {
    auto it = s.labels.find(task);
    if (it != s.labels.end()) ++h[it->second];
  }
  return h;
}

}  // namespace

TEST_CASE("ppm round trip is exact on the 8-bit grid") {
  TempDir dir("ppm");
  const data::Image img = testutil::make_image(7, 5, 4);
  data::write_ppm(dir.file("a.ppm"), img);
  const data::Image back = data::read_ppm(dir.file("a.ppm"));
  REQUIRE(back.height == img.height);
  REQUIRE(back.width == img.width);
  CHECK(back.data == img.data);
}

TEST_CASE("csv field parsing handles quoting") {
  auto f = data::parse_csv_line("a,\"b,c\",\"d\"\"e\",");
  REQUIRE(f.size() == 4);
  CHECK(f[0] == "a");
  CHECK(f[1] == "b,c");
  CHECK(f[2] == "d\"e");
  CHECK(f[3] == "");
  CHECK(data::csv_escape("plain") == "plain");
  CHECK(data::csv_escape("a,b") == "\"a,b\"");
  CHECK(data::csv_escape("q\"q") == "\"q\"\"q\"");
}

TEST_CASE("manifest ingestion binds rows to samples") {
  TempDir dir("load3");
  const std::string path = testutil::write_manifest(
      dir, {{"road", "adult", "happy"},
            {"rear", "teen", "sad"},
            {"passenger", "elderly", "neutral"}});
  auto [d, rep] = data::load_manifest(path, unified_schema(), "toy");
  REQUIRE(d.size() == 3);
  CHECK(rep.rows_read == 3);
  CHECK(rep.samples_loaded == 3);
  CHECK(rep.missing_images == 0);
  CHECK(d.samples[0].labels.at(TaskKind::kGaze) == "road");
  CHECK(d.samples[1].labels.at(TaskKind::kAge) == "teen");
  CHECK(d.samples[2].source == "toy");
  CHECK(d.samples[0].image.height == 2);
}

TEST_CASE("empty manifest field means the label is absent") {
  TempDir dir("loadempty");
  const std::string path =
      testutil::write_manifest(dir, {{"road", "adult", ""}});
  auto [d, rep] = data::load_manifest(path, unified_schema(), "toy");
  REQUIRE(d.size() == 1);
  CHECK(!d.samples[0].has_label(TaskKind::kExpression));
  CHECK(d.samples[0].has_label(TaskKind::kGaze));
  CHECK(rep.total_invalid_labels() == 0);
}

TEST_CASE("manifest ingestion scales to a 10,000-row corpus") {
  TempDir dir("load10k");
  std::vector<std::array<std::string, 3>> rows(
      10000, {std::string("road"), "adult", "happy"});
  const std::string path = testutil::write_manifest(dir, rows);
  auto [d, rep] = data::load_manifest(path, unified_schema(), "big");
  CHECK(d.size() == 10000);
  CHECK(rep.rows_read == 10000);
}

TEST_CASE("rows with missing image files are skipped and counted") {
  TempDir dir("loadmiss");
  const std::string path = testutil::write_manifest(dir, {{"road", "", ""}});
  std::ofstream(path, std::ios::app) << "gone.ppm,rear,,\n";
  auto [d, rep] = data::load_manifest(path, unified_schema(), "toy");
  CHECK(d.size() == 1);
  CHECK(rep.rows_read == 2);
  CHECK(rep.missing_images == 1);
}

TEST_CASE("invalid label values are dropped, flagged, and counted") {
  TempDir dir("loadbad");
  const std::string path =
      testutil::write_manifest(dir, {{"not_a_plane", "adult", "happy"}});
  auto [d, rep] = data::load_manifest(path, unified_schema(), "toy");
  REQUIRE(d.size() == 1);
  CHECK(!d.samples[0].has_label(TaskKind::kGaze));
  CHECK(d.samples[0].has_label(TaskKind::kAge));
  CHECK(d.samples[0].flags.count("invalid_label:gaze") == 1);
  CHECK(rep.invalid_labels.at("gaze") == 1);
}

TEST_CASE("missing manifest file is fatal") {
  CHECK_THROWS_AS(data::load_manifest("/nonexistent/manifest.csv",
                                      unified_schema(), "x"),
                  IoError);
}

TEST_CASE("jsonl manifests load identically to csv") {
  TempDir dir("jsonl");
  data::write_ppm(dir.file("img.ppm"), testutil::make_image(2, 2, 99));
  {
    std::ofstream out(dir.file("m.jsonl"), std::ios::binary);
    out << R"({"image_path":"img.ppm","gaze":"road","age":"adult","expression":"happy"})"
        << "\n";
    out << R"({"image_path":"img.ppm","gaze":"rear"})" << "\n";
  }
  auto [d, rep] = data::load_manifest(dir.file("m.jsonl"), unified_schema(),
                                      "j");
  REQUIRE(d.size() == 2);
  CHECK(d.samples[0].labels.at(TaskKind::kExpression) == "happy");
  CHECK(!d.samples[1].has_label(TaskKind::kAge));
}

TEST_CASE("save then load round-trips a dataset manifest") {
  TempDir dir("roundtrip");
  Dataset d = small_dataset({{"road", "adult", ""}, {"", "teen", "sad"}});
  for (auto& s : d.samples) {
    const std::string rel = s.image_id + ".ppm";
    data::write_ppm(dir.file(rel), s.image);
    s.image_id = rel;
  }
  for (const char* name : {"back.csv", "back.jsonl"}) {
    data::save_manifest(dir.file(name), d);
    auto [back, rep] = data::load_manifest(dir.file(name), d.schema, "mem");
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(back.samples[i].labels == d.samples[i].labels);
      CHECK(back.samples[i].image.data == d.samples[i].image.data);
    }
  }
}

TEST_CASE("cleaning keeps only samples covering the required tasks") {
  Dataset d = small_dataset({{"road", "adult", "happy"},
                             {"", "adult", "happy"},
                             {"rear", "teen", ""},
                             {"", "elderly", "sad"},
                             {"road", "", "frown"}});
  const Dataset cleaned = data::clean_dataset(d, {TaskKind::kGaze});
  CHECK(cleaned.size() == 3);
  for (const auto& s : cleaned.samples) CHECK(s.has_label(TaskKind::kGaze));
  CHECK(d.size() == 5);  // input untouched

  SUBCASE("empty requirement set is a no-op") {
    const Dataset same = data::clean_dataset(d, {});
    CHECK(same.size() == d.size());
  }
  SUBCASE("fully labeled input passes through unchanged") {
    Dataset full = small_dataset({{"road", "adult", "happy"},
                                  {"rear", "teen", "sad"}});
    const Dataset same = data::clean_dataset(
        full, {TaskKind::kGaze, TaskKind::kAge, TaskKind::kExpression});
    CHECK(same.size() == full.size());
  }
}

namespace {

Dataset numeric_age_dataset(const std::vector<std::string>& ages) {
  Dataset d;
  d.name = "ages";
  d.schema.tasks[TaskKind::kAge].numeric = true;
  std::uint64_t i = 0;
  for (const auto& a : ages) {
    Sample s;
    s.image_id = "a" + std::to_string(i);
    s.image = testutil::make_image(2, 2, i++);
    if (!a.empty()) s.labels[TaskKind::kAge] = a;
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace

TEST_CASE("age bucketing follows the inclusive upper edge rule") {
  const std::vector<double> edges{18, 30, 50};
  const std::vector<std::string> targets{"13-18", "19-30", "31-50", "50+"};

  Dataset d = numeric_age_dataset({"25"});
  CHECK(data::bucketize_age(d, edges, targets)
            .samples[0]
            .labels.at(TaskKind::kAge) == "19-30");

  d = numeric_age_dataset({"18"});
  CHECK(data::bucketize_age(d, edges, targets)
            .samples[0]
            .labels.at(TaskKind::kAge) == "13-18");
}

TEST_CASE("age bucketing over a six-bucket edge list") {
  const std::vector<double> edges{3, 12, 18, 30, 50};
  const std::vector<std::string> targets{"0-3",   "4-12",  "13-18",
                                         "19-30", "31-50", "50+"};
  Dataset d = numeric_age_dataset({"3", "12", "13", "51"});
  const Dataset out = data::bucketize_age(d, edges, targets);
  std::vector<std::string> got;
  for (const auto& s : out.samples) got.push_back(s.labels.at(TaskKind::kAge));
  CHECK(got == std::vector<std::string>{"0-3", "4-12", "13-18", "50+"});
  CHECK(out.schema.space(TaskKind::kAge).categories == targets);
}

TEST_CASE("negative ages drop the label and flag the sample") {
  Dataset d = numeric_age_dataset({"-4", "20"});
  const Dataset out =
      data::bucketize_age(d, {18}, {"minor", "adult"});
  CHECK(!out.samples[0].has_label(TaskKind::kAge));
  CHECK(out.samples[0].flags.count("negative_age") == 1);
  CHECK(out.samples[1].labels.at(TaskKind::kAge) == "adult");
}

TEST_CASE("bucket count must be edge count plus one") {
  Dataset d = numeric_age_dataset({"20"});
  CHECK_THROWS_AS(data::bucketize_age(d, {18, 30}, {"a", "b"}), ConfigError);
}

namespace {

// 17 fine gaze planes folded onto the 7-plane working set.
RemapTable table_17_to_7() {
  RemapTable t;
  t.task = TaskKind::kGaze;
  t.mapping = {{"road_far", "road"},
               {"road_near", "road"},
               {"head_up_display", "road"},
               {"instrument_cluster", "cluster"},
               {"center_display", "infotainment"},
               {"climate_panel", "infotainment"},
               {"media_panel", "infotainment"},
               {"gear_shift", "infotainment"},
               {"left_mirror", "ext_mirror"},
               {"right_mirror", "ext_mirror"},
               {"left_window", "ext_mirror"},
               {"right_window", "ext_mirror"},
               {"interior_mirror", "int_mirror"},
               {"rear_seat", "rear"},
               {"rear_window", "rear"},
               {"passenger_face", "passenger"},
               {"passenger_lap", "passenger"}};
  t.target_categories = {"infotainment", "cluster", "ext_mirror",
                         "int_mirror",   "rear",    "road",
                         "passenger"};
  return t;
}

Dataset fine_gaze_dataset() {
  const RemapTable t = table_17_to_7();
  Dataset d;
  d.name = "fine";
  for (const auto& [src, dst] : t.mapping)
    d.schema.tasks[TaskKind::kGaze].categories.push_back(src);
  std::uint64_t i = 0;
  for (const auto& [src, dst] : t.mapping) {
    Sample s;
    s.image_id = "g" + std::to_string(i);
    s.image = testutil::make_image(2, 2, i++);
    s.labels[TaskKind::kGaze] = src;
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace

TEST_CASE("remap folds 17 gaze planes onto 7") {
  const Dataset d = fine_gaze_dataset();
  const RemapTable t = table_17_to_7();
  const Dataset out = data::remap_labels(d, t);
  CHECK(out.schema.space(TaskKind::kGaze).categories.size() == 7);
  for (const auto& s : out.samples)
    CHECK(out.schema.space(TaskKind::kGaze)
              .index_of(s.labels.at(TaskKind::kGaze)) >= 0);
  // Conservation: target histogram sums to the labeled count.
  const auto h = label_histogram(out, TaskKind::kGaze);
  std::size_t total = 0;
  for (const auto& [k, v] : h) total += v;
  CHECK(total == d.size());
  CHECK(h.at("road") == 3);
  CHECK(h.at("infotainment") == 4);
  CHECK(h.at("ext_mirror") == 4);
}

TEST_CASE("identity remap leaves the dataset unchanged") {
  Dataset d = small_dataset({{"road", "", ""}, {"rear", "", ""}});
  RemapTable t;
  t.task = TaskKind::kGaze;
  t.target_categories = d.schema.space(TaskKind::kGaze).categories;
  for (const auto& c : t.target_categories) t.mapping[c] = c;
  const Dataset out = data::remap_labels(d, t);
  for (std::size_t i = 0; i < d.size(); ++i)
    CHECK(out.samples[i].labels == d.samples[i].labels);
  CHECK(out.schema.space(TaskKind::kGaze).categories ==
        t.target_categories);
}

TEST_CASE("remap merging two sources sums their counts") {
  Dataset d = small_dataset({{"road", "", ""},
                             {"road", "", ""},
                             {"rear", "", ""},
                             {"passenger", "", ""}});
  RemapTable t;
  t.task = TaskKind::kGaze;
  t.target_categories = {"front", "other"};
  t.mapping = {{"road", "front"},      {"rear", "front"},
               {"passenger", "other"}, {"infotainment", "other"},
               {"ext_mirror", "other"}, {"int_mirror", "other"}};
  const auto before = label_histogram(d, TaskKind::kGaze);
  const Dataset out = data::remap_labels(d, t);
  const auto after = label_histogram(out, TaskKind::kGaze);
  CHECK(after.at("front") == before.at("road") + before.at("rear"));
  CHECK(after.at("other") == 1);
}

TEST_CASE("unmapped source category is a configuration error naming it") {
  Dataset d = small_dataset({{"road", "", ""}});
  RemapTable t;
  t.task = TaskKind::kGaze;
  t.target_categories = {"x"};
  t.mapping = {{"rear", "x"}};
  try {
    data::remap_labels(d, t);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("road") != std::string::npos);
  }
}

TEST_CASE("remap target outside target_categories is rejected") {
  Dataset d = small_dataset({{"road", "", ""}});
  RemapTable t;
  t.task = TaskKind::kGaze;
  t.target_categories = {"x"};
  t.mapping = {{"road", "y"}};
  CHECK_THROWS_AS(data::remap_labels(d, t), ConfigError);
}

namespace {

Dataset uniform_gaze_source(const std::string& name, std::size_t n,
                            const std::string& label) {
  Dataset d;
  d.name = name;
  d.schema.tasks[TaskKind::kGaze].categories = {label};
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.image_id = name + std::to_string(i);
    s.source = name;
    s.labels[TaskKind::kGaze] = label;
    s.image = testutil::make_image(2, 2, i);
    d.samples.push_back(std::move(s));
  }
  return d;
}

RemapTable to_unified(const std::string& src, const std::string& dst) {
  RemapTable t;
  t.task = TaskKind::kGaze;
  t.mapping = {{src, dst}};
  t.target_categories = {"infotainment", "ext_mirror", "int_mirror",
                         "rear",         "road",       "passenger"};
  return t;
}

}  // namespace

TEST_CASE("merging three sources conserves the total sample count") {
  const Dataset a = uniform_gaze_source("source_a", 10000, "plane_a");
  const Dataset b = uniform_gaze_source("source_b", 2999, "plane_b");
  const Dataset c = uniform_gaze_source("source_c", 1920, "plane_c");
  data::LabelSchema unified;
  unified.tasks[TaskKind::kGaze].categories = {
      "infotainment", "ext_mirror", "int_mirror", "rear", "road",
      "passenger"};
  const Dataset merged = data::merge_datasets(
      {a, b, c},
      {{to_unified("plane_a", "road")},
       {to_unified("plane_b", "rear")},
       {to_unified("plane_c", "passenger")}},
      unified, "merged");
  CHECK(merged.size() == 14919);
  CHECK(merged.schema.space(TaskKind::kGaze).categories.size() == 6);
  CHECK(merged.samples.front().source == "source_a");
  CHECK(merged.samples.back().source == "source_c");
  const auto h = label_histogram(merged, TaskKind::kGaze);
  CHECK(h.at("road") == 10000);
  CHECK(h.at("rear") == 2999);
  CHECK(h.at("passenger") == 1920);
}

TEST_CASE("merging a single source equals remapping it") {
  const Dataset a = uniform_gaze_source("solo", 5, "plane_a");
  data::LabelSchema unified;
  unified.tasks[TaskKind::kGaze].categories = {
      "infotainment", "ext_mirror", "int_mirror", "rear", "road",
      "passenger"};
  const RemapTable t = to_unified("plane_a", "road");
  const Dataset merged = data::merge_datasets({a}, {{t}}, unified, "m");
  const Dataset remapped = data::remap_labels(a, t);
  REQUIRE(merged.size() == remapped.size());
  for (std::size_t i = 0; i < merged.size(); ++i)
    CHECK(merged.samples[i].labels == remapped.samples[i].labels);
}

TEST_CASE("labels outside the unified schema abort a merge") {
  const Dataset a = uniform_gaze_source("bad", 2, "plane_a");
  data::LabelSchema unified;
  unified.tasks[TaskKind::kGaze].categories = {"road"};
  RemapTable t;
  t.task = TaskKind::kGaze;
  t.mapping = {{"plane_a", "offroad"}};
  t.target_categories = {"offroad"};
  CHECK_THROWS_AS(data::merge_datasets({a}, {{t}}, unified, "m"),
                  ConfigError);
}

TEST_CASE("shuffle is deterministic per seed") {
  Dataset d = small_dataset({});
  for (int i = 0; i < 100; ++i)
    d.samples.push_back(make_sample("s" + std::to_string(i), "road", "", "",
                                    static_cast<std::uint64_t>(i)));
  const Dataset s1 = data::shuffle_dataset(d, 7);
  const Dataset s2 = data::shuffle_dataset(d, 7);
  REQUIRE(s1.size() == d.size());
  for (std::size_t i = 0; i < s1.size(); ++i)
    CHECK(s1.samples[i].image_id == s2.samples[i].image_id);

  SUBCASE("different seeds permute differently but keep the multiset") {
    const Dataset s3 = data::shuffle_dataset(d, 8);
    std::multiset<std::string> m1, m3;
    bool any_diff = false;
    for (std::size_t i = 0; i < d.size(); ++i) {
      m1.insert(s1.samples[i].image_id);
      m3.insert(s3.samples[i].image_id);
      any_diff = any_diff ||
                 s1.samples[i].image_id != s3.samples[i].image_id;
    }
    CHECK(m1 == m3);
    CHECK(any_diff);
  }
  SUBCASE("singleton dataset is unchanged") {
    Dataset one = small_dataset({{"road", "", ""}});
    const Dataset s = data::shuffle_dataset(one, 3);
    CHECK(s.samples[0].image_id == one.samples[0].image_id);
  }
}

TEST_CASE("split honors the floor rule and partitions the dataset") {
  auto make_n = [](std::size_t n) {
    Dataset d;
    d.schema = unified_schema();
    for (std::size_t i = 0; i < n; ++i)
      d.samples.push_back(make_sample("s" + std::to_string(i), "road", "",
                                      "", i));
    return d;
  };

  auto [tr100, te100] = data::split_dataset(make_n(100), 0.7, 1);
  CHECK(tr100.size() == 70);
  CHECK(te100.size() == 30);

  auto [tr10, te10] = data::split_dataset(make_n(10), 0.5, 1);
  CHECK(tr10.size() == 5);
  CHECK(te10.size() == 5);

  auto [tr7, te7] = data::split_dataset(make_n(7), 0.7, 1);
  CHECK(tr7.size() == 4);  // floor(4.9)
  CHECK(te7.size() == 3);

  SUBCASE("train and test are disjoint and cover the input") {
    const Dataset d = make_n(31);
    auto [tr, te] = data::split_dataset(d, 0.7, 9);
    std::set<std::string> train_ids, all_ids;
    for (const auto& s : tr.samples) train_ids.insert(s.image_id);
    for (const auto& s : tr.samples) all_ids.insert(s.image_id);
    for (const auto& s : te.samples) {
      CHECK(train_ids.count(s.image_id) == 0);
      all_ids.insert(s.image_id);
    }
    CHECK(all_ids.size() == d.size());
  }
  SUBCASE("same seed reproduces the same split") {
    const Dataset d = make_n(20);
    auto [a1, b1] = data::split_dataset(d, 0.7, 5);
    auto [a2, b2] = data::split_dataset(d, 0.7, 5);
    for (std::size_t i = 0; i < a1.size(); ++i)
      CHECK(a1.samples[i].image_id == a2.samples[i].image_id);
  }
  SUBCASE("degenerate inputs are rejected") {
    CHECK_THROWS_AS(data::split_dataset(make_n(1), 0.7, 1), DataError);
    CHECK_THROWS_AS(data::split_dataset(make_n(10), 0.0, 1), ConfigError);
    CHECK_THROWS_AS(data::split_dataset(make_n(10), 1.0, 1), ConfigError);
  }
}

TEST_CASE("remap conservation holds on random datasets") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    Dataset d;
    d.schema.tasks[TaskKind::kGaze].categories = {"a", "b", "c", "d"};
    const std::size_t n = 1 + rng.uniform_int(40);
    for (std::size_t i = 0; i < n; ++i) {
      Sample s;
      s.image_id = "r" + std::to_string(i);
      s.image = testutil::make_image(2, 2, i);
      if (rng.uniform() < 0.8)
        s.labels[TaskKind::kGaze] =
            d.schema.space(TaskKind::kGaze)
                .categories[rng.uniform_int(4)];
      d.samples.push_back(std::move(s));
    }
    RemapTable t;
    t.task = TaskKind::kGaze;
    t.target_categories = {"x", "y"};
    for (const auto& c : d.schema.space(TaskKind::kGaze).categories)
      t.mapping[c] = rng.uniform() < 0.5 ? "x" : "y";
    std::size_t labeled_before = 0;
    for (const auto& s : d.samples)
      labeled_before += s.has_label(TaskKind::kGaze) ? 1 : 0;

    const Dataset out = data::remap_labels(d, t);
    const auto h = label_histogram(out, TaskKind::kGaze);
    std::size_t labeled_after = 0;
    for (const auto& [k, v] : h) labeled_after += v;
    CHECK(labeled_after == labeled_before);
  }
}

TEST_CASE("task names round-trip through the registry") {
  for (auto t : data::kAllTasks)
    CHECK(data::task_from_name(data::task_name(t)) == t);
  CHECK_THROWS_AS(data::task_from_name("pose"), ConfigError);
}
