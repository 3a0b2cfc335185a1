#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "facekit/analysis/analysis.hpp"
#include "facekit/core/rng.hpp"
#include "helpers.hpp"

using namespace facekit;
using data::TaskKind;

namespace {

Tensor random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Tensor t({n, d});
  Rng rng(seed);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform() * 2.0 - 1.0;
  return t;
}

// Sample with a 2x2 image whose channels sit near `level` with small jitter.
data::Sample brightness_sample(const std::string& id, double level,
                               std::uint64_t seed, const std::string& gaze) {
  data::Sample s;
  s.image_id = id;
  s.image = data::Image(2, 2);
  Rng rng(seed);
  for (auto& v : s.image.data)
    v = std::min(255.0, std::max(0.0, level + rng.uniform() * 4.0 - 2.0));
  if (!gaze.empty()) s.labels[TaskKind::kGaze] = gaze;
  return s;
}

preprocess::PipelineConfig tiny_pipe() {
  preprocess::PipelineConfig p;
  p.target_h = 2;
  p.target_w = 2;
  return p;
}

// Raw min-max normalized euclidean distances computed with plain loops.
Tensor euclid_oracle(const Tensor& m) {
  const std::size_t n = m.dim(0), d = m.dim(1);
  Tensor raw({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double dv = m.at(i, k) - m.at(j, k);
        s += dv * dv;
      }
      raw.at(i, j) = std::sqrt(s);
    }
  double lo = 1e300, hi = -1e300;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        lo = std::min(lo, raw.at(i, j));
        hi = std::max(hi, raw.at(i, j));
      }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) raw.at(i, j) = (raw.at(i, j) - lo) / (hi - lo);
  return raw;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double num = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("flatten_images lays one pipeline row per sample") {
  data::Dataset d;
  d.schema = testutil::unified_schema();
  d.samples.push_back(testutil::make_sample("x", "road", "", "", 1));
  d.samples.push_back(testutil::make_sample("y", "rear", "", "", 2));
  const Tensor m = analysis::flatten_images(d, tiny_pipe());
  REQUIRE(m.shape() == std::vector<std::size_t>{2, 12});
  Tensor all = preprocess::preprocess_dataset(d, tiny_pipe());
  all.reshape({2, 12});
  CHECK(m == all);
}

TEST_CASE("identical images give an all-zero degenerate euclidean matrix") {
  Tensor m({3, 4});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) m.at(i, j) = 0.25 * (double)j;
  const auto r = analysis::euclidean_similarity(m);
  CHECK(r.degenerate);
  for (std::size_t i = 0; i < r.matrix.size(); ++i) CHECK(r.matrix[i] == 0.0);
}

TEST_CASE("unit-vector triple normalizes to the known pattern") {
  // Rows: e1, e2, origin. Distances: |e1-e2| = sqrt(2), both to origin 1.
  Tensor m({3, 2});
  m.at(0, 0) = 1.0;
  m.at(1, 1) = 1.0;
  const auto r = analysis::euclidean_similarity(m);
  CHECK_FALSE(r.degenerate);
  CHECK(r.matrix.at(0, 1) == 1.0);
  CHECK(r.matrix.at(1, 0) == 1.0);
  CHECK(r.matrix.at(0, 2) == 0.0);
  CHECK(r.matrix.at(2, 1) == 0.0);
  CHECK(r.matrix.at(0, 0) == 0.0);
  CHECK(r.matrix.at(1, 1) == 0.0);
}

TEST_CASE("equal nonzero distances collapse to ones and set the flag") {
  Tensor m({2, 1});
  m.at(0, 0) = 0.0;
  m.at(1, 0) = 5.0;
  const auto r = analysis::euclidean_similarity(m);
  CHECK(r.degenerate);
  CHECK(r.matrix.at(0, 1) == 1.0);
  CHECK(r.matrix.at(1, 0) == 1.0);
  CHECK(r.matrix.at(0, 0) == 0.0);
}

TEST_CASE("euclidean similarity matches a plain-loop oracle") {
  const Tensor m = random_rows(7, 5, 90);
  const auto r = analysis::euclidean_similarity(m);
  const Tensor want = euclid_oracle(m);
  REQUIRE(r.matrix.shape() == want.shape());
  for (std::size_t i = 0; i < want.size(); ++i)
    CHECK(std::abs(r.matrix[i] - want[i]) <= 1e-9);

  SUBCASE("the matrix is exactly symmetric") {
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 7; ++j)
        CHECK(r.matrix.at(i, j) == r.matrix.at(j, i));
  }
  SUBCASE("values live in the unit interval") {
    for (std::size_t i = 0; i < r.matrix.size(); ++i) {
      CHECK(r.matrix[i] >= 0.0);
      CHECK(r.matrix[i] <= 1.0);
    }
  }
  SUBCASE("rescaling every row leaves the normalized matrix unchanged") {
    Tensor scaled = m;
    for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= 7.5;
    const auto r2 = analysis::euclidean_similarity(scaled);
    for (std::size_t i = 0; i < r2.matrix.size(); ++i)
      CHECK(std::abs(r2.matrix[i] - r.matrix[i]) <= 1e-12);
  }
  SUBCASE("permuting rows permutes the matrix consistently") {
    const std::size_t perm[] = {3, 0, 6, 1, 5, 2, 4};
    Tensor p({7, 5});
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t k = 0; k < 5; ++k) p.at(i, k) = m.at(perm[i], k);
    const auto r2 = analysis::euclidean_similarity(p);
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 7; ++j)
        CHECK(std::abs(r2.matrix.at(i, j) -
                       r.matrix.at(perm[i], perm[j])) <= 1e-12);
  }
  SUBCASE("a single row is rejected") {
    CHECK_THROWS_AS(analysis::euclidean_similarity(random_rows(1, 5, 91)),
                    ConfigError);
  }
}

TEST_CASE("cosine similarity maps alignment onto the unit interval") {
  Tensor m({4, 2});
  m.at(0, 0) = 1.0;             // e1
  m.at(1, 0) = 3.0;             // parallel to e1
  m.at(2, 1) = 2.0;             // orthogonal
  m.at(3, 0) = -0.5;            // anti-parallel
  const auto r = analysis::cosine_similarity(m);
  REQUIRE(r.kept.size() == 4);
  CHECK(std::abs(r.matrix.at(0, 1) - 1.0) <= 1e-12);
  CHECK(std::abs(r.matrix.at(0, 2) - 0.5) <= 1e-12);
  CHECK(std::abs(r.matrix.at(0, 3) - 0.0) <= 1e-12);
  CHECK(r.matrix.at(0, 0) == 1.0);
  CHECK(r.matrix.at(2, 2) == 1.0);
}

TEST_CASE("zero-norm rows are excluded, not scored") {
  Tensor m({3, 3});
  m.at(0, 0) = 1.0;
  // Row 1 stays all-zero.
  m.at(2, 1) = 4.0;
  const auto r = analysis::cosine_similarity(m);
  CHECK(r.kept == std::vector<std::size_t>{0, 2});
  CHECK(r.matrix.shape() == std::vector<std::size_t>{2, 2});

  SUBCASE("an all-zero matrix keeps nothing") {
    Tensor z({2, 3});
    const auto r2 = analysis::cosine_similarity(z);
    CHECK(r2.kept.empty());
    CHECK(r2.matrix.shape() == std::vector<std::size_t>{0, 0});
  }
}

TEST_CASE("cosine similarity matches a plain-loop oracle") {
  const Tensor m = random_rows(6, 4, 92);
  const auto r = analysis::cosine_similarity(m);
  REQUIRE(r.kept.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      double dot = 0.0, ni = 0.0, nj = 0.0;
      for (std::size_t k = 0; k < 4; ++k) {
        dot += m.at(i, k) * m.at(j, k);
        ni += m.at(i, k) * m.at(i, k);
        nj += m.at(j, k) * m.at(j, k);
      }
      const double want = (dot / std::sqrt(ni * nj) + 1.0) / 2.0;
      CHECK(std::abs(r.matrix.at(i, j) - want) <= 1e-9);
      CHECK(r.matrix.at(i, j) == r.matrix.at(j, i));
    }
    CHECK(r.matrix.at(i, i) == 1.0);
  }

  SUBCASE("positive rescaling changes nothing") {
    Tensor scaled = m;
    for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= 0.125;
    const auto r2 = analysis::cosine_similarity(scaled);
    for (std::size_t i = 0; i < r2.matrix.size(); ++i)
      CHECK(std::abs(r2.matrix[i] - r.matrix[i]) <= 1e-12);
  }
}

TEST_CASE("off-diagonal zscore recentres without touching the diagonal") {
  Tensor m({3, 3});
  m.at(0, 0) = 7.0;
  m.at(1, 1) = 8.0;
  m.at(2, 2) = 9.0;
  const double vals[] = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  std::size_t v = 0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) m.at(i, j) = vals[v++];
  analysis::zscore_offdiag(m);
  CHECK(m.at(0, 0) == 7.0);
  CHECK(m.at(1, 1) == 8.0);
  CHECK(m.at(2, 2) == 9.0);
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) {
        sum += m.at(i, j);
        sq += m.at(i, j) * m.at(i, j);
      }
  CHECK(std::abs(sum) <= 1e-12);
  CHECK(std::abs(sq / 6.0 - 1.0) <= 1e-12);

  SUBCASE("constant off-diagonals become zeros") {
    Tensor c({2, 2});
    c.at(0, 1) = 4.0;
    c.at(1, 0) = 4.0;
    analysis::zscore_offdiag(c);
    CHECK(c.at(0, 1) == 0.0);
    CHECK(c.at(1, 0) == 0.0);
  }
}

TEST_CASE("label distribution counts, fractions, and dominance") {
  data::Dataset d;
  d.schema = testutil::unified_schema();
  for (int i = 0; i < 10; ++i)
    d.samples.push_back(
        testutil::make_sample("r" + std::to_string(i), "road", "", "", 100 + i));
  const auto dist = analysis::label_distribution(d);
  const auto& gaze = dist.tasks.at(TaskKind::kGaze);
  CHECK(gaze.labeled == 10);
  CHECK(gaze.fractions.at("road") == 1.0);
  CHECK(gaze.counts.at("rear") == 0);
  CHECK(gaze.fractions.at("rear") == 0.0);
  CHECK(gaze.dominant == "road");
  CHECK(gaze.dominance_flag);
  // Unlabeled tasks stay silent: no fractions, no flag.
  CHECK(dist.tasks.at(TaskKind::kAge).labeled == 0);
  CHECK_FALSE(dist.tasks.at(TaskKind::kAge).dominance_flag);
}

TEST_CASE("dominance fires above one half and not at it") {
  auto build = [](int road, int rear) {
    data::Dataset d;
    d.schema = testutil::unified_schema();
    int n = 0;
    for (int i = 0; i < road; ++i) {
      ++n;
      d.samples.push_back(
          testutil::make_sample("a" + std::to_string(n), "road", "", "", n));
    }
    for (int i = 0; i < rear; ++i) {
      ++n;
      d.samples.push_back(
          testutil::make_sample("b" + std::to_string(n), "rear", "", "", n));
    }
    return analysis::label_distribution(d);
  };
  const auto at68 = build(17, 8);  // 17/25 = 0.68
  CHECK(std::abs(at68.tasks.at(TaskKind::kGaze).dominant_fraction - 0.68) <=
        1e-12);
  CHECK(at68.tasks.at(TaskKind::kGaze).dominance_flag);
  const auto at50 = build(5, 5);
  CHECK_FALSE(at50.tasks.at(TaskKind::kGaze).dominance_flag);
  const auto mixed = build(6, 4);  // 0.6 > 0.5
  CHECK(mixed.tasks.at(TaskKind::kGaze).dominance_flag);
  CHECK(mixed.tasks.at(TaskKind::kGaze).fractions.at("rear") == 0.4);
}

TEST_CASE("tsne embeds deterministically per seed") {
  const Tensor m = random_rows(16, 6, 93);
  const Tensor a = analysis::tsne_embed(m, 2, 4.0, 7, 60);
  const Tensor b = analysis::tsne_embed(m, 2, 4.0, 7, 60);
  CHECK(a == b);
  REQUIRE(a.shape() == std::vector<std::size_t>{16, 2});
  const Tensor c = analysis::tsne_embed(m, 2, 4.0, 8, 60);
  CHECK_FALSE(a == c);
  const Tensor d3 = analysis::tsne_embed(m, 3, 4.0, 7, 60);
  CHECK(d3.shape() == std::vector<std::size_t>{16, 3});

  SUBCASE("dims outside 2 or 3 are rejected") {
    CHECK_THROWS_AS(analysis::tsne_embed(m, 4, 4.0, 7, 60), ConfigError);
  }
  SUBCASE("too few points name the constraint") {
    CHECK_THROWS_WITH_AS(analysis::tsne_embed(random_rows(12, 6, 94), 2, 4.0, 7),
                         doctest::Contains("3*perplexity"), ConfigError);
  }
}

TEST_CASE("tsne separates two far blobs") {
  // 10 points near the origin, 10 near (50, ..., 50), tiny jitter.
  Tensor m({20, 5});
  Rng rng(95);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t k = 0; k < 5; ++k)
      m.at(i, k) = (i < 10 ? 0.0 : 50.0) + rng.uniform();
  const Tensor e = analysis::tsne_embed(m, 2, 5.0, 11, 1000);
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = i + 1; j < 20; ++j) {
      const double dx = e.at(i, 0) - e.at(j, 0);
      const double dy = e.at(i, 1) - e.at(j, 1);
      const double dist = std::sqrt(dx * dx + dy * dy);
      if ((i < 10) == (j < 10)) {
        intra += dist;
        ++n_intra;
      } else {
        inter += dist;
        ++n_inter;
      }
    }
  intra /= static_cast<double>(n_intra);
  inter /= static_cast<double>(n_inter);
  CHECK(inter > 2.0 * intra);
}

TEST_CASE("analysis config validation catches bad settings") {
  analysis::AnalysisConfig cfg;
  cfg.validate();
  SUBCASE("color reduction") {
    cfg.color_reduction = "row_max";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("normalization") {
    cfg.normalization = "sigmoid";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("subsample cap") {
    cfg.subsample_cap = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("a two-sample report skips tsne with a notice") {
  data::Dataset d;
  d.schema = testutil::unified_schema();
  d.samples.push_back(testutil::make_sample("p", "road", "", "", 1));
  d.samples.push_back(testutil::make_sample("q", "rear", "", "", 2));
  analysis::AnalysisConfig cfg;
  cfg.perplexity = 30.0;
  const auto rep = analysis::build_report(d, tiny_pipe(), cfg);
  CHECK(rep.sim.tsne_skipped);
  CHECK(rep.sim.tsne_notice.find("perplexity") != std::string::npos);
  CHECK(rep.sim.embedding2.empty());
  CHECK(rep.sim.euclidean.shape() == std::vector<std::size_t>{2, 2});
  CHECK(rep.sim.ids == std::vector<std::string>{"p", "q"});
  REQUIRE(rep.sim.euclid_color.size() == 2);
  // Each row's only off-diagonal neighbor is the other sample.
  CHECK(rep.sim.euclid_color[0] == rep.sim.euclidean.at(0, 1));
}

TEST_CASE("report colors correlate with blob membership") {
  // Nine dark samples and three bright ones: bright rows sit far from most
  // of the dataset, so their mean distance color must be systematically
  // higher (point-biserial correlation with membership at least 0.5).
  data::Dataset d;
  d.schema = testutil::unified_schema();
  for (int i = 0; i < 9; ++i)
    d.samples.push_back(
        brightness_sample("dark" + std::to_string(i), 20.0, 200 + i, "road"));
  for (int i = 0; i < 3; ++i)
    d.samples.push_back(
        brightness_sample("bright" + std::to_string(i), 235.0, 300 + i,
                          "rear"));
  analysis::AnalysisConfig cfg;
  const auto rep = analysis::build_report(d, tiny_pipe(), cfg);
  std::vector<double> membership;
  for (int i = 0; i < 12; ++i) membership.push_back(i < 9 ? 0.0 : 1.0);
  const double r = pearson(membership, rep.sim.euclid_color);
  CHECK(std::abs(r) >= 0.5);
  CHECK(r > 0.0);
}

TEST_CASE("equal-portion subsampling caps each source") {
  data::Dataset d;
  d.schema = testutil::unified_schema();
  for (int i = 0; i < 30; ++i) {
    auto s = testutil::make_sample("a" + std::to_string(i), "road", "", "",
                                   400 + i);
    s.source = "alpha";
    d.samples.push_back(std::move(s));
  }
  for (int i = 0; i < 30; ++i) {
    auto s = testutil::make_sample("b" + std::to_string(i), "rear", "", "",
                                   500 + i);
    s.source = "beta";
    d.samples.push_back(std::move(s));
  }
  analysis::AnalysisConfig cfg;
  cfg.subsample_cap = 10;
  cfg.seed = 17;
  const auto rep = analysis::build_report(d, tiny_pipe(), cfg);
  REQUIRE(rep.sim.ids.size() == 20);
  std::size_t from_a = 0, from_b = 0;
  for (const auto& id : rep.sim.ids) {
    if (id[0] == 'a') ++from_a;
    if (id[0] == 'b') ++from_b;
  }
  CHECK(from_a == 10);
  CHECK(from_b == 10);

  SUBCASE("the label audit still covers the full dataset") {
    CHECK(rep.labels.tasks.at(TaskKind::kGaze).labeled == 60);
  }
  SUBCASE("subsampling is seed-deterministic") {
    const auto rep2 = analysis::build_report(d, tiny_pipe(), cfg);
    CHECK(rep2.sim.ids == rep.sim.ids);
  }
}

TEST_CASE("report files land in the output directory") {
  testutil::TempDir dir("arep");
  data::Dataset d;
  d.schema = testutil::unified_schema();
  for (int i = 0; i < 16; ++i)
    d.samples.push_back(testutil::make_sample(
        "s" + std::to_string(i), i % 2 ? "road" : "rear", "teen", "", 600 + i));
  analysis::AnalysisConfig cfg;
  cfg.perplexity = 4.0;
  cfg.tsne_max_iter = 60;
  const auto rep =
      analysis::build_report(d, tiny_pipe(), cfg, dir.str(), "c0ffee");
  CHECK_FALSE(rep.sim.tsne_skipped);
  namespace fs = std::filesystem;
  for (const char* name :
       {"similarity_euclidean.csv", "similarity_euclidean.bin",
        "similarity_cosine.csv", "similarity_cosine.bin", "embedding_2d.csv",
        "embedding_3d.csv", "label_distribution.json",
        "analysis_summary.json"})
    CHECK(fs::exists(dir.file(name)));

  SUBCASE("the binary matrix round-trips") {
    std::ifstream in(dir.file("similarity_euclidean.bin"), std::ios::binary);
    char magic[7];
    in.read(magic, 7);
    CHECK(std::string(magic, 7) == "FKMAT1\n");
    std::uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), 8);
    in.read(reinterpret_cast<char*>(&cols), 8);
    CHECK(rows == 16);
    CHECK(cols == 16);
    std::vector<double> buf(rows * cols);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * 8));
    REQUIRE(static_cast<bool>(in));
    for (std::size_t i = 0; i < buf.size(); ++i)
      CHECK(buf[i] == rep.sim.euclidean[i]);
  }
  SUBCASE("the matrix csv is labeled by sample id") {
    std::ifstream in(dir.file("similarity_euclidean.csv"));
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header.rfind("id,s0,s1,", 0) == 0);
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 16);
  }
  SUBCASE("the summary records the run shape") {
    std::ifstream in(dir.file("analysis_summary.json"));
    nlohmann::json j;
    in >> j;
    CHECK(j.at("n_analyzed").get<std::size_t>() == 16);
    CHECK(j.at("config_hash").get<std::string>() == "c0ffee");
    CHECK_FALSE(j.at("tsne_skipped").get<bool>());
  }
  SUBCASE("the label distribution json carries fractions") {
    std::ifstream in(dir.file("label_distribution.json"));
    nlohmann::json j;
    in >> j;
    CHECK(j.at("tasks").at("gaze").at("labeled").get<int>() == 16);
    CHECK(std::abs(j.at("tasks").at("gaze").at("fractions").at("road")
                       .get<double>() -
                   0.5) <= 1e-12);
    CHECK(j.at("tasks").at("age").at("dominant").get<std::string>() ==
          "teen");
  }
}

TEST_CASE("zscore normalization flows through the report") {
  data::Dataset d;
  d.schema = testutil::unified_schema();
  for (int i = 0; i < 6; ++i)
    d.samples.push_back(
        testutil::make_sample("z" + std::to_string(i), "road", "", "", 700 + i));
  analysis::AnalysisConfig cfg;
  cfg.normalization = "zscore";
  const auto rep = analysis::build_report(d, tiny_pipe(), cfg);
  double sum = 0.0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      if (i != j) sum += rep.sim.euclidean.at(i, j);
  CHECK(std::abs(sum) <= 1e-9);
}
