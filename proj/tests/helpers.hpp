#pragma once

// Shared test fixtures: scratch directories, deterministic tiny images, and
// manifest/dataset builders used across the suite.

#include <unistd.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "facekit/core/rng.hpp"
#include "facekit/data/image.hpp"
#include "facekit/data/manifest.hpp"
#include "facekit/data/types.hpp"

namespace testutil {

// Self-cleaning scratch directory under the system temp root. Tags must be
// unique within one binary so parallel ctest runs cannot collide.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("facekit_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

// Random image on the 8-bit grid (what a PPM round trip preserves).
inline facekit::data::Image make_image(int h, int w, std::uint64_t seed) {
  facekit::data::Image img(h, w);
  facekit::Rng rng(seed);
  for (auto& v : img.data) v = static_cast<double>(rng.uniform_int(256));
  return img;
}

// The unified three-task label schema used by most fixtures.
inline facekit::data::LabelSchema unified_schema() {
  using facekit::data::TaskKind;
  facekit::data::LabelSchema s;
  s.tasks[TaskKind::kGaze].categories = {"infotainment", "ext_mirror",
                                         "int_mirror",   "rear",
                                         "road",         "passenger"};
  s.tasks[TaskKind::kAge].categories = {"teen", "adult", "elderly"};
  s.tasks[TaskKind::kExpression].categories = {"happy", "surprised", "frown",
                                               "neutral", "sad"};
  return s;
}

// In-memory sample with a tiny deterministic image. Empty label = absent.
inline facekit::data::Sample make_sample(const std::string& id,
                                         const std::string& gaze,
                                         const std::string& age,
                                         const std::string& expression,
                                         std::uint64_t seed = 1) {
  using facekit::data::TaskKind;
  facekit::data::Sample s;
  s.image_id = id;
  s.image = make_image(2, 2, seed);
  if (!gaze.empty()) s.labels[TaskKind::kGaze] = gaze;
  if (!age.empty()) s.labels[TaskKind::kAge] = age;
  if (!expression.empty()) s.labels[TaskKind::kExpression] = expression;
  return s;
}

// Writes one shared tiny image plus a CSV manifest of `rows` label triples
// (empty string = absent label); returns the manifest path.
inline std::string write_manifest(
    const TempDir& dir, const std::vector<std::array<std::string, 3>>& rows) {
  const std::string img_rel = "img.ppm";
  facekit::data::write_ppm(dir.file(img_rel), make_image(2, 2, 99));
  std::string manifest = dir.file("manifest.csv");
  std::ofstream out(manifest, std::ios::binary);
  out << "image_path,gaze,age,expression\n";
  for (const auto& r : rows)
    out << img_rel << "," << r[0] << "," << r[1] << "," << r[2] << "\n";
  return manifest;
}

}  // namespace testutil
