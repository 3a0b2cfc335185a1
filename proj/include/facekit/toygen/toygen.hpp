#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "facekit/data/types.hpp"

namespace facekit::toygen {

// Generator controls. Every (task, class) combination owns a distinct
// visual prototype; samples are prototypes plus per-pixel Gaussian noise of
// std cluster_tightness (0-1 pixel scale) and an optional per-sample global
// brightness draw of std brightness_jitter (a diversity knob: wide regimes
// vary brightness at generation time, narrow ones do not).
struct GenSpec {
  std::string name = "toy";
  std::size_t n_samples = 100;
  int image_size = 32;
  std::map<data::TaskKind, std::vector<std::string>> categories;
  std::map<data::TaskKind, std::vector<double>> label_balance;  // sums to 1
  double cluster_tightness = 0.05;
  double brightness_jitter = 0.0;
  double shift_magnitude = 0.0;  // used by generate_ood_shifted
  std::uint64_t seed = 0;

  void validate() const;
  data::LabelSchema schema() const;
};

// Deterministic per seed: labels drawn from label_balance, image rendered
// from the label combination's prototype plus noise. Pixel values are
// quantized to the 8-bit grid so in-memory data matches a PPM round trip
// exactly.
data::Dataset generate_dataset(const GenSpec& spec);

// Same labels as `base`, images re-rendered with the prototypes perturbed
// by shift_magnitude (hue rotation + horizontal pattern jitter + brightness
// offset) and fresh noise draws. shift 0 re-creates the base regime.
data::Dataset generate_ood_shifted(const GenSpec& spec,
                                   const data::Dataset& base);

// Noise-free prototype for one label combination under a given shift.
data::Image render_prototype(const GenSpec& spec,
                             const std::map<data::TaskKind, int>& cls,
                             double shift);

// Ships the three regimes: "tight-narrow" (clustered, imbalanced),
// "wide-sparse" (dispersed, small n), "balanced" (uniform labels, moderate
// spread). n_samples 0 keeps the preset's default size.
GenSpec preset(const std::string& name, std::size_t n_samples = 0,
               std::uint64_t seed = 0);

// Writes images as PPM files plus a manifest; returns the manifest path.
// format is "csv" or "jsonl".
std::string write_dataset(const data::Dataset& d, const std::string& dir,
                          const std::string& format = "csv");

}  // namespace facekit::toygen
