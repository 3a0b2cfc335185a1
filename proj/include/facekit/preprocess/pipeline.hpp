#pragma once

#include <array>
#include <memory>

#include "facekit/core/tensor.hpp"
#include "facekit/data/types.hpp"
#include "facekit/preprocess/detector.hpp"

namespace facekit::preprocess {

// Configuration for the fixed-order preprocessing pipeline:
// (face extraction when face_mode) -> resize -> scale -> normalize.
// Channel statistics default to the canonical large-corpus values the
// pretrained backbones were trained with; both are in 0-1 units.
struct PipelineConfig {
  int target_h = 224;
  int target_w = 224;
  std::array<double, 3> channel_means = {0.485, 0.456, 0.406};
  std::array<double, 3> channel_stds = {0.229, 0.224, 0.225};
  bool face_mode = false;
  std::shared_ptr<FaceDetector> detector;

  void validate() const;
};

struct FaceCrop {
  data::Image image;
  bool no_face = false;
};

struct PipelineResult {
  Tensor tensor;  // 3 x target_h x target_w
  bool no_face = false;
};

// Crops the highest-confidence detection; with no detection, returns the
// full image and sets no_face.
FaceCrop extract_face(const data::Image& img, const FaceDetector& det);

// Bilinear resize to exactly (h, w). Resizing to the own size is the
// identity.
data::Image resize_image(const data::Image& img, int h, int w);

// Divides by 255 after checking the input range [0, 255].
data::Image scale_pixels(const data::Image& img);
// Multiplies by 255; inverse of scale_pixels up to rounding.
data::Image unscale_pixels(const data::Image& img);

// Per-channel standardization of a scaled image into a 3 x H x W tensor
// (channel-major layout, ready for the backbones).
Tensor normalize_channels(const data::Image& img, const std::array<double, 3>& means,
                          const std::array<double, 3>& stds);

// Runs the full pipeline on one image.
PipelineResult run_pipeline(const data::Image& img, const PipelineConfig& cfg);

// Runs the pipeline over every sample, returning an N x 3 x H x W batch
// tensor. Samples whose detector found no face get a "no_face" flag.
Tensor preprocess_dataset(data::Dataset& d, const PipelineConfig& cfg);

}  // namespace facekit::preprocess
