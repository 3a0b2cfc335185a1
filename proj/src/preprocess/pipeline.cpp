#include "facekit/preprocess/pipeline.hpp"

#include <cstring>

#include "facekit/core/error.hpp"
#include "facekit/kernels/kernels.hpp"

namespace facekit::preprocess {

void PipelineConfig::validate() const {
  check(target_h > 0 && target_w > 0, "pipeline target size must be positive");
  for (double s : channel_stds)
    check(s > 0.0, "pipeline channel stds must be strictly positive");
  if (face_mode)
    check(detector != nullptr, "face_mode needs a detector");
}

FaceCrop extract_face(const data::Image& img, const FaceDetector& det) {
  const std::vector<FaceBox> boxes = det.detect(img);
  if (boxes.empty()) return {img, true};
  const FaceBox* best = &boxes[0];
  for (const FaceBox& b : boxes)
    if (b.confidence > best->confidence) best = &b;
  if (best->x < 0 || best->y < 0 || best->w <= 0 || best->h <= 0 ||
      best->x + best->w > img.width || best->y + best->h > img.height)
    throw DataError("face detector '" + det.name() +
                    "' returned an out-of-bounds box");
  data::Image crop(best->h, best->w);
  for (int y = 0; y < best->h; ++y)
    for (int x = 0; x < best->w; ++x)
      for (int c = 0; c < 3; ++c)
        crop.at(y, x, c) = img.at(best->y + y, best->x + x, c);
  return {std::move(crop), false};
}

data::Image resize_image(const data::Image& img, int h, int w) {
  check(h > 0 && w > 0, "resize target must be positive");
  if (img.empty()) throw DataError("resize_image on empty image");
  data::Image out(h, w);
  kernels::resize_bilinear(img.data.data(),
                           static_cast<std::size_t>(img.height),
                           static_cast<std::size_t>(img.width),
                           out.data.data(), static_cast<std::size_t>(h),
                           static_cast<std::size_t>(w));
  return out;
}

data::Image scale_pixels(const data::Image& img) {
  data::Image out = img;
  for (double& v : out.data) {
    if (v < 0.0 || v > 255.0)
      throw DataError("scale_pixels input outside [0, 255]");
    v /= 255.0;
  }
  return out;
}

data::Image unscale_pixels(const data::Image& img) {
  data::Image out = img;
  for (double& v : out.data) v *= 255.0;
  return out;
}

Tensor normalize_channels(const data::Image& img, const std::array<double, 3>& means,
                          const std::array<double, 3>& stds) {
  for (double s : stds) check(s > 0.0, "normalize_channels needs stds > 0");
  Tensor out({3, static_cast<std::size_t>(img.height),
              static_cast<std::size_t>(img.width)});
  const std::size_t plane =
      static_cast<std::size_t>(img.height) * img.width;
  for (int c = 0; c < 3; ++c) {
    double* dst = out.data() + static_cast<std::size_t>(c) * plane;
    for (std::size_t i = 0; i < plane; ++i)
      dst[i] = (img.data[i * 3 + static_cast<std::size_t>(c)] - means[c]) /
               stds[c];
  }
  return out;
}

PipelineResult run_pipeline(const data::Image& img, const PipelineConfig& cfg) {
  cfg.validate();
  PipelineResult result;
  const data::Image* stage = &img;
  FaceCrop crop;
  if (cfg.face_mode) {
    crop = extract_face(img, *cfg.detector);
    result.no_face = crop.no_face;
    stage = &crop.image;
  }
  const data::Image resized = resize_image(*stage, cfg.target_h, cfg.target_w);
  const data::Image scaled = scale_pixels(resized);
  result.tensor =
      normalize_channels(scaled, cfg.channel_means, cfg.channel_stds);
  return result;
}

Tensor preprocess_dataset(data::Dataset& d, const PipelineConfig& cfg) {
  cfg.validate();
  const std::size_t n = d.size();
  const std::size_t sample_len = 3 * static_cast<std::size_t>(cfg.target_h) *
                                 static_cast<std::size_t>(cfg.target_w);
  Tensor batch({n, 3, static_cast<std::size_t>(cfg.target_h),
                static_cast<std::size_t>(cfg.target_w)});
  for (std::size_t i = 0; i < n; ++i) {
    data::Sample& s = d.samples[i];
    if (s.image.empty())
      throw DataError("sample '" + s.image_id + "' has no image data");
    PipelineResult r = run_pipeline(s.image, cfg);
    if (r.no_face) s.flags.insert("no_face");
    std::memcpy(batch.data() + i * sample_len, r.tensor.data(),
                sample_len * sizeof(double));
  }
  return batch;
}

}  // namespace facekit::preprocess
