#pragma once

#include <memory>
#include <string>
#include <vector>

#include "facekit/data/image.hpp"

namespace facekit::preprocess {

// Axis-aligned face box in pixel coordinates, with detector confidence.
struct FaceBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  double confidence = 0.0;
};

// Face detector interface. Implementations must be deterministic for a fixed
// input and must return boxes lying fully inside the image.
class FaceDetector {
 public:
  virtual ~FaceDetector() = default;
  virtual std::vector<FaceBox> detect(const data::Image& img) const = 0;
  virtual std::string name() const = 0;
};

// Returns the boxes it was constructed with, intersected with the image
// bounds check done by the caller. Test double.
class StubDetector : public FaceDetector {
 public:
  explicit StubDetector(std::vector<FaceBox> boxes)
      : boxes_(std::move(boxes)) {}
  std::vector<FaceBox> detect(const data::Image& img) const override;
  std::string name() const override { return "stub"; }

 private:
  std::vector<FaceBox> boxes_;
};

// Never finds a face; exercises the full-image fallback.
class NoneDetector : public FaceDetector {
 public:
  std::vector<FaceBox> detect(const data::Image&) const override { return {}; }
  std::string name() const override { return "none"; }
};

// Slides a window over the image and reports the brightest one (mean over
// pixels and channels) when it clears the threshold. Scan order is row-major
// with strict improvement, so ties resolve to the first window found.
class BrightWindowDetector : public FaceDetector {
 public:
  BrightWindowDetector(int win_h, int win_w, double min_mean)
      : win_h_(win_h), win_w_(win_w), min_mean_(min_mean) {}
  std::vector<FaceBox> detect(const data::Image& img) const override;
  std::string name() const override { return "bright"; }

 private:
  int win_h_;
  int win_w_;
  double min_mean_;
};

// Detector lookup by config name: "none", "bright" (default window 16x16,
// threshold 128). StubDetector is constructed directly where needed.
std::shared_ptr<FaceDetector> make_detector(const std::string& name);

}  // namespace facekit::preprocess
