#include "facekit/preprocess/detector.hpp"

#include "facekit/core/error.hpp"

namespace facekit::preprocess {

std::vector<FaceBox> StubDetector::detect(const data::Image& img) const {
  std::vector<FaceBox> in_bounds;
  for (const FaceBox& b : boxes_) {
    if (b.x >= 0 && b.y >= 0 && b.w > 0 && b.h > 0 &&
        b.x + b.w <= img.width && b.y + b.h <= img.height)
      in_bounds.push_back(b);
  }
  return in_bounds;
}

std::vector<FaceBox> BrightWindowDetector::detect(const data::Image& img) const {
  if (img.height < win_h_ || img.width < win_w_) return {};
  double best = -1.0;
  FaceBox box;
  const double denom = static_cast<double>(win_h_) * win_w_ * 3.0;
  for (int y = 0; y + win_h_ <= img.height; ++y) {
    for (int x = 0; x + win_w_ <= img.width; ++x) {
      double sum = 0.0;
      for (int dy = 0; dy < win_h_; ++dy)
        for (int dx = 0; dx < win_w_; ++dx)
          for (int c = 0; c < 3; ++c) sum += img.at(y + dy, x + dx, c);
      const double mean = sum / denom;
      if (mean > best) {
        best = mean;
        box = {x, y, win_w_, win_h_, mean / 255.0};
      }
    }
  }
  if (best < min_mean_) return {};
  return {box};
}

std::shared_ptr<FaceDetector> make_detector(const std::string& name) {
  if (name == "none") return std::make_shared<NoneDetector>();
  if (name == "bright")
    return std::make_shared<BrightWindowDetector>(16, 16, 128.0);
  throw ConfigError("unknown face detector: " + name);
}

}  // namespace facekit::preprocess
