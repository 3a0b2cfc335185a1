#include "facekit/backbone/params.hpp"

#include "facekit/core/error.hpp"
#include "facekit/core/hash.hpp"

namespace facekit::backbone {

bool TrainabilityMask::trainable(const Param& p) const {
  if (p.block.rfind("head.", 0) == 0) return true;
  auto it = backbone_blocks.find(p.block);
  if (it == backbone_blocks.end())
    throw ConfigError("trainability mask does not cover block '" + p.block +
                      "'");
  return it->second;
}

AdaptationPolicy policy_from_name(const std::string& name) {
  if (name == "LP" || name == "lp") return AdaptationPolicy::kLP;
  if (name == "PT" || name == "pt") return AdaptationPolicy::kPT;
  if (name == "FFT" || name == "fft") return AdaptationPolicy::kFFT;
  throw ConfigError("unknown adaptation policy: " + name);
}

const std::string& policy_name(AdaptationPolicy p) {
  static const std::string names[] = {"LP", "PT", "FFT"};
  return names[static_cast<int>(p)];
}

std::size_t count_trainable(const TrainabilityMask& mask,
                            const std::vector<const Param*>& params) {
  std::size_t n = 0;
  for (const Param* p : params)
    if (mask.trainable(*p)) n += p->value.size();
  return n;
}

std::uint64_t block_hash(const std::vector<const Param*>& params,
                         const std::string& block) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Param* p : params) {
    if (p->block != block) continue;
    h = fnv1a64(p->name.data(), p->name.size(), h);
    h = fnv1a64(p->value.data(), p->value.size() * sizeof(double), h);
  }
  return h;
}

}  // namespace facekit::backbone
