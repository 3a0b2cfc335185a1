#include "facekit/toygen/toygen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "facekit/core/error.hpp"
#include "facekit/core/rng.hpp"
#include "facekit/data/manifest.hpp"

namespace facekit::toygen {

namespace {

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0.0, g = 0.0, b = 0.0;
  if (hp < 1.0) {
    r = c; g = x;
  } else if (hp < 2.0) {
    r = x; g = c;
  } else if (hp < 3.0) {
    g = c; b = x;
  } else if (hp < 4.0) {
    g = x; b = c;
  } else if (hp < 5.0) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  const double m = v - c;
  rgb[0] = r + m;
  rgb[1] = g + m;
  rgb[2] = b + m;
}

// Paints the noiseless prototype (bands of striped color keyed by each
// task's class), then adds the sample's brightness draw plus per-pixel noise
// when an rng is supplied, and quantizes to the 8-bit grid.
data::Image render_sample(const GenSpec& spec,
                          const std::map<data::TaskKind, int>& cls,
                          double shift, Rng* rng) {
  const int size = spec.image_size;
  data::Image img(size, size);
  const double hue_shift = 0.3 * shift;
  const int jitter_px = static_cast<int>(std::lround(8.0 * shift));

  const std::size_t n_tasks = spec.categories.size();
  std::size_t band = 0;
  for (const auto& [task, cats] : spec.categories) {
    const int y0 = static_cast<int>(band * static_cast<std::size_t>(size) / n_tasks);
    const int y1 = band + 1 == n_tasks
                       ? size
                       : static_cast<int>((band + 1) *
                                          static_cast<std::size_t>(size) / n_tasks);
    const int k = cls.at(task);
    const int K = static_cast<int>(cats.size());
    const double hue = (k + 0.5) / static_cast<double>(K) + hue_shift;
    const int period = 3 + (k % 4);
    double on[3], off[3];
    hsv_to_rgb(hue, 0.85, 0.95, on);
    hsv_to_rgb(hue, 0.85, 0.45, off);
    for (int y = y0; y < y1; ++y)
      for (int x = 0; x < size; ++x) {
        const bool lit = ((x + jitter_px) / period) % 2 == 0;
        const double* c = lit ? on : off;
        for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = c[ch];
      }
    ++band;
  }

  double bright = 0.35 * shift;
  if (rng != nullptr && spec.brightness_jitter > 0.0)
    bright += rng->gaussian() * spec.brightness_jitter;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        double v = img.at(y, x, ch) + bright;
        if (rng != nullptr) v += rng->gaussian() * spec.cluster_tightness;
        v = std::clamp(v, 0.0, 1.0);
        img.at(y, x, ch) = static_cast<double>(std::lround(v * 255.0));
      }
  return img;
}

int draw_class(Rng& rng, const std::vector<double>& weights) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    cum += weights[k];
    if (u < cum) return static_cast<int>(k);
  }
  return static_cast<int>(weights.size()) - 1;
}

std::string padded_id(const std::string& name, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", i);
  return "images/" + name + "_" + buf + ".ppm";
}

constexpr std::uint64_t kOodSalt = 0xD15EA5Eu;

}  // namespace

void GenSpec::validate() const {
  check(!name.empty(), "GenSpec: name must be non-empty");
  check(n_samples >= 1, "GenSpec: n_samples must be at least 1");
  check(image_size >= 8, "GenSpec: image_size must be at least 8");
  check(!categories.empty(), "GenSpec: at least one task required");
  for (const auto& [task, cats] : categories) {
    check(cats.size() >= 2, "GenSpec: task '" + data::task_name(task) +
                                "' needs at least 2 classes");
    const auto bit = label_balance.find(task);
    if (bit == label_balance.end()) continue;
    check(bit->second.size() == cats.size(),
          "GenSpec: label_balance size mismatch for task '" +
              data::task_name(task) + "'");
    double sum = 0.0;
    for (double w : bit->second) {
      check(w >= 0.0, "GenSpec: negative label_balance weight");
      sum += w;
    }
    check(std::abs(sum - 1.0) <= 1e-9,
          "GenSpec: label_balance must sum to 1 for task '" +
              data::task_name(task) + "'");
  }
  for (const auto& [task, w] : label_balance)
    check(categories.count(task) != 0,
          "GenSpec: label_balance for unknown task '" + data::task_name(task) +
              "'");
  check(cluster_tightness >= 0.0, "GenSpec: cluster_tightness must be >= 0");
  check(brightness_jitter >= 0.0, "GenSpec: brightness_jitter must be >= 0");
  check(shift_magnitude >= 0.0, "GenSpec: shift_magnitude must be >= 0");
}

data::LabelSchema GenSpec::schema() const {
  data::LabelSchema s;
  for (const auto& [task, cats] : categories) {
    data::TaskLabelSpace space;
    space.categories = cats;
    s.tasks[task] = std::move(space);
  }
  return s;
}

data::Dataset generate_dataset(const GenSpec& spec) {
  spec.validate();
  data::Dataset d;
  d.name = spec.name;
  d.schema = spec.schema();
  d.samples.reserve(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    Rng rng(Rng::mix(spec.seed, i));
    data::Sample s;
    s.image_id = padded_id(spec.name, i);
    s.source = spec.name;
    std::map<data::TaskKind, int> cls;
    for (const auto& [task, cats] : spec.categories) {
      const auto bit = spec.label_balance.find(task);
      const int k =
          bit != spec.label_balance.end()
              ? draw_class(rng, bit->second)
              : static_cast<int>(rng.uniform_int(cats.size()));
      cls[task] = k;
      s.labels[task] = cats[static_cast<std::size_t>(k)];
    }
    s.image = render_sample(spec, cls, 0.0, &rng);
    d.samples.push_back(std::move(s));
  }
  return d;
}

data::Dataset generate_ood_shifted(const GenSpec& spec,
                                   const data::Dataset& base) {
  spec.validate();
  data::Dataset d;
  d.name = base.name + "_ood";
  d.schema = base.schema;
  d.samples.reserve(base.samples.size());
  for (std::size_t i = 0; i < base.samples.size(); ++i) {
    const data::Sample& b = base.samples[i];
    Rng rng(Rng::mix(Rng::mix(spec.seed, kOodSalt), i));
    data::Sample s;
    s.image_id = padded_id(d.name, i);
    s.source = d.name;
    s.labels = b.labels;
    std::map<data::TaskKind, int> cls;
    for (const auto& [task, cats] : spec.categories) {
      const auto it = b.labels.find(task);
      check(it != b.labels.end(), "generate_ood_shifted: base sample missing '" +
                                      data::task_name(task) + "' label");
      const int k = d.schema.space(task).index_of(it->second);
      check(k >= 0, "generate_ood_shifted: base label outside spec categories");
      cls[task] = k;
    }
    s.image = render_sample(spec, cls, spec.shift_magnitude, &rng);
    d.samples.push_back(std::move(s));
  }
  return d;
}

data::Image render_prototype(const GenSpec& spec,
                             const std::map<data::TaskKind, int>& cls,
                             double shift) {
  return render_sample(spec, cls, shift, nullptr);
}

GenSpec preset(const std::string& name, std::size_t n_samples,
               std::uint64_t seed) {
  GenSpec s;
  s.image_size = 32;
  s.seed = seed;
  s.categories[data::TaskKind::kGaze] = {"infotainment", "ext_mirror",
                                         "int_mirror",   "rear",
                                         "road",         "passenger"};
  s.categories[data::TaskKind::kAge] = {"teen", "adult", "elderly"};
  s.categories[data::TaskKind::kExpression] = {"happy", "surprised", "frown",
                                               "neutral", "sad"};
  if (name == "tight-narrow") {
    s.name = "tight_narrow";
    s.n_samples = n_samples != 0 ? n_samples : 1500;
    s.cluster_tightness = 0.02;
    s.brightness_jitter = 0.0;
    s.label_balance[data::TaskKind::kGaze] = {0.7, 0.06, 0.06,
                                              0.06, 0.06, 0.06};
    s.label_balance[data::TaskKind::kAge] = {0.7, 0.15, 0.15};
    s.label_balance[data::TaskKind::kExpression] = {0.7, 0.075, 0.075, 0.075,
                                                    0.075};
  } else if (name == "wide-sparse") {
    s.name = "wide_sparse";
    s.n_samples = n_samples != 0 ? n_samples : 300;
    s.cluster_tightness = 0.25;
    s.brightness_jitter = 0.05;
  } else if (name == "balanced") {
    s.name = "balanced";
    s.n_samples = n_samples != 0 ? n_samples : 1500;
    s.cluster_tightness = 0.10;
    s.brightness_jitter = 0.10;
  } else {
    throw ConfigError("preset: unknown preset '" + name + "'");
  }
  return s;
}

std::string write_dataset(const data::Dataset& d, const std::string& dir,
                          const std::string& format) {
  check(format == "csv" || format == "jsonl",
        "write_dataset: format must be 'csv' or 'jsonl'");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");

  data::Dataset copy;
  copy.name = d.name;
  copy.schema = d.schema;
  copy.samples.reserve(d.samples.size());
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    data::Sample s = d.samples[i];
    const bool usable = s.image_id.rfind("images/", 0) == 0 &&
                        s.image_id.size() > 4 &&
                        s.image_id.substr(s.image_id.size() - 4) == ".ppm";
    if (!usable) s.image_id = padded_id(d.name, i);
    const fs::path ppm = fs::path(dir) / s.image_id;
    data::write_ppm(ppm.string(), s.image);
    s.image_path = ppm.string();
    copy.samples.push_back(std::move(s));
  }
  const std::string manifest =
      (fs::path(dir) / ("manifest." + format)).string();
  data::save_manifest(manifest, copy);
  return manifest;
}

}  // namespace facekit::toygen
