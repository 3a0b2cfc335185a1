#include "facekit/cli/config.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "facekit/core/error.hpp"
#include "facekit/core/hash.hpp"
#include "facekit/core/rng.hpp"

namespace facekit::cli {

namespace {

using nlohmann::json;

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

data::LabelSchema parse_schema(const json& j) {
  data::LabelSchema s;
  check(j.is_object(), "config: schema must be an object");
  for (const auto& [name, spec] : j.items()) {
    const data::TaskKind t = data::task_from_name(name);
    data::TaskLabelSpace space;
    if (spec.contains("numeric")) space.numeric = spec.at("numeric").get<bool>();
    if (spec.contains("categories"))
      space.categories = spec.at("categories").get<std::vector<std::string>>();
    check(space.valid(),
          "config: schema task '" + name + "' needs categories xor numeric");
    s.tasks[t] = std::move(space);
  }
  return s;
}

data::RemapTable parse_remap(const json& j) {
  data::RemapTable t;
  t.task = data::task_from_name(j.at("task").get<std::string>());
  if (j.contains("mapping"))
    for (const auto& [from, to] : j.at("mapping").items())
      t.mapping[from] = to.get<std::string>();
  t.target_categories =
      j.at("target_categories").get<std::vector<std::string>>();
  return t;
}

DatasetSection parse_dataset(const json& j, const std::string& base_dir) {
  DatasetSection d;
  if (j.contains("manifest"))
    d.manifest = resolve(base_dir, j.at("manifest").get<std::string>());
  if (j.contains("name")) d.name = j.at("name").get<std::string>();
  if (j.contains("schema")) d.schema = parse_schema(j.at("schema"));
  if (j.contains("remaps"))
    for (const json& r : j.at("remaps")) d.remaps.push_back(parse_remap(r));
  if (j.contains("age_buckets")) {
    const json& b = j.at("age_buckets");
    d.age_edges = b.at("edges").get<std::vector<double>>();
    d.age_bucket_names = b.at("names").get<std::vector<std::string>>();
  }
  if (j.contains("required_tasks"))
    for (const json& t : j.at("required_tasks"))
      d.required_tasks.insert(data::task_from_name(t.get<std::string>()));
  if (j.contains("split_fraction"))
    d.split_fraction = j.at("split_fraction").get<double>();
  if (j.contains("split_seed"))
    d.split_seed = j.at("split_seed").get<std::uint64_t>();
  return d;
}

std::vector<data::TaskKind> parse_task_list(const json& j) {
  std::vector<data::TaskKind> out;
  for (const json& t : j) out.push_back(data::task_from_name(t.get<std::string>()));
  return out;
}

std::map<data::TaskKind, double> parse_task_map(const json& j) {
  std::map<data::TaskKind, double> out;
  for (const auto& [name, v] : j.items())
    out[data::task_from_name(name)] = v.get<double>();
  return out;
}

}  // namespace

preprocess::PipelineConfig PipelineSettings::build() const {
  preprocess::PipelineConfig cfg;
  cfg.target_h = target_h;
  cfg.target_w = target_w;
  cfg.channel_means = channel_means;
  cfg.channel_stds = channel_stds;
  cfg.face_mode = face_mode;
  cfg.detector = preprocess::make_detector(detector);
  cfg.validate();
  return cfg;
}

std::string PipelineSettings::canonical_json() const {
  json j;  // json sorts keys, giving a stable serialization
  j["target_h"] = target_h;
  j["target_w"] = target_w;
  j["channel_means"] = channel_means;
  j["channel_stds"] = channel_stds;
  j["face_mode"] = face_mode;
  j["detector"] = detector;
  return j.dump();
}

ExperimentConfig parse_config_json(const nlohmann::json& j,
                                   const std::string& base_dir) {
  check(j.is_object(), "config: top level must be a JSON object");
  check(j.contains("seed"), "config: seed is mandatory");
  ExperimentConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("output_dir"))
    c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());

  if (j.contains("dataset")) c.dataset = parse_dataset(j.at("dataset"), base_dir);
  if (j.contains("eval_dataset"))
    c.eval_dataset = parse_dataset(j.at("eval_dataset"), base_dir);

  if (j.contains("pipeline")) {
    const json& p = j.at("pipeline");
    if (p.contains("target_h")) c.pipeline.target_h = p.at("target_h").get<int>();
    if (p.contains("target_w")) c.pipeline.target_w = p.at("target_w").get<int>();
    if (p.contains("channel_means"))
      c.pipeline.channel_means = p.at("channel_means").get<std::array<double, 3>>();
    if (p.contains("channel_stds"))
      c.pipeline.channel_stds = p.at("channel_stds").get<std::array<double, 3>>();
    if (p.contains("face_mode")) c.pipeline.face_mode = p.at("face_mode").get<bool>();
    if (p.contains("detector")) c.pipeline.detector = p.at("detector").get<std::string>();
  }

  if (j.contains("backbone")) {
    const json& b = j.at("backbone");
    if (b.contains("kind")) c.backbone.kind = b.at("kind").get<std::string>();
    if (b.contains("input_h")) c.backbone.input_h = b.at("input_h").get<int>();
    if (b.contains("input_w")) c.backbone.input_w = b.at("input_w").get<int>();
    if (b.contains("feature_dim"))
      c.backbone.feature_dim = b.at("feature_dim").get<int>();
    if (b.contains("num_blocks"))
      c.backbone.num_blocks = b.at("num_blocks").get<int>();
    if (b.contains("patch_size"))
      c.backbone.patch_size = b.at("patch_size").get<int>();
    if (b.contains("num_heads")) c.backbone.num_heads = b.at("num_heads").get<int>();
    if (b.contains("mlp_hidden"))
      c.backbone.mlp_hidden = b.at("mlp_hidden").get<int>();
    if (b.contains("cls_token")) c.backbone.cls_token = b.at("cls_token").get<bool>();
    c.backbone.init_seed = b.contains("init_seed")
                               ? b.at("init_seed").get<std::uint64_t>()
                               : c.seed;
  } else {
    c.backbone.init_seed = c.seed;
  }

  if (j.contains("heads")) {
    const json& h = j.at("heads");
    if (h.contains("hidden_sizes"))
      c.heads.hidden_sizes = h.at("hidden_sizes").get<std::vector<int>>();
    if (h.contains("dropout_rate"))
      c.heads.dropout_rate = h.at("dropout_rate").get<double>();
  }
  c.head_init_seed = j.contains("head_init_seed")
                         ? j.at("head_init_seed").get<std::uint64_t>()
                         : Rng::mix(c.seed, 0x4EAD5u);
  if (j.contains("policy"))
    c.policy = backbone::policy_from_name(j.at("policy").get<std::string>());

  if (j.contains("loss")) {
    const json& l = j.at("loss");
    if (l.contains("task_weights"))
      c.loss.task_weights = parse_task_map(l.at("task_weights"));
    if (l.contains("l2_coefficients"))
      c.loss.l2_coefficients = parse_task_map(l.at("l2_coefficients"));
    if (l.contains("active_tasks"))
      c.loss.active_tasks = parse_task_list(l.at("active_tasks"));
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    if (t.contains("initial_lr")) c.train.initial_lr = t.at("initial_lr").get<double>();
    if (t.contains("lr_decay_factor"))
      c.train.lr_decay_factor = t.at("lr_decay_factor").get<double>();
    if (t.contains("lr_min")) c.train.lr_min = t.at("lr_min").get<double>();
    if (t.contains("lr_patience")) c.train.lr_patience = t.at("lr_patience").get<int>();
    if (t.contains("epochs")) c.train.epochs = t.at("epochs").get<int>();
    if (t.contains("batch_size")) c.train.batch_size = t.at("batch_size").get<int>();
    if (t.contains("curriculum")) {
      const json& cu = t.at("curriculum");
      if (cu.contains("enabled"))
        c.train.curriculum_enabled = cu.at("enabled").get<bool>();
      if (cu.contains("threshold"))
        c.train.curriculum_threshold = cu.at("threshold").get<double>();
      if (cu.contains("order"))
        c.train.curriculum_order = parse_task_list(cu.at("order"));
    }
  }
  c.train.seed = c.seed;

  if (j.contains("analysis")) {
    const json& a = j.at("analysis");
    if (a.contains("perplexity")) c.analysis.perplexity = a.at("perplexity").get<double>();
    c.analysis.seed = a.contains("seed") ? a.at("seed").get<std::uint64_t>() : c.seed;
    if (a.contains("subsample_cap"))
      c.analysis.subsample_cap = a.at("subsample_cap").get<std::size_t>();
    if (a.contains("color_reduction"))
      c.analysis.color_reduction = a.at("color_reduction").get<std::string>();
    if (a.contains("normalization"))
      c.analysis.normalization = a.at("normalization").get<std::string>();
    if (a.contains("tsne_max_iter"))
      c.analysis.tsne_max_iter = a.at("tsne_max_iter").get<int>();
    if (a.contains("tsne_learning_rate"))
      c.analysis.tsne_learning_rate = a.at("tsne_learning_rate").get<double>();
  } else {
    c.analysis.seed = c.seed;
  }

  if (j.contains("gen")) {
    const json& g = j.at("gen");
    if (g.contains("preset")) c.gen.preset = g.at("preset").get<std::string>();
    if (g.contains("n_samples"))
      c.gen.n_samples = g.at("n_samples").get<std::size_t>();
    if (g.contains("seed")) c.gen.seed = g.at("seed").get<std::uint64_t>();
    if (g.contains("out_dir"))
      c.gen.out_dir = resolve(base_dir, g.at("out_dir").get<std::string>());
    if (g.contains("format")) c.gen.format = g.at("format").get<std::string>();
    if (g.contains("shift_magnitude"))
      c.gen.shift_magnitude = g.at("shift_magnitude").get<double>();
    if (g.contains("emit_ood")) c.gen.emit_ood = g.at("emit_ood").get<bool>();
  }

  if (j.contains("checkpoint"))
    c.checkpoint = resolve(base_dir, j.at("checkpoint").get<std::string>());

  c.config_hash = to_hex(fnv1a64(j.dump()));
  return c;
}

ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: JSON parse failed: ") + e.what());
  }
  return parse_config_json(j, base_dir);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(),
                      std::filesystem::path(path).parent_path().string());
}

DirLock::DirLock(const std::string& dir) {
  check(!dir.empty(), "DirLock: empty output directory");
  std::filesystem::create_directories(dir);
  path_ = (std::filesystem::path(dir) / ".facekit.lock").string();
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    path_.clear();
    throw IoError("output directory '" + dir +
                  "' is locked by another run (lock file present)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  (void)!::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirLock::~DirLock() {
  if (!path_.empty()) ::unlink(path_.c_str());
}

}  // namespace facekit::cli
