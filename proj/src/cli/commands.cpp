#include "facekit/cli/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "facekit/analysis/analysis.hpp"
#include "facekit/backbone/params.hpp"
#include "facekit/core/error.hpp"
#include "facekit/core/hash.hpp"
#include "facekit/data/manifest.hpp"
#include "facekit/data/ops.hpp"
#include "facekit/eval/evaluation.hpp"
#include "facekit/heads/checkpoint.hpp"
#include "facekit/heads/model.hpp"
#include "facekit/toygen/toygen.hpp"
#include "facekit/train/trainer.hpp"

namespace facekit::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_json_file(const std::string& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path);
}

ordered_json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return ordered_json::parse(in);
}

// Loads one dataset section. With transforms, applies bucketize -> remaps ->
// required-task cleaning in that order; without, returns the raw load (the
// OOD path scores labels leniently instead of transforming the dataset).
std::pair<data::Dataset, data::LoadReport> load_section(
    const DatasetSection& ds, bool apply_transforms) {
  check(!ds.manifest.empty(), "config: dataset manifest is required");
  check(!ds.schema.tasks.empty(), "config: dataset schema is required");
  auto loaded = data::load_manifest(ds.manifest, ds.schema, ds.name);
  if (apply_transforms) {
    if (!ds.age_bucket_names.empty())
      loaded.first =
          data::bucketize_age(loaded.first, ds.age_edges, ds.age_bucket_names);
    for (const data::RemapTable& r : ds.remaps)
      loaded.first = data::remap_labels(loaded.first, r);
    if (!ds.required_tasks.empty())
      loaded.first = data::clean_dataset(loaded.first, ds.required_tasks);
  }
  return loaded;
}

ordered_json report_to_json(const data::LoadReport& rep) {
  ordered_json j;
  j["rows_read"] = rep.rows_read;
  j["samples_loaded"] = rep.samples_loaded;
  j["missing_images"] = rep.missing_images;
  j["invalid_labels"] = rep.invalid_labels;
  return j;
}

}  // namespace

std::string cache_root() {
  const char* env = std::getenv("FACEKIT_CACHE");
  return env != nullptr && *env != '\0' ? env : ".facekit-cache";
}

std::string cache_key(const std::string& manifest_path,
                      const PipelineSettings& pipe) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cache_key: cannot open manifest " + manifest_path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return to_hex(fnv1a64(ss.str())) + "-" + to_hex(fnv1a64(pipe.canonical_json()));
}

void write_tensor_file(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_tensor_file: cannot open " + path);
  out.write("FKTENS1\n", 8);
  const std::uint64_t rank = t.rank();
  out.write(reinterpret_cast<const char*>(&rank), sizeof rank);
  for (std::size_t i = 0; i < t.rank(); ++i) {
    const std::uint64_t d = t.dim(i);
    out.write(reinterpret_cast<const char*>(&d), sizeof d);
  }
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!out) throw IoError("write_tensor_file: write failed for " + path);
}

Tensor read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_tensor_file: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "FKTENS1\n")
    throw DataError("read_tensor_file: bad magic in " + path);
  std::uint64_t rank = 0;
  in.read(reinterpret_cast<char*>(&rank), sizeof rank);
  check(in.good() && rank > 0 && rank <= 8, "read_tensor_file: bad rank");
  std::vector<std::size_t> shape(rank);
  for (std::uint64_t i = 0; i < rank; ++i) {
    std::uint64_t d = 0;
    in.read(reinterpret_cast<char*>(&d), sizeof d);
    shape[i] = d;
  }
  Tensor t(shape);
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!in) throw DataError("read_tensor_file: truncated payload in " + path);
  return t;
}

int run_gen(const ExperimentConfig& cfg) {
  check(!cfg.gen.out_dir.empty(), "gen: gen.out_dir is required");
  DirLock lock(cfg.gen.out_dir);
  toygen::GenSpec spec = toygen::preset(
      cfg.gen.preset, cfg.gen.n_samples,
      cfg.gen.seed != 0 ? cfg.gen.seed : cfg.seed);
  spec.shift_magnitude = cfg.gen.shift_magnitude;
  const data::Dataset d = toygen::generate_dataset(spec);
  const std::string manifest =
      toygen::write_dataset(d, cfg.gen.out_dir, cfg.gen.format);
  std::string ood_manifest;
  std::optional<DirLock> ood_lock;
  if (cfg.gen.emit_ood) {
    ood_lock.emplace(cfg.gen.out_dir + "_ood");
    const data::Dataset ood = toygen::generate_ood_shifted(spec, d);
    ood_manifest =
        toygen::write_dataset(ood, cfg.gen.out_dir + "_ood", cfg.gen.format);
  }
  ordered_json s;
  s["preset"] = cfg.gen.preset;
  s["n_samples"] = d.size();
  s["seed"] = spec.seed;
  s["manifest"] = manifest;
  if (!ood_manifest.empty()) {
    s["ood_manifest"] = ood_manifest;
    s["shift_magnitude"] = spec.shift_magnitude;
  }
  s["config_hash"] = cfg.config_hash;
  write_json_file(cfg.gen.out_dir + "/gen_summary.json", s);
  std::cout << "[gen] preset=" << cfg.gen.preset << " n=" << d.size()
            << " manifest=" << manifest << "\n";
  return 0;
}

int run_preprocess(const ExperimentConfig& cfg) {
  check(!cfg.output_dir.empty(), "preprocess: output_dir is required");
  DirLock lock(cfg.output_dir);
  const std::string key = cache_key(cfg.dataset.manifest, cfg.pipeline);
  const std::string root = cache_root();
  fs::create_directories(root);
  const std::string tpath = root + "/" + key + ".tensor";
  const std::string rpath = root + "/" + key + ".report.json";
  const bool hit = fs::exists(tpath) && fs::exists(rpath);

  Tensor tensor;
  ordered_json report;
  if (hit) {
    tensor = read_tensor_file(tpath);
    report = read_json_file(rpath);
  } else {
    // The cache stores pixels for the full manifest; label-level transforms
    // do not affect it.
    auto [d, rep] = load_section(cfg.dataset, /*apply_transforms=*/false);
    tensor = preprocess::preprocess_dataset(d, cfg.pipeline.build());
    report = report_to_json(rep);
    write_tensor_file(tpath, tensor);
    write_json_file(rpath, report);
  }

  write_tensor_file(cfg.output_dir + "/preprocessed.tensor", tensor);
  ordered_json out = report;
  out["cache_key"] = key;
  out["cache_hit"] = hit;
  out["config_hash"] = cfg.config_hash;
  write_json_file(cfg.output_dir + "/load_report.json", out);
  std::cout << "[preprocess] cache " << (hit ? "hit" : "miss")
            << " key=" << key << " samples=" << tensor.dim(0) << "\n";
  return 0;
}

int run_train(const ExperimentConfig& cfg) {
  check(!cfg.output_dir.empty(), "train: output_dir is required");
  DirLock lock(cfg.output_dir);

  auto [d, rep] = load_section(cfg.dataset, /*apply_transforms=*/true);
  data::Dataset train_d, eval_d;
  if (cfg.eval_dataset) {
    train_d = std::move(d);
    auto loaded_eval = load_section(*cfg.eval_dataset, /*apply_transforms=*/true);
    eval_d = std::move(loaded_eval.first);
  } else {
    check(cfg.dataset.split_fraction > 0.0,
          "train: dataset.split_fraction or an eval_dataset is required");
    std::tie(train_d, eval_d) =
        data::split_dataset(d, cfg.dataset.split_fraction, cfg.dataset.split_seed);
  }

  const preprocess::PipelineConfig pipe = cfg.pipeline.build();
  heads::MultiTaskModel model(backbone::make_backbone(cfg.backbone),
                              train_d.schema, cfg.heads, cfg.head_init_seed);
  model.set_policy(cfg.policy);
  const std::size_t trainable =
      backbone::count_trainable(model.mask(), model.const_params());
  std::cout << "[train] policy=" << backbone::policy_name(cfg.policy)
            << " trainable_params=" << trainable << "\n";

  const train::TensorDataset ttd = train::make_tensor_dataset(train_d, pipe);
  const train::TensorDataset etd = train::make_tensor_dataset(eval_d, pipe);
  const train::FitResult fr =
      train::fit(model, ttd, etd, cfg.train, cfg.loss,
                 cfg.output_dir + "/checkpoint.fkckpt", cfg.config_hash);

  train::write_metrics_jsonl(cfg.output_dir + "/metrics.jsonl", fr.records,
                             cfg.config_hash);
  train::write_summary_csv(cfg.output_dir + "/metrics_summary.csv", fr.records);
  ordered_json s;
  s["epochs"] = fr.records.size();
  s["best_epoch"] = fr.best_epoch;
  s["best_eval_total"] = fr.best_eval_total;
  s["policy"] = backbone::policy_name(cfg.policy);
  s["trainable_params"] = trainable;
  s["train_samples"] = train_d.size();
  s["eval_samples"] = eval_d.size();
  s["load_report"] = report_to_json(rep);
  s["config_hash"] = cfg.config_hash;
  write_json_file(cfg.output_dir + "/train_summary.json", s);
  std::cout << "[train] best_epoch=" << fr.best_epoch
            << " best_eval_total=" << fr.best_eval_total << "\n";
  return 0;
}

int run_eval(const ExperimentConfig& cfg) {
  check(!cfg.output_dir.empty(), "eval: output_dir is required");
  check(!cfg.checkpoint.empty(), "eval: checkpoint is required");
  DirLock lock(cfg.output_dir);
  heads::LoadedCheckpoint loaded = heads::load_checkpoint(cfg.checkpoint);
  const DatasetSection& sec =
      cfg.eval_dataset ? *cfg.eval_dataset : cfg.dataset;
  auto [d, rep] = load_section(sec, /*apply_transforms=*/true);
  eval::EvalReport report =
      eval::evaluate(*loaded.model, d, cfg.pipeline.build());
  report.config_hash = cfg.config_hash;
  eval::write_report_json(cfg.output_dir + "/eval_report.json", report);
  eval::write_confusion_csv(cfg.output_dir, report);
  std::cout << "[eval] n=" << report.n_samples;
  if (report.mean_accuracy)
    std::cout << " mean_accuracy=" << *report.mean_accuracy;
  std::cout << "\n";
  return 0;
}

int run_ood(const ExperimentConfig& cfg) {
  check(!cfg.output_dir.empty(), "ood: output_dir is required");
  check(!cfg.checkpoint.empty(), "ood: checkpoint is required");
  DirLock lock(cfg.output_dir);
  heads::LoadedCheckpoint loaded = heads::load_checkpoint(cfg.checkpoint);
  const DatasetSection& sec =
      cfg.eval_dataset ? *cfg.eval_dataset : cfg.dataset;
  auto [d, rep] = load_section(sec, /*apply_transforms=*/false);
  eval::OodOptions opts;
  opts.age_edges = sec.age_edges;
  opts.age_buckets = sec.age_bucket_names;
  eval::EvalReport report = eval::ood_inference(*loaded.model, d, sec.remaps,
                                                cfg.pipeline.build(), opts);
  report.config_hash = cfg.config_hash;
  eval::write_report_json(cfg.output_dir + "/ood_report.json", report);
  eval::write_confusion_csv(cfg.output_dir, report);
  std::cout << "[ood] n=" << report.n_samples;
  if (report.mean_accuracy)
    std::cout << " mean_accuracy=" << *report.mean_accuracy;
  std::size_t excluded = 0;
  for (const auto& [t, c] : report.excluded_unmappable) excluded += c;
  std::cout << " excluded_labels=" << excluded << "\n";
  return 0;
}

int run_analyze(const ExperimentConfig& cfg) {
  check(!cfg.output_dir.empty(), "analyze: output_dir is required");
  DirLock lock(cfg.output_dir);
  auto [d, rep] = load_section(cfg.dataset, /*apply_transforms=*/true);
  const analysis::AnalysisReport report = analysis::build_report(
      d, cfg.pipeline.build(), cfg.analysis, cfg.output_dir, cfg.config_hash);
  std::cout << "[analyze] analyzed=" << report.sim.ids.size()
            << " of " << d.size();
  if (report.sim.tsne_skipped) std::cout << " (" << report.sim.tsne_notice << ")";
  std::cout << "\n";
  return 0;
}

int run_report(const ExperimentConfig& cfg) {
  check(!cfg.output_dir.empty(), "report: output_dir is required");
  DirLock lock(cfg.output_dir);
  ordered_json j;
  auto sections = ordered_json::object();
  const char* names[] = {"gen_summary.json",      "load_report.json",
                         "train_summary.json",    "eval_report.json",
                         "ood_report.json",       "analysis_summary.json",
                         "label_distribution.json"};
  for (const char* f : names) {
    const std::string path = cfg.output_dir + "/" + f;
    if (!fs::exists(path)) continue;
    std::string key(f);
    key = key.substr(0, key.size() - 5);  // drop ".json"
    sections[key] = read_json_file(path);
  }
  j["sections"] = std::move(sections);
  j["config_hash"] = cfg.config_hash;
  write_json_file(cfg.output_dir + "/experiment_report.json", j);
  std::cout << "[report] sections=" << j["sections"].size() << "\n";
  return 0;
}

}  // namespace facekit::cli
