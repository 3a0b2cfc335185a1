#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "facekit/cli/commands.hpp"

namespace {

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw facekit::IoError("cannot open config " + path);
  return nlohmann::json::parse(in);
}

std::string abs_path(const std::string& p) {
  return std::filesystem::absolute(p).lexically_normal().string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facekit: multi-task face-attribute pipeline on toy data"};
  app.require_subcommand(1);

  std::string config_path, output_dir, policy, manifest, checkpoint, preset;
  long long seed = -1, n_samples = -1;
  int epochs = -1;
  double shift = -1.0;
  bool emit_ood = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config JSON file")
        ->required();
    sub->add_option("--output-dir", output_dir, "override output_dir");
    sub->add_option("--seed", seed, "override seed");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a toy dataset");
  add_common(gen);
  gen->add_option("--preset", preset,
                  "tight-narrow | wide-sparse | balanced");
  gen->add_option("--n-samples", n_samples, "override sample count");
  gen->add_option("--shift", shift, "override OOD shift magnitude");
  gen->add_flag("--emit-ood", emit_ood, "also write the shifted variant");

  CLI::App* preprocess =
      app.add_subcommand("preprocess", "run and cache the pixel pipeline");
  add_common(preprocess);
  preprocess->add_option("--manifest", manifest, "override dataset manifest");

  CLI::App* train = app.add_subcommand("train", "fit the multi-task model");
  add_common(train);
  train->add_option("--manifest", manifest, "override dataset manifest");
  train->add_option("--epochs", epochs, "override epoch count");
  train->add_option("--policy", policy, "LP | PT | FFT");

  CLI::App* evalc =
      app.add_subcommand("eval", "score a checkpoint on labeled data");
  add_common(evalc);
  evalc->add_option("--manifest", manifest, "override dataset manifest");
  evalc->add_option("--checkpoint", checkpoint, "override checkpoint path");

  CLI::App* ood = app.add_subcommand(
      "ood", "lenient scoring on an external dataset via remap tables");
  add_common(ood);
  ood->add_option("--manifest", manifest, "override dataset manifest");
  ood->add_option("--checkpoint", checkpoint, "override checkpoint path");

  CLI::App* analyze = app.add_subcommand(
      "analyze", "similarity matrices, embeddings, and label audit");
  add_common(analyze);
  analyze->add_option("--manifest", manifest, "override dataset manifest");

  CLI::App* report = app.add_subcommand(
      "report", "aggregate this output directory's artifacts");
  add_common(report);

  CLI11_PARSE(app, argc, argv);

  try {
    nlohmann::json j = load_json(config_path);
    if (!output_dir.empty()) j["output_dir"] = abs_path(output_dir);
    if (seed >= 0) j["seed"] = static_cast<std::uint64_t>(seed);
    if (epochs > 0) j["train"]["epochs"] = epochs;
    if (!policy.empty()) j["policy"] = policy;
    if (!manifest.empty()) {
      // eval/ood score eval_dataset when the config has one; point the
      // override at the section the command will actually read.
      const bool prefer_eval =
          (evalc->parsed() || ood->parsed()) && j.contains("eval_dataset");
      j[prefer_eval ? "eval_dataset" : "dataset"]["manifest"] =
          abs_path(manifest);
    }
    if (!checkpoint.empty()) j["checkpoint"] = abs_path(checkpoint);
    if (!preset.empty()) j["gen"]["preset"] = preset;
    if (n_samples >= 0) j["gen"]["n_samples"] = n_samples;
    if (shift >= 0.0) j["gen"]["shift_magnitude"] = shift;
    if (emit_ood) j["gen"]["emit_ood"] = true;

    std::string base =
        std::filesystem::path(config_path).parent_path().string();
    if (base.empty()) base = ".";
    const facekit::cli::ExperimentConfig cfg =
        facekit::cli::parse_config_json(j, base);

    if (gen->parsed()) return facekit::cli::run_gen(cfg);
    if (preprocess->parsed()) return facekit::cli::run_preprocess(cfg);
    if (train->parsed()) return facekit::cli::run_train(cfg);
    if (evalc->parsed()) return facekit::cli::run_eval(cfg);
    if (ood->parsed()) return facekit::cli::run_ood(cfg);
    if (analyze->parsed()) return facekit::cli::run_analyze(cfg);
    if (report->parsed()) return facekit::cli::run_report(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
