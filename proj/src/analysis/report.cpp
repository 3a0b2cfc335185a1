#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "facekit/analysis/analysis.hpp"
#include "facekit/core/error.hpp"
#include "facekit/core/hash.hpp"
#include "facekit/core/rng.hpp"

namespace facekit::analysis {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Per-row scalar over off-diagonal entries: mean or median.
std::vector<double> reduce_rows(const Tensor& m, const std::string& kind) {
  const std::size_t k = m.rank() == 2 ? m.dim(0) : 0;
  std::vector<double> out(k, 0.0);
  if (k < 2) return out;
  std::vector<double> row;
  for (std::size_t i = 0; i < k; ++i) {
    row.clear();
    for (std::size_t j = 0; j < k; ++j)
      if (j != i) row.push_back(m.at(i, j));
    if (kind == "row_mean") {
      double s = 0.0;
      for (double v : row) s += v;
      out[i] = s / static_cast<double>(row.size());
    } else {
      std::sort(row.begin(), row.end());
      const std::size_t mid = row.size() / 2;
      out[i] = row.size() % 2 == 1 ? row[mid]
                                   : (row[mid - 1] + row[mid]) / 2.0;
    }
  }
  return out;
}

void write_embedding_csv(const std::string& path, const Tensor& emb,
                         const std::vector<std::string>& ids,
                         const std::vector<double>& euclid_color,
                         const std::vector<double>& cosine_color) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_embedding_csv: cannot open " + path);
  const std::size_t dims = emb.dim(1);
  out << (dims == 3 ? "id,x,y,z,euclid_color,cosine_color"
                    : "id,x,y,euclid_color,cosine_color")
      << "\n";
  for (std::size_t i = 0; i < emb.dim(0); ++i) {
    out << ids[i];
    for (std::size_t k = 0; k < dims; ++k) out << "," << fmt_double(emb.at(i, k));
    out << "," << fmt_double(euclid_color[i]) << ",";
    if (!std::isnan(cosine_color[i])) out << fmt_double(cosine_color[i]);
    out << "\n";
  }
  if (!out) throw IoError("write_embedding_csv: write failed for " + path);
}

}  // namespace

void write_matrix_csv(const std::string& path, const Tensor& m,
                      const std::vector<std::string>& ids) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_matrix_csv: cannot open " + path);
  out << "id";
  for (const std::string& id : ids) out << "," << id;
  out << "\n";
  const std::size_t n = m.rank() == 2 ? m.dim(0) : 0;
  for (std::size_t i = 0; i < n; ++i) {
    out << ids[i];
    for (std::size_t j = 0; j < n; ++j) out << "," << fmt_double(m.at(i, j));
    out << "\n";
  }
  if (!out) throw IoError("write_matrix_csv: write failed for " + path);
}

void write_matrix_binary(const std::string& path, const Tensor& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_matrix_binary: cannot open " + path);
  out.write("FKMAT1\n", 7);
  const std::uint64_t rows = m.rank() == 2 ? m.dim(0) : 0;
  const std::uint64_t cols = m.rank() == 2 ? m.dim(1) : 0;
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!out) throw IoError("write_matrix_binary: write failed for " + path);
}

void write_label_distribution_json(const std::string& path,
                                   const LabelDistribution& dist,
                                   const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_label_distribution_json: cannot open " + path);
  nlohmann::ordered_json j;
  auto tasks = nlohmann::ordered_json::object();
  for (const auto& [task, td] : dist.tasks) {
    nlohmann::ordered_json tj;
    tj["labeled"] = td.labeled;
    tj["counts"] = td.counts;
    tj["fractions"] = td.fractions;
    if (td.labeled > 0) {
      tj["dominant"] = td.dominant;
      tj["dominant_fraction"] = td.dominant_fraction;
      tj["dominance_flag"] = td.dominance_flag;
    }
    tasks[data::task_name(task)] = std::move(tj);
  }
  j["tasks"] = std::move(tasks);
  j["config_hash"] = config_hash;
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write_label_distribution_json: write failed for " +
                          path);
}

AnalysisReport build_report(data::Dataset& d,
                            const preprocess::PipelineConfig& pipe,
                            const AnalysisConfig& cfg,
                            const std::string& out_dir,
                            const std::string& config_hash) {
  cfg.validate();
  check(d.size() >= 2, "build_report: need at least 2 samples");

  // Equal portions: at most subsample_cap samples per source, chosen by a
  // per-source seeded draw, analyzed in original dataset order.
  std::map<std::string, std::vector<std::size_t>> by_source;
  for (std::size_t i = 0; i < d.size(); ++i)
    by_source[d.samples[i].source].push_back(i);
  std::vector<std::size_t> selected;
  for (auto& [src, idx] : by_source) {
    if (idx.size() > cfg.subsample_cap) {
      Rng r(Rng::mix(cfg.seed, fnv1a64(src)));
      r.shuffle(idx);
      idx.resize(cfg.subsample_cap);
    }
    selected.insert(selected.end(), idx.begin(), idx.end());
  }
  std::sort(selected.begin(), selected.end());

  data::Dataset sub;
  sub.name = d.name;
  sub.schema = d.schema;
  sub.samples.reserve(selected.size());
  for (std::size_t i : selected) sub.samples.push_back(d.samples[i]);

  AnalysisReport rep;
  rep.config_hash = config_hash;
  for (const data::Sample& s : sub.samples) rep.sim.ids.push_back(s.image_id);

  const Tensor m = flatten_images(sub, pipe);
  EuclideanResult er = euclidean_similarity(m);
  CosineResult cr = cosine_similarity(m);
  if (cfg.normalization == "zscore") {
    zscore_offdiag(er.matrix);
    zscore_offdiag(cr.matrix);
  }
  rep.sim.euclidean_degenerate = er.degenerate;
  rep.sim.euclidean = std::move(er.matrix);
  rep.sim.cosine_kept = std::move(cr.kept);
  rep.sim.cosine = std::move(cr.matrix);

  const std::size_t n = sub.size();
  rep.sim.euclid_color = reduce_rows(rep.sim.euclidean, cfg.color_reduction);
  const std::vector<double> cc = reduce_rows(rep.sim.cosine, cfg.color_reduction);
  rep.sim.cosine_color.assign(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < rep.sim.cosine_kept.size(); ++r)
    rep.sim.cosine_color[rep.sim.cosine_kept[r]] = cc[r];

  if (static_cast<double>(n) > 3.0 * cfg.perplexity) {
    rep.sim.embedding2 = tsne_embed(m, 2, cfg.perplexity, cfg.seed,
                                    cfg.tsne_max_iter, cfg.tsne_learning_rate);
    rep.sim.embedding3 = tsne_embed(m, 3, cfg.perplexity, cfg.seed,
                                    cfg.tsne_max_iter, cfg.tsne_learning_rate);
  } else {
    rep.sim.tsne_skipped = true;
    rep.sim.tsne_notice =
        "t-SNE skipped: requires N > 3*perplexity (N=" + std::to_string(n) +
        ", perplexity=" + std::to_string(cfg.perplexity) + ")";
  }

  rep.labels = label_distribution(d);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> cos_ids;
    for (std::size_t r : rep.sim.cosine_kept)
      cos_ids.push_back(rep.sim.ids[r]);
    write_matrix_csv(out_dir + "/similarity_euclidean.csv", rep.sim.euclidean,
                     rep.sim.ids);
    write_matrix_binary(out_dir + "/similarity_euclidean.bin",
                        rep.sim.euclidean);
    write_matrix_csv(out_dir + "/similarity_cosine.csv", rep.sim.cosine,
                     cos_ids);
    write_matrix_binary(out_dir + "/similarity_cosine.bin", rep.sim.cosine);
    if (!rep.sim.tsne_skipped) {
      write_embedding_csv(out_dir + "/embedding_2d.csv", rep.sim.embedding2,
                          rep.sim.ids, rep.sim.euclid_color,
                          rep.sim.cosine_color);
      write_embedding_csv(out_dir + "/embedding_3d.csv", rep.sim.embedding3,
                          rep.sim.ids, rep.sim.euclid_color,
                          rep.sim.cosine_color);
    }
    write_label_distribution_json(out_dir + "/label_distribution.json",
                                  rep.labels, config_hash);

    nlohmann::ordered_json s;
    s["n_analyzed"] = n;
    s["n_total"] = d.size();
    s["subsample_cap"] = cfg.subsample_cap;
    s["normalization"] = cfg.normalization;
    s["color_reduction"] = cfg.color_reduction;
    s["perplexity"] = cfg.perplexity;
    s["seed"] = cfg.seed;
    s["euclidean_degenerate"] = rep.sim.euclidean_degenerate;
    s["cosine_excluded"] = n - rep.sim.cosine_kept.size();
    s["tsne_skipped"] = rep.sim.tsne_skipped;
    if (rep.sim.tsne_skipped) s["tsne_notice"] = rep.sim.tsne_notice;
    s["config_hash"] = config_hash;
    std::ofstream sf(out_dir + "/analysis_summary.json", std::ios::binary);
    if (!sf) throw IoError("build_report: cannot open summary json");
    sf << s.dump(2) << "\n";
    if (!sf) throw IoError("build_report: summary write failed");
  }
  return rep;
}

}  // namespace facekit::analysis
