#include "facekit/heads/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "facekit/core/error.hpp"

using json = nlohmann::json;

namespace facekit::heads {

namespace {

constexpr char kMagic[8] = {'F', 'K', 'C', 'K', 'P', 'T', '1', '\n'};

json spec_to_json(const backbone::BackboneSpec& s) {
  return json{{"kind", s.kind},
              {"input_h", s.input_h},
              {"input_w", s.input_w},
              {"feature_dim", s.feature_dim},
              {"num_blocks", s.num_blocks},
              {"patch_size", s.patch_size},
              {"num_heads", s.num_heads},
              {"mlp_hidden", s.mlp_hidden},
              {"cls_token", s.cls_token},
              {"init_seed", s.init_seed}};
}

backbone::BackboneSpec spec_from_json(const json& j) {
  backbone::BackboneSpec s;
  s.kind = j.at("kind").get<std::string>();
  s.input_h = j.at("input_h").get<int>();
  s.input_w = j.at("input_w").get<int>();
  s.feature_dim = j.at("feature_dim").get<int>();
  s.num_blocks = j.at("num_blocks").get<int>();
  s.patch_size = j.at("patch_size").get<int>();
  s.num_heads = j.at("num_heads").get<int>();
  s.mlp_hidden = j.at("mlp_hidden").get<int>();
  s.cls_token = j.at("cls_token").get<bool>();
  s.init_seed = j.at("init_seed").get<std::uint64_t>();
  return s;
}

void write_u64_le(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64_le(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const MultiTaskModel& model,
                     const std::string& config_hash) {
  const auto params = model.const_params();

  json header;
  header["format_version"] = 1;
  header["backbone"] = spec_to_json(model.bb().spec());
  header["head_config"] = {{"hidden_sizes", model.head_config().hidden_sizes},
                           {"dropout_rate", model.head_config().dropout_rate}};
  header["head_init_seed"] = model.head_init_seed();
  header["policy"] = backbone::policy_name(model.policy());
  header["config_hash"] = config_hash;

  json schema = json::object();
  for (const auto& [task, space] : model.schema().tasks)
    schema[data::task_name(task)] = space.categories;
  header["schema"] = schema;

  json mask = json::object();
  for (const auto& [block, trainable] : model.mask().backbone_blocks)
    mask[block] = trainable;
  header["mask"] = mask;

  json entries = json::array();
  std::size_t offset = 0;
  for (const backbone::Param* p : params) {
    entries.push_back({{"name", p->name},
                       {"block", p->block},
                       {"shape", p->value.shape()},
                       {"offset", offset}});
    offset += p->value.size();
  }
  header["params"] = entries;

  const std::string header_str = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u64_le(out, header_str.size());
  out.write(header_str.data(),
            static_cast<std::streamsize>(header_str.size()));
  for (const backbone::Param* p : params)
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  if (!out) throw IoError("short write on checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not a FKCKPT1 checkpoint: " + path);
  const std::uint64_t header_len = read_u64_le(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError("truncated checkpoint header: " + path);

  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::parse_error& e) {
    throw DataError("bad checkpoint header in " + path + ": " + e.what());
  }
  if (header.at("format_version").get<int>() != 1)
    throw DataError("unsupported checkpoint version in " + path);

  const backbone::BackboneSpec spec = spec_from_json(header.at("backbone"));
  HeadConfig head_cfg;
  head_cfg.hidden_sizes =
      header.at("head_config").at("hidden_sizes").get<std::vector<int>>();
  head_cfg.dropout_rate =
      header.at("head_config").at("dropout_rate").get<double>();

  data::LabelSchema schema;
  for (const auto& [name, cats] : header.at("schema").items()) {
    data::TaskLabelSpace space;
    space.categories = cats.get<std::vector<std::string>>();
    schema.tasks[data::task_from_name(name)] = space;
  }

  LoadedCheckpoint loaded;
  loaded.config_hash = header.at("config_hash").get<std::string>();
  loaded.model = std::make_unique<MultiTaskModel>(
      backbone::make_backbone(spec), schema, head_cfg,
      header.at("head_init_seed").get<std::uint64_t>());
  loaded.model->set_policy(
      backbone::policy_from_name(header.at("policy").get<std::string>()));

  const auto params = loaded.model->params();
  const json& entries = header.at("params");
  if (entries.size() != params.size())
    throw DataError("checkpoint parameter count mismatch in " + path);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& e = entries[i];
    if (e.at("name").get<std::string>() != params[i]->name)
      throw DataError("checkpoint parameter order mismatch at '" +
                      params[i]->name + "' in " + path);
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    if (shape != params[i]->value.shape())
      throw DataError("checkpoint shape mismatch for '" + params[i]->name +
                      "' in " + path);
    in.read(reinterpret_cast<char*>(params[i]->value.data()),
            static_cast<std::streamsize>(params[i]->value.size() *
                                         sizeof(double)));
  }
  if (!in) throw DataError("truncated checkpoint payload: " + path);
  return loaded;
}

}  // namespace facekit::heads
