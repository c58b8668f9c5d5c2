// SPDX-License-Identifier: Apache-2.0
#include "engine/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "common/error.hpp"
#include "common/hash.hpp"

namespace mgc {

using nlohmann::json;

void RunConfig::validate() const {
  volume.validate();
  optimizer.validate();
  fusion.validate();
  require(objective.alpha >= 0.0, ErrorKind::Validation, "objective: alpha must be >= 0");
  require(evaluation.num_clips >= 1, ErrorKind::Validation, "evaluation: num_clips must be >= 1");
  require(runtime.workers >= 0, ErrorKind::Validation, "runtime: workers must be >= 0");
  require(data.embedding_dim >= 1, ErrorKind::Validation, "data: embedding_dim must be >= 1");
  require(data.allow_dim_override || data.embedding_dim == 300, ErrorKind::Validation,
          "data: embedding_dim must be 300 unless allow_dim_override is set");
  require(data.embedding_dim == network.sem_dim, ErrorKind::Validation,
          "data.embedding_dim must equal network.sem_dim");
  parse_split(data.train_split);
  parse_split(data.val_split);
  parse_split(data.eval_split);
  // Validate the network shape with placeholder dataset-derived sizes.
  auto net = network;
  net.in_channels = 1;
  net.n_classes = 2;
  net.validate();
}

RunConfig preset_config(std::string_view name) {
  RunConfig c;
  if (name == "full") {
    c.volume = VolumeConfig{};  // 56 x 56, 48 frames, sigma 0.6
    c.optimizer = OptimizerConfig{};
    return c;
  }
  if (name == "desk") {
    c.volume.height = 32;
    c.volume.width = 32;
    c.volume.frames = 16;
    c.optimizer.batch_size = 8;
    c.optimizer.epochs = 30;
    c.network.stage_spatial_strides = {2, 2, 2};
    c.objective.emb_loss_reduction = EmbReduction::Mean;
    c.network.norm = nn::NormKind::Group;
    return c;
  }
  fail(ErrorKind::InvalidArgument, "unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() { return {"desk", "full"}; }

json config_to_json(const RunConfig& c) {
  const auto& n = c.network;
  return {
      {"seed", c.seed},
      {"data",
       {{"manifest", c.data.manifest},
        {"embeddings", c.data.embeddings},
        {"embedding_dim", c.data.embedding_dim},
        {"allow_dim_override", c.data.allow_dim_override},
        {"train_split", c.data.train_split},
        {"val_split", c.data.val_split},
        {"eval_split", c.data.eval_split}}},
      {"volume",
       {{"height", c.volume.height},
        {"width", c.volume.width},
        {"frames", c.volume.frames},
        {"sigma", c.volume.sigma},
        {"modality", modality_name(c.volume.modality)},
        {"crop_padding", c.volume.crop_padding}}},
      {"network",
       {{"stem_width", n.stem_width},
        {"stem_kernel", n.stem_kernel},
        {"stage_widths", n.stage_widths},
        {"stage_blocks", n.stage_blocks},
        {"stage_spatial_strides", n.stage_spatial_strides},
        {"stage_temporal_kernels", n.stage_temporal_kernels},
        {"bottleneck_ratio", n.bottleneck_ratio},
        {"embed_dim", n.embed_dim},
        {"sem_dim", n.sem_dim},
        {"norm", nn::norm_name(n.norm)},
        {"norm_groups", n.norm_groups},
        {"norm_momentum", n.norm_momentum},
        {"norm_eps", n.norm_eps},
        {"allow_dim_override", n.allow_dim_override}}},
      {"objective",
       {{"alpha", c.objective.alpha},
        {"emb_loss_reduction", emb_reduction_name(c.objective.emb_loss_reduction)}}},
      {"optimizer",
       {{"base_lr", c.optimizer.base_lr},
        {"momentum", c.optimizer.momentum},
        {"weight_decay", c.optimizer.weight_decay},
        {"batch_size", c.optimizer.batch_size},
        {"epochs", c.optimizer.epochs}}},
      {"fusion",
       {{"weight_joint", c.fusion.weight_joint},
        {"weight_limb", c.fusion.weight_limb},
        {"scores", score_kind_name(c.fusion.scores)}}},
      {"evaluation", {{"num_clips", c.evaluation.num_clips}}},
      {"runtime", {{"workers", c.runtime.workers}}},
  };
}

namespace {

void merge_checked(json& base, const json& patch, const std::string& path) {
  require(patch.is_object(), ErrorKind::Validation,
          "config: '" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const auto key = path.empty() ? it.key() : path + "." + it.key();
    require(base.contains(it.key()), ErrorKind::Validation, "config: unknown key '" + key + "'");
    auto& slot = base[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

std::string resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty() || base.empty()) return p;
  std::filesystem::path fp(p);
  if (fp.is_absolute()) return fp.lexically_normal().string();
  return (base / fp).lexically_normal().string();
}

RunConfig parse_merged(const json& j) {
  RunConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto& d = j.at("data");
  c.data.manifest = d.at("manifest").get<std::string>();
  c.data.embeddings = d.at("embeddings").get<std::string>();
  c.data.embedding_dim = d.at("embedding_dim").get<int>();
  c.data.allow_dim_override = d.at("allow_dim_override").get<bool>();
  c.data.train_split = d.at("train_split").get<std::string>();
  c.data.val_split = d.at("val_split").get<std::string>();
  c.data.eval_split = d.at("eval_split").get<std::string>();

  const auto& v = j.at("volume");
  c.volume.height = v.at("height").get<int>();
  c.volume.width = v.at("width").get<int>();
  c.volume.frames = v.at("frames").get<int>();
  c.volume.sigma = v.at("sigma").get<double>();
  c.volume.modality = parse_modality(v.at("modality").get<std::string>());
  c.volume.crop_padding = v.at("crop_padding").get<double>();

  const auto& n = j.at("network");
  auto& net = c.network;
  net.stem_width = n.at("stem_width").get<int>();
  net.stem_kernel = n.at("stem_kernel").get<std::array<int, 3>>();
  net.stage_widths = n.at("stage_widths").get<std::vector<int>>();
  net.stage_blocks = n.at("stage_blocks").get<std::vector<int>>();
  net.stage_spatial_strides = n.at("stage_spatial_strides").get<std::vector<int>>();
  net.stage_temporal_kernels = n.at("stage_temporal_kernels").get<std::vector<int>>();
  net.bottleneck_ratio = n.at("bottleneck_ratio").get<int>();
  net.embed_dim = n.at("embed_dim").get<int>();
  net.sem_dim = n.at("sem_dim").get<int>();
  net.norm = nn::parse_norm(n.at("norm").get<std::string>());
  net.norm_groups = n.at("norm_groups").get<int>();
  net.norm_momentum = n.at("norm_momentum").get<double>();
  net.norm_eps = n.at("norm_eps").get<double>();
  net.allow_dim_override = n.at("allow_dim_override").get<bool>();

  const auto& o = j.at("objective");
  c.objective.alpha = o.at("alpha").get<double>();
  c.objective.emb_loss_reduction = parse_emb_reduction(o.at("emb_loss_reduction").get<std::string>());

  const auto& op = j.at("optimizer");
  c.optimizer.base_lr = op.at("base_lr").get<double>();
  c.optimizer.momentum = op.at("momentum").get<double>();
  c.optimizer.weight_decay = op.at("weight_decay").get<double>();
  c.optimizer.batch_size = op.at("batch_size").get<int>();
  c.optimizer.epochs = op.at("epochs").get<int>();

  const auto& f = j.at("fusion");
  c.fusion.weight_joint = f.at("weight_joint").get<double>();
  c.fusion.weight_limb = f.at("weight_limb").get<double>();
  c.fusion.scores = parse_score_kind(f.at("scores").get<std::string>());

  c.evaluation.num_clips = j.at("evaluation").at("num_clips").get<int>();
  c.runtime.workers = j.at("runtime").at("workers").get<int>();
  return c;
}

}  // namespace

RunConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  require(doc.is_object(), ErrorKind::Parse, "config: top level must be an object");
  json patch = doc;
  std::string preset = "desk";
  if (patch.contains("preset")) {
    require(patch["preset"].is_string(), ErrorKind::Validation, "config: preset must be a string");
    preset = patch["preset"].get<std::string>();
    patch.erase("preset");
  }
  json merged = config_to_json(preset_config(preset));
  merge_checked(merged, patch, "");
  RunConfig c;
  try {
    c = parse_merged(merged);
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("config: ") + e.what());
  }
  c.data.manifest = resolve(c.data.manifest, base_dir);
  c.data.embeddings = resolve(c.data.embeddings, base_dir);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  json doc;
  try {
    doc = json::parse(ss.str());
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, "config " + path.string() + ": " + e.what());
  }
  auto base = std::filesystem::absolute(path).parent_path();
  return config_from_json(doc, base);
}

void write_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << config_to_json(cfg).dump(2) << "\n";
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

RunConfig apply_override(const RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string_view::npos && eq > 0, ErrorKind::Validation,
          "override '" + std::string(assignment) + "' must look like section.key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  // Build {"a": {"b": value}} from "a.b" and merge with the usual checks.
  json patch = value;
  std::size_t end = key.size();
  while (true) {
    const auto dot = key.rfind('.', end - 1);
    const auto part = key.substr(dot == std::string::npos ? 0 : dot + 1,
                                 end - (dot == std::string::npos ? 0 : dot + 1));
    require(!part.empty(), ErrorKind::Validation, "override: bad key '" + key + "'");
    patch = json{{part, patch}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  json merged = config_to_json(cfg);
  merge_checked(merged, patch, "");
  RunConfig out;
  try {
    out = parse_merged(merged);
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, "override '" + key + "': " + e.what());
  }
  out.validate();
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  auto j = config_to_json(cfg);
  j.erase("runtime");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

}  // namespace mgc
