// SPDX-License-Identifier: Apache-2.0
#include "engine/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "common/binary_io.hpp"
#include "common/error.hpp"

namespace mgc {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'M', 'G', 'C', 'C', 'K', 'P', 'T', '1'};

}  // namespace

void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  require(ck.velocity.empty() || ck.velocity.size() == ck.params.arrays.size(),
          ErrorKind::InvalidArgument, "checkpoint: velocity does not match params");
  json arrays = json::array();
  std::uint64_t offset = 0;
  auto add = [&](const std::string& name, const char* kind, const std::vector<int>& shape,
                 std::size_t count) {
    arrays.push_back({{"name", name}, {"kind", kind}, {"shape", shape}, {"offset", offset},
                      {"count", count}});
    offset += count;
  };
  for (const auto& a : ck.params.arrays) add(a.name, a.trainable ? "param" : "buffer", a.shape, a.size());
  for (std::size_t i = 0; i < ck.velocity.size(); ++i) {
    if (!ck.params.arrays[i].trainable) continue;
    add("velocity/" + ck.params.arrays[i].name, "velocity", ck.params.arrays[i].shape,
        ck.velocity[i].size());
  }
  const json header = {
      {"format", "mgc-checkpoint"},
      {"version", kCheckpointVersion},
      {"config", ck.config},
      {"config_hash", ck.config_hash},
      {"seed", ck.seed},
      {"epoch", ck.epoch},
      {"global_step", ck.global_step},
      {"best_val_top1", ck.best_val_top1},
      {"best_epoch", ck.best_epoch},
      {"in_channels", ck.in_channels},
      {"n_classes", ck.n_classes},
      {"arrays", arrays},
  };
  const auto text = header.dump();

  // Write to a sibling temp file first so an interrupted write never leaves a
  // truncated checkpoint behind.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    binio::write_pod<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& a : ck.params.arrays) binio::write_f32(out, a.values);
    for (std::size_t i = 0; i < ck.velocity.size(); ++i) {
      if (ck.params.arrays[i].trainable) binio::write_f32(out, ck.velocity[i]);
    }
    require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.gcount() == 8 && std::memcmp(magic, kMagic, 8) == 0, ErrorKind::Parse,
          path.string() + ": not a checkpoint");
  const auto len = binio::read_pod<std::uint64_t>(in, "checkpoint header length");
  require(len < (1ULL << 32), ErrorKind::Parse, "checkpoint header too large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  require(static_cast<std::uint64_t>(in.gcount()) == len, ErrorKind::Parse, "truncated checkpoint header");

  Checkpoint ck;
  json h;
  try {
    h = json::parse(text);
    require(h.at("format") == "mgc-checkpoint", ErrorKind::Parse, "checkpoint: bad format tag");
    require(h.at("version").get<int>() == kCheckpointVersion, ErrorKind::Parse,
            "checkpoint: unsupported version");
    ck.config = h.at("config");
    ck.config_hash = h.at("config_hash").get<std::string>();
    ck.seed = h.at("seed").get<std::uint64_t>();
    ck.epoch = h.at("epoch").get<int>();
    ck.global_step = h.at("global_step").get<std::int64_t>();
    ck.best_val_top1 = h.at("best_val_top1").get<double>();
    ck.best_epoch = h.at("best_epoch").get<int>();
    ck.in_channels = h.at("in_channels").get<int>();
    ck.n_classes = h.at("n_classes").get<int>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, "checkpoint header: " + std::string(e.what()));
  }

  std::vector<std::pair<std::string, std::vector<float>>> velocities;
  for (const auto& a : h.at("arrays")) {
    const auto kind = a.at("kind").get<std::string>();
    const auto count = a.at("count").get<std::size_t>();
    std::vector<float> values(count);
    binio::read_f32(in, values, "checkpoint array " + a.at("name").get<std::string>());
    if (kind == "velocity") {
      velocities.emplace_back(a.at("name").get<std::string>().substr(9), std::move(values));
    } else {
      ck.params.arrays.push_back({a.at("name").get<std::string>(),
                                  a.at("shape").get<std::vector<int>>(), std::move(values),
                                  kind == "param"});
    }
  }
  if (!velocities.empty()) {
    ck.velocity.resize(ck.params.arrays.size());
    for (auto& [name, v] : velocities) ck.velocity[ck.params.index_of(name)] = std::move(v);
  }
  return ck;
}

}  // namespace mgc
