// SPDX-License-Identifier: Apache-2.0
#include "pose_io/manifest.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "common/error.hpp"
#include "common/hash.hpp"

namespace mgc {

using nlohmann::json;

std::uint64_t LabelVocabulary::fingerprint() const {
  Fnv1a h;
  for (const auto& t : id_to_text) {
    h.update(t);
    h.update("\n");
  }
  return h.digest();
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  fail(ErrorKind::InvalidArgument, "unknown split '" + std::string(name) + "'");
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

const std::vector<std::string>& SplitAssignment::subjects(Split s) const {
  switch (s) {
    case Split::Train: return train;
    case Split::Val: return val;
    case Split::Test: return test;
  }
  return train;
}

void validate_clip(const SkeletonClip& clip, const KeypointLayout& layout, int n_classes) {
  const auto where = "clip '" + clip.clip_id + "': ";
  require(!clip.clip_id.empty(), ErrorKind::Validation, "clip with empty clip_id");
  require(clip.label_id >= 0 && clip.label_id < n_classes, ErrorKind::Validation,
          where + "label_id " + std::to_string(clip.label_id) +
              " out of range (N=" + std::to_string(n_classes) + ")");
  require(clip.num_frames >= 1, ErrorKind::Validation, where + "T must be >= 1");
  require(clip.num_joints == layout.joint_count(), ErrorKind::Validation,
          where + "K=" + std::to_string(clip.num_joints) + " does not match layout K=" +
              std::to_string(layout.joint_count()));
  require(clip.keypoints.size() ==
              static_cast<std::size_t>(clip.num_frames) * clip.num_joints,
          ErrorKind::Validation, where + "frames length does not equal T*K*3");
  for (std::size_t i = 0; i < clip.keypoints.size(); ++i) {
    const auto& kp = clip.keypoints[i];
    require(std::isfinite(kp.x) && std::isfinite(kp.y), ErrorKind::Validation,
            where + "non-finite coordinate at keypoint " + std::to_string(i));
    require(kp.conf >= 0.0 && kp.conf <= 1.0, ErrorKind::Validation,
            where + "confidence outside [0,1] at keypoint " + std::to_string(i));
  }
}

void DatasetManifest::validate() const {
  layout.validate();
  require(vocab.size() >= 1, ErrorKind::Validation, "vocab is empty");
  for (int i = 0; i < vocab.size(); ++i) {
    require(!vocab.id_to_text[i].empty(), ErrorKind::Validation,
            "vocab entry " + std::to_string(i) + " is empty");
  }

  std::map<std::string, Split> subject_split;
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    for (const auto& subj : splits.subjects(s)) {
      auto [it, inserted] = subject_split.emplace(subj, s);
      if (!inserted) {
        fail(ErrorKind::Validation,
             "subject in two splits: '" + subj + "' (" +
                 std::string(split_name(it->second)) + ", " +
                 std::string(split_name(s)) + ")");
      }
    }
  }

  std::set<std::string> ids;
  for (const auto& clip : clips) {
    validate_clip(clip, layout, vocab.size());
    require(ids.insert(clip.clip_id).second, ErrorKind::Validation,
            "clip '" + clip.clip_id + "': duplicate clip_id");
    require(subject_split.count(clip.subject_id) == 1, ErrorKind::Validation,
            "clip '" + clip.clip_id + "': subject '" + clip.subject_id +
                "' is not assigned to any split");
  }
}

std::vector<std::size_t> DatasetManifest::clip_indices(Split s) const {
  const auto& subs = splits.subjects(s);
  const std::set<std::string> wanted(subs.begin(), subs.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (wanted.count(clips[i].subject_id)) out.push_back(i);
  }
  return out;
}

namespace {

KeypointLayout layout_from_json(const json& j) {
  if (j.is_string()) return builtin_layout(j.get<std::string>());
  KeypointLayout l;
  l.name = j.at("name").get<std::string>();
  l.joint_names = j.at("joint_names").get<std::vector<std::string>>();
  for (const auto& p : j.at("limb_pairs")) {
    require(p.is_array() && p.size() == 2, ErrorKind::Parse,
            "limb_pairs entries must be [a, b]");
    l.limb_pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
  }
  return l;
}

json layout_to_json(const KeypointLayout& l) {
  json pairs = json::array();
  for (const auto& [a, b] : l.limb_pairs) pairs.push_back({a, b});
  return {{"name", l.name}, {"joint_names", l.joint_names}, {"limb_pairs", pairs}};
}

SkeletonClip clip_from_json(const json& j) {
  SkeletonClip c;
  c.clip_id = j.at("clip_id").get<std::string>();
  c.subject_id = j.at("subject_id").get<std::string>();
  c.label_id = j.at("label_id").get<int>();
  c.num_frames = j.at("T").get<int>();
  c.num_joints = j.at("K").get<int>();
  const auto& frames = j.at("frames");
  require(frames.is_array(), ErrorKind::Parse,
          "clip '" + c.clip_id + "': frames must be an array");
  const auto expected = static_cast<std::size_t>(std::max(c.num_frames, 0)) *
                        static_cast<std::size_t>(std::max(c.num_joints, 0)) * 3;
  require(frames.size() == expected, ErrorKind::Validation,
          "clip '" + c.clip_id + "': frames has " + std::to_string(frames.size()) +
              " numbers, expected T*K*3 = " + std::to_string(expected));
  c.keypoints.resize(expected / 3);
  for (std::size_t i = 0; i < c.keypoints.size(); ++i) {
    c.keypoints[i] = {frames[3 * i].get<double>(), frames[3 * i + 1].get<double>(),
                      frames[3 * i + 2].get<double>()};
  }
  return c;
}

json clip_to_json(const SkeletonClip& c) {
  json frames = json::array();
  for (const auto& kp : c.keypoints) {
    frames.push_back(kp.x);
    frames.push_back(kp.y);
    frames.push_back(kp.conf);
  }
  return {{"clip_id", c.clip_id}, {"subject_id", c.subject_id},
          {"label_id", c.label_id}, {"T", c.num_frames},
          {"K", c.num_joints},      {"frames", std::move(frames)}};
}

}  // namespace

DatasetManifest parse_manifest(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("manifest: ") + e.what());
  }
  DatasetManifest m;
  try {
    require(doc.is_object(), ErrorKind::Parse, "manifest: top level must be an object");
    const int schema = doc.at("schema").get<int>();
    require(schema == kManifestSchema, ErrorKind::Parse,
            "manifest: unsupported schema " + std::to_string(schema));
    m.layout = layout_from_json(doc.at("layout"));
    m.vocab.id_to_text = doc.at("vocab").get<std::vector<std::string>>();
    const auto& sp = doc.at("splits");
    m.splits.train = sp.value("train", std::vector<std::string>{});
    m.splits.val = sp.value("val", std::vector<std::string>{});
    m.splits.test = sp.value("test", std::vector<std::string>{});
    for (const auto& c : doc.at("clips")) m.clips.push_back(clip_from_json(c));
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

std::string serialize_manifest(const DatasetManifest& m) {
  json clips = json::array();
  for (const auto& c : m.clips) clips.push_back(clip_to_json(c));
  const json doc = {
      {"schema", kManifestSchema},
      {"layout", layout_to_json(m.layout)},
      {"vocab", m.vocab.id_to_text},
      {"splits", {{"train", m.splits.train}, {"val", m.splits.val}, {"test", m.splits.test}}},
      {"clips", std::move(clips)},
  };
  return doc.dump(1) + "\n";
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write manifest " + path.string());
  out << serialize_manifest(m);
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

}  // namespace mgc
