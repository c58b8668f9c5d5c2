// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <map>
#include <set>

#include "pose_io/layout.hpp"
#include "pose_io/manifest.hpp"
#include "pose_io/synth.hpp"
#include "unit/helpers.hpp"

using namespace mgc;
using testutil::error_kind_of;
using testutil::error_message_of;

TEST_CASE("builtin layouts are valid") {
  for (const auto& name : builtin_layout_names()) {
    const auto l = builtin_layout(name);
    CHECK_NOTHROW(l.validate());
    CHECK(l.name == name);
  }
  CHECK(builtin_layout("openpose_upper22").joint_count() == 22);
  CHECK(builtin_layout("openpose_body25").joint_count() == 25);
  CHECK(builtin_layout("toy5").joint_count() == 5);
  CHECK(builtin_layout("toy5").limb_count() == 4);
  CHECK(error_kind_of([] { builtin_layout("nope"); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("layout validation") {
  KeypointLayout l{"x", {"a", "b", "c"}, {{0, 1}, {1, 2}}};
  CHECK_NOTHROW(l.validate());
  auto bad = l;
  bad.limb_pairs.push_back({2, 3});
  CHECK(error_kind_of([&] { bad.validate(); }) == ErrorKind::Validation);
  bad = l;
  bad.limb_pairs.push_back({1, 0});
  CHECK(error_kind_of([&] { bad.validate(); }) == ErrorKind::Validation);
  bad = l;
  bad.joint_names = {"a"};
  bad.limb_pairs.clear();
  CHECK(error_kind_of([&] { bad.validate(); }) == ErrorKind::Validation);
}

TEST_CASE("well-formed 2-clip manifest parses") {
  const std::string text = R"({
    "schema": 1,
    "layout": {"name": "pair", "joint_names": ["a", "b"], "limb_pairs": [[0, 1]]},
    "vocab": ["touching head", "non-MG"],
    "splits": {"train": ["s1"], "test": ["s2"]},
    "clips": [
      {"clip_id": "c1", "subject_id": "s1", "label_id": 0, "T": 1, "K": 2,
       "frames": [1, 2, 1.0, 3, 4, 0.5]},
      {"clip_id": "c2", "subject_id": "s2", "label_id": 1, "T": 2, "K": 2,
       "frames": [1, 2, 1, 3, 4, 1, 5, 6, 0, 7, 8, 1]}
    ]})";
  const auto m = parse_manifest(text);
  REQUIRE(m.clips.size() == 2);
  CHECK(m.clips[0].keypoints[1] == Keypoint{3, 4, 0.5});
  CHECK(m.clips[1].num_frames == 2);
  CHECK(m.vocab.size() == 2);
  CHECK(m.clip_indices(Split::Train) == std::vector<std::size_t>{0});
  CHECK(m.clip_indices(Split::Test) == std::vector<std::size_t>{1});
  CHECK(m.clip_indices(Split::Val).empty());
}

TEST_CASE("builtin layout name accepted in manifest") {
  auto m = testutil::toy_manifest();
  auto text = serialize_manifest(m);
  auto doc_pos = text.find("\"layout\"");
  REQUIRE(doc_pos != std::string::npos);
  const auto parsed = parse_manifest(text);
  CHECK(parsed.layout == builtin_layout("toy5"));
}

TEST_CASE("label_id == N names the clip") {
  auto m = testutil::toy_manifest();
  m.clips[1].label_id = 2;
  const auto msg = error_message_of([&] { m.validate(); });
  CHECK(msg.find("c2") != std::string::npos);
  CHECK(msg.find("label_id 2") != std::string::npos);
}

TEST_CASE("subject in two splits is rejected") {
  auto m = testutil::toy_manifest();
  m.splits.test.push_back("s1");
  const auto msg = error_message_of([&] { m.validate(); });
  CHECK(msg.find("subject in two splits") != std::string::npos);
  CHECK(msg.find("s1") != std::string::npos);
}

TEST_CASE("clip validation errors") {
  auto m = testutil::toy_manifest();
  SUBCASE("unassigned subject") {
    m.clips[0].subject_id = "ghost";
    CHECK(error_message_of([&] { m.validate(); }).find("not assigned") != std::string::npos);
  }
  SUBCASE("confidence above 1") {
    m.clips[0].keypoints[0].conf = 1.5;
    CHECK(error_kind_of([&] { m.validate(); }) == ErrorKind::Validation);
  }
  SUBCASE("non-finite coordinate") {
    m.clips[0].keypoints[0].x = std::numeric_limits<double>::infinity();
    CHECK(error_kind_of([&] { m.validate(); }) == ErrorKind::Validation);
  }
  SUBCASE("duplicate clip id") {
    m.clips[1].clip_id = "c1";
    CHECK(error_message_of([&] { m.validate(); }).find("duplicate") != std::string::npos);
  }
  SUBCASE("K mismatch") {
    m.clips[0].num_joints = 4;
    CHECK(error_kind_of([&] { m.validate(); }) == ErrorKind::Validation);
  }
}

TEST_CASE("manifest parse errors") {
  CHECK(error_kind_of([] { parse_manifest("{not json"); }) == ErrorKind::Parse);
  CHECK(error_kind_of([] { parse_manifest("[]"); }) == ErrorKind::Parse);
  CHECK(error_kind_of([] { parse_manifest(R"({"schema": 2})"); }) == ErrorKind::Parse);
  auto text = serialize_manifest(testutil::toy_manifest());
  const auto pos = text.find("\"T\": 3");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 6, "\"T\": 4");
  CHECK(error_message_of([&] { parse_manifest(text); }).find("T*K*3") != std::string::npos);
}

TEST_CASE("manifest round trip") {
  const auto m = synthesize_dataset(9, 3, builtin_layout("openpose_upper22"), 11);
  const auto text = serialize_manifest(m);
  const auto back = parse_manifest(text);
  CHECK(back == m);
  CHECK(serialize_manifest(back) == text);

  const auto dir = testutil::scratch("pose_io_roundtrip");
  write_manifest(m, dir / "m.json");
  CHECK(load_manifest(dir / "m.json") == m);
  CHECK(error_kind_of([&] { load_manifest(dir / "missing.json"); }) == ErrorKind::Io);
}

TEST_CASE("synth is deterministic per seed") {
  const auto layout = builtin_layout("openpose_upper22");
  const auto a = synthesize_dataset(8, 4, layout, 7);
  const auto b = synthesize_dataset(8, 4, layout, 7);
  CHECK(serialize_manifest(a) == serialize_manifest(b));
  const auto c = synthesize_dataset(8, 4, layout, 8);
  CHECK(serialize_manifest(a) != serialize_manifest(c));
}

TEST_CASE("synth covers every class and keeps splits disjoint") {
  for (std::uint64_t seed : {0ULL, 1ULL, 7ULL, 12345ULL}) {
    for (const auto& name : builtin_layout_names()) {
      const auto m = synthesize_dataset(8, 4, builtin_layout(name), seed);
      CHECK_NOTHROW(m.validate());
      std::map<int, int> counts;
      for (const auto& c : m.clips) counts[c.label_id]++;
      CHECK(counts.size() == 4);
      for (const auto& [label, n] : counts) CHECK(n >= 1);

      std::set<std::string> seen;
      std::size_t total = 0;
      for (Split s : {Split::Train, Split::Val, Split::Test}) {
        for (const auto& subj : m.splits.subjects(s)) seen.insert(subj);
        total += m.splits.subjects(s).size();
      }
      CHECK(seen.size() == total);
    }
  }
}

TEST_CASE("synth split rule") {
  const auto layout = builtin_layout("toy5");
  auto m = synthesize_dataset(12, 4, layout, 3);
  CHECK(m.splits.train.size() == 1);
  CHECK(m.splits.val.size() == 1);
  CHECK(m.splits.test.size() == 1);
  SynthOptions all_train;
  all_train.holdout = false;
  m = synthesize_dataset(8, 4, layout, 3, all_train);
  CHECK(m.clip_indices(Split::Train).size() == 8);
  CHECK(m.splits.val.empty());
  CHECK(m.splits.test.empty());
}

TEST_CASE("synth rejects fewer clips than classes") {
  CHECK(error_kind_of([] { synthesize_dataset(4, 8, builtin_layout("toy5"), 0); }) ==
        ErrorKind::InvalidArgument);
}

TEST_CASE("synthetic label texts") {
  const auto t = synthetic_label_texts(40);
  CHECK(t.size() == 40);
  std::set<std::string> unique(t.begin(), t.end());
  CHECK(unique.size() == 40);
  for (const auto& s : t) CHECK(!s.empty());
}

TEST_CASE("split names") {
  CHECK(parse_split("train") == Split::Train);
  CHECK(parse_split("val") == Split::Val);
  CHECK(parse_split("test") == Split::Test);
  CHECK(split_name(Split::Val) == "val");
  CHECK(error_kind_of([] { parse_split("dev"); }) == ErrorKind::InvalidArgument);
}
