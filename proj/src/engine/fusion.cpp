// SPDX-License-Identifier: Apache-2.0
#include "engine/fusion.hpp"

#include <cmath>
#include <string>

#include "common/error.hpp"

namespace mgc {

ScoreKind parse_score_kind(std::string_view name) {
  if (name == "probabilities") return ScoreKind::Probabilities;
  if (name == "logits") return ScoreKind::Logits;
  fail(ErrorKind::InvalidArgument, "unknown score kind '" + std::string(name) + "'");
}

std::string_view score_kind_name(ScoreKind k) {
  return k == ScoreKind::Probabilities ? "probabilities" : "logits";
}

void FusionConfig::validate() const {
  require(std::isfinite(weight_joint) && std::isfinite(weight_limb) && weight_joint >= 0.0 &&
              weight_limb >= 0.0,
          ErrorKind::Validation, "fusion: weights must be finite and >= 0");
  require(weight_joint > 0.0 || weight_limb > 0.0, ErrorKind::Validation,
          "fusion: weights must not both be 0");
}

std::vector<float> fuse_scores(std::span<const float> joint, std::span<const float> limb,
                               const FusionConfig& fusion) {
  fusion.validate();
  require(joint.size() == limb.size(), ErrorKind::ShapeMismatch,
          "fuse_scores: score matrices differ in size");
  std::vector<float> out(joint.size());
  for (std::size_t i = 0; i < joint.size(); ++i) {
    out[i] = static_cast<float>(fusion.weight_joint * joint[i] + fusion.weight_limb * limb[i]);
  }
  return out;
}

}  // namespace mgc
