// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "common/rng.hpp"
#include "engine/checkpoint.hpp"
#include "engine/fusion.hpp"
#include "engine/metrics.hpp"
#include "engine/optimizer.hpp"
#include "engine/schedule.hpp"
#include "engine/score_file.hpp"
#include "engine/trainer.hpp"
#include "oracles/topk_oracle.hpp"
#include "unit/engine_fixture.hpp"

using namespace mgc;
using testutil::error_kind_of;

// ---- schedule ----

TEST_CASE("cosine schedule endpoints and midpoint") {
  OptimizerConfig opt;
  CHECK(std::abs(cosine_lr(0, opt) - 0.2 / 3.0) < 1e-12);
  CHECK(std::abs(cosine_lr(0, opt) - 0.066667) < 1e-6);
  CHECK(std::abs(cosine_lr(opt.epochs, opt)) < 1e-12);
  CHECK(std::abs(cosine_lr(opt.epochs / 2.0, opt) - opt.base_lr / 2) < 1e-12);
  opt.epochs = 7;
  CHECK(std::abs(cosine_lr(3.5, opt) - opt.base_lr / 2) < 1e-12);
  double prev = cosine_lr(0, opt);
  for (int i = 1; i <= 7000; ++i) {
    const double lr = cosine_lr(i / 1000.0, opt);
    CHECK(lr <= prev);
    CHECK(lr >= 0.0);
    prev = lr;
  }
  CHECK(error_kind_of([&] { cosine_lr(-0.1, opt); }) == ErrorKind::InvalidArgument);
  CHECK(error_kind_of([&] { cosine_lr(7.5, opt); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("optimizer config validation") {
  OptimizerConfig opt;
  CHECK_NOTHROW(opt.validate());
  opt.momentum = 0.0;
  opt.weight_decay = 0.0;
  CHECK_NOTHROW(opt.validate());
  opt.base_lr = 0.0;
  CHECK(error_kind_of([&] { opt.validate(); }) == ErrorKind::Validation);
  opt = {};
  opt.batch_size = 0;
  CHECK(error_kind_of([&] { opt.validate(); }) == ErrorKind::Validation);
}

// ---- metrics ----

TEST_CASE("top-k hand examples") {
  // Row 2 ties its true class (1) with class 0, which wins the tie.
  const std::vector<float> s{0.1f, 0.5f, 0.3f, 0.1f,   //
                             0.4f, 0.2f, 0.3f, 0.1f,   //
                             0.35f, 0.35f, 0.2f, 0.1f};
  const std::vector<int> y{1, 2, 1};
  CHECK(topk_accuracy(s, 4, y, 1) == doctest::Approx(1.0 / 3));
  CHECK(topk_accuracy(s, 4, y, 2) == doctest::Approx(3.0 / 3));
  CHECK(topk_accuracy(s, 4, y, 4) == 1.0);
  const std::vector<int> y2{1, 2, 0};
  CHECK(topk_accuracy(s, 4, y2, 1) == doctest::Approx(2.0 / 3));
}

TEST_CASE("top-k degenerate cases") {
  Rng rng(1);
  std::vector<float> s(20 * 6);
  for (auto& v : s) v = static_cast<float>(rng.uniform());
  std::vector<int> y(20);
  for (auto& v : y) v = static_cast<int>(rng.below(6));
  CHECK(topk_accuracy(s, 6, y, 6) == 1.0);
  std::vector<float> onehot(20 * 6, 0.0f);
  for (int i = 0; i < 20; ++i) onehot[i * 6 + y[i]] = 1.0f;
  CHECK(topk_accuracy(onehot, 6, y, 1) == 1.0);
  CHECK(error_kind_of([&] { topk_accuracy(s, 6, y, 7); }) == ErrorKind::InvalidArgument);
  CHECK(error_kind_of([&] { topk_accuracy(s, 5, y, 1); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("top-k agrees with ranking oracle, ties included") {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(9));
    const int m = 1 + static_cast<int>(rng.below(12));
    std::vector<float> s(static_cast<std::size_t>(n) * m);
    // Few distinct values so ties are common.
    for (auto& v : s) v = static_cast<float>(rng.below(4)) * 0.25f;
    std::vector<int> y(m);
    for (auto& v : y) v = static_cast<int>(rng.below(n));
    for (int k = 1; k <= n; ++k) CHECK(topk_accuracy(s, n, y, k) == oracle::topk(s, n, y, k));
  }
}

TEST_CASE("evaluation report") {
  const std::vector<float> s{0.9f, 0.1f, 0.0f,  //
                             0.2f, 0.7f, 0.1f,  //
                             0.6f, 0.3f, 0.1f,  //
                             0.1f, 0.1f, 0.8f};
  const std::vector<int> y{0, 1, 1, 0};
  const auto r = evaluate_scores(s, 3, y);
  CHECK(r.samples == 4);
  CHECK(r.top1 == doctest::Approx(0.5));
  CHECK(r.top5 == 1.0);
  CHECK(r.top1 <= r.top5);
  CHECK(r.per_class[0].value() == doctest::Approx(0.5));
  CHECK(r.per_class[1].value() == doctest::Approx(0.5));
  CHECK(!r.per_class[2].has_value());
  CHECK(r.confusion_at(0, 0) == 1);
  CHECK(r.confusion_at(0, 2) == 1);
  CHECK(r.confusion_at(1, 0) == 1);
  CHECK(r.confusion_at(1, 1) == 1);
  for (int t = 0; t < 3; ++t) {
    std::int64_t row = 0;
    for (int p = 0; p < 3; ++p) row += r.confusion_at(t, p);
    CHECK(row == std::count(y.begin(), y.end(), t));
  }
}

// ---- fusion ----

TEST_CASE("fusion by hand") {
  const std::vector<float> j{0.5f, 0.25f, 0.25f, 0.0f, 1.0f, 0.0f};
  const std::vector<float> l{0.0f, 0.5f, 0.5f, 0.25f, 0.25f, 0.5f};
  const auto f = fuse_scores(j, l, FusionConfig{});
  const std::vector<float> expect{1.0f, 2.0f, 2.0f, 0.75f, 2.75f, 1.5f};
  CHECK(f == expect);
}

TEST_CASE("fusion of identical inputs scales them") {
  Rng rng(3);
  std::vector<float> s(40);
  for (auto& v : s) v = static_cast<float>(rng.uniform());
  const auto f = fuse_scores(s, s, FusionConfig{});
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(f[i] == doctest::Approx(5.0 * s[i]));
  for (int r = 0; r < 8; ++r) {
    CHECK(oracle::argmax({f.data() + r * 5, 5}) == oracle::argmax({s.data() + r * 5, 5}));
  }
}

TEST_CASE("fusion argmax is scale invariant") {
  Rng rng(4);
  FusionConfig a{2, 3};
  FusionConfig b{4, 6};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<float> j(5 * 7);
    std::vector<float> l(5 * 7);
    for (auto& v : j) v = static_cast<float>(rng.uniform());
    for (auto& v : l) v = static_cast<float>(rng.uniform());
    const auto fa = fuse_scores(j, l, a);
    const auto fb = fuse_scores(j, l, b);
    for (int r = 0; r < 5; ++r) {
      CHECK(oracle::argmax({fa.data() + r * 7, 7}) == oracle::argmax({fb.data() + r * 7, 7}));
    }
  }
}

TEST_CASE("fusion validation") {
  std::vector<float> a(4);
  std::vector<float> b(5);
  CHECK(error_kind_of([&] { fuse_scores(a, b, {}); }) == ErrorKind::ShapeMismatch);
  CHECK(error_kind_of([&] { fuse_scores(a, a, {0, 0}); }) == ErrorKind::Validation);
  CHECK(error_kind_of([&] { fuse_scores(a, a, {-1, 2}); }) == ErrorKind::Validation);
}

// ---- optimizer ----

namespace {

struct ToyModel {
  nn::Network<double> net;
  nn::ModelParams<double> params;
  nn::Activation<double> x;
  std::vector<int> labels{0, 1, 2, 1};
  std::vector<double> label_matrix;

  ToyModel() : net(config()), params(nn::init_params(net, 9)), x(4, 2, 2, 6, 6) {
    Rng rng(10);
    for (auto& v : x.data) v = rng.uniform();
    label_matrix.resize(3 * 4);
    for (auto& v : label_matrix) v = 0.5 * rng.normal();
  }

  static nn::NetworkConfig config() {
    nn::NetworkConfig c;
    c.in_channels = 2;
    c.n_classes = 3;
    c.stem_width = 4;
    c.stage_widths = {8};
    c.stage_blocks = {1};
    c.stage_spatial_strides = {2};
    c.stage_temporal_kernels = {1};
    c.bottleneck_ratio = 2;
    c.embed_dim = 8;
    c.sem_dim = 4;
    c.allow_dim_override = true;
    return c;
  }

  double eval_loss(double alpha) const {
    const auto out = net.forward(params, x, nn::Mode::Train);
    return batch_loss<double>(out.logits, out.z_emb, labels, 3, 4, label_matrix, alpha).loss.total;
  }
};

}  // namespace

TEST_CASE("zero learning rate leaves trainable params unchanged") {
  ToyModel m;
  auto before = m.params;
  auto state = OptimizerState<double>::zeros_like(m.params);
  OptimizerConfig opt;
  train_step<double>(m.net, m.params, state, {&m.x, m.labels}, m.label_matrix, 20.0,
                     EmbReduction::Sum, 0.0, opt);
  for (std::size_t i = 0; i < before.arrays.size(); ++i) {
    if (before.arrays[i].trainable) CHECK(before.arrays[i].values == m.params.arrays[i].values);
  }
  CHECK(state.step == 1);
}

TEST_CASE("weight decay alone shrinks params geometrically") {
  ToyModel m;
  const auto before = m.params;
  auto state = OptimizerState<double>::zeros_like(m.params);
  const auto zero = nn::Gradients<double>::zeros_like(m.params);
  const double lr = 0.1;
  const double wd = 0.05;
  sgd_momentum_update(m.params, state, zero, lr, 0.0, wd);
  for (std::size_t i = 0; i < before.arrays.size(); ++i) {
    if (!before.arrays[i].trainable) {
      CHECK(before.arrays[i].values == m.params.arrays[i].values);
      continue;
    }
    for (std::size_t k = 0; k < before.arrays[i].size(); ++k) {
      CHECK(m.params.arrays[i].values[k] ==
            doctest::Approx(before.arrays[i].values[k] * (1 - lr * wd)).epsilon(1e-14));
    }
  }
}

TEST_CASE("momentum update by hand") {
  nn::ModelParams<double> p;
  p.arrays.push_back({"w", {2}, {1.0, -2.0}, true});
  auto state = OptimizerState<double>::zeros_like(p);
  nn::Gradients<double> g;
  g.arrays = {{0.5, 0.25}};
  sgd_momentum_update(p, state, g, 0.1, 0.9, 0.0);
  CHECK(p.arrays[0].values[0] == doctest::Approx(0.95));
  CHECK(p.arrays[0].values[1] == doctest::Approx(-2.025));
  sgd_momentum_update(p, state, g, 0.1, 0.9, 0.0);
  // v = 0.9 * 0.5 + 0.5 = 0.95
  CHECK(p.arrays[0].values[0] == doctest::Approx(0.95 - 0.095));
}

TEST_CASE("repeated steps on one batch decrease the loss") {
  for (double alpha : {0.0, 1.0, 20.0}) {
    ToyModel m;
    auto state = OptimizerState<double>::zeros_like(m.params);
    OptimizerConfig opt;
    opt.momentum = 0.0;
    double prev = m.eval_loss(alpha);
    for (int rep = 0; rep < 5; ++rep) {
      train_step<double>(m.net, m.params, state, {&m.x, m.labels}, m.label_matrix, alpha,
                         EmbReduction::Mean, 0.01, opt);
      const double now = m.eval_loss(alpha);
      CHECK(now <= prev);
      prev = now;
    }
  }
}

TEST_CASE("non-finite loss is reported") {
  ToyModel m;
  auto state = OptimizerState<double>::zeros_like(m.params);
  m.label_matrix[0] = std::numeric_limits<double>::infinity();
  OptimizerConfig opt;
  CHECK(error_kind_of([&] {
          train_step<double>(m.net, m.params, state, {&m.x, m.labels}, m.label_matrix, 1.0,
                             EmbReduction::Sum, 0.01, opt);
        }) == ErrorKind::NonFinite);
}

// ---- files ----

TEST_CASE("checkpoint round trip") {
  ToyModel m;
  Checkpoint ck;
  ck.config = config_to_json(testutil::tiny_run_config());
  ck.config_hash = "abc";
  ck.seed = 3;
  ck.epoch = 2;
  ck.global_step = 17;
  ck.best_val_top1 = 0.25;
  ck.best_epoch = 1;
  ck.in_channels = 2;
  ck.n_classes = 3;
  ck.params = nn::cast_params<float>(m.params);
  ck.velocity = OptimizerState<float>::zeros_like(ck.params).velocity;
  ck.velocity[0][0] = 1.5f;
  const auto dir = testutil::scratch("engine_ckpt");
  write_checkpoint(ck, dir / "a.ckpt");
  const auto back = read_checkpoint(dir / "a.ckpt");
  CHECK(back.config == ck.config);
  CHECK(back.config_hash == "abc");
  CHECK(back.epoch == 2);
  CHECK(back.global_step == 17);
  CHECK(back.best_val_top1 == 0.25);
  CHECK(back.params == ck.params);
  CHECK(back.velocity == ck.velocity);
  CHECK(!std::filesystem::exists(dir / "a.ckpt.tmp"));

  testutil::spit(dir / "bad.ckpt", "NOTACKPT");
  CHECK(error_kind_of([&] { read_checkpoint(dir / "bad.ckpt"); }) == ErrorKind::Parse);
  auto bytes = testutil::slurp(dir / "a.ckpt");
  testutil::spit(dir / "short.ckpt", bytes.substr(0, bytes.size() - 10));
  CHECK(error_kind_of([&] { read_checkpoint(dir / "short.ckpt"); }) != ErrorKind::Runtime);
}

TEST_CASE("score file round trip and fusability") {
  ScoreMatrix s;
  s.rows = 2;
  s.classes = 3;
  s.vocab_hash = 11;
  s.clips_hash = 22;
  s.labels = {2, 0};
  s.scores = {0.1f, 0.2f, 0.7f, 0.5f, 0.25f, 0.25f};
  const auto dir = testutil::scratch("engine_scores");
  write_scores(s, dir / "s.bin");
  CHECK(testutil::slurp(dir / "s.bin").size() == 4 + 4 * 3 + 8 * 2 + 4 * 2 + 4 * 6);
  const auto back = read_scores(dir / "s.bin");
  CHECK(back == s);
  CHECK_NOTHROW(check_fusable(s, back));
  auto other = s;
  other.vocab_hash = 12;
  CHECK(error_kind_of([&] { check_fusable(s, other); }) == ErrorKind::Validation);
  other = s;
  other.clips_hash = 0;
  CHECK(error_kind_of([&] { check_fusable(s, other); }) == ErrorKind::Validation);
  other = s;
  other.classes = 2;
  other.scores.resize(4);
  CHECK(error_kind_of([&] { check_fusable(s, other); }) == ErrorKind::ShapeMismatch);
  testutil::spit(dir / "junk.bin", "junk");
  CHECK(error_kind_of([&] { read_scores(dir / "junk.bin"); }) == ErrorKind::Parse);
}

// ---- training ----

TEST_CASE("training writes logs and checkpoints deterministically") {
  auto b = testutil::make_bundle("engine_train");
  const auto data = load_run_data(b.cfg);
  TrainOptions o1;
  o1.out_dir = b.dir / "r1";
  const auto r1 = train(data, b.cfg, o1);
  TrainOptions o2;
  o2.out_dir = b.dir / "r2";
  const auto r2 = train(data, b.cfg, o2);
  CHECK(r1.finished);
  CHECK(r1.epochs_completed == 3);
  const auto log1 = testutil::slurp(r1.metrics_log);
  CHECK(log1 == testutil::slurp(r2.metrics_log));
  CHECK(testutil::slurp(r1.final_checkpoint) == testutil::slurp(r2.final_checkpoint));
  CHECK(std::filesystem::exists(o1.out_dir / "config.json"));
  CHECK(load_run_config(o1.out_dir / "config.json") == b.cfg);
  CHECK(std::filesystem::exists(o1.out_dir / "best.ckpt"));
  CHECK(log1.find("\"type\":\"step\"") != std::string::npos);
  CHECK(log1.find("\"val_top1\"") != std::string::npos);

  auto other = b.cfg;
  other.seed = 6;
  TrainOptions o3;
  o3.out_dir = b.dir / "r3";
  train(data, other, o3);
  CHECK(testutil::slurp(o3.out_dir / "metrics.jsonl") != log1);
}

TEST_CASE("resume reproduces an uninterrupted run") {
  auto b = testutil::make_bundle("engine_resume");
  b.cfg.optimizer.epochs = 4;
  const auto data = load_run_data(b.cfg);
  TrainOptions full;
  full.out_dir = b.dir / "full";
  train(data, b.cfg, full);

  TrainOptions part;
  part.out_dir = b.dir / "part";
  part.stop_after_epoch = 2;
  const auto r = train(data, b.cfg, part);
  CHECK(!r.finished);
  CHECK(r.epochs_completed == 2);
  CHECK(!std::filesystem::exists(part.out_dir / "final.ckpt"));

  TrainOptions rest;
  rest.out_dir = b.dir / "part";
  rest.resume_from = b.dir / "part" / "last.ckpt";
  const auto r2 = train(data, b.cfg, rest);
  CHECK(r2.finished);
  CHECK(testutil::slurp(full.out_dir / "metrics.jsonl") ==
        testutil::slurp(part.out_dir / "metrics.jsonl"));
  CHECK(read_checkpoint(full.out_dir / "final.ckpt").params ==
        read_checkpoint(part.out_dir / "final.ckpt").params);

  auto changed = b.cfg;
  changed.objective.alpha = 3.0;
  TrainOptions bad;
  bad.out_dir = b.dir / "bad";
  bad.resume_from = b.dir / "part" / "last.ckpt";
  CHECK(error_kind_of([&] { train(data, changed, bad); }) == ErrorKind::ResumeMismatch);
}

TEST_CASE("empty train split fails before the first epoch") {
  auto b = testutil::make_bundle("engine_empty");
  b.cfg.data.train_split = "val";
  auto data = load_run_data(b.cfg);
  data.manifest.splits.val.clear();
  TrainOptions o;
  o.out_dir = b.dir / "run";
  CHECK(error_kind_of([&] { train(data, b.cfg, o); }) == ErrorKind::Validation);
  CHECK(!std::filesystem::exists(o.out_dir));
}

TEST_CASE("evaluation of a checkpoint") {
  auto b = testutil::make_bundle("engine_eval");
  const auto data = load_run_data(b.cfg);
  TrainOptions o;
  o.out_dir = b.dir / "run";
  const auto r = train(data, b.cfg, o);
  const auto ck = read_checkpoint(r.final_checkpoint);
  const auto ev = evaluate_checkpoint(data, b.cfg, ck, Split::Test);
  CHECK(ev.scores.rows == static_cast<int>(data.manifest.clip_indices(Split::Test).size()));
  CHECK(ev.scores.classes == 4);
  CHECK(ev.report.top1 <= ev.report.top5);
  for (int i = 0; i < ev.scores.rows; ++i) {
    double sum = 0;
    for (int k = 0; k < 4; ++k) sum += ev.scores.scores[i * 4 + k];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
  }
  auto multi = b.cfg;
  multi.evaluation.num_clips = 3;
  const auto ev3 = evaluate_checkpoint(data, multi, ck, Split::Test);
  CHECK(ev3.scores.rows == ev.scores.rows);
  CHECK(ev3.scores.scores != ev.scores.scores);
  CHECK(evaluate_checkpoint(data, multi, ck, Split::Test).scores == ev3.scores);

}

TEST_CASE("alpha ablation rows") {
  auto b = testutil::make_bundle("engine_ablate");
  b.cfg.optimizer.epochs = 2;
  const auto data = load_run_data(b.cfg);
  const std::vector<double> alphas{5, 0, 5};
  const auto rows = ablate_alpha(data, b.cfg, alphas, b.dir / "ab");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].alpha == 5);
  CHECK(rows[0].top1 == rows[2].top1);
  CHECK(rows[0].top5 == rows[2].top5);
  CHECK(testutil::slurp(b.dir / "ab" / "run00_alpha_5" / "scores.bin") ==
        testutil::slurp(b.dir / "ab" / "run02_alpha_5" / "scores.bin"));
  CHECK(testutil::slurp(b.dir / "ab" / "run00_alpha_5" / "metrics.jsonl") ==
        testutil::slurp(b.dir / "ab" / "run02_alpha_5" / "metrics.jsonl"));

  // alpha = 0 is the plain cross-entropy baseline: no embedding gradient at all.
  const auto log0 = testutil::slurp(b.dir / "ab" / "run01_alpha_0" / "metrics.jsonl");
  std::istringstream lines(log0);
  std::string line;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j["type"] == "step") CHECK(j["total"].get<double>() == j["class_loss"].get<double>());
  }

  const auto table = format_ablation_table(rows);
  CHECK(table.rfind("Parameter    | Top-1 (%) | Top-5 (%)\n", 0) == 0);
  CHECK(table.find("alpha=5 ") != std::string::npos);
  CHECK(ablation_to_json(rows)["rows"].size() == 3);
  CHECK(error_kind_of([&] { ablate_alpha(data, b.cfg, {}, b.dir / "none"); }) ==
        ErrorKind::InvalidArgument);
}
