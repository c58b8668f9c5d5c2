// SPDX-License-Identifier: Apache-2.0
// mgc-cli: synth, prepare, train, eval, ensemble, ablate.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mgc/mgc.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

int exit_code_for(mgc_status s) {
  switch (s) {
    case MGC_OK: return kExitOk;
    case MGC_ERR_INVALID_ARGUMENT:
    case MGC_ERR_PARSE:
    case MGC_ERR_VALIDATION:
    case MGC_ERR_RESUME_MISMATCH:
    case MGC_ERR_SHAPE_MISMATCH: return kExitConfig;
    default: return kExitRuntime;
  }
}

struct Failure {
  int code;
};

void check(mgc_status s, const std::string& context) {
  if (s == MGC_OK) return;
  std::cerr << "error: " << context << ": " << mgc_last_error() << " (" << mgc_status_name(s)
            << ")\n";
  throw Failure{exit_code_for(s)};
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
};

using Config = Handle<mgc_config, mgc_config_free>;
using Scores = Handle<mgc_scores, mgc_scores_free>;

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { mgc_string_free(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

void print_progress(const char* msg, void*) { std::cerr << msg << "\n"; }

std::filesystem::path output_root() {
  const char* env = std::getenv("MGC_OUTPUT_ROOT");
  return (env && *env) ? std::filesystem::path(env) : std::filesystem::path("runs");
}

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string embeddings;
  bool allow_dim_override = false;
  std::string out;
};

void add_config_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "run config (JSON)")->required();
  cmd->add_option("--set", c.overrides, "override, e.g. objective.alpha=20 (repeatable)");
  cmd->add_option("--embeddings", c.embeddings, "word-embedding table (overrides data.embeddings)");
  cmd->add_flag("--allow-dim-override", c.allow_dim_override,
                "permit embedding/feature sizes other than 300/512");
  cmd->add_option("--out", c.out, "output directory (default: $MGC_OUTPUT_ROOT/<command>-<hash>)");
}

// Everything that can fail on bad input happens here, before any output.
void load_config(Config& cfg, const Common& c, std::optional<std::uint64_t> seed) {
  if (!std::filesystem::exists(c.config_path)) {
    std::cerr << "error: config file not found: " << c.config_path << "\n";
    throw Failure{kExitConfig};
  }
  check(mgc_config_load(c.config_path.c_str(), &cfg.ptr), "loading config");
  std::vector<std::string> sets;
  if (!c.embeddings.empty()) {
    sets.push_back("data.embeddings=" + std::filesystem::absolute(c.embeddings).string());
  }
  if (c.allow_dim_override) {
    sets.push_back("data.allow_dim_override=true");
    sets.push_back("network.allow_dim_override=true");
  }
  sets.insert(sets.end(), c.overrides.begin(), c.overrides.end());
  if (seed) sets.push_back("seed=" + std::to_string(*seed));
  for (const auto& s : sets) check(mgc_config_set(cfg.ptr, s.c_str()), "override '" + s + "'");
}

std::string out_dir_for(const Common& c, const Config& cfg, const char* command) {
  if (!c.out.empty()) return c.out;
  OwnedString hash;
  check(mgc_config_hash(cfg.ptr, &hash.ptr), "config hash");
  return (output_root() / (std::string(command) + "-" + hash.str())).string();
}

void print_eval(const mgc_eval_summary& s) {
  std::printf("samples=%d classes=%d\n", s.samples, s.n_classes);
  std::printf("Top-1: %.2f%%\nTop-5: %.2f%%\n", 100.0 * s.top1, 100.0 * s.top5);
}

std::pair<double, double> parse_weights(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw CLI::ValidationError("--weights", "expected W_JOINT:W_LIMB");
  try {
    std::size_t a = 0;
    std::size_t b = 0;
    const std::string lhs = text.substr(0, colon);
    const std::string rhs = text.substr(colon + 1);
    const double wj = std::stod(lhs, &a);
    const double wl = std::stod(rhs, &b);
    if (a != lhs.size() || b != rhs.size()) throw std::invalid_argument("trailing");
    return {wj, wl};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--weights", "expected W_JOINT:W_LIMB, got '" + text + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Micro-gesture classification from skeleton heatmap volumes"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.set_version_flag("--version", mgc_version());

  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "seed for every stochastic component (overrides config)");

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset bundle");
  std::string synth_out;
  int synth_clips = 8;
  int synth_classes = 4;
  std::string synth_layout = "openpose_upper22";
  bool no_holdout = false;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--clips", synth_clips, "number of clips")->check(CLI::PositiveNumber);
  synth->add_option("--classes", synth_classes, "number of classes")->check(CLI::PositiveNumber);
  synth->add_option("--layout", synth_layout, "keypoint layout");
  synth->add_flag("--no-holdout", no_holdout, "put every subject in the train split");

  // prepare
  Common prep;
  auto* prepare = app.add_subcommand("prepare", "dump heatmap volumes for a split");
  add_config_flags(prepare, prep);
  std::string prep_split;
  bool prep_images = false;
  prepare->add_option("--split", prep_split, "train|val|test (default: data.eval_split)");
  prepare->add_flag("--images", prep_images, "also export per-frame PGM grids");

  // train
  Common tr;
  auto* train = app.add_subcommand("train", "train a model");
  add_config_flags(train, tr);
  std::string resume;
  int stop_after = 0;
  train->add_option("--resume", resume, "checkpoint to resume from");
  train->add_option("--stop-after", stop_after, "stop after this many epochs")
      ->check(CLI::NonNegativeNumber);

  // eval
  Common ev;
  auto* eval = app.add_subcommand("eval", "score a checkpoint");
  add_config_flags(eval, ev);
  std::string checkpoint;
  std::string eval_split;
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--split", eval_split, "train|val|test (default: data.eval_split)");

  // ensemble
  auto* ensemble = app.add_subcommand("ensemble", "fuse joint and limb score files");
  std::string joint_path;
  std::string limb_path;
  std::string weights = "2:3";
  std::string ens_out;
  ensemble->add_option("--joint", joint_path, "joint-modality scores")->required();
  ensemble->add_option("--limb", limb_path, "limb-modality scores")->required();
  ensemble->add_option("--weights", weights, "W_JOINT:W_LIMB (default 2:3)");
  ensemble->add_option("--out", ens_out, "write fused scores and report here");

  // ablate
  Common ab;
  auto* ablate = app.add_subcommand("ablate", "train and evaluate once per alpha");
  add_config_flags(ablate, ab);
  std::vector<double> alphas{1, 10, 20, 30, 40, 50};
  ablate->add_option("--alphas", alphas, "alpha values")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (e.get_exit_code() != 0) std::cerr << app.help();
    return kExitConfig;
  }

  try {
    if (*synth) {
      check(mgc_synthesize_bundle(synth_out.c_str(), synth_clips, synth_classes,
                                  synth_layout.c_str(), seed.value_or(0), no_holdout ? 0 : 1),
            "synth");
      std::printf("wrote %s\n", synth_out.c_str());
    } else if (*prepare) {
      Config cfg;
      load_config(cfg, prep, seed);
      const auto out = out_dir_for(prep, cfg, "prepare");
      int n = 0;
      check(mgc_prepare(cfg.ptr, prep_split.empty() ? nullptr : prep_split.c_str(), out.c_str(),
                        prep_images ? 1 : 0, &n),
            "prepare");
      std::printf("wrote %d volumes to %s\n", n, out.c_str());
    } else if (*train) {
      Config cfg;
      load_config(cfg, tr, seed);
      const auto out = out_dir_for(tr, cfg, "train");
      mgc_train_summary s{};
      check(mgc_train(cfg.ptr, out.c_str(), resume.empty() ? nullptr : resume.c_str(), stop_after,
                      print_progress, nullptr, &s),
            "train");
      std::printf("epochs=%d finished=%d loss=%.6f (class %.6f, emb %.6f)\n", s.epochs_completed,
                  s.finished, s.last_total_loss, s.last_class_loss, s.last_emb_loss);
      if (s.best_val_top1 >= 0) std::printf("best val Top-1: %.2f%%\n", 100.0 * s.best_val_top1);
      std::printf("run directory: %s\n", out.c_str());
    } else if (*eval) {
      Config cfg;
      load_config(cfg, ev, seed);
      const auto out = out_dir_for(ev, cfg, "eval");
      mgc_eval_summary s{};
      check(mgc_evaluate(cfg.ptr, checkpoint.c_str(),
                         eval_split.empty() ? nullptr : eval_split.c_str(), out.c_str(), &s),
            "eval");
      print_eval(s);
      std::printf("scores: %s\n", (std::filesystem::path(out) / "scores.bin").c_str());
    } else if (*ensemble) {
      std::pair<double, double> w;
      try {
        w = parse_weights(weights);
      } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
      }
      Scores joint;
      Scores limb;
      Scores fused;
      check(mgc_scores_load(joint_path.c_str(), &joint.ptr), "reading " + joint_path);
      check(mgc_scores_load(limb_path.c_str(), &limb.ptr), "reading " + limb_path);
      check(mgc_scores_fuse(joint.ptr, limb.ptr, w.first, w.second, &fused.ptr), "fusion");
      mgc_eval_summary s{};
      check(mgc_scores_evaluate(fused.ptr, &s), "evaluating fused scores");
      std::printf("fusion weights %g:%g\n", w.first, w.second);
      print_eval(s);
      if (!ens_out.empty()) {
        std::filesystem::create_directories(ens_out);
        const auto dir = std::filesystem::path(ens_out);
        check(mgc_scores_write(fused.ptr, (dir / "scores.bin").c_str()), "writing scores");
        OwnedString report;
        check(mgc_scores_report_json(fused.ptr, &report.ptr), "report");
        std::FILE* f = std::fopen((dir / "report.json").c_str(), "wb");
        if (!f) {
          std::cerr << "error: cannot write " << (dir / "report.json") << "\n";
          return kExitRuntime;
        }
        std::fputs(report.str().c_str(), f);
        std::fputs("\n", f);
        std::fclose(f);
      }
    } else if (*ablate) {
      Config cfg;
      load_config(cfg, ab, seed);
      const auto out = out_dir_for(ab, cfg, "ablate");
      OwnedString table;
      check(mgc_ablate_alpha(cfg.ptr, alphas.data(), alphas.size(), out.c_str(), print_progress,
                             nullptr, &table.ptr),
            "ablate");
      std::fputs(table.str().c_str(), stdout);
    }
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
