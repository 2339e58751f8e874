// lampdet: synth | detect | eval | all-modes

#include "lampdet/config.hpp"
#include "lampdet/error.hpp"
#include "lampdet/io.hpp"
#include "lampdet/pipeline.hpp"
#include "lampdet/synth.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>

namespace fs = std::filesystem;
using namespace lampdet;

namespace {

struct Flags {
  std::string config;
  std::string mode;
  std::string out_dir;
  std::string data;
  std::string log;
  std::int64_t seed = -1;
  int workers = 0;
};

Config load_config(const Flags& f) {
  if (f.config.empty()) return {};
  return Config::load(f.config);
}

fs::path config_dir(const Flags& f) {
  return f.config.empty() ? fs::current_path() : fs::path(f.config).parent_path();
}

PipelineConfig pipeline_config(const Flags& f) {
  Config cfg = load_config(f);
  if (!f.data.empty()) cfg.set("input.dataset", fs::absolute(f.data).string());
  if (!f.mode.empty()) cfg.set("run.mode", f.mode);
  if (f.workers > 0) cfg.set("run.workers", static_cast<double>(f.workers));
  if (f.seed >= 0) cfg.set("run.seed", static_cast<double>(f.seed));
  if (!f.out_dir.empty()) cfg.set("output.dir", fs::absolute(f.out_dir).string());
  return PipelineConfig::from_config(cfg, config_dir(f));
}

int run_synth(const Flags& f) {
  const Config cfg = load_config(f);
  const fs::path base = config_dir(f);
  SceneSpec scene;
  TrajectorySpec traj;
  if (cfg.has("synth.scene")) {
    fs::path p = cfg.get_string("synth.scene", "");
    scene = scene_from_json(read_json(p.is_absolute() ? p : base / p));
    fs::path t = cfg.get_string("synth.trajectory", "");
    if (t.empty()) throw Error(ErrorCode::ValidationError, "synth.scene needs synth.trajectory");
    traj = trajectory_from_json(read_json(t.is_absolute() ? t : base / t));
  } else {
    HallwayOptions opt;
    opt.tilt_deg = cfg.get_double("synth.tilt_deg", opt.tilt_deg);
    opt.noise_sigma = cfg.get_double("synth.noise_sigma", opt.noise_sigma);
    opt.contour_jitter = cfg.get_double("synth.contour_jitter", opt.contour_jitter);
    opt.distractors = cfg.get_int("synth.distractors", opt.distractors);
    opt.frames = cfg.get_int("synth.frames", opt.frames);
    opt.seed = static_cast<std::uint64_t>(cfg.get_double("run.seed", 1.0));
    if (opt.frames < 2) throw Error(ErrorCode::ValidationError, "synth.frames must be >= 2");
    if (opt.distractors < 0) throw Error(ErrorCode::ValidationError, "synth.distractors < 0");
    if (f.seed >= 0) opt.seed = static_cast<std::uint64_t>(f.seed);
    scene = hallway_scene(opt);
    traj = hallway_trajectory(opt);
  }
  if (f.seed >= 0) scene.seed = static_cast<std::uint64_t>(f.seed);
  const fs::path out =
      f.out_dir.empty() ? fs::path(cfg.get_string("output.dir", "dataset")) : fs::path(f.out_dir);
  const int workers = f.workers > 0 ? f.workers : cfg.get_int("run.workers", 1);
  write_dataset(out, scene, traj, workers);
  std::printf("wrote %s\n", out.string().c_str());
  return 0;
}

int run_detect_cmd(const Flags& f) {
  const PipelineConfig pc = pipeline_config(f);
  const DetectionLog log = run_detect(pc);
  std::printf("%d frames, %zu records, %zu surviving detections -> %s\n", log.frames,
              log.records.size(), log.survivors().size(),
              (pc.out_dir / "detections.jsonl").string().c_str());
  return 0;
}

int run_eval_cmd(const Flags& f) {
  const PipelineConfig pc = pipeline_config(f);
  const fs::path log_path = f.log.empty() ? pc.out_dir / "detections.jsonl" : fs::path(f.log);
  DetectionLog log;
  try {
    log = read_log(log_path);
  } catch (const Error& e) {
    throw Error(ErrorCode::IngestError, e.what());
  }
  log.mode = pc.mode;
  const EvalOutput out = run_eval(log, pc, pc.out_dir);
  std::printf("%d detections, %d clusters", out.report.total_detections, out.report.clusters);
  if (out.report.has_references)
    std::printf(", %zu matched, mean distance %.2f cm", out.report.matches.size(),
                out.report.mean_distance_cm);
  std::printf("\n");
  return 0;
}

int run_all_cmd(const Flags& f) {
  const PipelineConfig pc = pipeline_config(f);
  const auto outs = run_all_modes(pc);
  for (std::size_t m = 0; m < outs.size(); ++m)
    std::printf("%-18s %6d detections %4d clusters\n", to_string(kAllModes[m]),
                outs[m].report.total_detections, outs[m].report.clusters);
  std::printf("comparison -> %s\n", (pc.out_dir / "comparison.csv").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lamp detection with building-geometry constraints"};
  app.require_subcommand(1);
  Flags f;
  auto common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config, "TOML configuration file");
    sub->add_option("--seed", f.seed, "random seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", f.out_dir, "output directory");
  };
  auto* synth = app.add_subcommand("synth", "render a synthetic dataset");
  common(synth);
  auto* detect = app.add_subcommand("detect", "run detection over a dataset");
  common(detect);
  auto* eval = app.add_subcommand("eval", "cluster and evaluate a detection log");
  common(eval);
  auto* all = app.add_subcommand("all-modes", "run all three modes and compare");
  common(all);
  for (auto* sub : {detect, eval, all}) {
    sub->add_option("--data", f.data, "dataset directory (poses.json, models.json, ...)");
  }
  for (auto* sub : {detect, eval}) sub->add_option("--mode", f.mode, "unconstrained | filter-only | filter-alignment");
  eval->add_option("--log", f.log, "detections.jsonl (default: <out-dir>/detections.jsonl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  try {
    if (*synth) return run_synth(f);
    if (*detect) return run_detect_cmd(f);
    if (*eval) return run_eval_cmd(f);
    if (*all) return run_all_cmd(f);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::IngestError:
      case ErrorCode::MissingFile:
      case ErrorCode::SchemaError:
        return 2;
      default:
        return 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
