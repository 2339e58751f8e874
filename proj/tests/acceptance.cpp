// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include "lampdet/chamfer.hpp"
#include "lampdet/cluster.hpp"
#include "lampdet/error.hpp"
#include "lampdet/filter.hpp"
#include "lampdet/pipeline.hpp"
#include "lampdet/pose.hpp"
#include "lampdet/synth.hpp"

#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace lampdet;
using namespace lampdet::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// Rendered in memory; frames never touch the disk.
struct SceneRun {
  SceneSpec scene;
  Dataset data;
  std::vector<FrameRecord> truth;
};

SceneRun make_scene(const HallwayOptions& opt) {
  SceneRun r;
  r.scene = hallway_scene(opt);
  const auto views = generate_trajectory(hallway_trajectory(opt));
  r.data.camera = r.scene.camera;
  r.data.models = r.scene.models;
  r.data.building = r.scene.building;
  for (std::size_t i = 0; i < views.size(); ++i) {
    FrameRecord rec = render_frame(r.scene, views[i], static_cast<int>(i));
    FrameInput in;
    in.index = static_cast<int>(i);
    in.view = views[i];
    in.pixels = rec.image;
    r.data.frames.push_back(std::move(in));
    rec.image = GrayImage{};
    r.truth.push_back(std::move(rec));
  }
  return r;
}

EvalReport evaluate_log(const DetectionLog& log, const SceneSpec& scene, const PipelineConfig& cfg) {
  const auto dets = log.survivors();
  const auto clusters = cluster_detections(dets, cfg.cluster_radius);
  return evaluate(clusters, dets, scene_references(scene), cfg.match_radius);
}

// Shared clean 200-frame run.
struct CleanRun {
  SceneRun run;
  PipelineConfig cfg;
  DetectionLog aligned, unconstrained, filter_only;
  double aligned_seconds = 0.0;
};

std::mutex g_solve_mutex;
std::vector<SolveSummary> g_solves;

CleanRun& clean_run() {
  static CleanRun c = [] {
    CleanRun r;
    HallwayOptions opt;
    opt.frames = 200;
    r.run = make_scene(opt);
    r.cfg.on_solve = [](const SolveSummary& s) {
      std::lock_guard<std::mutex> lock(g_solve_mutex);
      g_solves.push_back(s);
    };
    const auto t0 = Clock::now();
    r.aligned = detect_modes(r.run.data, r.cfg, {Mode::FilterAndAlignment}).at(0);
    r.aligned_seconds = seconds_since(t0);
    auto rest = detect_modes(r.run.data, r.cfg, {Mode::Unconstrained, Mode::FilterOnly});
    r.unconstrained = std::move(rest.at(0));
    r.filter_only = std::move(rest.at(1));
    return r;
  }();
  return c;
}

// --- 1 -----------------------------------------------------------------------

Outcome alignment_exactness() {
  const CleanRun& c = clean_run();
  int total = 0, exact = 0;
  double worst = 0.0;
  for (const auto& r : c.aligned.records) {
    if (!r.detection) continue;
    ++total;
    const double a = z_axis_angle(r.detection->pose, r.detection->plane.normal);
    worst = std::max(worst, a);
    if (a < 1e-9) ++exact;
  }
  const bool ok = total > 0 && exact == total && c.aligned_seconds < 180.0;
  return {ok, fmt("%d/%d detections aligned, worst %.2e rad, %.1f s for %zu frames", exact, total,
                  worst, c.aligned_seconds, c.run.data.frames.size())};
}

// --- 2 -----------------------------------------------------------------------

Outcome dof_reduction() {
  clean_run();
  int constrained = 0, free6 = 0, bad = 0;
  for (const auto& s : g_solves) {
    const bool is_constrained = s.tag.size() > 12 && s.tag.ends_with("-constrained");
    if (is_constrained) {
      ++constrained;
      if (s.free_parameters != 4) ++bad;
    } else {
      ++free6;
      if (s.free_parameters != 6) ++bad;
    }
    if (s.total_parameters != 6) ++bad;
  }
  return {bad == 0 && constrained > 0 && free6 > 0,
          fmt("%d constrained solves at 4 DOF, %d unconstrained at 6 DOF, %d violations",
              constrained, free6, bad)};
}

// --- 3 -----------------------------------------------------------------------

Outcome ddf_exact() {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> coord(0, 31), count(1, 60);
  std::uniform_real_distribution<double> ang(0.0, kPi);
  int maps = 0, mismatches = 0;
  for (int m = 0; m < 50; ++m) {
    std::vector<OracleEdge> edges;
    EdgeMap em;
    em.width = em.height = 32;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const OracleEdge e{coord(rng), coord(rng), ang(rng)};
      edges.push_back(e);
      em.points.push_back({e.x, e.y, e.theta, 1.0});
    }
    for (double lambda : {0.0, 20.0}) {
      ++maps;
      const auto oracle = brute_force_ddf(edges, 32, 32, 8, lambda, kEmptyFieldValue);
      const DirectionalDistanceField f = build_ddf(em, 8, lambda);
      for (int k = 0; k < 8; ++k)
        for (int y = 0; y < 32; ++y)
          for (int x = 0; x < 32; ++x)
            if (f.at(x, y, k) != oracle[(static_cast<std::size_t>(k) * 32 + y) * 32 + x])
              ++mismatches;
    }
  }
  return {mismatches == 0, fmt("%d maps (50 edge sets x 2 lambdas), %d cells differ", maps, mismatches)};
}

// --- 4 -----------------------------------------------------------------------

Outcome circle_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int ok = 0;
  double worst_gap = -1e300;
  for (int inst = 0; inst < 20; ++inst) {
    const CameraIntrinsics cam = camera(500 + 1000 * u(rng), 640, 480);
    const RigidTransform view;  // world frame = camera frame
    const double R = 0.1 + 0.2 * u(rng);
    const double depth = 2.0 + 3.0 * u(rng);
    const Vec3 centre(depth * (u(rng) - 0.5) * 0.3, depth * (u(rng) - 0.5) * 0.3, depth);
    // Normal facing the camera, tilted by up to 50 degrees.
    const Vec3 facing = -centre.normalized();
    const Vec3 axis = facing.cross(random_unit(rng)).normalized();
    const Vec3 n = (expm_series(hat(axis * (50.0 * kPi / 180.0 * u(rng))))) * facing;

    const AlignmentFrame nf = alignment_rotation(n);
    std::vector<Vec2> pts;
    for (int k = 0; k < 100; ++k) {
      const double t = 2 * kPi * k / 100;
      pts.push_back(pinhole(cam, view, centre + nf.L.rotation * Vec3(R * std::cos(t), R * std::sin(t), 0)));
    }
    ShapeObservation obs;
    obs.kind = ShapeKind::Circular;
    obs.contour.points = pts;
    obs.ellipse = fit_ellipse(pts);
    obs.area = obs.ellipse.area();
    LampModel disc;
    disc.id = "disc";
    disc.face.kind = LampFace::Kind::Circle;
    disc.face.radius = R;
    const Plane plane{centre, Vec3(0, 0, -1)};
    const PoseCandidate c = estimate_circular(obs, disc, cam, view, plane, false);
    const double lm_cost =
        circle_cost(pts, cam, view, c.pose.translation, c.pose.rotation.col(2), R);

    // 10 x 10 x 10 centres around the truth, 10 x 10 normals in a cone around the camera axis.
    std::vector<Vec3> normals;
    const AlignmentFrame ff = alignment_rotation(facing);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) {
        const double th = (80.0 * kPi / 180.0) * i / 9.0, ph = 2 * kPi * j / 10.0;
        normals.push_back(ff.L.rotation *
                          Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)));
      }
    double grid_best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 10; ++a)
      for (int b = 0; b < 10; ++b)
        for (int d = 0; d < 10; ++d) {
          const Vec3 p = centre + 0.2 * Vec3(a / 9.0 - 0.5, b / 9.0 - 0.5, d / 9.0 - 0.5);
          for (const auto& nn : normals)
            grid_best = std::min(grid_best, circle_cost(pts, cam, view, p, nn, R));
        }
    worst_gap = std::max(worst_gap, lm_cost - grid_best);
    if (lm_cost <= grid_best + 1e-6) ++ok;
  }
  const double secs = seconds_since(t0);
  return {ok == 20 && secs < 30.0,
          fmt("%d/20 instances at or below the grid optimum (worst gap %.2e), %.1f s", ok,
              worst_gap, secs)};
}

// --- 5 -----------------------------------------------------------------------

Outcome reprojection_filter() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const CameraIntrinsics cam = camera(600, 640, 480);
  const RigidTransform view;
  int exact_kept = 0, exact_total = 0, perturbed = 0, consistent = 0;
  double worst_exact = 0.0;
  for (int i = 0; i < 200; ++i) {
    const bool circular = i % 2 == 1;
    RigidTransform pose;
    pose.rotation = alignment_rotation(Vec3(0.2 * (u(rng) - 0.5), 0.2 * (u(rng) - 0.5), -1).normalized())
                        .L.rotation * rot_z(2 * kPi * u(rng));
    pose.translation = Vec3(u(rng) - 0.5, u(rng) - 0.5, 2.5 + 1.5 * u(rng));
    const double half = 0.15 + 0.2 * u(rng);
    std::vector<Correspondence> corrs;
    std::vector<Vec2> contour;
    if (circular) {
      for (int k = 0; k < 64; ++k) {
        const double t = 2 * kPi * (k + 0.5) / 64;
        contour.push_back(project(cam, view, pose, Vec3(half * std::cos(t), half * std::sin(t), 0)));
      }
    } else {
      for (const Vec3& p : {Vec3(-half, -half, 0), Vec3(half, -half, 0), Vec3(half, half, 0),
                            Vec3(-half, half, 0)})
        corrs.push_back({p, project(cam, view, pose, p)});
    }
    const double area = circular ? polygon_area(contour) : [&] {
      std::vector<Vec2> poly;
      for (const auto& c : corrs) poly.push_back(c.p_img);
      return polygon_area(poly);
    }();
    auto eps_at = [&](const RigidTransform& p) {
      return circular ? reprojection_error_circle(p, contour, cam, view, half, area)
                      : reprojection_error_polygon(p, corrs, cam, view, area);
    };
    Detection d;
    d.kind = circular ? ShapeKind::Circular : ShapeKind::Polygonal;
    d.reprojection_error = eps_at(pose);
    ++exact_total;
    worst_exact = std::max(worst_exact, d.reprojection_error);
    if (d.reprojection_error < 1e-9 && apply_reprojection_filter({d}).size() == 1) ++exact_kept;

    // Grow a random perturbation until the error crosses the threshold.
    const double thr = circular ? kCircularReprojectionThreshold : kPolygonalReprojectionThreshold;
    const Vec3 dir_t = random_unit(rng);
    const Vec3 dir_w = random_unit(rng);
    for (double s = 1e-3; s < 10.0; s *= 1.3) {
      RigidTransform p = pose;
      p.translation += 0.05 * s * dir_t;
      p.rotation = p.rotation * expm_series(hat(0.02 * s * dir_w));
      double eps = 0.0;
      try {
        eps = eps_at(p);
      } catch (const Error&) {
        break;
      }
      if (eps > thr) {
        d.reprojection_error = eps;
        ++perturbed;
        if (apply_reprojection_filter({d}).empty() && !passes_reprojection(d, kPolygonalReprojectionThreshold,
                                                                           kCircularReprojectionThreshold))
          ++consistent;
        break;
      }
    }
  }

  int scale_ok = 0;
  double worst_rel = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int n = 3 + static_cast<int>(60 * u(rng));
    std::vector<double> e(n), se(n);
    const double s = std::exp(6.0 * (u(rng) - 0.5));
    for (int k = 0; k < n; ++k) {
      const double err = 5.0 * u(rng);
      e[k] = err * err;
      se[k] = (err * s) * (err * s);
    }
    const double area = 50.0 + 5000.0 * u(rng);
    const double a = normalized_error(e, area);
    const double b = normalized_error(se, area * s * s);
    const double rel = std::abs(a - b) / std::max(std::abs(a), 1e-300);
    worst_rel = std::max(worst_rel, rel);
    if (rel <= 1e-12) ++scale_ok;
  }
  const bool ok = exact_kept == exact_total && perturbed > 0 && consistent == perturbed &&
                  scale_ok == 1000;
  return {ok, fmt("exact kept %d/%d (max eps %.1e); perturbed discarded %d/%d; scale invariance "
                  "%d/1000 (worst rel %.1e)",
                  exact_kept, exact_total, worst_exact, consistent, perturbed, scale_ok, worst_rel)};
}

// --- 6 -----------------------------------------------------------------------

Outcome zero_noise_end_to_end() {
  const CleanRun& c = clean_run();
  const auto survivors = c.aligned.survivors();
  // A fully visible lamp counts as found when a survivor of that frame lies within 10 cm.
  int visible = 0, found = 0;
  for (std::size_t f = 0; f < c.run.truth.size(); ++f) {
    for (const auto& v : c.run.truth[f].visible) {
      if (!v.fully_visible) continue;
      ++visible;
      for (const auto& d : survivors)
        if (d.frame == static_cast<int>(f) && (d.position() - v.pose.translation).norm() < 0.1) {
          ++found;
          break;
        }
    }
  }
  const EvalReport rep = evaluate_log(c.aligned, c.run.scene, c.cfg);
  const double cover = visible ? static_cast<double>(found) / visible : 0.0;
  const double model_err = std::max(rep.model_confusion.error_rate(), rep.detection_model_confusion.error_rate());
  const double state_err = std::max(rep.state_confusion.error_rate(), rep.detection_state_confusion.error_rate());
  const bool ok = cover >= 0.95 && model_err == 0.0 && state_err == 0.0 &&
                  !rep.matches.empty() && rep.mean_distance_cm < 2.0;
  return {ok, fmt("%d/%d visible lamp frames detected (%.1f%%), model error %.1f%%, state error "
                  "%.1f%%, mean distance %.2f cm over %zu clusters",
                  found, visible, 100 * cover, 100 * model_err, 100 * state_err, rep.mean_distance_cm,
                  rep.matches.size())};
}

// --- 7 and 8 -----------------------------------------------------------------

struct AblationSeed {
  std::uint64_t seed = 0;
  std::size_t unconstrained = 0, aligned = 0;
  double dist_unconstrained = 0.0, dist_aligned = 0.0;
  bool subset = true;
  std::size_t filter_only = 0;
};

std::vector<AblationSeed>& ablation() {
  static std::vector<AblationSeed> out = [] {
    std::vector<AblationSeed> v;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      HallwayOptions opt;
      opt.frames = 200;
      opt.contour_jitter = 1.5;
      opt.tilt_deg = 2.0;
      opt.distractors = 3;
      opt.seed = seed;
      const SceneRun run = make_scene(opt);
      PipelineConfig cfg;
      cfg.seed = seed;
      const std::vector<Mode> modes = {Mode::Unconstrained, Mode::FilterOnly, Mode::FilterAndAlignment};
      const auto logs = detect_modes(run.data, cfg, modes);
      AblationSeed a;
      a.seed = seed;
      const auto u = logs[0].survivors();
      const auto fo = logs[1].survivors();
      const auto fa = logs[2].survivors();
      a.unconstrained = u.size();
      a.filter_only = fo.size();
      a.aligned = fa.size();
      a.dist_unconstrained = evaluate_log(logs[0], run.scene, cfg).mean_distance_cm;
      a.dist_aligned = evaluate_log(logs[2], run.scene, cfg).mean_distance_cm;
      std::set<std::string> ids;
      for (const auto& d : u) ids.insert(d.id);
      for (const auto& d : fo) a.subset = a.subset && ids.count(d.id);
      v.push_back(a);
    }
    return v;
  }();
  return out;
}

Outcome ablation_trend() {
  int ok = 0;
  std::string detail;
  for (const auto& a : ablation()) {
    const double gain = a.unconstrained ? 100.0 * (double(a.aligned) / a.unconstrained - 1.0) : 0.0;
    const bool pass = a.aligned >= 1.15 * a.unconstrained && a.dist_aligned < a.dist_unconstrained;
    ok += pass;
    detail += fmt("%sseed %llu: %zu vs %zu (%+.1f%%), %.2f vs %.2f cm", detail.empty() ? "" : "; ",
                  static_cast<unsigned long long>(a.seed), a.aligned, a.unconstrained, gain,
                  a.dist_aligned, a.dist_unconstrained);
  }
  return {ok == 5, fmt("%d/5 seeds; ", ok) + detail};
}

Outcome filter_subset() {
  const CleanRun& c = clean_run();
  std::set<std::string> ids;
  for (const auto& d : c.unconstrained.survivors()) ids.insert(d.id);
  std::size_t outside = 0;
  const auto fo = c.filter_only.survivors();
  for (const auto& d : fo) outside += ids.count(d.id) == 0;
  int noisy_ok = 0;
  std::size_t noisy_fo = 0, noisy_u = 0;
  for (const auto& a : ablation()) {
    noisy_ok += a.subset;
    noisy_fo += a.filter_only;
    noisy_u += a.unconstrained;
  }
  return {outside == 0 && noisy_ok == 5,
          fmt("clean: %zu filter-only survivors, %zu outside the %zu unconstrained; noisy: %d/5 "
              "seeds hold (%zu within %zu)",
              fo.size(), outside, ids.size(), noisy_ok, noisy_fo, noisy_u)};
}

// --- 9 -----------------------------------------------------------------------

Outcome gradient_check() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const CameraIntrinsics cam = camera(700, 640, 480);
  int ok = 0, total = 0;
  double worst = 0.0;
  auto check = [&](const ResidualProblem& p, const Eigen::VectorXd& x) {
    const Eigen::MatrixXd J = numeric_jacobian(p, x, 1e-6);
    const Eigen::MatrixXd O = forward_jacobian(p, x, 1e-8);
    const double rel = (J - O).norm() / std::max(O.norm(), 1e-12);
    worst = std::max(worst, rel);
    ++total;
    ok += rel <= 1e-4;
  };
  for (int i = 0; i < 50; ++i) {
    const RigidTransform view = look_at(Vec3(u(rng), u(rng), 0), Vec3(u(rng), u(rng), 3), Vec3(0, 1, 0));
    const AlignmentFrame frame = alignment_rotation(Vec3(0.3 * (u(rng) - 0.5), 0.3 * (u(rng) - 0.5), -1).normalized());
    Eigen::VectorXd x(6);
    x << 0.1 * (u(rng) - 0.5), 0.1 * (u(rng) - 0.5), 2 * kPi * (u(rng) - 0.5), 0, 0, 0;
    x.tail<3>() = frame.L.rotation.transpose() * Vec3(u(rng) - 0.5, u(rng) - 0.5, 3.0);
    std::vector<Correspondence> corrs;
    for (int k = 0; k < 4; ++k) {
      const double t = kPi / 2 * k + 0.3;
      corrs.push_back({Vec3(0.3 * std::cos(t), 0.3 * std::sin(t), 0),
                       Vec2(320 + 200 * (u(rng) - 0.5), 240 + 200 * (u(rng) - 0.5))});
    }
    check(make_pnp_problem(corrs, cam, view, frame), x);
  }
  for (int i = 0; i < 50; ++i) {
    const RigidTransform view;
    const AlignmentFrame frame = alignment_rotation(Vec3(0, 0, -1));
    std::vector<Vec2> px;
    const Vec2 c(320 + 100 * (u(rng) - 0.5), 240 + 100 * (u(rng) - 0.5));
    for (int k = 0; k < 40; ++k) {
      const double t = 2 * kPi * k / 40;
      px.push_back(c + Vec2(60 * std::cos(t), 40 * std::sin(t)));
    }
    const CircleProblem cp = make_circle_problem(px, 0.15, cam, view, frame);
    Eigen::VectorXd x(6);
    x.head<3>() = 0.4 * random_unit(rng) * u(rng);
    x.tail<3>() = frame.L.rotation.transpose() *
                  Vec3(0.3 * (u(rng) - 0.5), 0.3 * (u(rng) - 0.5), 2.5 + u(rng));
    if (cp.count_parallel_rays(x) > 0) {
      --i;
      continue;
    }
    check(cp.problem, x);
  }
  return {ok == total && total == 100,
          fmt("%d/%d evaluation points within 1e-4 (worst %.2e)", ok, total, worst)};
}

// --- 10 ----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "lampdet_acceptance_determinism";
  fs::remove_all(root);
  HallwayOptions opt;
  opt.frames = 60;
  opt.contour_jitter = 1.5;
  opt.distractors = 3;
  opt.seed = 3;
  write_dataset(root / "data", hallway_scene(opt), hallway_trajectory(opt), 2);

  std::vector<std::string> names;
  std::vector<std::map<std::string, std::string>> outputs;
  for (int rep = 0; rep < 2; ++rep) {
    Config c;
    c.set("input.dataset", (root / "data").string());
    c.set("output.dir", (root / ("run" + std::to_string(rep))).string());
    c.set("run.workers", 2.0);
    c.set("run.seed", 3.0);
    const PipelineConfig cfg = PipelineConfig::from_config(c, root);
    const DetectionLog log = run_detect(cfg);
    run_eval(read_log(cfg.out_dir / "detections.jsonl"), cfg, cfg.out_dir);
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(cfg.out_dir))
      files[e.path().filename().string()] = slurp(e.path());
    outputs.push_back(std::move(files));
  }
  int same = 0;
  for (const auto& [name, body] : outputs[0]) {
    const auto it = outputs[1].find(name);
    same += it != outputs[1].end() && it->second == body;
  }
  const bool ok = outputs[0].size() == outputs[1].size() && same == static_cast<int>(outputs[0].size()) &&
                  outputs[0].count("detections.jsonl") && outputs[0].count("report.json");
  fs::remove_all(root);
  return {ok, fmt("%d/%zu output files byte-identical across two runs", same, outputs[0].size())};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"alignment exactness", alignment_exactness},
      {"DOF reduction", dof_reduction},
      {"directional chamfer field", ddf_exact},
      {"circle estimator oracle", circle_oracle},
      {"reprojection filter", reprojection_filter},
      {"zero-noise end-to-end", zero_noise_end_to_end},
      {"ablation trend", ablation_trend},
      {"filter subset", filter_subset},
      {"gradient check", gradient_check},
      {"determinism", determinism},
  };
  int failed = 0, index = 0;
  for (const auto& c : criteria) {
    ++index;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", index, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
