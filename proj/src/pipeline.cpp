#include "lampdet/pipeline.hpp"

#include "lampdet/chamfer.hpp"
#include "lampdet/error.hpp"
#include "lampdet/filter.hpp"
#include "lampdet/io.hpp"
#include "lampdet/shapes.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace lampdet {

using nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(Mode m) {
  switch (m) {
    case Mode::Unconstrained: return "unconstrained";
    case Mode::FilterOnly: return "filter-only";
    case Mode::FilterAndAlignment: return "filter-alignment";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  std::string k;
  for (char c : s) k += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (k == "unconstrained" || k == "none" || k == "baseline") return Mode::Unconstrained;
  if (k == "filter" || k == "filter-only" || k == "filter_only") return Mode::FilterOnly;
  if (k == "filter+alignment" || k == "filter-alignment" || k == "aligned" || k == "full" ||
      k == "alignment")
    return Mode::FilterAndAlignment;
  throw Error(ErrorCode::ValidationError, "unknown mode '" + s + "'");
}

PipelineConfig PipelineConfig::from_config(const Config& c, const fs::path& base_dir) {
  PipelineConfig p;
  auto path = [&](const char* key, const fs::path& fallback) {
    if (!c.has(key)) return fallback;
    fs::path v = c.get_string(key, "");
    return v.is_absolute() ? v : base_dir / v;
  };
  fs::path data = path("input.dataset", fs::path());
  auto in_data = [&](const char* name) { return data.empty() ? fs::path() : data / name; };
  p.poses = path("input.poses", in_data("poses.json"));
  p.models = path("input.models", in_data("models.json"));
  p.building = path("input.building", in_data("building.json"));
  p.references = path("input.references", in_data("references.json"));
  p.frames_dir = path("input.frames", fs::path());
  p.out_dir = path("output.dir", p.out_dir);
  if (c.has("run.mode")) p.mode = mode_from_string(c.get_string("run.mode", ""));
  p.workers = c.get_int("run.workers", p.workers);
  p.seed = static_cast<std::uint64_t>(c.get_double("run.seed", static_cast<double>(p.seed)));

  p.blob_threshold = c.get_int("shapes.blob_threshold", p.blob_threshold);
  p.dim_threshold = c.get_int("shapes.dim_threshold", p.dim_threshold);
  p.min_area = c.get_int("shapes.min_area", p.min_area);
  p.shape_threshold = c.get_double("shapes.shape_threshold", p.shape_threshold);
  p.simplify_eps = c.get_double("shapes.simplify_eps", p.simplify_eps);

  const double deg = 3.14159265358979323846 / 180.0;
  p.prefilter.max_tilt = c.get_double("pose.max_tilt_deg", p.prefilter.max_tilt / deg) * deg;
  p.prefilter.height_band = c.get_double("pose.height_band", p.prefilter.height_band);
  p.prefilter.min_size_ratio = c.get_double("pose.min_size_ratio", p.prefilter.min_size_ratio);
  p.prefilter.max_size_ratio = c.get_double("pose.max_size_ratio", p.prefilter.max_size_ratio);
  p.lm_max_iterations = c.get_int("pose.lm_max_iterations", p.lm_max_iterations);
  p.lm_initial_damping = c.get_double("pose.lm_initial_damping", p.lm_initial_damping);

  p.channels = c.get_int("chamfer.channels", p.channels);
  p.lambda = c.get_double("chamfer.lambda", p.lambda);
  p.grad_threshold = c.get_double("chamfer.grad_threshold", p.grad_threshold);
  p.score_threshold = c.get_double("chamfer.score_threshold", p.score_threshold);
  p.roi_dilation = c.get_double("chamfer.roi_dilation", p.roi_dilation);
  p.refine_iterations = c.get_int("chamfer.refine_iterations", p.refine_iterations);
  p.template_step_px = c.get_double("chamfer.template_step_px", p.template_step_px);

  p.threshold_polygonal = c.get_double("reprojection.threshold_polygonal", p.threshold_polygonal);
  p.threshold_circular = c.get_double("reprojection.threshold_circular", p.threshold_circular);
  p.on_threshold = c.get_int("state.on_threshold", p.on_threshold);

  p.cluster_radius = c.get_double("cluster.radius", p.cluster_radius);
  p.match_radius = c.get_double("eval.match_radius", p.match_radius);
  p.validate();
  return p;
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::ValidationError, m); };
  if (workers < 1) fail("workers must be >= 1");
  if (blob_threshold < 1 || blob_threshold > 255) fail("blob_threshold outside [1, 255]");
  if (dim_threshold < 0 || dim_threshold > 255) fail("dim_threshold outside [0, 255]");
  if (min_area < 1) fail("min_area must be positive");
  if (!(shape_threshold > 4.0 * 3.14159265358979323846)) fail("shape_threshold must exceed 4*pi");
  if (!(simplify_eps > 0)) fail("simplify_eps must be positive");
  if (!(prefilter.max_tilt > 0) || !(prefilter.height_band > 0)) fail("prefilter limits");
  if (!(prefilter.min_size_ratio > 0) || !(prefilter.max_size_ratio >= prefilter.min_size_ratio))
    fail("prefilter size ratio");
  if (channels < 1) fail("chamfer channels must be >= 1");
  if (!(lambda >= 0)) fail("lambda must be >= 0");
  if (!(score_threshold > 0)) fail("score_threshold must be positive");
  if (!(roi_dilation >= 0)) fail("roi_dilation must be >= 0");
  if (!(template_step_px > 0)) fail("template_step_px must be positive");
  if (!(threshold_polygonal > 0) || !(threshold_circular > 0)) fail("reprojection thresholds");
  if (!(cluster_radius > 0) || !(match_radius > 0)) fail("radii must be positive");
}

Dataset load_dataset(const PipelineConfig& cfg) {
  Dataset d;
  try {
    if (cfg.models.empty() || !fs::exists(cfg.models))
      throw Error(ErrorCode::IngestError, "models file not found: " + cfg.models.string());
    d.models = load_models(cfg.models);
    d.building = load_building(cfg.building);
    const json doc = read_json(cfg.poses);
    d.camera = camera_from_json(doc.at("camera"));
    const fs::path root = cfg.poses.parent_path();
    for (const auto& f : doc.at("frames")) {
      FrameInput in;
      in.index = f.at("index").get<int>();
      in.view = transform_from_json(f.at("view"));
      fs::path img = f.at("image").get<std::string>();
      in.image = img.is_absolute() ? img : root / img;
      d.frames.push_back(std::move(in));
    }
    if (!cfg.frames_dir.empty()) {
      // numbered frames in a directory replace the image paths, in sorted order
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(cfg.frames_dir))
        if (e.path().extension() == ".pgm") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      if (files.size() < d.frames.size())
        throw Error(ErrorCode::IngestError, "fewer frames than poses in " + cfg.frames_dir.string());
      for (std::size_t i = 0; i < d.frames.size(); ++i) d.frames[i].image = files[i];
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IngestError) throw;
    throw Error(ErrorCode::IngestError, e.what());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IngestError, std::string("poses: ") + e.what());
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorCode::IngestError, e.what());
  }
  if (d.models.empty()) throw Error(ErrorCode::IngestError, "no lamp models");
  return d;
}

// ---------------------------------------------------------------------------

std::vector<Detection> DetectionLog::survivors() const {
  std::vector<Detection> out;
  for (const auto& r : records)
    if (r.survived() && r.detection) out.push_back(*r.detection);
  return out;
}

namespace {

json pose_json(const RigidTransform& t) {
  json j = to_json(t);
  const RotVec w = t.rotvec();
  j["rotvec"] = {w.x(), w.y(), w.z()};
  return j;
}

}  // namespace

json to_json(const LogRecord& r) {
  json j = {{"frame", r.frame}, {"shape", r.shape}, {"stage", r.stage}};
  if (!r.reason.empty()) j["reason"] = r.reason;
  if (r.detection) {
    const Detection& d = *r.detection;
    j["id"] = d.id;
    j["model"] = d.model_id;
    j["model_index"] = d.model_index;
    j["kind"] = d.kind == ShapeKind::Circular ? "circular" : "polygonal";
    j["pose"] = pose_json(d.pose);
    j["plane"] = {{"point", to_json(d.plane.point)}, {"normal", to_json(d.plane.normal)}};
    j["constrained"] = d.constrained;
    j["state"] = to_string(d.state);
    j["chamfer_score"] = d.chamfer_score;
    j["reprojection_error"] =
        std::isfinite(d.reprojection_error) ? json(d.reprojection_error) : json(nullptr);
    j["area"] = d.area;
    j["passed_score"] = d.passed_score;
    j["passed_reprojection"] = d.passed_reprojection;
  }
  return j;
}

LogRecord log_record_from_json(const json& j) {
  LogRecord r;
  try {
    r.frame = j.at("frame").get<int>();
    r.shape = j.at("shape").get<int>();
    r.stage = j.at("stage").get<std::string>();
    r.reason = j.value("reason", std::string());
    if (j.contains("id")) {
      Detection d;
      d.id = j.at("id").get<std::string>();
      d.frame = r.frame;
      d.shape_index = r.shape;
      d.model_id = j.at("model").get<std::string>();
      d.model_index = j.at("model_index").get<int>();
      d.kind = j.at("kind").get<std::string>() == "circular" ? ShapeKind::Circular
                                                             : ShapeKind::Polygonal;
      d.pose = transform_from_json(j.at("pose"));
      d.plane.point = vec3_from_json(j.at("plane").at("point"));
      d.plane.normal = vec3_from_json(j.at("plane").at("normal"));
      d.constrained = j.at("constrained").get<bool>();
      const std::string s = j.at("state").get<std::string>();
      d.state = s == "on" ? LampState::On : s == "off" ? LampState::Off : LampState::Unknown;
      d.chamfer_score = j.at("chamfer_score").get<double>();
      const json& e = j.at("reprojection_error");
      d.reprojection_error =
          e.is_null() ? std::numeric_limits<double>::infinity() : e.get<double>();
      d.area = j.at("area").get<double>();
      d.passed_score = j.at("passed_score").get<bool>();
      d.passed_reprojection = j.at("passed_reprojection").get<bool>();
      r.detection = d;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("log record: ") + e.what());
  }
  return r;
}

std::string DetectionLog::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

DetectionLog read_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  DetectionLog log;
  std::string line;
  int max_frame = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
    }
    log.records.push_back(log_record_from_json(j));
    max_frame = std::max(max_frame, log.records.back().frame);
    if (log.records.back().detection && log.records.back().detection->constrained)
      log.mode = Mode::FilterAndAlignment;
  }
  log.frames = max_frame + 1;
  return log;
}

// ---------------------------------------------------------------------------

namespace {

struct ShapeInput {
  Blob blob;
  bool dim = false;
};

std::vector<ShapeInput> collect_shapes(const GrayImage& img, const PipelineConfig& cfg) {
  std::vector<ShapeInput> out;
  for (auto& b : extract_blobs(img, cfg.blob_threshold, cfg.min_area))
    out.push_back({std::move(b), false});
  if (cfg.dim_threshold > 0 && cfg.dim_threshold < cfg.blob_threshold) {
    for (auto& b : extract_blobs(img, cfg.dim_threshold, cfg.min_area))
      if (b.max_intensity < cfg.blob_threshold) out.push_back({std::move(b), true});
  }
  return out;
}

bool compatible(const ShapeObservation& s, const LampModel& m) {
  if (s.kind == ShapeKind::Circular) return m.face.is_circle();
  return !m.face.is_circle() && m.face.vertices.size() == s.vertices.size();
}

LMOptions lm_options(const PipelineConfig& cfg, int max_iterations) {
  LMOptions lm;
  lm.max_iterations = max_iterations;
  lm.initial_damping = cfg.lm_initial_damping;
  lm.on_solve = cfg.on_solve;
  return lm;
}

// Frame-local state shared by all modes: shapes and the lazily built field.
struct FrameContext {
  const GrayImage& img;
  const RigidTransform& view;
  const Dataset& data;
  const PipelineConfig& cfg;
  std::vector<ShapeObservation> shapes;
  std::vector<std::string> shape_errors;
  std::optional<DirectionalDistanceField> field;

  const DirectionalDistanceField& ddf() {
    if (!field) field = build_ddf(detect_edges(img, cfg.grad_threshold), cfg.channels, cfg.lambda);
    return *field;
  }
};

LogRecord process_shape(FrameContext& fc, int frame, int s, Mode mode) {
  LogRecord rec;
  rec.frame = frame;
  rec.shape = s;
  if (!fc.shape_errors[s].empty()) {
    rec.stage = "shape";
    rec.reason = fc.shape_errors[s];
    return rec;
  }
  const ShapeObservation& shape = fc.shapes[s];
  const auto& models = fc.data.models;
  const auto& cam = fc.data.camera;
  const bool constrained = mode == Mode::FilterAndAlignment;
  const LMOptions lm = lm_options(fc.cfg, fc.cfg.lm_max_iterations);

  std::vector<PoseCandidate> alternatives;
  std::string last_error;
  int tried = 0;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const LampModel& model = models[m];
    if (!compatible(shape, model)) continue;
    ++tried;
    try {
      const Vec3 approx = approximate_position(shape, model, cam, fc.view);
      const Plane plane = reference_plane(fc.data.building, approx, model.mounting);
      PoseCandidate c =
          shape.kind == ShapeKind::Circular
              ? estimate_circular(shape, model, cam, fc.view, plane, constrained, lm)
              : estimate_polygonal(shape, model, cam, fc.view, plane, constrained, lm);
      c.model_index = static_cast<int>(m);
      c.model_id = model.id;
      if (passes_prefilter(c, fc.cfg.prefilter))
        alternatives.push_back(std::move(c));
      else
        last_error = "prefilter";
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  if (tried == 0) {
    rec.stage = "model";
    rec.reason = "no compatible model";
    return rec;
  }
  if (alternatives.empty()) {
    rec.stage = last_error == "prefilter" ? "prefilter" : "estimation";
    rec.reason = last_error;
    return rec;
  }

  const DirectionalDistanceField& field = fc.ddf();
  ModelSelection sel;
  try {
    sel = select_model(alternatives, models, field, cam, fc.view, fc.cfg.roi_dilation);
  } catch (const Error& e) {
    rec.stage = "selection";
    rec.reason = e.what();
    return rec;
  }
  const PoseCandidate& cand = alternatives[sel.index];
  const LampModel& model = models[sel.model_index];

  Detection d;
  d.id = std::to_string(frame) + ":" + std::to_string(s);
  d.frame = frame;
  d.shape_index = s;
  d.model_index = sel.model_index;
  d.model_id = model.id;
  d.kind = shape.kind;
  d.plane = cand.plane;
  d.constrained = constrained;
  d.area = shape.area;
  d.pose = cand.pose;
  d.chamfer_score = sel.score;

  try {
    const double spacing = template_spacing(cand.pose, cam, fc.view, fc.cfg.template_step_px);
    const TemplateEdges tmpl = sample_template(model.edge_template, spacing);
    const RefineResult ref = refine_d2co(cand.pose, tmpl, field, cam, fc.view, cand.alignment,
                                         constrained, lm_options(fc.cfg, fc.cfg.refine_iterations));
    d.pose = ref.pose;
    d.chamfer_score = ref.score;
  } catch (const Error& e) {
    rec.stage = "refinement";
    rec.reason = e.what();
    rec.detection = d;
    return rec;
  }

  try {
    d.reprojection_error =
        shape.kind == ShapeKind::Circular
            ? reprojection_error_circle(d.pose, shape.contour.points, cam, fc.view,
                                        model.face.radius, shape.area)
            : reprojection_error_polygon(d.pose, cand.correspondences, cam, fc.view, shape.area);
  } catch (const Error&) {
    d.reprojection_error = std::numeric_limits<double>::infinity();
  }
  try {
    d.state = classify_state(fc.img, d.pose, model.face, cam, fc.view, fc.cfg.on_threshold);
  } catch (const Error&) {
    d.state = LampState::Unknown;
  }

  d.passed_score = d.chamfer_score <= fc.cfg.score_threshold;
  d.passed_reprojection =
      mode == Mode::Unconstrained ||
      passes_reprojection(d, fc.cfg.threshold_polygonal, fc.cfg.threshold_circular);
  rec.detection = d;
  if (!d.passed_score)
    rec.stage = "score";
  else if (!d.passed_reprojection)
    rec.stage = "reprojection";
  else
    rec.stage = "accepted";
  return rec;
}

}  // namespace

std::vector<std::vector<LogRecord>> detect_frame(const GrayImage& img, const RigidTransform& view,
                                                 int frame, const Dataset& data,
                                                 const PipelineConfig& cfg,
                                                 const std::vector<Mode>& modes) {
  FrameContext fc{img, view, data, cfg, {}, {}, std::nullopt};
  for (const auto& in : collect_shapes(img, cfg)) {
    try {
      const Contour c = trace_contour(in.blob);
      fc.shapes.push_back(observe_shape(c, in.blob.box, cfg.shape_threshold, cfg.simplify_eps));
      fc.shape_errors.emplace_back();
    } catch (const Error& e) {
      fc.shapes.emplace_back();
      fc.shape_errors.emplace_back(e.what());
    }
  }
  std::vector<std::vector<LogRecord>> out(modes.size());
  for (std::size_t m = 0; m < modes.size(); ++m)
    for (int s = 0; s < static_cast<int>(fc.shapes.size()); ++s)
      out[m].push_back(process_shape(fc, frame, s, modes[m]));
  return out;
}

std::vector<DetectionLog> detect_modes(const Dataset& data, const PipelineConfig& cfg,
                                       const std::vector<Mode>& modes) {
  const std::size_t n = data.frames.size();
  std::vector<std::vector<std::vector<LogRecord>>> per_frame(n);
  std::vector<char> unreadable(n, 0);
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr failure;

  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const FrameInput& f = data.frames[i];
      try {
        GrayImage img;
        if (f.pixels) {
          img = *f.pixels;
        } else {
          try {
            img = read_pgm(f.image);
          } catch (const Error&) {
            unreadable[i] = 1;
            continue;
          }
        }
        per_frame[i] = detect_frame(img, f.view, f.index, data, cfg, modes);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < cfg.workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  const int bad = static_cast<int>(std::count(unreadable.begin(), unreadable.end(), 1));
  if (n > 0 && 2 * bad > static_cast<int>(n))
    throw Error(ErrorCode::IngestError,
                std::to_string(bad) + " of " + std::to_string(n) + " frames unreadable");

  std::vector<DetectionLog> logs(modes.size());
  for (std::size_t m = 0; m < modes.size(); ++m) {
    logs[m].mode = modes[m];
    logs[m].frames = static_cast<int>(n);
    logs[m].unreadable_frames = bad;
    for (std::size_t i = 0; i < n; ++i)
      if (!per_frame[i].empty())
        for (auto& r : per_frame[i][m]) logs[m].records.push_back(std::move(r));
  }
  return logs;
}

DetectionLog run_detect(const PipelineConfig& cfg) {
  cfg.validate();
  const Dataset data = load_dataset(cfg);
  DetectionLog log = std::move(detect_modes(data, cfg, {cfg.mode}).front());
  fs::create_directories(cfg.out_dir);
  write_text(cfg.out_dir / "detections.jsonl", log.to_jsonl());
  return log;
}

namespace {

std::string confusion_csv(const ConfusionMatrix& m) {
  std::ostringstream os;
  os << "truth\\decided";
  for (const auto& l : m.labels) os << ',' << l;
  os << '\n';
  for (std::size_t r = 0; r < m.labels.size(); ++r) {
    os << m.labels[r];
    for (int c : m.counts[r]) os << ',' << c;
    os << '\n';
  }
  return os.str();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

EvalOutput run_eval(const DetectionLog& log, const PipelineConfig& cfg, const fs::path& out_dir) {
  if (log.records.empty()) throw Error(ErrorCode::ValidationError, "empty detection log");
  EvalOutput out;
  const std::vector<Detection> dets = log.survivors();
  out.clusters = cluster_detections(dets, cfg.cluster_radius);
  if (!cfg.references.empty() && fs::exists(cfg.references)) {
    ReferenceSet refs;
    try {
      refs = load_references(cfg.references);
    } catch (const Error& e) {
      throw Error(ErrorCode::IngestError, e.what());
    }
    out.report = evaluate(out.clusters, dets, refs, cfg.match_radius);
  } else {
    out.report = summarize(out.clusters);
    out.report.total_detections = static_cast<int>(dets.size());
  }

  fs::create_directories(out_dir);
  json report = to_json(out.report);
  report["mode"] = to_string(log.mode);
  report["frames"] = log.frames;
  report["unreadable_frames"] = log.unreadable_frames;
  write_json(out_dir / "report.json", report);

  std::ostringstream summary;
  summary << "metric,value\n"
          << "frames," << log.frames << '\n'
          << "detections," << out.report.total_detections << '\n'
          << "clusters," << out.report.clusters << '\n'
          << "min_members," << out.report.min_members << '\n'
          << "mean_members," << fmt(out.report.mean_members) << '\n'
          << "max_members," << out.report.max_members << '\n';
  if (out.report.has_references)
    summary << "matched," << out.report.matches.size() << '\n'
            << "false_positives," << out.report.false_positives << '\n'
            << "misses," << out.report.misses << '\n'
            << "mean_distance_cm," << fmt(out.report.mean_distance_cm) << '\n';
  write_text(out_dir / "summary.csv", summary.str());

  std::ostringstream clusters;
  clusters << "cluster,x,y,z,members,model,state,reference,distance_cm\n";
  for (std::size_t c = 0; c < out.clusters.size(); ++c) {
    const Cluster& cl = out.clusters[c];
    int ref = -1;
    double dist = 0.0;
    for (const auto& m : out.report.matches)
      if (m.cluster == static_cast<int>(c)) {
        ref = m.reference;
        dist = m.distance_cm;
      }
    clusters << c << ',' << fmt(cl.center.x()) << ',' << fmt(cl.center.y()) << ','
             << fmt(cl.center.z()) << ',' << cl.members.size() << ',' << cl.decided_model_id
             << ',' << to_string(cl.decided_state) << ',' << ref << ','
             << (ref >= 0 ? fmt(dist) : std::string()) << '\n';
  }
  write_text(out_dir / "clusters.csv", clusters.str());

  std::ostringstream scores;
  scores << "cluster,model,accumulated_score\n";
  for (std::size_t c = 0; c < out.clusters.size(); ++c)
    for (const auto& [m, v] : out.clusters[c].accumulated_scores)
      scores << c << ',' << out.clusters[c].model_ids.at(m) << ',' << fmt(v) << '\n';
  write_text(out_dir / "cluster_scores.csv", scores.str());

  if (out.report.has_references) {
    write_text(out_dir / "confusion_model.csv", confusion_csv(out.report.model_confusion));
    write_text(out_dir / "confusion_state.csv", confusion_csv(out.report.state_confusion));
    write_text(out_dir / "confusion_model_detections.csv",
               confusion_csv(out.report.detection_model_confusion));
    write_text(out_dir / "confusion_state_detections.csv",
               confusion_csv(out.report.detection_state_confusion));
  }
  return out;
}

std::vector<EvalOutput> run_all_modes(const PipelineConfig& cfg) {
  cfg.validate();
  const Dataset data = load_dataset(cfg);
  const std::vector<Mode> modes(std::begin(kAllModes), std::end(kAllModes));
  const std::vector<DetectionLog> logs = detect_modes(data, cfg, modes);
  std::vector<EvalOutput> outs;
  std::ostringstream cmp;
  cmp << "mode,detections,clusters,matched,false_positives,misses,mean_distance_cm,"
         "model_error_rate,state_error_rate\n";
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const fs::path dir = cfg.out_dir / to_string(modes[m]);
    fs::create_directories(dir);
    write_text(dir / "detections.jsonl", logs[m].to_jsonl());
    outs.push_back(run_eval(logs[m], cfg, dir));
    const EvalReport& r = outs.back().report;
    cmp << to_string(modes[m]) << ',' << r.total_detections << ',' << r.clusters << ','
        << r.matches.size() << ',' << r.false_positives << ',' << r.misses << ','
        << fmt(r.mean_distance_cm) << ',' << fmt(r.detection_model_confusion.error_rate()) << ','
        << fmt(r.detection_state_confusion.error_rate()) << '\n';
  }
  write_text(cfg.out_dir / "comparison.csv", cmp.str());
  return outs;
}

}  // namespace lampdet
