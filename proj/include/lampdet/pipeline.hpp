#pragma once

#include "lampdet/bim.hpp"
#include "lampdet/cluster.hpp"
#include "lampdet/config.hpp"
#include "lampdet/detection.hpp"
#include "lampdet/image.hpp"
#include "lampdet/models.hpp"
#include "lampdet/optim.hpp"
#include "lampdet/pose.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lampdet {

enum class Mode { Unconstrained, FilterOnly, FilterAndAlignment };

const char* to_string(Mode m);
/// Accepts the to_string names plus a few aliases ("filter", "aligned", "full").
Mode mode_from_string(const std::string& s);
inline constexpr Mode kAllModes[] = {Mode::Unconstrained, Mode::FilterOnly,
                                     Mode::FilterAndAlignment};

struct PipelineConfig {
  std::filesystem::path poses;       // poses.json: camera + per-frame views
  std::filesystem::path models;      // models.json
  std::filesystem::path building;    // building.json
  std::filesystem::path references;  // optional references.json
  std::filesystem::path frames_dir;  // optional directory of numbered .pgm frames
  std::filesystem::path out_dir = "out";
  Mode mode = Mode::FilterAndAlignment;
  int workers = 1;
  std::uint64_t seed = 1;

  // shapes
  int blob_threshold = 220;
  int dim_threshold = 45;  // second pass for unlit lamps; blobs reaching blob_threshold are skipped
  int min_area = 100;
  double shape_threshold = 14.0;
  double simplify_eps = 2.5;

  // pose
  PrefilterLimits prefilter;
  int lm_max_iterations = 100;
  double lm_initial_damping = 1e-6;

  // chamfer
  int channels = 60;
  double lambda = 100.0;
  double grad_threshold = 15.0;
  double score_threshold = 5.0;
  double roi_dilation = 0.2;
  int refine_iterations = 30;
  double template_step_px = 1.5;

  // filter
  double threshold_polygonal = 0.015;
  double threshold_circular = 0.035;
  int on_threshold = 200;

  // cluster / eval
  double cluster_radius = 0.5;
  double match_radius = 1.0;

  /// Receives every optimiser summary; may be called from several worker threads.
  std::function<void(const SolveSummary&)> on_solve;

  /// Reads keys from a parsed config file; relative paths resolve against `base_dir`.
  static PipelineConfig from_config(const Config& cfg, const std::filesystem::path& base_dir);
  void validate() const;
};

struct FrameInput {
  int index = 0;
  RigidTransform view;
  std::filesystem::path image;  // empty when `pixels` is supplied
  std::optional<GrayImage> pixels;
};

struct Dataset {
  CameraIntrinsics camera;
  std::vector<FrameInput> frames;
  std::vector<LampModel> models;
  BuildingModel building;
};

/// Loads poses, models and building; any missing or malformed input raises IngestError.
Dataset load_dataset(const PipelineConfig& cfg);

/// One line of the detection log. Shapes that never reach a pose carry no detection.
struct LogRecord {
  int frame = 0;
  int shape = 0;
  std::string stage;   // "accepted" or the stage that rejected the shape
  std::string reason;  // free text for rejections
  std::optional<Detection> detection;

  bool survived() const { return stage == "accepted"; }
};

struct DetectionLog {
  Mode mode = Mode::FilterAndAlignment;
  std::vector<LogRecord> records;
  int frames = 0;
  int unreadable_frames = 0;

  std::vector<Detection> survivors() const;
  std::string to_jsonl() const;
};

nlohmann::json to_json(const LogRecord& r);
LogRecord log_record_from_json(const nlohmann::json& j);
DetectionLog read_log(const std::filesystem::path& path);

/// Runs every requested mode on one frame, sharing the edge map and distance field.
std::vector<std::vector<LogRecord>> detect_frame(const GrayImage& img, const RigidTransform& view,
                                                 int frame, const Dataset& data,
                                                 const PipelineConfig& cfg,
                                                 const std::vector<Mode>& modes);

/// All frames for the listed modes, merged in frame order; one log per mode.
std::vector<DetectionLog> detect_modes(const Dataset& data, const PipelineConfig& cfg,
                                       const std::vector<Mode>& modes);

/// Loads the dataset, runs cfg.mode and writes out_dir/detections.jsonl.
DetectionLog run_detect(const PipelineConfig& cfg);

struct EvalOutput {
  std::vector<Cluster> clusters;
  EvalReport report;
};

/// Clusters survivors, evaluates against references when available and writes
/// report.json plus CSV tables into `out_dir`.
EvalOutput run_eval(const DetectionLog& log, const PipelineConfig& cfg,
                    const std::filesystem::path& out_dir);

/// Three modes on shared frames; per-mode outputs in out_dir/<mode>/ and comparison.csv.
std::vector<EvalOutput> run_all_modes(const PipelineConfig& cfg);

}  // namespace lampdet
