#pragma once

#include "lampdet/bim.hpp"
#include "lampdet/cluster.hpp"
#include "lampdet/detection.hpp"
#include "lampdet/geom.hpp"
#include "lampdet/image.hpp"
#include "lampdet/models.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lampdet {

struct LampInstance {
  int model_index = 0;
  RigidTransform pose;
  LampState state = LampState::On;
};

struct SceneSpec {
  BuildingModel building;
  std::vector<LampModel> models;
  std::vector<LampInstance> lamps;
  CameraIntrinsics camera;
  int ambient = 25;
  int on_intensity = 255;
  int off_intensity = 60;
  double noise_sigma = 0.0;     // intensity units
  double contour_jitter = 0.0;  // pixels
  int distractors = 0;          // per frame
  std::uint64_t seed = 1;
};

struct TrajectorySpec {
  std::vector<Vec2> path;  // floor-plan polyline, metres
  double speed = 1.0;      // m/s
  double frame_rate = 10.0;
  double height = 1.5;     // camera height above the floor
  double pitch_deg = 60.0; // optical axis elevation above horizontal
};

/// World-to-camera transforms (camera x right, y down, z forward), one per frame.
/// Throws InvalidPath for fewer than two distinct points or a non-positive speed/rate.
std::vector<RigidTransform> generate_trajectory(const TrajectorySpec& spec);

struct VisibleLamp {
  int lamp = 0;
  int model_index = 0;
  RigidTransform pose;
  LampState state = LampState::On;
  double projected_area = 0.0;  // inside the image, pixels^2
  bool fully_visible = false;
};

struct FrameRecord {
  GrayImage image;
  RigidTransform view;
  std::vector<VisibleLamp> visible;
  int distractors = 0;
};

/// Minimum projected area for a lamp to count as visible ground truth.
inline constexpr double kMinVisibleArea = 50.0;

FrameRecord render_frame(const SceneSpec& scene, const RigidTransform& view, int frame_index);

struct HallwayOptions {
  double tilt_deg = 0.0;  // ground-truth tilt away from the ceiling normal
  double noise_sigma = 0.0;
  double contour_jitter = 0.0;
  int distractors = 0;
  std::uint64_t seed = 1;
  int frames = 200;
};

/// Corridor with a flat 3 m ceiling and 8 lamps (square panels and round downlights);
/// the model list also holds a strip light that is not installed.
SceneSpec hallway_scene(const HallwayOptions& opt);
TrajectorySpec hallway_trajectory(const HallwayOptions& opt);

ReferenceSet scene_references(const SceneSpec& scene);

nlohmann::json to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrajectorySpec& t);
TrajectorySpec trajectory_from_json(const nlohmann::json& j);

/// Writes frames/NNNNNN.pgm, poses.json, models.json, building.json, references.json,
/// scene.json and trajectory.json under `dir`.
void write_dataset(const std::filesystem::path& dir, const SceneSpec& scene,
                   const TrajectorySpec& trajectory, int workers = 1);

}  // namespace lampdet
