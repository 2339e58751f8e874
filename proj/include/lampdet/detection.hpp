#pragma once

#include "lampdet/geom.hpp"
#include "lampdet/shapes.hpp"

#include <string>

namespace lampdet {

enum class LampState { On, Off, Unknown };

const char* to_string(LampState s);

/// Frame-level detection as it moves through the filters.
struct Detection {
  std::string id;  // "<frame>:<shape>", unique within a run
  int frame = 0;
  int shape_index = 0;
  int model_index = -1;
  std::string model_id;
  ShapeKind kind = ShapeKind::Polygonal;
  RigidTransform pose;
  Plane plane;  // reference plane the pose was aligned to
  bool constrained = false;
  LampState state = LampState::Unknown;
  double chamfer_score = 0.0;
  double reprojection_error = 0.0;  // area-normalised, see filter.hpp
  double area = 0.0;                // observed shape area, pixels^2
  bool passed_score = true;
  bool passed_reprojection = true;

  Vec3 position() const { return pose.translation; }
};

}  // namespace lampdet
