#pragma once

#include "lampdet/geom.hpp"
#include "lampdet/models.hpp"
#include "lampdet/optim.hpp"
#include "lampdet/shapes.hpp"

#include <vector>

namespace lampdet {

struct Correspondence {
  Vec3 p_obj = Vec3::Zero();  // model frame, metres
  Vec2 p_img = Vec2::Zero();  // pixels
};

/// Six-vector (wx, wy, wz, tx, ty, tz) used by every pose solve:
/// M = frame.L * (rodrigues(w), t). Constrained solves free only wz and t.
RigidTransform pose_from_params(const AlignmentFrame& frame, const Eigen::VectorXd& x);
Eigen::VectorXd params_from_pose(const AlignmentFrame& frame, const RigidTransform& model);

/// Mask freeing wz and t only.
std::vector<bool> constrained_mask();
std::vector<bool> full_mask();

/// Reprojection residuals (u, v per correspondence) over the pose six-vector.
ResidualProblem make_pnp_problem(const std::vector<Correspondence>& corrs,
                                 const CameraIntrinsics& camera, const RigidTransform& view,
                                 const AlignmentFrame& frame);

/// Circle-fit residuals ||X_i - t|| - radius over the pose six-vector, where X_i is the
/// intersection of pixel ray i with the plane through t with normal rodrigues(w) * z, all
/// in the aligned frame. Rays nearly parallel to that plane contribute zero; their count
/// at `x` can be queried with count_parallel_rays.
struct CircleProblem {
  ResidualProblem problem;
  std::vector<Vec3> rays;  // aligned frame
  Vec3 origin;             // camera centre, aligned frame
  double radius = 0.0;

  int count_parallel_rays(const Eigen::VectorXd& x) const;
};

CircleProblem make_circle_problem(const std::vector<Vec2>& pixels, double radius,
                                  const CameraIntrinsics& camera, const RigidTransform& view,
                                  const AlignmentFrame& frame);

struct PnPResult {
  RigidTransform pose;
  double cost = 0.0;  // sum of squared pixel residuals
  double rms = 0.0;
};

/// Homography seed plus LM polish. Object points must lie on the model z = 0 plane.
PnPResult solve_pnp_planar(const std::vector<Correspondence>& corrs, const CameraIntrinsics& camera,
                           const RigidTransform& view, const LMOptions& lm = {});

struct PoseCandidate {
  int model_index = -1;
  std::string model_id;
  RigidTransform pose;                // carried forward
  RigidTransform unconstrained_pose;  // before projection onto the plane
  bool constrained = false;
  ShapeObservation shape;
  Plane plane;
  AlignmentFrame alignment;
  std::vector<Correspondence> correspondences;  // polygonal faces only
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double projected_area = 0.0;  // face area after projection with `pose`, pixels^2
};

/// Polygon path: correspondence search, PnP and, when `constrained`, a 4-DOF re-solve.
PoseCandidate estimate_polygonal(const ShapeObservation& shape, const LampModel& model,
                                 const CameraIntrinsics& camera, const RigidTransform& view,
                                 const Plane& plane, bool constrained, const LMOptions& lm = {});

/// Circle path. The unconstrained fit frees the normal; the constrained one keeps it on the
/// plane normal. In-plane rotation stays at zero.
PoseCandidate estimate_circular(const ShapeObservation& shape, const LampModel& model,
                                const CameraIntrinsics& camera, const RigidTransform& view,
                                const Plane& plane, bool constrained, const LMOptions& lm = {});

/// Rough lamp position from the shape centre and its apparent size.
Vec3 approximate_position(const ShapeObservation& shape, const LampModel& model,
                          const CameraIntrinsics& camera, const RigidTransform& view);

/// Image area of the face outline under `pose`; 0 when any outline point is behind the camera.
double projected_face_area(const LampModel& model, const RigidTransform& pose,
                           const CameraIntrinsics& camera, const RigidTransform& view);

struct PrefilterLimits {
  double max_tilt = 25.0 * 3.14159265358979323846 / 180.0;  // radians
  double height_band = 0.3;                                 // metres
  double min_size_ratio = 0.5;
  double max_size_ratio = 2.0;
};

bool passes_prefilter(const PoseCandidate& c, const PrefilterLimits& limits);
std::vector<PoseCandidate> prefilter_candidates(const std::vector<PoseCandidate>& candidates,
                                                const PrefilterLimits& limits);

}  // namespace lampdet
