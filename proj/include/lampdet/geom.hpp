#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>

namespace lampdet {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Axis-angle rotation vector: direction is the axis, norm is the angle in radians.
using RotVec = Eigen::Vector3d;

Mat3 skew(const Vec3& v);

/// Exponential map so(3) -> SO(3).
Mat3 rodrigues(const RotVec& w);

/// Logarithm SO(3) -> so(3). Result has norm in [0, pi].
/// Throws InvalidRotation when R is not orthonormal with det +1 (tolerance 1e-9).
RotVec log_map(const Mat3& R);

/// Wraps the angle into [0, pi], flipping the axis when needed.
RotVec canonicalize(const RotVec& w);

/// Throws InvalidRotation unless R^T R = I and det R = 1 to `tol`.
void check_rotation(const Mat3& R, double tol = 1e-9);

/// Rigid transform x -> rotation * x + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_rotvec(const RotVec& w, const Vec3& t) { return {rodrigues(w), t}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;
  RotVec rotvec() const { return log_map(rotation); }
};

/// Pinhole camera with optional Brown-Conrady distortion, stored in the usual
/// (k1, k2, p1, p2, k3) order and applied after the perspective divide.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  std::array<double, 5> distortion{};

  bool has_distortion() const;
  void validate() const;
};

/// Normalized image coordinates -> distorted normalized coordinates.
Vec2 distort(const CameraIntrinsics& camera, const Vec2& normalized);
/// Pixel -> undistorted normalized coordinates (fixed-point inversion).
Vec2 undistort(const CameraIntrinsics& camera, const Vec2& pixel);

/// Projects a point given in camera coordinates. Throws BehindCamera for z <= 1e-9.
Vec2 project_camera_point(const CameraIntrinsics& camera, const Vec3& pc);

/// Full chain pixel = P * V * M * p.
Vec2 project(const CameraIntrinsics& camera, const RigidTransform& view,
             const RigidTransform& model, const Vec3& p);

/// World position of the camera centre for a world->camera transform.
Vec3 camera_center(const RigidTransform& view);
/// World-frame direction of the viewing ray through a pixel (not normalized, z_cam = 1).
Vec3 pixel_ray(const CameraIntrinsics& camera, const RigidTransform& view, const Vec2& pixel);

struct Plane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();

  double signed_distance(const Vec3& p) const { return normal.dot(p - point); }
};

/// Rotation L taking the z axis onto a plane normal, with its rotation vector l.
struct AlignmentFrame {
  Vec3 normal = Vec3::UnitZ();
  RotVec l = RotVec::Zero();
  RigidTransform L;
};

AlignmentFrame alignment_rotation(const Vec3& normal);

/// Pose restricted to rotations about the aligned z axis.
/// The full pose is frame.L * (Rz(wz), t); t is expressed in the aligned frame.
struct ConstrainedPoseParams {
  double wz = 0.0;
  Vec3 t = Vec3::Zero();
  AlignmentFrame frame;
};

struct ConstrainedDecomposition {
  ConstrainedPoseParams params;
  double discarded_wx = 0.0;
  double discarded_wy = 0.0;
};

ConstrainedDecomposition constrain_pose(const RigidTransform& model, const AlignmentFrame& frame);
RigidTransform restore_pose(const ConstrainedPoseParams& params);

/// frame.L * (rodrigues(w), t). With w = (0, 0, wz) this is restore_pose.
RigidTransform compose_aligned(const AlignmentFrame& frame, const RotVec& w, const Vec3& t);

/// Angle in [0, pi] between the model z axis (third rotation column) and `normal`.
double z_axis_angle(const RigidTransform& model, const Vec3& normal);

}  // namespace lampdet
