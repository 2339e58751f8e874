#include "lampdet/geom.hpp"

#include "lampdet/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace lampdet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidRotation: return "InvalidRotation";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::InvalidNormal: return "InvalidNormal";
    case ErrorCode::NonFiniteResidual: return "NonFiniteResidual";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::NonCoplanarSurface: return "NonCoplanarSurface";
    case ErrorCode::NoCeilingAvailable: return "NoCeilingAvailable";
    case ErrorCode::DegenerateBlob: return "DegenerateBlob";
    case ErrorCode::TooFewVertices: return "TooFewVertices";
    case ErrorCode::EllipseFitFailure: return "EllipseFitFailure";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::NoValidPose: return "NoValidPose";
    case ErrorCode::ShapeModelMismatch: return "ShapeModelMismatch";
    case ErrorCode::RaysParallelToPlane: return "RaysParallelToPlane";
    case ErrorCode::EstimationFailed: return "EstimationFailed";
    case ErrorCode::NoVisibleTemplate: return "NoVisibleTemplate";
    case ErrorCode::RayParallelToPlane: return "RayParallelToPlane";
    case ErrorCode::ProjectedAtCenter: return "ProjectedAtCenter";
    case ErrorCode::TooManyDegeneratePoints: return "TooManyDegeneratePoints";
    case ErrorCode::StateUndetermined: return "StateUndetermined";
    case ErrorCode::InvalidPath: return "InvalidPath";
    case ErrorCode::IngestError: return "IngestError";
    case ErrorCode::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<     0.0, -v.z(),  v.y(),
         v.z(),    0.0, -v.x(),
        -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

Mat3 rodrigues(const RotVec& w) {
  const double theta = w.norm();
  const Mat3 K = skew(w);
  if (theta < 1e-8) {
    return Mat3::Identity() + K + 0.5 * K * K;
  }
  const Vec3 a = w / theta;
  const Mat3 A = skew(a);
  return Mat3::Identity() + std::sin(theta) * A + (1.0 - std::cos(theta)) * A * A;
}

void check_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) {
    throw Error(ErrorCode::InvalidRotation, "non-finite rotation matrix");
  }
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = R.determinant();
  if (ortho > tol || std::abs(det - 1.0) > tol) {
    std::ostringstream os;
    os << "orthonormality error " << ortho << ", det " << det;
    throw Error(ErrorCode::InvalidRotation, os.str());
  }
}

RotVec log_map(const Mat3& R) {
  check_rotation(R);
  const Vec3 v(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));  // 2 sin(theta) a
  const double c = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double s = 0.5 * v.norm();
  const double theta = std::atan2(s, c);

  if (theta < 1e-8) {
    return 0.5 * v * (1.0 + theta * theta / 6.0);
  }
  if (std::numbers::pi - theta > 0.1) {
    return (theta / (2.0 * std::sin(theta))) * v;
  }
  // Near pi the skew part vanishes; recover the axis from the symmetric part.
  const Mat3 S = 0.5 * (R + R.transpose()) - c * Mat3::Identity();
  const Mat3 aat = S / (1.0 - c);
  int k = 0;
  aat.diagonal().maxCoeff(&k);
  Vec3 a = aat.col(k) / std::sqrt(std::max(aat(k, k), 1e-300));
  a.normalize();
  if (a.dot(v) < 0.0) a = -a;
  return theta * a;
}

RotVec canonicalize(const RotVec& w) {
  const double theta = w.norm();
  if (theta == 0.0) return RotVec::Zero();
  const double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(theta, two_pi);
  Vec3 axis = w / theta;
  if (wrapped > std::numbers::pi) {
    wrapped = two_pi - wrapped;
    axis = -axis;
  }
  return axis * wrapped;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  return {rotation * rhs.rotation, rotation * rhs.translation + translation};
}

bool CameraIntrinsics::has_distortion() const {
  for (double d : distortion) {
    if (d != 0.0) return true;
  }
  return false;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::ValidationError, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::ValidationError, "image size must be positive");
  }
}

Vec2 distort(const CameraIntrinsics& camera, const Vec2& n) {
  const auto& d = camera.distortion;
  const double x = n.x();
  const double y = n.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (d[0] + r2 * (d[1] + r2 * d[4]));
  const double xd = x * radial + 2.0 * d[2] * x * y + d[3] * (r2 + 2.0 * x * x);
  const double yd = y * radial + d[2] * (r2 + 2.0 * y * y) + 2.0 * d[3] * x * y;
  return {xd, yd};
}

Vec2 undistort(const CameraIntrinsics& camera, const Vec2& pixel) {
  const Vec2 distorted((pixel.x() - camera.cx) / camera.fx, (pixel.y() - camera.cy) / camera.fy);
  if (!camera.has_distortion()) return distorted;
  Vec2 n = distorted;
  for (int it = 0; it < 50; ++it) {
    const Vec2 err = distort(camera, n) - distorted;
    n -= err;
    if (err.norm() < 1e-14) break;
  }
  return n;
}

Vec2 project_camera_point(const CameraIntrinsics& camera, const Vec3& pc) {
  if (!(pc.z() > 1e-9)) {
    throw Error(ErrorCode::BehindCamera, "point has non-positive depth");
  }
  Vec2 n(pc.x() / pc.z(), pc.y() / pc.z());
  if (camera.has_distortion()) n = distort(camera, n);
  return {camera.fx * n.x() + camera.cx, camera.fy * n.y() + camera.cy};
}

Vec2 project(const CameraIntrinsics& camera, const RigidTransform& view,
             const RigidTransform& model, const Vec3& p) {
  return project_camera_point(camera, view.apply(model.apply(p)));
}

Vec3 camera_center(const RigidTransform& view) {
  return -(view.rotation.transpose() * view.translation);
}

Vec3 pixel_ray(const CameraIntrinsics& camera, const RigidTransform& view, const Vec2& pixel) {
  const Vec2 n = undistort(camera, pixel);
  return view.rotation.transpose() * Vec3(n.x(), n.y(), 1.0);
}

AlignmentFrame alignment_rotation(const Vec3& normal) {
  if (!normal.allFinite() || std::abs(normal.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidNormal, "alignment normal must be a unit vector");
  }
  const Vec3 lp = Vec3::UnitZ().cross(normal);
  const double s = lp.norm();
  const double c = normal.z();

  AlignmentFrame frame;
  frame.normal = normal;
  if (s < 1e-9 && c < 0.0) {
    frame.l = RotVec(std::numbers::pi, 0.0, 0.0);
  } else if (s == 0.0) {
    frame.l = RotVec::Zero();
  } else {
    frame.l = lp * (std::atan2(s, c) / s);
  }
  frame.L = RigidTransform{rodrigues(frame.l), Vec3::Zero()};
  return frame;
}

ConstrainedDecomposition constrain_pose(const RigidTransform& model, const AlignmentFrame& frame) {
  const Mat3 Lt = frame.L.rotation.transpose();
  const RotVec w = log_map(Lt * model.rotation);
  ConstrainedDecomposition out;
  out.params.wz = w.z();
  out.params.t = Lt * model.translation;
  out.params.frame = frame;
  out.discarded_wx = w.x();
  out.discarded_wy = w.y();
  return out;
}

RigidTransform compose_aligned(const AlignmentFrame& frame, const RotVec& w, const Vec3& t) {
  return frame.L * RigidTransform{rodrigues(w), t};
}

RigidTransform restore_pose(const ConstrainedPoseParams& params) {
  return compose_aligned(params.frame, RotVec(0.0, 0.0, params.wz), params.t);
}

double z_axis_angle(const RigidTransform& model, const Vec3& normal) {
  const Vec3 z = model.rotation.col(2);
  return std::atan2(z.cross(normal).norm(), z.dot(normal));
}

}  // namespace lampdet
