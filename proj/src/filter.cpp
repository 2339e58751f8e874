#include "lampdet/filter.hpp"

#include "lampdet/error.hpp"

#include <algorithm>
#include <cmath>

namespace lampdet {

const char* to_string(LampState s) {
  switch (s) {
    case LampState::On: return "on";
    case LampState::Off: return "off";
    case LampState::Unknown: return "unknown";
  }
  return "unknown";
}

double normalized_error(const std::vector<double>& squared_errors, double area) {
  if (squared_errors.empty() || !(area > 0.0)) {
    throw Error(ErrorCode::ValidationError, "need at least one point and a positive area");
  }
  double sum = 0.0;
  for (double e : squared_errors) sum += e;
  return sum / (static_cast<double>(squared_errors.size()) * area);
}

ReprojectionStats reprojection_stats_polygon(const RigidTransform& pose,
                                             const std::vector<Correspondence>& corrs,
                                             const CameraIntrinsics& camera,
                                             const RigidTransform& view, double area) {
  ReprojectionStats st;
  st.area = area;
  for (const auto& c : corrs) {
    st.squared_errors.push_back((project(camera, view, pose, c.p_obj) - c.p_img).squaredNorm());
  }
  st.epsilon = normalized_error(st.squared_errors, area);
  return st;
}

double reprojection_error_polygon(const RigidTransform& pose,
                                  const std::vector<Correspondence>& corrs,
                                  const CameraIntrinsics& camera, const RigidTransform& view,
                                  double area) {
  return reprojection_stats_polygon(pose, corrs, camera, view, area).epsilon;
}

Vec3 circular_virtual_point(const Vec2& pixel, const RigidTransform& pose,
                            const CameraIntrinsics& camera, const RigidTransform& view,
                            double radius) {
  const RigidTransform to_obj = pose.inverse();
  const Vec3 c = to_obj.apply(camera_center(view));
  const Vec3 f = to_obj.rotation * pixel_ray(camera, view, pixel);
  if (std::abs(f.z()) <= 1e-12) {
    throw Error(ErrorCode::RayParallelToPlane, "pixel ray is parallel to the circle plane");
  }
  const double t = -c.z() / f.z();
  const Vec2 p(c.x() + t * f.x(), c.y() + t * f.y());
  const double len = p.norm();
  if (len == 0.0) throw Error(ErrorCode::ProjectedAtCenter, "point projects onto the centre");

  // The line through the centre meets the circle at +-R p/|p|; keep the one sharing p's quadrant.
  const Vec2 u = p / len;
  auto sign = [](double v) { return v >= 0.0 ? 1 : -1; };
  for (double s : {1.0, -1.0}) {
    const Vec2 q = s * radius * u;
    if (sign(q.x()) == sign(p.x()) && sign(q.y()) == sign(p.y())) return {q.x(), q.y(), 0.0};
  }
  const Vec2 q = radius * u;  // only reached when a component rounds to -0 vs +0
  return {q.x(), q.y(), 0.0};
}

ReprojectionStats reprojection_stats_circle(const RigidTransform& pose,
                                            const std::vector<Vec2>& pixels,
                                            const CameraIntrinsics& camera,
                                            const RigidTransform& view, double radius, double area,
                                            double max_excluded_fraction) {
  ReprojectionStats st;
  st.area = area;
  for (const auto& px : pixels) {
    try {
      const Vec3 v = circular_virtual_point(px, pose, camera, view, radius);
      st.squared_errors.push_back((project(camera, view, pose, v) - px).squaredNorm());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::RayParallelToPlane && e.code() != ErrorCode::ProjectedAtCenter &&
          e.code() != ErrorCode::BehindCamera) {
        throw;
      }
      ++st.excluded;
    }
  }
  if (pixels.empty() ||
      st.excluded > max_excluded_fraction * static_cast<double>(pixels.size())) {
    throw Error(ErrorCode::TooManyDegeneratePoints,
                std::to_string(st.excluded) + " of " + std::to_string(pixels.size()) +
                    " points have no virtual correspondence");
  }
  st.epsilon = normalized_error(st.squared_errors, area);
  return st;
}

double reprojection_error_circle(const RigidTransform& pose, const std::vector<Vec2>& pixels,
                                 const CameraIntrinsics& camera, const RigidTransform& view,
                                 double radius, double area) {
  return reprojection_stats_circle(pose, pixels, camera, view, radius, area).epsilon;
}

bool passes_reprojection(const Detection& d, double threshold_polygonal,
                         double threshold_circular) {
  const double thr =
      d.kind == ShapeKind::Circular ? threshold_circular : threshold_polygonal;
  return d.reprojection_error <= thr;
}

std::vector<Detection> apply_reprojection_filter(const std::vector<Detection>& detections,
                                                 double threshold_polygonal,
                                                 double threshold_circular) {
  std::vector<Detection> out;
  for (const auto& d : detections) {
    if (passes_reprojection(d, threshold_polygonal, threshold_circular)) out.push_back(d);
  }
  return out;
}

LampState classify_state(const GrayImage& img, const RigidTransform& pose, const LampFace& face,
                         const CameraIntrinsics& camera, const RigidTransform& view,
                         int on_threshold) {
  std::vector<Vec2> poly;
  for (const auto& p : face.outline()) {
    const Vec3 pc = view.apply(pose.apply(p));
    if (!(pc.z() > 1e-9)) throw Error(ErrorCode::StateUndetermined, "face is behind the camera");
    poly.push_back(project_camera_point(camera, pc));
  }
  double minx = poly[0].x(), maxx = minx, miny = poly[0].y(), maxy = miny;
  for (const auto& p : poly) {
    minx = std::min(minx, p.x());
    maxx = std::max(maxx, p.x());
    miny = std::min(miny, p.y());
    maxy = std::max(maxy, p.y());
  }
  const int x0 = std::max(0, static_cast<int>(std::ceil(minx)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::floor(maxx)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(miny)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::floor(maxy)));

  double sum = 0.0;
  long count = 0;
  const std::size_t n = poly.size();
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      bool inside = false;
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y() > y) != (b.y() > y) &&
            x < (b.x() - a.x()) * (y - a.y()) / (b.y() - a.y()) + a.x()) {
          inside = !inside;
        }
      }
      if (inside) {
        sum += img.at(x, y);
        ++count;
      }
    }
  }
  if (count < 3) throw Error(ErrorCode::StateUndetermined, "face covers too few image pixels");
  return sum / static_cast<double>(count) >= on_threshold ? LampState::On : LampState::Off;
}

}  // namespace lampdet
