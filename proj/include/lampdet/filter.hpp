#pragma once

#include "lampdet/detection.hpp"
#include "lampdet/geom.hpp"
#include "lampdet/image.hpp"
#include "lampdet/models.hpp"
#include "lampdet/pose.hpp"

#include <vector>

namespace lampdet {

inline constexpr double kPolygonalReprojectionThreshold = 0.015;
inline constexpr double kCircularReprojectionThreshold = 0.035;

/// Per-point squared errors with eps = sum / (N * A).
struct ReprojectionStats {
  std::vector<double> squared_errors;
  int excluded = 0;  // circle points without a virtual correspondence
  double area = 0.0;
  double epsilon = 0.0;

  std::size_t count() const { return squared_errors.size(); }
};

/// Area-normalised mean squared reprojection error.
double normalized_error(const std::vector<double>& squared_errors, double area);

ReprojectionStats reprojection_stats_polygon(const RigidTransform& pose,
                                             const std::vector<Correspondence>& corrs,
                                             const CameraIntrinsics& camera,
                                             const RigidTransform& view, double area);
double reprojection_error_polygon(const RigidTransform& pose,
                                  const std::vector<Correspondence>& corrs,
                                  const CameraIntrinsics& camera, const RigidTransform& view,
                                  double area);

/// Point on the circle x^2 + y^2 = R^2 (object frame, z = 0) radially nearest to where the
/// pixel's ray meets the object plane, picked in the same quadrant (zero counts as positive).
Vec3 circular_virtual_point(const Vec2& pixel, const RigidTransform& pose,
                            const CameraIntrinsics& camera, const RigidTransform& view,
                            double radius);

/// Throws TooManyDegeneratePoints when more than `max_excluded_fraction` of points fail.
ReprojectionStats reprojection_stats_circle(const RigidTransform& pose,
                                            const std::vector<Vec2>& pixels,
                                            const CameraIntrinsics& camera,
                                            const RigidTransform& view, double radius, double area,
                                            double max_excluded_fraction = 0.2);
double reprojection_error_circle(const RigidTransform& pose, const std::vector<Vec2>& pixels,
                                 const CameraIntrinsics& camera, const RigidTransform& view,
                                 double radius, double area);

std::vector<Detection> apply_reprojection_filter(
    const std::vector<Detection>& detections,
    double threshold_polygonal = kPolygonalReprojectionThreshold,
    double threshold_circular = kCircularReprojectionThreshold);

bool passes_reprojection(const Detection& d, double threshold_polygonal,
                         double threshold_circular);

/// On when the mean intensity over the projected face is at least `on_threshold`.
/// Throws StateUndetermined when the face covers fewer than 3 pixels of the image.
LampState classify_state(const GrayImage& img, const RigidTransform& pose, const LampFace& face,
                         const CameraIntrinsics& camera, const RigidTransform& view,
                         int on_threshold = 200);

}  // namespace lampdet
