#pragma once

#include "lampdet/geom.hpp"
#include "lampdet/image.hpp"

#include <vector>

namespace lampdet {

struct PixelBox {
  int min_x = 0, min_y = 0, max_x = -1, max_y = -1;
  int width() const { return max_x - min_x + 1; }
  int height() const { return max_y - min_y + 1; }
};

/// 8-connected component of pixels at or above a threshold.
struct Blob {
  std::vector<Eigen::Vector2i> pixels;
  PixelBox box;
  double mean_intensity = 0.0;
  int max_intensity = 0;

  int area() const { return static_cast<int>(pixels.size()); }
  Vec2 centroid() const;
};

/// Outer boundary through pixel centres, closed implicitly (last point neighbours the first).
struct Contour {
  std::vector<Vec2> points;
  double perimeter = 0.0;  // length of the lightly smoothed chain
  double area = 0.0;       // shoelace area of the traced chain

  double isoperimetric_ratio() const { return perimeter * perimeter / area; }
};

enum class ShapeKind { Polygonal, Circular };

struct Ellipse {
  Vec2 center = Vec2::Zero();
  double semi_major = 0.0;
  double semi_minor = 0.0;
  double angle = 0.0;  // orientation of the major axis in [0, pi), image x towards y

  double area() const;
};

struct ShapeObservation {
  ShapeKind kind = ShapeKind::Polygonal;
  std::vector<Vec2> vertices;  // polygonal only
  Ellipse ellipse;             // circular only
  double area = 0.0;           // shoelace area of the vertices, or pi*a*b
  Contour contour;
  PixelBox box;
};

/// Sorted by area, largest first; ties keep raster order of the first pixel.
std::vector<Blob> extract_blobs(const GrayImage& img, int intensity_threshold, int min_area);

/// Moore-neighbour tracing starting at the top-left pixel. Throws DegenerateBlob for
/// blobs whose boundary has fewer than three distinct points.
Contour trace_contour(const Blob& blob);

/// Circular when P^2/A is below `threshold`.
ShapeKind classify_shape(const Contour& contour, double threshold = 14.0);

/// Closed Douglas-Peucker. Vertices run counterclockwise as displayed (y axis down)
/// and start at the vertex nearest the image origin. Throws TooFewVertices below four.
std::vector<Vec2> simplify_polygon(const Contour& contour, double eps);

/// Replaces edges shorter than `min_fraction` of the perimeter (clipped corners) by the
/// intersection of their neighbouring edges. Never goes below four vertices.
std::vector<Vec2> merge_short_edges(const std::vector<Vec2>& vertices, double min_fraction = 0.05);

/// Direct least-squares ellipse fit. Throws EllipseFitFailure for degenerate input.
Ellipse fit_ellipse(const std::vector<Vec2>& points);

double polygon_area(const std::vector<Vec2>& vertices);
/// Signed shoelace area; positive for counterclockwise order in a y-up frame.
double signed_area(const std::vector<Vec2>& vertices);

/// Full routing: classify, then simplify or fit.
ShapeObservation observe_shape(const Contour& contour, const PixelBox& box, double shape_threshold,
                               double simplify_eps);

}  // namespace lampdet
