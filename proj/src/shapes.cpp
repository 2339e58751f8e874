#include "lampdet/shapes.hpp"

#include "lampdet/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace lampdet {

namespace {

// Clockwise on screen (y down), starting east.
constexpr std::array<std::array<int, 2>, 8> kMoore = {{
    {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1},
}};

int direction_index(int dx, int dy) {
  for (int i = 0; i < 8; ++i) {
    if (kMoore[i][0] == dx && kMoore[i][1] == dy) return i;
  }
  return -1;
}

double point_line_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

void douglas_peucker(const std::vector<Vec2>& pts, std::size_t first, std::size_t last, double eps,
                     std::vector<std::size_t>& keep) {
  // Indices are taken modulo pts.size() so the closing run can wrap.
  const std::size_t n = pts.size();
  if (last <= first + 1) return;
  double best = -1.0;
  std::size_t best_i = first;
  for (std::size_t i = first + 1; i < last; ++i) {
    const double d = point_line_distance(pts[i % n], pts[first % n], pts[last % n]);
    if (d > best) {
      best = d;
      best_i = i;
    }
  }
  if (best > eps) {
    douglas_peucker(pts, first, best_i, eps, keep);
    keep.push_back(best_i % n);
    douglas_peucker(pts, best_i, last, eps, keep);
  }
}

// Largest deviation of contour points strictly between vertex indices a and b (wrapping).
double run_deviation(const std::vector<Vec2>& pts, std::size_t a, std::size_t b) {
  const std::size_t n = pts.size();
  double worst = 0.0;
  for (std::size_t i = (a + 1) % n; i != b; i = (i + 1) % n) {
    worst = std::max(worst, point_line_distance(pts[i], pts[a], pts[b]));
  }
  return worst;
}

}  // namespace

Vec2 Blob::centroid() const {
  Vec2 c = Vec2::Zero();
  for (const auto& p : pixels) c += p.cast<double>();
  return pixels.empty() ? c : Vec2(c / static_cast<double>(pixels.size()));
}

double Ellipse::area() const { return std::numbers::pi * semi_major * semi_minor; }

std::vector<Blob> extract_blobs(const GrayImage& img, int intensity_threshold, int min_area) {
  std::vector<Blob> blobs;
  if (!img.valid()) return blobs;
  std::vector<std::uint8_t> seen(img.data.size(), 0);
  std::vector<Eigen::Vector2i> stack;

  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * img.width + x;
      if (seen[idx] || img.data[idx] < intensity_threshold) continue;

      Blob blob;
      blob.box = {x, y, x, y};
      double sum = 0.0;
      seen[idx] = 1;
      stack.assign(1, Eigen::Vector2i(x, y));
      while (!stack.empty()) {
        const Eigen::Vector2i p = stack.back();
        stack.pop_back();
        blob.pixels.push_back(p);
        const int v = img.at(p.x(), p.y());
        sum += v;
        blob.max_intensity = std::max(blob.max_intensity, v);
        blob.box.min_x = std::min(blob.box.min_x, p.x());
        blob.box.max_x = std::max(blob.box.max_x, p.x());
        blob.box.min_y = std::min(blob.box.min_y, p.y());
        blob.box.max_y = std::max(blob.box.max_y, p.y());
        for (const auto& d : kMoore) {
          const int nx = p.x() + d[0], ny = p.y() + d[1];
          if (!img.contains(nx, ny)) continue;
          const std::size_t nidx = static_cast<std::size_t>(ny) * img.width + nx;
          if (seen[nidx] || img.data[nidx] < intensity_threshold) continue;
          seen[nidx] = 1;
          stack.emplace_back(nx, ny);
        }
      }
      if (blob.area() < min_area) continue;
      std::sort(blob.pixels.begin(), blob.pixels.end(), [](const auto& a, const auto& b) {
        return a.y() != b.y() ? a.y() < b.y() : a.x() < b.x();
      });
      blob.mean_intensity = sum / blob.area();
      blobs.push_back(std::move(blob));
    }
  }
  std::stable_sort(blobs.begin(), blobs.end(),
                   [](const Blob& a, const Blob& b) { return a.area() > b.area(); });
  return blobs;
}

Contour trace_contour(const Blob& blob) {
  if (blob.pixels.size() < 2) {
    throw Error(ErrorCode::DegenerateBlob, "blob has a single pixel");
  }
  // Padded local mask.
  const int w = blob.box.width() + 2;
  const int h = blob.box.height() + 2;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
  auto inside = [&](int x, int y) {
    const int lx = x - blob.box.min_x + 1, ly = y - blob.box.min_y + 1;
    return lx >= 0 && ly >= 0 && lx < w && ly < h && mask[static_cast<std::size_t>(ly) * w + lx];
  };
  for (const auto& p : blob.pixels) {
    mask[static_cast<std::size_t>(p.y() - blob.box.min_y + 1) * w + (p.x() - blob.box.min_x + 1)] = 1;
  }

  // Pixels are sorted in raster order, so the first one has background to its west.
  const Eigen::Vector2i start = blob.pixels.front();
  std::vector<Eigen::Vector2i> chain{start};
  Eigen::Vector2i p = start;
  int back = 4;  // direction from p to the backtrack pixel (west)
  Eigen::Vector2i second(-1, -1);
  const std::size_t limit = 4 * blob.pixels.size() + 8;

  while (chain.size() <= limit) {
    int found = -1;
    for (int i = 1; i <= 8; ++i) {
      const int d = (back + i) % 8;
      if (inside(p.x() + kMoore[d][0], p.y() + kMoore[d][1])) {
        found = d;
        break;
      }
    }
    if (found < 0) throw Error(ErrorCode::DegenerateBlob, "isolated pixel");
    const int prev = (found + 7) % 8;
    const Eigen::Vector2i b(p.x() + kMoore[prev][0], p.y() + kMoore[prev][1]);
    const Eigen::Vector2i next(p.x() + kMoore[found][0], p.y() + kMoore[found][1]);
    back = direction_index(b.x() - next.x(), b.y() - next.y());

    // Stop once the first move would be repeated.
    if (p == start && chain.size() > 1 && next == second) break;
    if (chain.size() == 1) second = next;
    p = next;
    chain.push_back(p);
  }
  if (chain.size() > 1 && chain.back() == start) chain.pop_back();

  Contour c;
  c.points.reserve(chain.size());
  for (const auto& q : chain) c.points.emplace_back(q.x(), q.y());
  if (c.points.size() < 3) {
    throw Error(ErrorCode::DegenerateBlob, "boundary has fewer than three points");
  }
  c.area = polygon_area(c.points);
  if (c.area < 1e-9) throw Error(ErrorCode::DegenerateBlob, "boundary encloses no area");

  // One pass of [1 2 1]/4 smoothing takes the staircase out of diagonal runs.
  const std::size_t n = c.points.size();
  std::vector<Vec2> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    smooth[i] = 0.25 * (c.points[(i + n - 1) % n] + 2.0 * c.points[i] + c.points[(i + 1) % n]);
  }
  for (std::size_t i = 0; i < n; ++i) c.perimeter += (smooth[(i + 1) % n] - smooth[i]).norm();
  return c;
}

ShapeKind classify_shape(const Contour& contour, double threshold) {
  return contour.isoperimetric_ratio() < threshold ? ShapeKind::Circular : ShapeKind::Polygonal;
}

double signed_area(const std::vector<Vec2>& v) {
  double s = 0.0;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % n];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * s;
}

double polygon_area(const std::vector<Vec2>& v) { return std::abs(signed_area(v)); }

std::vector<Vec2> simplify_polygon(const Contour& contour, double eps) {
  const auto& pts = contour.points;
  const std::size_t n = pts.size();
  if (n < 4) throw Error(ErrorCode::TooFewVertices, "contour too short");

  std::size_t far = 0;
  double far_d = -1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = (pts[i] - pts[0]).squaredNorm();
    if (d > far_d) {
      far_d = d;
      far = i;
    }
  }
  std::vector<std::size_t> keep{0};
  douglas_peucker(pts, 0, far, eps, keep);
  keep.push_back(far);
  douglas_peucker(pts, far, n, eps, keep);

  // The seed split points are arbitrary; drop any vertex whose removal stays within eps.
  while (keep.size() > 3) {
    double best = eps;
    std::size_t drop = keep.size();
    for (std::size_t k = 0; k < keep.size(); ++k) {
      const std::size_t a = keep[(k + keep.size() - 1) % keep.size()];
      const std::size_t b = keep[(k + 1) % keep.size()];
      const double dev = run_deviation(pts, a, b);
      if (dev <= best) {
        best = dev;
        drop = k;
      }
    }
    if (drop == keep.size()) break;
    keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  if (keep.size() < 4) {
    throw Error(ErrorCode::TooFewVertices,
                "simplification left " + std::to_string(keep.size()) + " vertices");
  }

  std::vector<Vec2> verts;
  verts.reserve(keep.size());
  for (std::size_t k : keep) verts.push_back(pts[k]);
  // Counterclockwise on screen means negative shoelace area in y-down pixel coordinates.
  if (signed_area(verts) > 0.0) std::reverse(verts.begin(), verts.end());
  const auto first = std::min_element(verts.begin(), verts.end(), [](const Vec2& a, const Vec2& b) {
    const double da = a.squaredNorm(), db = b.squaredNorm();
    if (da != db) return da < db;
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  std::rotate(verts.begin(), first, verts.end());
  return verts;
}

std::vector<Vec2> merge_short_edges(const std::vector<Vec2>& vertices, double min_fraction) {
  std::vector<Vec2> v = vertices;
  std::vector<char> tried;
  while (v.size() > 4) {
    const std::size_t n = v.size();
    double perimeter = 0.0;
    for (std::size_t i = 0; i < n; ++i) perimeter += (v[(i + 1) % n] - v[i]).norm();
    tried.assign(n, 0);
    bool merged = false;
    for (;;) {
      std::size_t e = n;
      double shortest = min_fraction * perimeter;
      for (std::size_t i = 0; i < n; ++i) {
        const double len = (v[(i + 1) % n] - v[i]).norm();
        if (!tried[i] && len < shortest) {
          shortest = len;
          e = i;
        }
      }
      if (e == n) break;
      tried[e] = 1;
      // Extend the neighbouring edges until they meet.
      const Vec2& p0 = v[(e + n - 1) % n];
      const Vec2& p1 = v[e];
      const Vec2& q0 = v[(e + 1) % n];
      const Vec2& q1 = v[(e + 2) % n];
      const Vec2 d1 = p1 - p0, d2 = q0 - q1;
      const double den = d1.x() * d2.y() - d1.y() * d2.x();
      if (std::abs(den) < 1e-9 * d1.norm() * d2.norm()) continue;
      const Vec2 r = q1 - p0;
      const double s = (r.x() * d2.y() - r.y() * d2.x()) / den;
      const Vec2 x = p0 + s * d1;
      if ((x - 0.5 * (p1 + q0)).norm() > 4.0 * shortest + 1.0) continue;
      v[e] = x;
      v.erase(v.begin() + static_cast<std::ptrdiff_t>((e + 1) % n));
      merged = true;
      break;
    }
    if (!merged) break;
  }
  if (v.size() != vertices.size()) {
    const auto first = std::min_element(v.begin(), v.end(), [](const Vec2& a, const Vec2& b) {
      const double da = a.squaredNorm(), db = b.squaredNorm();
      if (da != db) return da < db;
      return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
    });
    std::rotate(v.begin(), first, v.end());
  }
  return v;
}

Ellipse fit_ellipse(const std::vector<Vec2>& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 6) throw Error(ErrorCode::EllipseFitFailure, "need at least 6 points");

  Vec2 mean = Vec2::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(n);
  double scale = 0.0;
  for (const auto& p : points) scale += (p - mean).norm();
  scale /= static_cast<double>(n);
  if (!(scale > 1e-12)) throw Error(ErrorCode::EllipseFitFailure, "points coincide");

  Eigen::MatrixXd D1(n, 3), D2(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec2 q = (points[i] - mean) / scale;
    D1.row(i) << q.x() * q.x(), q.x() * q.y(), q.y() * q.y();
    D2.row(i) << q.x(), q.y(), 1.0;
  }
  const Mat3 S1 = D1.transpose() * D1;
  const Mat3 S2 = D1.transpose() * D2;
  const Mat3 S3 = D2.transpose() * D2;
  Eigen::FullPivLU<Mat3> lu(S3);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible()) throw Error(ErrorCode::EllipseFitFailure, "points are collinear");
  const Mat3 T = -lu.solve(S2.transpose());
  const Mat3 M0 = S1 + S2 * T;
  Mat3 M;
  M.row(0) = M0.row(2) / 2.0;
  M.row(1) = -M0.row(1);
  M.row(2) = M0.row(0) / 2.0;

  Eigen::EigenSolver<Mat3> es(M);
  int pick = -1;
  double best_cond = 0.0;
  Vec3 a1;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3cd v = es.eigenvectors().col(i);
    if (std::abs(es.eigenvalues()[i].imag()) > 1e-9) continue;
    const Vec3 vr = v.real();
    const double cond = 4.0 * vr[0] * vr[2] - vr[1] * vr[1];
    if (cond > best_cond) {
      best_cond = cond;
      pick = i;
      a1 = vr;
    }
  }
  if (pick < 0) throw Error(ErrorCode::EllipseFitFailure, "no elliptical solution");
  const Vec3 a2 = T * a1;
  const double A = a1[0], B = a1[1], C = a1[2], D = a2[0], E = a2[1], F = a2[2];

  Eigen::Matrix2d Q;
  Q << 2.0 * A, B, B, 2.0 * C;
  const Vec2 c = Q.fullPivLu().solve(Vec2(-D, -E));
  const double Fc = A * c.x() * c.x() + B * c.x() * c.y() + C * c.y() * c.y() + D * c.x() +
                    E * c.y() + F;
  Eigen::Matrix2d S;
  S << A, B / 2.0, B / 2.0, C;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> sa(S);
  const Vec2 lam = sa.eigenvalues();
  const double r0 = -Fc / lam[0], r1 = -Fc / lam[1];
  if (!(r0 > 0.0) || !(r1 > 0.0) || !c.allFinite()) {
    throw Error(ErrorCode::EllipseFitFailure, "degenerate conic");
  }
  const double s0 = std::sqrt(r0), s1 = std::sqrt(r1);
  const int major = s0 >= s1 ? 0 : 1;
  const Vec2 dir = sa.eigenvectors().col(major);

  Ellipse e;
  e.center = mean + scale * c;
  e.semi_major = scale * std::max(s0, s1);
  e.semi_minor = scale * std::min(s0, s1);
  double ang = std::atan2(dir.y(), dir.x());
  if (ang < 0.0) ang += std::numbers::pi;
  if (ang >= std::numbers::pi) ang -= std::numbers::pi;
  e.angle = ang;
  return e;
}

ShapeObservation observe_shape(const Contour& contour, const PixelBox& box, double shape_threshold,
                               double simplify_eps) {
  ShapeObservation obs;
  obs.kind = classify_shape(contour, shape_threshold);
  obs.contour = contour;
  obs.box = box;
  if (obs.kind == ShapeKind::Circular) {
    obs.ellipse = fit_ellipse(contour.points);
    obs.area = obs.ellipse.area();
  } else {
    obs.vertices = merge_short_edges(simplify_polygon(contour, simplify_eps));
    obs.area = polygon_area(obs.vertices);
  }
  return obs;
}

}  // namespace lampdet
