// Independent reference implementations and synthetic fixtures shared by the tests.
// Nothing here calls into the code under test except plain data types.
#pragma once

#include "lampdet/chamfer.hpp"
#include "lampdet/geom.hpp"
#include "lampdet/image.hpp"
#include "lampdet/optim.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <random>
#include <vector>

namespace lampdet::testing {

inline constexpr double kPi = std::numbers::pi;

// --- rotations --------------------------------------------------------------

/// exp(K) by scaling and squaring plus a truncated Taylor series.
inline Mat3 expm_series(const Mat3& K) {
  int squarings = 0;
  double norm = K.norm();
  while (norm > 0.5) {
    norm *= 0.5;
    ++squarings;
  }
  const Mat3 A = K / std::pow(2.0, squarings);
  Mat3 sum = Mat3::Identity();
  Mat3 term = Mat3::Identity();
  for (int n = 1; n < 30; ++n) {
    term = term * A / static_cast<double>(n);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

inline Mat3 hat(const Vec3& w) {
  Mat3 K;
  K << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return K;
}

inline Mat3 rot_x(double a) { return expm_series(hat(Vec3(a, 0, 0))); }
inline Mat3 rot_z(double a) { return expm_series(hat(Vec3(0, 0, a))); }

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

/// Random rotation vector with angle below `max_angle`.
inline RotVec random_rotvec(std::mt19937_64& rng, double max_angle = 3.0) {
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return random_unit(rng) * u(rng);
}

// --- cameras ----------------------------------------------------------------

inline CameraIntrinsics camera(double f, int w, int h) {
  CameraIntrinsics c;
  c.fx = c.fy = f;
  c.cx = 0.5 * (w - 1);
  c.cy = 0.5 * (h - 1);
  c.width = w;
  c.height = h;
  return c;
}

/// World-to-camera transform for a camera at `eye` looking at `target`, image y down
/// roughly along `down`.
inline RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& down) {
  const Vec3 z = (target - eye).normalized();
  const Vec3 x = down.cross(z).normalized();
  const Vec3 y = z.cross(x);
  RigidTransform v;
  v.rotation.row(0) = x.transpose();
  v.rotation.row(1) = y.transpose();
  v.rotation.row(2) = z.transpose();
  v.translation = -v.rotation * eye;
  return v;
}

/// Plain pinhole projection, no distortion.
inline Vec2 pinhole(const CameraIntrinsics& c, const RigidTransform& view, const Vec3& world) {
  const Vec3 p = view.rotation * world + view.translation;
  return {c.fx * p.x() / p.z() + c.cx, c.fy * p.y() / p.z() + c.cy};
}

// --- finite differences -----------------------------------------------------

/// Forward differences with a relative step; deliberately a different scheme from the
/// central differences used by the optimiser.
inline Eigen::MatrixXd forward_jacobian(const ResidualProblem& p, const Eigen::VectorXd& x,
                                        double rel_step = 1e-7) {
  const Eigen::VectorXd r0 = p.evaluate(x);
  Eigen::MatrixXd J(r0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = rel_step * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x;
    xp[j] += h;
    const double hj = xp[j] - x[j];
    J.col(j) = (p.evaluate(xp) - r0) / hj;
  }
  return J;
}

// --- blobs ------------------------------------------------------------------

/// Number of 8-connected components with value >= thr and at least min_area pixels.
inline int flood_fill_count(const GrayImage& img, int thr, int min_area) {
  std::vector<char> seen(img.data.size(), 0);
  int count = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      if (seen[i] || img.data[i] < thr) continue;
      std::queue<std::pair<int, int>> todo;
      todo.push({x, y});
      seen[i] = 1;
      int size = 0;
      while (!todo.empty()) {
        auto [cx, cy] = todo.front();
        todo.pop();
        ++size;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= img.width || ny >= img.height) continue;
            const std::size_t j = static_cast<std::size_t>(ny) * img.width + nx;
            if (seen[j] || img.data[j] < thr) continue;
            seen[j] = 1;
            todo.push({nx, ny});
          }
        }
      }
      if (size >= min_area) ++count;
    }
  }
  return count;
}

inline GrayImage blank(int w, int h, std::uint8_t v = 0) {
  GrayImage img;
  img.width = w;
  img.height = h;
  img.data.assign(static_cast<std::size_t>(w) * h, v);
  return img;
}

inline void fill_rect(GrayImage& img, int x0, int y0, int x1, int y1, std::uint8_t v) {
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) img.data[static_cast<std::size_t>(y) * img.width + x] = v;
}

/// Pixels whose centre lies inside the ellipse.
inline void fill_ellipse(GrayImage& img, double cx, double cy, double a, double b, double angle,
                         std::uint8_t v) {
  const double c = std::cos(angle), s = std::sin(angle);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = c * dx + s * dy, w = -s * dx + c * dy;
      if ((u * u) / (a * a) + (w * w) / (b * b) <= 1.0)
        img.data[static_cast<std::size_t>(y) * img.width + x] = v;
    }
  }
}

/// Pixels whose centre lies inside a convex polygon (any winding).
inline void fill_convex(GrayImage& img, const std::vector<Vec2>& poly, std::uint8_t v) {
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      int pos = 0, neg = 0;
      for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % poly.size()];
        const double cr = (b.x() - a.x()) * (y - a.y()) - (b.y() - a.y()) * (x - a.x());
        if (cr > 0) ++pos;
        if (cr < 0) ++neg;
      }
      if (pos == 0 || neg == 0) img.data[static_cast<std::size_t>(y) * img.width + x] = v;
    }
  }
}

// --- directional distance field ---------------------------------------------

struct OracleEdge {
  int x, y;
  double theta;
};

inline int oracle_channel(double theta, int q) {
  double t = std::fmod(theta, kPi);
  if (t < 0) t += kPi;
  long k = std::lround(t * q / kPi);
  k %= q;
  return static_cast<int>(k);
}

/// Brute force: min over edges of Euclidean distance plus lambda times the circular
/// orientation difference, in double, rounded to float once.
inline std::vector<float> brute_force_ddf(const std::vector<OracleEdge>& edges, int w, int h,
                                          int q, double lambda, float empty = 1e6f) {
  std::vector<float> out(static_cast<std::size_t>(w) * h * q, empty);
  if (edges.empty()) return out;
  for (int k = 0; k < q; ++k) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& e : edges) {
          const int ke = oracle_channel(e.theta, q);
          int steps = std::abs(ke - k);
          steps = std::min(steps, q - steps);
          const double dx = x - e.x, dy = y - e.y;
          const double d =
              std::sqrt(double(dx * dx + dy * dy)) + lambda * (steps * (kPi / q));
          best = std::min(best, d);
        }
        out[(static_cast<std::size_t>(k) * h + y) * w + x] = static_cast<float>(best);
      }
    }
  }
  return out;
}

// --- circle fit cost --------------------------------------------------------

/// Sum of squared (|X_i - c| - R) where X_i is the intersection of pixel ray i with
/// the plane through c with normal n. All in world coordinates.
inline double circle_cost(const std::vector<Vec2>& pixels, const CameraIntrinsics& cam,
                          const RigidTransform& view, const Vec3& c, const Vec3& n, double R) {
  const Mat3 Rt = view.rotation.transpose();
  const Vec3 eye = -Rt * view.translation;
  double cost = 0.0;
  for (const auto& px : pixels) {
    const Vec3 dir = Rt * Vec3((px.x() - cam.cx) / cam.fx, (px.y() - cam.cy) / cam.fy, 1.0);
    const double den = n.dot(dir);
    if (std::abs(den) < 1e-12) continue;
    const double s = n.dot(c - eye) / den;
    const Vec3 X = eye + s * dir;
    const double r = (X - c).norm() - R;
    cost += r * r;
  }
  return cost;
}

}  // namespace lampdet::testing
