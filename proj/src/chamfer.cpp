#include "lampdet/chamfer.hpp"

#include "lampdet/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace lampdet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Exact squared Euclidean transform of one line (Felzenszwalb & Huttenlocher).
void edt_1d(const double* f, double* d, int n, int* v, double* z) {
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  int first = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] < kInf) {
      first = q;
      break;
    }
  }
  if (first < 0) {
    for (int q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  v[0] = first;
  for (int q = first + 1; q < n; ++q) {
    if (!(f[q] < kInf)) continue;
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {  // k == 0 and the new parabola dominates everywhere
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

Vec2 projected_direction(const Vec3& p, const Vec3& dir, const RigidTransform& pose,
                         const CameraIntrinsics& camera, const RigidTransform& view,
                         const Vec2& at) {
  const Vec3 q = view.apply(pose.apply(p + 1e-3 * dir));
  if (!(q.z() > 1e-9)) return Vec2::Zero();
  return project_camera_point(camera, q) - at;
}

}  // namespace

EdgeMap detect_edges(const GrayImage& img, double grad_threshold) {
  EdgeMap map;
  map.width = img.width;
  map.height = img.height;
  if (img.width < 3 || img.height < 3) return map;

  const int w = img.width, h = img.height;
  std::vector<float> mag(static_cast<std::size_t>(w) * h, 0.0f);
  std::vector<float> gxs(mag.size(), 0.0f), gys(mag.size(), 0.0f);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      auto p = [&](int dx, int dy) { return static_cast<double>(img.at(x + dx, y + dy)); };
      const double gx = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
      const double gy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gxs[i] = static_cast<float>(gx);
      gys[i] = static_cast<float>(gy);
      mag[i] = static_cast<float>(std::sqrt(gx * gx + gy * gy) / 4.0);
    }
  }
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const float m = mag[i];
      if (m < grad_threshold || m <= 0.0f) continue;
      const double ang = std::atan2(gys[i], gxs[i]);
      // Quantise the gradient direction to one of four neighbour axes.
      double a = ang < 0.0 ? ang + std::numbers::pi : ang;
      int dx = 1, dy = 0;
      if (a >= std::numbers::pi / 8 && a < 3 * std::numbers::pi / 8) {
        dx = 1, dy = 1;
      } else if (a >= 3 * std::numbers::pi / 8 && a < 5 * std::numbers::pi / 8) {
        dx = 0, dy = 1;
      } else if (a >= 5 * std::numbers::pi / 8 && a < 7 * std::numbers::pi / 8) {
        dx = -1, dy = 1;
      }
      const float m1 = mag[static_cast<std::size_t>(y + dy) * w + (x + dx)];
      const float m2 = mag[static_cast<std::size_t>(y - dy) * w + (x - dx)];
      // Non-strict: both pixels of a symmetric step survive, so edges are not biased to one side.
      if (m < m1 || m < m2) continue;
      double theta = ang + std::numbers::pi / 2;
      theta = std::fmod(theta, std::numbers::pi);
      if (theta < 0.0) theta += std::numbers::pi;
      if (theta >= std::numbers::pi) theta -= std::numbers::pi;
      map.points.push_back({x, y, theta, m});
    }
  }
  return map;
}

int orientation_channel(double theta, int q) {
  double t = std::fmod(theta, std::numbers::pi);
  if (t < 0.0) t += std::numbers::pi;
  const long k = std::lround(t * q / std::numbers::pi);
  return static_cast<int>(((k % q) + q) % q);
}

double orientation_penalty(int steps, int q, double lambda) {
  return lambda * (steps * (std::numbers::pi / q));
}

DirectionalDistanceField::DirectionalDistanceField(int width, int height, int q, double lambda)
    : width_(width),
      height_(height),
      q_(q),
      lambda_(lambda),
      data_(static_cast<std::size_t>(width) * height * q, kEmptyFieldValue) {}

void DirectionalDistanceField::update_max() {
  max_value_ = data_.empty() ? kEmptyFieldValue : *std::max_element(data_.begin(), data_.end());
}

double DirectionalDistanceField::lookup(double x, double y, int k) const {
  if (!(x >= 0.0) || !(y >= 0.0) || x > width_ - 1 || y > height_ - 1) return max_value_;
  const int x0 = std::min(static_cast<int>(x), width_ - 2 < 0 ? 0 : width_ - 2);
  const int y0 = std::min(static_cast<int>(y), height_ - 2 < 0 ? 0 : height_ - 2);
  const int x1 = std::min(x0 + 1, width_ - 1), y1 = std::min(y0 + 1, height_ - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = (1.0 - fx) * at(x0, y0, k) + fx * at(x1, y0, k);
  const double bot = (1.0 - fx) * at(x0, y1, k) + fx * at(x1, y1, k);
  return (1.0 - fy) * top + fy * bot;
}

DirectionalDistanceField build_ddf(const EdgeMap& edges, int q, double lambda) {
  if (q < 1 || !(lambda >= 0.0)) {
    throw Error(ErrorCode::ValidationError, "field needs q >= 1 and lambda >= 0");
  }
  const int w = edges.width, h = edges.height;
  DirectionalDistanceField field(w, h, q, lambda);
  if (edges.points.empty() || w <= 0 || h <= 0) {
    field.update_max();
    return field;
  }

  // Squared distances per channel; integers below 2^24 are exact in float.
  std::vector<float> sq(static_cast<std::size_t>(w) * h * q, std::numeric_limits<float>::infinity());
  std::vector<bool> used(q, false);
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (const auto& e : edges.points) {
    if (e.x < 0 || e.y < 0 || e.x >= w || e.y >= h) continue;
    const int k = orientation_channel(e.theta, q);
    used[k] = true;
    sq[k * plane + static_cast<std::size_t>(e.y) * w + e.x] = 0.0f;
  }
  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (int k = 0; k < q; ++k) {
    if (!used[k]) continue;
    float* ch = sq.data() + k * plane;
    for (int x = 0; x < w; ++x) {
      for (int y = 0; y < h; ++y) f[y] = ch[static_cast<std::size_t>(y) * w + x];
      edt_1d(f.data(), d.data(), h, v.data(), z.data());
      for (int y = 0; y < h; ++y) ch[static_cast<std::size_t>(y) * w + x] = static_cast<float>(d[y]);
    }
    for (int y = 0; y < h; ++y) {
      float* row = ch + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) f[x] = row[x];
      edt_1d(f.data(), d.data(), w, v.data(), z.data());
      for (int x = 0; x < w; ++x) row[x] = static_cast<float>(d[x]);
    }
  }

  // Orientation axis: forward and backward sweeps around the circle, carrying the
  // source distance and step count so every value is formed as base + penalty(steps).
  std::vector<double> pen(2 * q + 1);
  for (int s = 0; s <= 2 * q; ++s) pen[s] = orientation_penalty(s, q, lambda);
  std::vector<double> base(static_cast<std::size_t>(q) * w);
  std::vector<double> best(static_cast<std::size_t>(q) * w);
  std::vector<double> cb(w);
  std::vector<int> cs(w);

  for (int y = 0; y < h; ++y) {
    for (int k = 0; k < q; ++k) {
      const float* row = sq.data() + k * plane + static_cast<std::size_t>(y) * w;
      double* b = base.data() + static_cast<std::size_t>(k) * w;
      for (int x = 0; x < w; ++x) b[x] = std::isinf(row[x]) ? kInf : std::sqrt(double(row[x]));
    }
    std::fill(best.begin(), best.end(), kInf);
    for (int dir = 0; dir < 2; ++dir) {
      std::fill(cb.begin(), cb.end(), kInf);
      std::fill(cs.begin(), cs.end(), 0);
      for (int i = 0; i < 2 * q; ++i) {
        const int k = dir == 0 ? i % q : (q - 1) - (i % q);
        const double* b = base.data() + static_cast<std::size_t>(k) * w;
        double* out = best.data() + static_cast<std::size_t>(k) * w;
        for (int x = 0; x < w; ++x) {
          int s = cs[x] + 1;
          double carried = kInf;
          if (cb[x] < kInf && s <= 2 * q) carried = cb[x] + pen[s];
          if (b[x] <= carried) {
            cb[x] = b[x];
            cs[x] = 0;
            carried = b[x] + pen[0];
          } else {
            cs[x] = s;
          }
          if (carried < out[x]) out[x] = carried;
        }
      }
    }
    for (int k = 0; k < q; ++k) {
      const double* o = best.data() + static_cast<std::size_t>(k) * w;
      for (int x = 0; x < w; ++x) {
        field.at(x, y, k) = o[x] < kInf ? static_cast<float>(o[x]) : kEmptyFieldValue;
      }
    }
  }
  field.update_max();
  return field;
}

Roi dilate_box(const PixelBox& box, double fraction, int width, int height) {
  const double gx = fraction * box.width(), gy = fraction * box.height();
  Roi r;
  r.min_x = std::max(0.0, box.min_x - gx);
  r.min_y = std::max(0.0, box.min_y - gy);
  r.max_x = std::min(width - 1.0, box.max_x + gx);
  r.max_y = std::min(height - 1.0, box.max_y + gy);
  return r;
}

Roi full_image_roi(const DirectionalDistanceField& field) {
  return {0.0, 0.0, field.width() - 1.0, field.height() - 1.0};
}

std::vector<ProjectedEdge> project_template(const TemplateEdges& tmpl, const RigidTransform& pose,
                                            const CameraIntrinsics& camera,
                                            const RigidTransform& view,
                                            const DirectionalDistanceField& field) {
  std::vector<ProjectedEdge> out(tmpl.points.size());
  for (std::size_t i = 0; i < tmpl.points.size(); ++i) {
    const Vec3 pc = view.apply(pose.apply(tmpl.points[i]));
    if (!(pc.z() > 1e-9)) continue;
    ProjectedEdge& e = out[i];
    e.pixel = project_camera_point(camera, pc);
    const Vec2 d = projected_direction(tmpl.points[i], tmpl.directions[i], pose, camera, view, e.pixel);
    if (d.squaredNorm() == 0.0) continue;
    e.channel = field.channel(std::atan2(d.y(), d.x()));
    e.visible = e.pixel.allFinite();
  }
  return out;
}

double fdcm_score(const TemplateEdges& tmpl, const RigidTransform& pose,
                  const CameraIntrinsics& camera, const RigidTransform& view,
                  const DirectionalDistanceField& field, const Roi& roi) {
  const auto proj = project_template(tmpl, pose, camera, view, field);
  double sum = 0.0;
  int in_image = 0;
  for (const auto& e : proj) {
    const bool inside_image = e.visible && e.pixel.x() >= 0.0 && e.pixel.y() >= 0.0 &&
                              e.pixel.x() <= field.width() - 1.0 &&
                              e.pixel.y() <= field.height() - 1.0;
    if (inside_image) ++in_image;
    if (inside_image && roi.contains(e.pixel)) {
      sum += field.lookup(e.pixel.x(), e.pixel.y(), e.channel);
    } else {
      sum += field.max_value();
    }
  }
  if (in_image == 0) throw Error(ErrorCode::NoVisibleTemplate, "template projects outside the image");
  return sum / static_cast<double>(proj.size());
}

double template_spacing(const RigidTransform& pose, const CameraIntrinsics& camera,
                        const RigidTransform& view, double pixels) {
  const double depth = std::max(view.apply(pose.translation).z(), 1e-3);
  return pixels * depth / std::max(camera.fx, camera.fy);
}

namespace {

double score_model(const LampModel& model, const RigidTransform& pose, const PixelBox& box,
                   const DirectionalDistanceField& field, const CameraIntrinsics& camera,
                   const RigidTransform& view, double roi_dilation) {
  const TemplateEdges tmpl =
      sample_template(model.edge_template, template_spacing(pose, camera, view));
  const Roi roi = dilate_box(box, roi_dilation, field.width(), field.height());
  try {
    return fdcm_score(tmpl, pose, camera, view, field, roi);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoVisibleTemplate) throw;
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

ModelSelection select_model(const PoseCandidate& candidate, const std::vector<LampModel>& db,
                            const DirectionalDistanceField& field, const CameraIntrinsics& camera,
                            const RigidTransform& view, double roi_dilation) {
  ModelSelection sel;
  sel.score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < db.size(); ++i) {
    const double s =
        score_model(db[i], candidate.pose, candidate.shape.box, field, camera, view, roi_dilation);
    if (sel.model_index < 0 || s < sel.score) {
      sel.score = s;
      sel.index = 0;
      sel.model_index = static_cast<int>(i);
      sel.model_id = db[i].id;
    }
  }
  return sel;
}

ModelSelection select_model(const std::vector<PoseCandidate>& alternatives,
                            const std::vector<LampModel>& db,
                            const DirectionalDistanceField& field, const CameraIntrinsics& camera,
                            const RigidTransform& view, double roi_dilation) {
  ModelSelection sel;
  sel.score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < alternatives.size(); ++i) {
    const PoseCandidate& c = alternatives[i];
    if (c.model_index < 0 || c.model_index >= static_cast<int>(db.size())) continue;
    const double s =
        score_model(db[c.model_index], c.pose, c.shape.box, field, camera, view, roi_dilation);
    const bool better = sel.index < 0 || s < sel.score ||
                        (s == sel.score && c.model_index < sel.model_index);
    if (better) {
      sel.score = s;
      sel.index = static_cast<int>(i);
      sel.model_index = c.model_index;
      sel.model_id = c.model_id;
    }
  }
  return sel;
}

ResidualProblem make_chamfer_problem(const TemplateEdges& tmpl, const CameraIntrinsics& camera,
                                     const RigidTransform& view,
                                     const DirectionalDistanceField& field,
                                     const AlignmentFrame& frame) {
  ResidualProblem p;
  p.n_params = 6;
  p.n_residuals = tmpl.points.size();
  // The field is captured by pointer; it must outlive the problem.
  p.evaluate = [&tmpl, camera, view, fp = &field, frame](const Eigen::VectorXd& x) {
    const RigidTransform M = pose_from_params(frame, x);
    const auto proj = project_template(tmpl, M, camera, view, *fp);
    Eigen::VectorXd r(proj.size());
    for (std::size_t i = 0; i < proj.size(); ++i) {
      r[static_cast<Eigen::Index>(i)] =
          proj[i].visible ? fp->lookup(proj[i].pixel.x(), proj[i].pixel.y(), proj[i].channel)
                          : fp->max_value();
    }
    return r;
  };
  return p;
}

RefineResult refine_d2co(const RigidTransform& pose, const TemplateEdges& tmpl,
                         const DirectionalDistanceField& field, const CameraIntrinsics& camera,
                         const RigidTransform& view, const AlignmentFrame& alignment,
                         bool constrained, const LMOptions& lm) {
  if (tmpl.points.empty()) throw Error(ErrorCode::NoVisibleTemplate, "empty template");
  const ResidualProblem problem = make_chamfer_problem(tmpl, camera, view, field, alignment);
  Eigen::VectorXd x0(6);
  if (constrained) {
    const ConstrainedDecomposition d = constrain_pose(pose, alignment);
    x0 << 0.0, 0.0, d.params.wz, d.params.t;
  } else {
    x0 = params_from_pose(alignment, pose);
  }
  LMOptions opts = lm;
  opts.tag = constrained ? "d2co-constrained" : "d2co";
  const LMResult res = lm_minimize(problem, x0, constrained ? constrained_mask() : full_mask(), opts);

  RefineResult out;
  out.pose = pose_from_params(alignment, res.x_opt);
  out.iterations = res.iterations;
  Eigen::VectorXd r;
  evaluate_cost(problem, res.x_opt, &r);
  out.score = r.mean();
  return out;
}

std::vector<Detection> score_filter(const std::vector<Detection>& detections, double threshold) {
  std::vector<Detection> out;
  for (const auto& d : detections) {
    if (d.chamfer_score <= threshold) out.push_back(d);
  }
  return out;
}

}  // namespace lampdet
