#include "lampdet/pose.hpp"

#include "lampdet/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace lampdet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Hartley normalisation: centroid to the origin, mean distance sqrt(2).
Eigen::Matrix3d normalising_transform(const std::vector<Vec2>& pts) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double d = 0.0;
  for (const auto& p : pts) d += (p - mean).norm();
  d /= static_cast<double>(pts.size());
  const double s = d > 0.0 ? std::sqrt(2.0) / d : 1.0;
  Eigen::Matrix3d T;
  T << s, 0.0, -s * mean.x(), 0.0, s, -s * mean.y(), 0.0, 0.0, 1.0;
  return T;
}

bool collinear(const std::vector<Vec2>& pts) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) S += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(S);
  const Vec2 ev = es.eigenvalues();
  return !(ev[1] > 0.0) || ev[0] <= 1e-10 * ev[1];
}

Eigen::VectorXd six(const RotVec& w, const Vec3& t) {
  Eigen::VectorXd x(6);
  x << w, t;
  return x;
}

}  // namespace

RigidTransform pose_from_params(const AlignmentFrame& frame, const Eigen::VectorXd& x) {
  return compose_aligned(frame, x.head<3>(), x.tail<3>());
}

Eigen::VectorXd params_from_pose(const AlignmentFrame& frame, const RigidTransform& model) {
  const Mat3 Lt = frame.L.rotation.transpose();
  return six(log_map(Lt * model.rotation), Lt * model.translation);
}

std::vector<bool> constrained_mask() { return {false, false, true, true, true, true}; }
std::vector<bool> full_mask() { return std::vector<bool>(6, true); }

ResidualProblem make_pnp_problem(const std::vector<Correspondence>& corrs,
                                 const CameraIntrinsics& camera, const RigidTransform& view,
                                 const AlignmentFrame& frame) {
  ResidualProblem p;
  p.n_params = 6;
  p.n_residuals = 2 * corrs.size();
  p.evaluate = [corrs, camera, view, frame](const Eigen::VectorXd& x) {
    const RigidTransform M = pose_from_params(frame, x);
    Eigen::VectorXd r(2 * corrs.size());
    for (std::size_t i = 0; i < corrs.size(); ++i) {
      const Vec3 pc = view.apply(M.apply(corrs[i].p_obj));
      if (!(pc.z() > 1e-9)) {
        r.setConstant(kNaN);
        return r;
      }
      const Vec2 uv = project_camera_point(camera, pc);
      r.segment<2>(2 * i) = uv - corrs[i].p_img;
    }
    return r;
  };
  return p;
}

int CircleProblem::count_parallel_rays(const Eigen::VectorXd& x) const {
  const Vec3 n = rodrigues(x.head<3>()).col(2);
  int count = 0;
  for (const auto& f : rays) {
    if (std::abs(n.dot(f)) < 1e-12) ++count;
  }
  return count;
}

CircleProblem make_circle_problem(const std::vector<Vec2>& pixels, double radius,
                                  const CameraIntrinsics& camera, const RigidTransform& view,
                                  const AlignmentFrame& frame) {
  CircleProblem cp;
  const Mat3 Lt = frame.L.rotation.transpose();
  cp.origin = Lt * camera_center(view);
  cp.radius = radius;
  cp.rays.reserve(pixels.size());
  for (const auto& px : pixels) cp.rays.push_back(Lt * pixel_ray(camera, view, px).normalized());

  cp.problem.n_params = 6;
  cp.problem.n_residuals = pixels.size();
  cp.problem.evaluate = [rays = cp.rays, c = cp.origin, radius](const Eigen::VectorXd& x) {
    const Vec3 n = rodrigues(x.head<3>()).col(2);
    const Vec3 centre = x.tail<3>();
    const double num = n.dot(centre - c);
    Eigen::VectorXd r(rays.size());
    for (std::size_t i = 0; i < rays.size(); ++i) {
      const double den = n.dot(rays[i]);
      if (std::abs(den) < 1e-12) {
        r[static_cast<Eigen::Index>(i)] = 0.0;
        continue;
      }
      const Vec3 hit = c + (num / den) * rays[i];
      r[static_cast<Eigen::Index>(i)] = (hit - centre).norm() - radius;
    }
    return r;
  };
  return cp;
}

PnPResult solve_pnp_planar(const std::vector<Correspondence>& corrs, const CameraIntrinsics& camera,
                           const RigidTransform& view, const LMOptions& lm) {
  if (corrs.size() < 4) {
    throw Error(ErrorCode::DegenerateConfiguration, "planar PnP needs at least 4 points");
  }
  std::vector<Vec2> obj, img;
  for (const auto& c : corrs) {
    if (std::abs(c.p_obj.z()) > 1e-9) {
      throw Error(ErrorCode::DegenerateConfiguration, "object points must lie on z = 0");
    }
    obj.emplace_back(c.p_obj.x(), c.p_obj.y());
    img.push_back(undistort(camera, c.p_img));
  }
  if (collinear(obj) || collinear(img)) {
    throw Error(ErrorCode::DegenerateConfiguration, "points are collinear");
  }

  // DLT homography from the object plane to normalised image coordinates.
  const Eigen::Matrix3d To = normalising_transform(obj);
  const Eigen::Matrix3d Ti = normalising_transform(img);
  Eigen::MatrixXd A(2 * corrs.size(), 9);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Vec3 X = To * Vec3(obj[i].x(), obj[i].y(), 1.0);
    const Vec3 u = Ti * Vec3(img[i].x(), img[i].y(), 1.0);
    const auto r = static_cast<Eigen::Index>(2 * i);
    A.row(r) << 0, 0, 0, -X.x(), -X.y(), -1, u.y() * X.x(), u.y() * X.y(), u.y();
    A.row(r + 1) << X.x(), X.y(), 1, 0, 0, 0, -u.x() * X.x(), -u.x() * X.y(), -u.x();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d Hn;
  Hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  const Eigen::Matrix3d H = Ti.inverse() * Hn * To;

  const double s = 2.0 / (H.col(0).norm() + H.col(1).norm());
  Vec3 r1 = s * H.col(0), r2 = s * H.col(1), t = s * H.col(2);
  if (t.z() < 0.0) {
    r1 = -r1;
    r2 = -r2;
    t = -t;
  }
  Mat3 R;
  R << r1, r2, r1.cross(r2);
  Eigen::JacobiSVD<Mat3> rs(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  R = rs.matrixU() * rs.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Mat3 U = rs.matrixU();
    U.col(2) = -U.col(2);
    R = U * rs.matrixV().transpose();
  }
  const RigidTransform seed = view.inverse() * RigidTransform{R, t};
  for (const auto& c : corrs) {
    if (!(view.apply(seed.apply(c.p_obj)).z() > 1e-9)) {
      throw Error(ErrorCode::NoValidPose, "homography seed puts points behind the camera");
    }
  }

  const AlignmentFrame identity;
  const ResidualProblem problem = make_pnp_problem(corrs, camera, view, identity);
  LMOptions opts = lm;
  opts.tag = "pnp";
  const LMResult res = lm_minimize(problem, params_from_pose(identity, seed), full_mask(), opts);

  PnPResult out;
  out.pose = pose_from_params(identity, res.x_opt);
  for (const auto& c : corrs) {
    if (!(view.apply(out.pose.apply(c.p_obj)).z() > 1e-9)) {
      throw Error(ErrorCode::NoValidPose, "refined pose puts points behind the camera");
    }
  }
  out.cost = res.final_cost;
  out.rms = std::sqrt(res.final_cost / static_cast<double>(corrs.size()));
  return out;
}

double projected_face_area(const LampModel& model, const RigidTransform& pose,
                           const CameraIntrinsics& camera, const RigidTransform& view) {
  std::vector<Vec2> px;
  for (const auto& p : model.face.outline()) {
    const Vec3 pc = view.apply(pose.apply(p));
    if (!(pc.z() > 1e-9)) return 0.0;
    px.push_back(project_camera_point(camera, pc));
  }
  return polygon_area(px);
}

PoseCandidate estimate_polygonal(const ShapeObservation& shape, const LampModel& model,
                                 const CameraIntrinsics& camera, const RigidTransform& view,
                                 const Plane& plane, bool constrained, const LMOptions& lm) {
  if (model.face.is_circle() || shape.kind != ShapeKind::Polygonal ||
      shape.vertices.size() != model.face.vertices.size()) {
    throw Error(ErrorCode::ShapeModelMismatch, "shape does not match face of model " + model.id);
  }
  const std::size_t n = shape.vertices.size();
  const AlignmentFrame frame = alignment_rotation(plane.normal.normalized());

  struct Hypothesis {
    PnPResult pnp;
    std::vector<Correspondence> corrs;
    double tilt = 0.0;
  };
  std::vector<Hypothesis> hyps;
  Error last_error(ErrorCode::NoValidPose, "no correspondence hypothesis produced a pose");
  for (int dir = 0; dir < 2; ++dir) {
    for (std::size_t shift = 0; shift < n; ++shift) {
      std::vector<Correspondence> corrs(n);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = dir == 0 ? (shift + j) % n : (shift + n - j) % n;
        corrs[j] = {model.face.vertices[k], shape.vertices[j]};
      }
      try {
        Hypothesis h;
        h.pnp = solve_pnp_planar(corrs, camera, view, lm);
        h.corrs = std::move(corrs);
        h.tilt = z_axis_angle(h.pnp.pose, frame.normal);
        hyps.push_back(std::move(h));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoValidPose && e.code() != ErrorCode::DegenerateConfiguration &&
            e.code() != ErrorCode::NonFiniteResidual) {
          throw;
        }
        last_error = e;
      }
    }
  }
  if (hyps.empty()) throw last_error;

  // Symmetric faces give equal costs; among those prefer the pose facing along the plane normal.
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto& h : hyps) best_cost = std::min(best_cost, h.pnp.cost);
  const double tie = best_cost * (1.0 + 1e-6) + 1e-9;
  const Hypothesis* best = nullptr;
  for (const auto& h : hyps) {
    if (h.pnp.cost > tie) continue;
    if (!best || h.tilt < best->tilt - 1e-9) best = &h;
  }

  PoseCandidate c;
  c.model_id = model.id;
  c.shape = shape;
  c.plane = plane;
  c.alignment = frame;
  c.correspondences = best->corrs;
  c.unconstrained_pose = best->pnp.pose;
  c.pose = best->pnp.pose;
  c.initial_cost = best->pnp.cost;
  c.final_cost = best->pnp.cost;
  c.constrained = constrained;

  if (constrained) {
    const ConstrainedDecomposition d = constrain_pose(best->pnp.pose, frame);
    const ResidualProblem problem = make_pnp_problem(c.correspondences, camera, view, frame);
    LMOptions opts = lm;
    opts.tag = "pnp-constrained";
    const Eigen::VectorXd x0 = six(RotVec(0.0, 0.0, d.params.wz), d.params.t);
    double start_cost = 0.0;
    try {
      start_cost = evaluate_cost(problem, x0);
    } catch (const Error&) {
      throw Error(ErrorCode::NoValidPose, "projected pose puts the face behind the camera");
    }
    const LMResult res = lm_minimize(problem, x0, constrained_mask(), opts);
    c.pose = pose_from_params(frame, res.x_opt);
    c.initial_cost = start_cost;
    c.final_cost = res.final_cost;
  }
  c.projected_area = projected_face_area(model, c.pose, camera, view);
  return c;
}

PoseCandidate estimate_circular(const ShapeObservation& shape, const LampModel& model,
                                const CameraIntrinsics& camera, const RigidTransform& view,
                                const Plane& plane, bool constrained, const LMOptions& lm) {
  if (!model.face.is_circle() || shape.kind != ShapeKind::Circular) {
    throw Error(ErrorCode::ShapeModelMismatch, "shape does not match face of model " + model.id);
  }
  const auto& pts = shape.contour.points;
  if (pts.size() < 6) throw Error(ErrorCode::EstimationFailed, "need at least 6 contour points");

  const AlignmentFrame frame = alignment_rotation(plane.normal.normalized());
  const CircleProblem cp = make_circle_problem(pts, model.face.radius, camera, view, frame);
  const Mat3 Lt = frame.L.rotation.transpose();
  const Vec3 start = Lt * approximate_position(shape, model, camera, view);
  // Without the plane constraint nothing is known about the orientation, so the free fit
  // starts facing the camera; the aligned variant starts on the plane normal.
  RotVec w0 = RotVec::Zero();
  if (!constrained) {
    const Vec3 facing = -(Lt * pixel_ray(camera, view, shape.ellipse.center)).normalized();
    w0 = alignment_rotation(facing).l;
  }
  const Eigen::VectorXd x0 = six(w0, start);
  if (2 * cp.count_parallel_rays(x0) > static_cast<int>(pts.size())) {
    throw Error(ErrorCode::RaysParallelToPlane, "most rays are parallel to the circle plane");
  }

  auto solve = [&](const Eigen::VectorXd& x, const std::vector<bool>& mask, const char* tag) {
    LMOptions opts = lm;
    opts.tag = tag;
    LMResult r;
    try {
      r = lm_minimize(cp.problem, x, mask, opts);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NonFiniteResidual) {
        throw Error(ErrorCode::EstimationFailed, std::string("circle fit diverged: ") + e.what());
      }
      throw;
    }
    if (!r.x_opt.allFinite()) throw Error(ErrorCode::EstimationFailed, "circle fit diverged");
    return r;
  };

  // Unconstrained fit; the normal is re-expressed without in-plane spin.
  const LMResult free_fit = solve(x0, full_mask(), "circle");
  const Vec3 n_free = rodrigues(free_fit.x_opt.head<3>()).col(2).normalized();
  const Eigen::VectorXd x_free = six(alignment_rotation(n_free).l, free_fit.x_opt.tail<3>());

  PoseCandidate c;
  c.model_id = model.id;
  c.shape = shape;
  c.plane = plane;
  c.alignment = frame;
  c.constrained = constrained;
  c.unconstrained_pose = pose_from_params(frame, x_free);
  c.pose = c.unconstrained_pose;
  c.initial_cost = free_fit.initial_cost;
  c.final_cost = free_fit.final_cost;

  if (constrained) {
    const Eigen::VectorXd xc = six(RotVec::Zero(), free_fit.x_opt.tail<3>());
    const LMResult fit = solve(xc, constrained_mask(), "circle-constrained");
    Eigen::VectorXd x = fit.x_opt;
    x[2] = 0.0;  // in-plane spin is unobservable
    c.pose = pose_from_params(frame, x);
    c.initial_cost = fit.initial_cost;
    c.final_cost = fit.final_cost;
  }
  c.projected_area = projected_face_area(model, c.pose, camera, view);
  return c;
}

Vec3 approximate_position(const ShapeObservation& shape, const LampModel& model,
                          const CameraIntrinsics& camera, const RigidTransform& view) {
  Vec2 centre = Vec2::Zero();
  if (shape.kind == ShapeKind::Circular) {
    centre = shape.ellipse.center;
  } else {
    for (const auto& v : shape.vertices) centre += v;
    centre /= static_cast<double>(std::max<std::size_t>(1, shape.vertices.size()));
  }
  const double f = 0.5 * (camera.fx + camera.fy);
  double depth = 0.0;
  if (shape.kind == ShapeKind::Circular && model.face.is_circle()) {
    depth = f * model.face.radius / std::max(shape.ellipse.semi_major, 1e-9);
  } else {
    depth = f * std::sqrt(model.face.area() / std::max(shape.area, 1e-9));
  }
  return camera_center(view) + depth * pixel_ray(camera, view, centre).normalized();
}

bool passes_prefilter(const PoseCandidate& c, const PrefilterLimits& limits) {
  if (z_axis_angle(c.unconstrained_pose, c.plane.normal) > limits.max_tilt) return false;
  if (std::abs(c.plane.signed_distance(c.pose.translation)) > limits.height_band) return false;
  if (!(c.shape.area > 0.0)) return false;
  const double ratio = c.projected_area / c.shape.area;
  return ratio >= limits.min_size_ratio && ratio <= limits.max_size_ratio;
}

std::vector<PoseCandidate> prefilter_candidates(const std::vector<PoseCandidate>& candidates,
                                                const PrefilterLimits& limits) {
  std::vector<PoseCandidate> out;
  for (const auto& c : candidates) {
    if (passes_prefilter(c, limits)) out.push_back(c);
  }
  return out;
}

}  // namespace lampdet
