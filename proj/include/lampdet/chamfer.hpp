#pragma once

#include "lampdet/detection.hpp"
#include "lampdet/geom.hpp"
#include "lampdet/image.hpp"
#include "lampdet/models.hpp"
#include "lampdet/optim.hpp"
#include "lampdet/pose.hpp"

#include <vector>

namespace lampdet {

/// Edge pixel; theta is the undirected line orientation in [0, pi).
struct EdgePoint {
  int x = 0;
  int y = 0;
  double theta = 0.0;
  double magnitude = 0.0;
};

struct EdgeMap {
  int width = 0;
  int height = 0;
  std::vector<EdgePoint> points;
};

/// Sobel gradient (magnitude scaled by 1/4, so a clean step of height h reads h)
/// followed by non-maximum suppression along the gradient.
EdgeMap detect_edges(const GrayImage& img, double grad_threshold);

/// Value stored in every cell when the edge map is empty.
inline constexpr float kEmptyFieldValue = 1.0e6f;

/// Orientation channel of a line angle: round(theta * q / pi) mod q.
int orientation_channel(double theta, int q);
/// lambda * (steps * pi / q); shared by the field and its reference implementation.
double orientation_penalty(int steps, int q, double lambda);

/// field(x, y, k) = min over edges e of |(x, y) - e| + lambda * dtheta(k, channel(e)),
/// where dtheta is the circular channel distance times pi/q.
class DirectionalDistanceField {
 public:
  DirectionalDistanceField() = default;
  DirectionalDistanceField(int width, int height, int q, double lambda);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return q_; }
  double lambda() const { return lambda_; }
  float max_value() const { return max_value_; }

  float at(int x, int y, int k) const { return data_[index(x, y, k)]; }
  float& at(int x, int y, int k) { return data_[index(x, y, k)]; }

  int channel(double theta) const { return orientation_channel(theta, q_); }
  /// Bilinear in x, y on channel k; max_value() outside the image.
  double lookup(double x, double y, int k) const;

  void update_max();

 private:
  std::size_t index(int x, int y, int k) const {
    return (static_cast<std::size_t>(k) * height_ + y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  int q_ = 1;
  double lambda_ = 0.0;
  float max_value_ = kEmptyFieldValue;
  std::vector<float> data_;
};

DirectionalDistanceField build_ddf(const EdgeMap& edges, int q, double lambda);

struct Roi {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
  bool contains(const Vec2& p) const {
    return p.x() >= min_x && p.x() <= max_x && p.y() >= min_y && p.y() <= max_y;
  }
};

/// Box grown by `fraction` of its size on every side, clipped to the image.
Roi dilate_box(const PixelBox& box, double fraction, int width, int height);
Roi full_image_roi(const DirectionalDistanceField& field);

/// Projected template point with its orientation channel; `visible` is false behind the camera.
struct ProjectedEdge {
  Vec2 pixel = Vec2::Zero();
  int channel = 0;
  bool visible = false;
};

std::vector<ProjectedEdge> project_template(const TemplateEdges& tmpl, const RigidTransform& pose,
                                            const CameraIntrinsics& camera,
                                            const RigidTransform& view,
                                            const DirectionalDistanceField& field);

/// Mean field value over template points; points outside `roi` count as max_value().
/// Throws NoVisibleTemplate when no point lands inside the image.
double fdcm_score(const TemplateEdges& tmpl, const RigidTransform& pose,
                  const CameraIntrinsics& camera, const RigidTransform& view,
                  const DirectionalDistanceField& field, const Roi& roi);

/// Template spacing for roughly `pixels` px between samples at the pose's depth.
double template_spacing(const RigidTransform& pose, const CameraIntrinsics& camera,
                        const RigidTransform& view, double pixels = 1.5);

struct ModelSelection {
  int index = -1;  // into the candidate list
  int model_index = -1;
  std::string model_id;
  double score = 0.0;
};

/// Scores each model's template at the candidate pose inside the dilated shape box.
ModelSelection select_model(const PoseCandidate& candidate, const std::vector<LampModel>& db,
                            const DirectionalDistanceField& field, const CameraIntrinsics& camera,
                            const RigidTransform& view, double roi_dilation = 0.2);

/// Same rule over per-model candidates of one shape, each scored with its own pose.
/// Ties go to the lower model index.
ModelSelection select_model(const std::vector<PoseCandidate>& alternatives,
                            const std::vector<LampModel>& db,
                            const DirectionalDistanceField& field, const CameraIntrinsics& camera,
                            const RigidTransform& view, double roi_dilation = 0.2);

struct RefineResult {
  RigidTransform pose;
  double score = 0.0;  // mean lookup at the final pose
  int iterations = 0;
};

/// Chamfer residuals (one field lookup per template point) over the pose six-vector.
ResidualProblem make_chamfer_problem(const TemplateEdges& tmpl, const CameraIntrinsics& camera,
                                     const RigidTransform& view,
                                     const DirectionalDistanceField& field,
                                     const AlignmentFrame& frame);

RefineResult refine_d2co(const RigidTransform& pose, const TemplateEdges& tmpl,
                         const DirectionalDistanceField& field, const CameraIntrinsics& camera,
                         const RigidTransform& view, const AlignmentFrame& alignment,
                         bool constrained, const LMOptions& lm = {});

/// Keeps detections with chamfer_score <= threshold, in order.
std::vector<Detection> score_filter(const std::vector<Detection>& detections, double threshold);

}  // namespace lampdet
