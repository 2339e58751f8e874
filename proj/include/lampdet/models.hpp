#pragma once

#include "lampdet/bim.hpp"
#include "lampdet/geom.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lampdet {

struct Segment3 {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
};

/// Lamp face on the model z = 0 plane, either a polygon or a circle of radius R_C.
struct LampFace {
  enum class Kind { Polygon, Circle };
  Kind kind = Kind::Polygon;
  std::vector<Vec3> vertices;  // polygon, counterclockwise seen from +z
  double radius = 0.0;         // circle

  bool is_circle() const { return kind == Kind::Circle; }
  /// Boundary sampled as a closed polyline (polygon vertices, or `circle_segments` points).
  std::vector<Vec3> outline(int circle_segments = 48) const;
  double area() const;
};

struct LampModel {
  std::string id;
  LampFace face;
  std::vector<Segment3> edge_template;
  MountingKind mounting;
};

/// Template edge points with the 3D direction of the segment they came from.
struct TemplateEdges {
  std::vector<Vec3> points;
  std::vector<Vec3> directions;
};

/// Face outline as closed segments; used when a model has no explicit template.
std::vector<Segment3> outline_template(const LampFace& face, int circle_segments = 48);

/// Points every `spacing` metres (at least two per segment, endpoints excluded).
TemplateEdges sample_template(const std::vector<Segment3>& segments, double spacing);

std::vector<LampModel> parse_models(const nlohmann::json& doc);
std::vector<LampModel> load_models(const std::filesystem::path& path);
nlohmann::json to_json(const std::vector<LampModel>& models);

/// Index of the model with `id`, or -1.
int find_model(const std::vector<LampModel>& models, const std::string& id);

}  // namespace lampdet
