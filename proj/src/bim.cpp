#include "lampdet/bim.hpp"

#include "lampdet/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace lampdet {

using nlohmann::json;

namespace {

constexpr double kCoplanarTolerance = 1e-6;

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

Vec3 parse_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::SchemaError, std::string(what) + " must be an array of 3 numbers");
  }
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) {
      throw Error(ErrorCode::SchemaError, std::string(what) + " must contain numbers");
    }
    v[i] = j[i].get<double>();
  }
  if (!v.allFinite()) throw Error(ErrorCode::SchemaError, std::string(what) + " is not finite");
  return v;
}

CeilingSurface parse_ceiling(const json& j, std::size_t index) {
  if (!j.is_object() || !j.contains("vertices") || !j.contains("normal")) {
    throw Error(ErrorCode::SchemaError,
                "ceiling " + std::to_string(index) + " needs 'vertices' and 'normal'");
  }
  CeilingSurface c;
  for (const auto& v : j.at("vertices")) c.vertices.push_back(parse_vec3(v, "vertex"));
  if (c.vertices.size() < 3) {
    throw Error(ErrorCode::SchemaError,
                "ceiling " + std::to_string(index) + " has fewer than 3 vertices");
  }
  c.normal = parse_vec3(j.at("normal"), "normal");
  const double len = c.normal.norm();
  if (std::abs(len - 1.0) > 1e-6) {
    throw Error(ErrorCode::SchemaError,
                "ceiling " + std::to_string(index) + " normal is not a unit vector");
  }
  c.normal /= len;

  const Vec3 centre = c.centroid();
  for (const auto& v : c.vertices) {
    if (std::abs(c.normal.dot(v - centre)) > kCoplanarTolerance) {
      throw Error(ErrorCode::NonCoplanarSurface,
                  "ceiling " + std::to_string(index) + " vertices are not coplanar");
    }
  }
  return c;
}

}  // namespace

Vec3 CeilingSurface::centroid() const {
  Vec3 c = Vec3::Zero();
  for (const auto& v : vertices) c += v;
  return vertices.empty() ? c : Vec3(c / static_cast<double>(vertices.size()));
}

double CeilingSurface::distance_to(const Vec3& p) const {
  const Vec3 c = centroid();
  const double height = normal.dot(p - c);
  const Vec3 q = p - height * normal;

  // In-plane basis for the point-in-polygon test.
  const Vec3 u = normal.unitOrthogonal();
  const Vec3 w = normal.cross(u);
  const double qx = u.dot(q - c);
  const double qy = w.dot(q - c);
  bool inside = false;
  const std::size_t n = vertices.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const double xi = u.dot(vertices[i] - c), yi = w.dot(vertices[i] - c);
    const double xj = u.dot(vertices[j] - c), yj = w.dot(vertices[j] - c);
    if ((yi > qy) != (yj > qy) && qx < (xj - xi) * (qy - yi) / (yj - yi) + xi) inside = !inside;
  }
  if (inside) return std::abs(height);

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    best = std::min(best, point_segment_distance(p, vertices[i], vertices[(i + 1) % n]));
  }
  return best;
}

BuildingModel parse_building(const json& doc) {
  if (!doc.is_object() || !doc.contains("ceilings") || !doc.at("ceilings").is_array()) {
    throw Error(ErrorCode::SchemaError, "building needs a 'ceilings' array");
  }
  BuildingModel b;
  if (doc.contains("id")) {
    if (!doc.at("id").is_string()) throw Error(ErrorCode::SchemaError, "'id' must be text");
    b.id = doc.at("id").get<std::string>();
  }
  std::size_t index = 0;
  for (const auto& c : doc.at("ceilings")) b.ceilings.push_back(parse_ceiling(c, index++));
  return b;
}

BuildingModel load_building(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open building file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
  return parse_building(doc);
}

json to_json(const BuildingModel& building) {
  json ceilings = json::array();
  for (const auto& c : building.ceilings) {
    json verts = json::array();
    for (const auto& v : c.vertices) verts.push_back({v.x(), v.y(), v.z()});
    ceilings.push_back({{"vertices", verts}, {"normal", {c.normal.x(), c.normal.y(), c.normal.z()}}});
  }
  return {{"id", building.id}, {"ceilings", ceilings}};
}

int nearest_ceiling(const BuildingModel& building, const Vec3& p) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < building.ceilings.size(); ++i) {
    const double d = building.ceilings[i].distance_to(p);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Plane reference_plane(const BuildingModel& building, const Vec3& world_pos,
                      const MountingKind& mounting) {
  const int idx = nearest_ceiling(building, world_pos);
  if (idx < 0) throw Error(ErrorCode::NoCeilingAvailable, "building has no ceilings");
  if (!mounting.is_hanging()) return building.ceilings[idx].plane();

  const CeilingSurface& c = building.ceilings[idx];
  const Vec3 centre = c.centroid();
  double ceiling_z = centre.z();
  if (std::abs(c.normal.z()) > 1e-9) {
    ceiling_z = centre.z() - (c.normal.x() * (world_pos.x() - centre.x()) +
                              c.normal.y() * (world_pos.y() - centre.y())) / c.normal.z();
  }
  return Plane{Vec3(world_pos.x(), world_pos.y(), ceiling_z - mounting.offset), Vec3::UnitZ()};
}

}  // namespace lampdet
