#pragma once

#include "lampdet/geom.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lampdet {

/// Planar ceiling patch; the normal points down into the room.
struct CeilingSurface {
  std::vector<Vec3> vertices;
  Vec3 normal = -Vec3::UnitZ();

  Vec3 centroid() const;
  Plane plane() const { return {centroid(), normal}; }
  /// Euclidean distance from p to the polygon (interior or boundary).
  double distance_to(const Vec3& p) const;
};

/// Simplified building geometry: just the ceilings that constrain lamp orientation.
struct BuildingModel {
  std::string id;
  std::vector<CeilingSurface> ceilings;
};

struct MountingKind {
  enum class Kind { Embedded, Hanging };
  Kind kind = Kind::Embedded;
  double offset = 0.0;  // metres below the ceiling, hanging lamps only

  static MountingKind embedded() { return {}; }
  static MountingKind hanging(double offset) { return {Kind::Hanging, offset}; }
  bool is_hanging() const { return kind == Kind::Hanging; }
};

BuildingModel parse_building(const nlohmann::json& doc);
BuildingModel load_building(const std::filesystem::path& path);
nlohmann::json to_json(const BuildingModel& building);

/// Index of the ceiling closest to `p` (ties: lowest index); -1 when there are none.
int nearest_ceiling(const BuildingModel& building, const Vec3& p);

/// Plane that detections near `world_pos` must be aligned with.
Plane reference_plane(const BuildingModel& building, const Vec3& world_pos,
                      const MountingKind& mounting);

}  // namespace lampdet
