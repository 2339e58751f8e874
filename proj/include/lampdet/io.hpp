#pragma once

#include "lampdet/geom.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace lampdet {

nlohmann::json to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);

/// {"rotation": [9 numbers, row-major], "translation": [3 numbers]}
nlohmann::json to_json(const RigidTransform& t);
RigidTransform transform_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CameraIntrinsics& c);
CameraIntrinsics camera_from_json(const nlohmann::json& j);

/// Parses a JSON file; MissingFile when absent, SchemaError when malformed.
nlohmann::json read_json(const std::filesystem::path& path);
/// Writes with a trailing newline; IngestError when the file cannot be created.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc, int indent = 2);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace lampdet
