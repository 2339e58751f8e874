#include "lampdet/io.hpp"

#include "lampdet/error.hpp"

#include <fstream>

namespace lampdet {

using nlohmann::json;

json to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::SchemaError, "expected [x, y, z]");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::SchemaError, "expected numbers in [x, y, z]");
    v[i] = j[i].get<double>();
  }
  return v;
}

json to_json(const RigidTransform& t) {
  json r = json::array();
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) r.push_back(t.rotation(i, k));
  }
  return {{"rotation", r}, {"translation", to_json(t.translation)}};
}

RigidTransform transform_from_json(const json& j) {
  if (!j.is_object() || !j.contains("rotation") || !j.contains("translation")) {
    throw Error(ErrorCode::SchemaError, "transform needs 'rotation' and 'translation'");
  }
  const json& r = j.at("rotation");
  if (!r.is_array() || r.size() != 9) throw Error(ErrorCode::SchemaError, "rotation has 9 numbers");
  RigidTransform t;
  for (int i = 0; i < 9; ++i) t.rotation(i / 3, i % 3) = r[i].get<double>();
  t.translation = vec3_from_json(j.at("translation"));
  check_rotation(t.rotation, 1e-6);
  return t;
}

json to_json(const CameraIntrinsics& c) {
  return {{"fx", c.fx},         {"fy", c.fy},         {"cx", c.cx},
          {"cy", c.cy},         {"width", c.width},   {"height", c.height},
          {"distortion", c.distortion}};
}

CameraIntrinsics camera_from_json(const json& j) {
  CameraIntrinsics c;
  try {
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    if (j.contains("distortion")) {
      const json& d = j.at("distortion");
      if (!d.is_array() || d.size() != 5) {
        throw Error(ErrorCode::SchemaError, "distortion has 5 coefficients (k1, k2, p1, p2, k3)");
      }
      for (int i = 0; i < 5; ++i) c.distortion[i] = d[i].get<double>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("camera: ") + e.what());
  }
  c.validate();
  return c;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IngestError, "cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const json& doc, int indent) {
  write_text(path, doc.dump(indent) + "\n");
}

}  // namespace lampdet
