#include "lampdet/models.hpp"

#include "lampdet/error.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace lampdet {

using nlohmann::json;

namespace {

Vec3 parse_point(const json& j) {
  if (!j.is_array() || (j.size() != 2 && j.size() != 3)) {
    throw Error(ErrorCode::SchemaError, "points must be [x, y] or [x, y, z]");
  }
  Vec3 p = Vec3::Zero();
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::SchemaError, "point coordinates must be numbers");
    p[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  if (!p.allFinite()) throw Error(ErrorCode::SchemaError, "point is not finite");
  return p;
}

LampModel parse_model(const json& j) {
  if (!j.is_object() || !j.contains("id") || !j.at("id").is_string() || !j.contains("face")) {
    throw Error(ErrorCode::SchemaError, "model needs a text 'id' and a 'face'");
  }
  LampModel m;
  m.id = j.at("id").get<std::string>();
  const json& face = j.at("face");
  if (face.contains("polygon")) {
    m.face.kind = LampFace::Kind::Polygon;
    for (const auto& v : face.at("polygon")) {
      Vec3 p = parse_point(v);
      if (std::abs(p.z()) > 1e-9) {
        throw Error(ErrorCode::SchemaError, m.id + ": face vertices must lie on z = 0");
      }
      m.face.vertices.push_back(p);
    }
    if (m.face.vertices.size() < 4) {
      throw Error(ErrorCode::SchemaError, m.id + ": polygon faces need at least 4 vertices");
    }
  } else if (face.contains("circle")) {
    m.face.kind = LampFace::Kind::Circle;
    if (!face.at("circle").is_number() || !(face.at("circle").get<double>() > 0.0)) {
      throw Error(ErrorCode::SchemaError, m.id + ": circle radius must be positive");
    }
    m.face.radius = face.at("circle").get<double>();
  } else {
    throw Error(ErrorCode::SchemaError, m.id + ": face must be 'polygon' or 'circle'");
  }

  if (j.contains("edge_template")) {
    for (const auto& s : j.at("edge_template")) {
      if (!s.is_array() || s.size() != 2) {
        throw Error(ErrorCode::SchemaError, m.id + ": template segments are [[x,y,z],[x,y,z]]");
      }
      m.edge_template.push_back({parse_point(s[0]), parse_point(s[1])});
    }
  }
  if (m.edge_template.empty()) m.edge_template = outline_template(m.face);

  if (j.contains("mounting")) {
    const json& mt = j.at("mounting");
    if (mt.is_string() && mt.get<std::string>() == "embedded") {
      m.mounting = MountingKind::embedded();
    } else if (mt.is_object() && mt.contains("hanging") && mt.at("hanging").is_number() &&
               mt.at("hanging").get<double>() >= 0.0) {
      m.mounting = MountingKind::hanging(mt.at("hanging").get<double>());
    } else {
      throw Error(ErrorCode::SchemaError, m.id + ": mounting is \"embedded\" or {\"hanging\": d}");
    }
  }
  return m;
}

}  // namespace

std::vector<Vec3> LampFace::outline(int circle_segments) const {
  if (!is_circle()) return vertices;
  std::vector<Vec3> pts;
  pts.reserve(circle_segments);
  for (int i = 0; i < circle_segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / circle_segments;
    pts.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
  }
  return pts;
}

double LampFace::area() const {
  if (is_circle()) return std::numbers::pi * radius * radius;
  double s = 0.0;
  for (std::size_t i = 0, n = vertices.size(); i < n; ++i) {
    const Vec3& a = vertices[i];
    const Vec3& b = vertices[(i + 1) % n];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * std::abs(s);
}

std::vector<Segment3> outline_template(const LampFace& face, int circle_segments) {
  const auto pts = face.outline(circle_segments);
  std::vector<Segment3> segs;
  for (std::size_t i = 0; i < pts.size(); ++i) segs.push_back({pts[i], pts[(i + 1) % pts.size()]});
  return segs;
}

TemplateEdges sample_template(const std::vector<Segment3>& segments, double spacing) {
  TemplateEdges t;
  for (const auto& s : segments) {
    const Vec3 d = s.b - s.a;
    const double len = d.norm();
    if (len <= 0.0) continue;
    const int count = std::max(2, static_cast<int>(std::ceil(len / spacing)));
    const Vec3 dir = d / len;
    // Midpoints of `count` equal pieces; corners are left out where edges are least reliable.
    for (int i = 0; i < count; ++i) {
      t.points.push_back(s.a + d * ((i + 0.5) / count));
      t.directions.push_back(dir);
    }
  }
  return t;
}

std::vector<LampModel> parse_models(const json& doc) {
  const json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("models")) throw Error(ErrorCode::SchemaError, "expected a 'models' array");
    list = &doc.at("models");
  }
  if (!list->is_array()) throw Error(ErrorCode::SchemaError, "models must be an array");
  std::vector<LampModel> models;
  for (const auto& m : *list) {
    models.push_back(parse_model(m));
    if (find_model(models, models.back().id) != static_cast<int>(models.size()) - 1) {
      throw Error(ErrorCode::SchemaError, "duplicate model id " + models.back().id);
    }
  }
  return models;
}

std::vector<LampModel> load_models(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open models file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
  return parse_models(doc);
}

json to_json(const std::vector<LampModel>& models) {
  json arr = json::array();
  for (const auto& m : models) {
    json face;
    if (m.face.is_circle()) {
      face["circle"] = m.face.radius;
    } else {
      json poly = json::array();
      for (const auto& v : m.face.vertices) poly.push_back({v.x(), v.y()});
      face["polygon"] = poly;
    }
    json segs = json::array();
    for (const auto& s : m.edge_template) {
      segs.push_back({{s.a.x(), s.a.y(), s.a.z()}, {s.b.x(), s.b.y(), s.b.z()}});
    }
    json mounting = m.mounting.is_hanging() ? json{{"hanging", m.mounting.offset}} : json("embedded");
    arr.push_back({{"id", m.id}, {"face", face}, {"edge_template", segs}, {"mounting", mounting}});
  }
  return {{"models", arr}};
}

int find_model(const std::vector<LampModel>& models, const std::string& id) {
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace lampdet
