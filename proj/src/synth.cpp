#include "lampdet/synth.hpp"

#include "lampdet/error.hpp"
#include "lampdet/io.hpp"
#include "lampdet/shapes.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <thread>

namespace lampdet {

using nlohmann::json;

namespace {

constexpr int kSuper = 4;           // supersamples per pixel side
constexpr int kCircleOutline = 128; // polygon used to fill projected circles

std::mt19937_64 frame_rng(std::uint64_t seed, int frame) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(frame), 0x6c616d70u};
  return std::mt19937_64(seq);
}

// Adds fractional pixel coverage of `poly` (even-odd rule) into cov.
void rasterize(std::vector<float>& cov, int w, int h, const std::vector<Vec2>& poly) {
  double miny = poly[0].y(), maxy = miny;
  for (const auto& p : poly) {
    miny = std::min(miny, p.y());
    maxy = std::max(maxy, p.y());
  }
  const int y0 = std::max(0, static_cast<int>(std::floor(miny)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(maxy)));
  const float weight = 1.0f / (kSuper * kSuper);
  std::vector<double> xs;
  for (int y = y0; y <= y1; ++y) {
    for (int j = 0; j < kSuper; ++j) {
      const double sy = y + (j + 0.5) / kSuper - 0.5;
      xs.clear();
      for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        if ((a.y() <= sy && sy < b.y()) || (b.y() <= sy && sy < a.y())) {
          xs.push_back(a.x() + (sy - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
        }
      }
      std::sort(xs.begin(), xs.end());
      for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
        // Subsample column s sits at (s + 0.5) / kSuper - 0.5.
        int s0 = static_cast<int>(std::ceil((xs[k] + 0.5) * kSuper - 0.5));
        int s1 = static_cast<int>(std::ceil((xs[k + 1] + 0.5) * kSuper - 0.5)) - 1;
        s0 = std::max(s0, 0);
        s1 = std::min(s1, w * kSuper - 1);
        float* row = cov.data() + static_cast<std::size_t>(y) * w;
        for (int s = s0; s <= s1; ++s) row[s / kSuper] += weight;
      }
    }
  }
}

// Polygon clipped to the image rectangle (pixel edges), Sutherland-Hodgman.
std::vector<Vec2> clip_to_image(const std::vector<Vec2>& poly, int w, int h) {
  std::vector<Vec2> out = poly;
  const double lo_x = -0.5, hi_x = w - 0.5, lo_y = -0.5, hi_y = h - 0.5;
  for (int edge = 0; edge < 4 && !out.empty(); ++edge) {
    auto inside = [&](const Vec2& p) {
      switch (edge) {
        case 0: return p.x() >= lo_x;
        case 1: return p.x() <= hi_x;
        case 2: return p.y() >= lo_y;
        default: return p.y() <= hi_y;
      }
    };
    auto cross = [&](const Vec2& a, const Vec2& b) {
      double t = 0.0;
      switch (edge) {
        case 0: t = (lo_x - a.x()) / (b.x() - a.x()); break;
        case 1: t = (hi_x - a.x()) / (b.x() - a.x()); break;
        case 2: t = (lo_y - a.y()) / (b.y() - a.y()); break;
        default: t = (hi_y - a.y()) / (b.y() - a.y()); break;
      }
      return Vec2(a + t * (b - a));
    };
    std::vector<Vec2> in = std::move(out);
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Vec2& a = in[i];
      const Vec2& b = in[(i + 1) % in.size()];
      if (inside(b)) {
        if (!inside(a)) out.push_back(cross(a, b));
        out.push_back(b);
      } else if (inside(a)) {
        out.push_back(cross(a, b));
      }
    }
  }
  return out;
}

struct Box {
  double x0, y0, x1, y1;
  bool overlaps(const Box& o, double margin) const {
    return !(x1 + margin < o.x0 || o.x1 + margin < x0 || y1 + margin < o.y0 || o.y1 + margin < y0);
  }
};

Box bounds(const std::vector<Vec2>& poly) {
  Box b{poly[0].x(), poly[0].y(), poly[0].x(), poly[0].y()};
  for (const auto& p : poly) {
    b.x0 = std::min(b.x0, p.x());
    b.y0 = std::min(b.y0, p.y());
    b.x1 = std::max(b.x1, p.x());
    b.y1 = std::max(b.y1, p.y());
  }
  return b;
}

LampState state_from_json(const json& j) {
  const auto s = j.get<std::string>();
  if (s == "on") return LampState::On;
  if (s == "off") return LampState::Off;
  throw Error(ErrorCode::SchemaError, "lamp state must be \"on\" or \"off\"");
}

}  // namespace

std::vector<RigidTransform> generate_trajectory(const TrajectorySpec& spec) {
  if (spec.path.size() < 2 || !(spec.speed > 0.0) || !(spec.frame_rate > 0.0)) {
    throw Error(ErrorCode::InvalidPath, "trajectory needs two points and positive speed and rate");
  }
  std::vector<double> cum{0.0};
  for (std::size_t i = 1; i < spec.path.size(); ++i) {
    cum.push_back(cum.back() + (spec.path[i] - spec.path[i - 1]).norm());
  }
  const double length = cum.back();
  if (!(length > 0.0)) throw Error(ErrorCode::InvalidPath, "trajectory path has zero length");

  const auto count =
      static_cast<std::size_t>(std::floor(length * spec.frame_rate / spec.speed + 1e-9)) + 1;
  const double pitch = spec.pitch_deg * std::numbers::pi / 180.0;
  std::vector<RigidTransform> views;
  views.reserve(count);
  std::size_t seg = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double s = std::min(static_cast<double>(i) * spec.speed / spec.frame_rate, length);
    while (seg + 2 < cum.size() && (s > cum[seg + 1] || cum[seg + 1] == cum[seg])) ++seg;
    const Vec2 a = spec.path[seg], b = spec.path[seg + 1];
    const double seg_len = cum[seg + 1] - cum[seg];
    const double u = seg_len > 0.0 ? (s - cum[seg]) / seg_len : 0.0;
    const Vec2 xy = a + u * (b - a);
    const Vec2 dir = (b - a).normalized();

    const Vec3 fwd(std::cos(pitch) * dir.x(), std::cos(pitch) * dir.y(), std::sin(pitch));
    const Vec3 right = fwd.cross(Vec3::UnitZ()).normalized();
    const Vec3 down = fwd.cross(right);
    RigidTransform v;
    v.rotation.row(0) = right.transpose();
    v.rotation.row(1) = down.transpose();
    v.rotation.row(2) = fwd.transpose();
    const Vec3 centre(xy.x(), xy.y(), spec.height);
    v.translation = -(v.rotation * centre);
    views.push_back(v);
  }
  return views;
}

FrameRecord render_frame(const SceneSpec& scene, const RigidTransform& view, int frame_index) {
  const CameraIntrinsics& cam = scene.camera;
  const int w = cam.width, h = cam.height;
  std::mt19937_64 rng = frame_rng(scene.seed, frame_index);
  std::normal_distribution<double> gauss(0.0, 1.0);

  FrameRecord rec;
  rec.view = view;
  std::vector<double> value(static_cast<std::size_t>(w) * h, scene.ambient);
  std::vector<float> cov(value.size());
  std::vector<Box> occupied;

  auto composite = [&](double intensity) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double c = std::min(1.0f, cov[i]);
      if (c > 0.0) value[i] = value[i] * (1.0 - c) + intensity * c;
    }
  };

  for (std::size_t li = 0; li < scene.lamps.size(); ++li) {
    const LampInstance& lamp = scene.lamps[li];
    const LampModel& model = scene.models.at(lamp.model_index);
    const auto outline = model.face.outline(kCircleOutline);
    std::vector<Vec2> poly;
    bool front = true;
    for (const auto& p : outline) {
      const Vec3 pc = view.apply(lamp.pose.apply(p));
      if (pc.z() < 0.05) {
        front = false;
        break;
      }
      poly.push_back(project_camera_point(cam, pc));
    }
    if (!front) continue;

    VisibleLamp vis;
    vis.lamp = static_cast<int>(li);
    vis.model_index = lamp.model_index;
    vis.pose = lamp.pose;
    vis.state = lamp.state;
    vis.projected_area = polygon_area(clip_to_image(poly, w, h));
    vis.fully_visible = std::all_of(poly.begin(), poly.end(), [&](const Vec2& p) {
      return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= w - 1.0 && p.y() <= h - 1.0;
    });
    if (vis.projected_area <= 0.0) continue;

    if (scene.contour_jitter > 0.0) {
      if (model.face.is_circle()) {
        // Low-order radial wobble about the projected centre.
        const Vec3 cc = view.apply(lamp.pose.translation);
        const Vec2 centre = project_camera_point(cam, cc);
        double coef[3][2];
        for (auto& c : coef) {
          c[0] = gauss(rng) * scene.contour_jitter / std::sqrt(3.0);
          c[1] = gauss(rng) * scene.contour_jitter / std::sqrt(3.0);
        }
        for (std::size_t i = 0; i < poly.size(); ++i) {
          const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / poly.size();
          double delta = 0.0;
          for (int k = 0; k < 3; ++k) {
            delta += coef[k][0] * std::cos((k + 2) * phi) + coef[k][1] * std::sin((k + 2) * phi);
          }
          const Vec2 r = poly[i] - centre;
          const double len = r.norm();
          if (len > 0.0) poly[i] += delta * r / len;
        }
      } else {
        for (auto& p : poly) p += scene.contour_jitter * Vec2(gauss(rng), gauss(rng));
      }
    }

    std::fill(cov.begin(), cov.end(), 0.0f);
    rasterize(cov, w, h, poly);
    composite(lamp.state == LampState::On ? scene.on_intensity : scene.off_intensity);
    occupied.push_back(bounds(poly));
    if (vis.projected_area >= kMinVisibleArea) rec.visible.push_back(vis);
  }

  // Distractors: seven-pointed stars, which never simplify to a lamp face.
  std::uniform_real_distribution<double> ux(20.0, w - 20.0), uy(20.0, h - 20.0), ur(9.0, 16.0),
      ua(0.0, 2.0 * std::numbers::pi);
  for (int d = 0; d < scene.distractors; ++d) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      const Vec2 c(ux(rng), uy(rng));
      const double r = ur(rng), a0 = ua(rng);
      std::vector<Vec2> star;
      for (int k = 0; k < 14; ++k) {
        const double rad = (k % 2 == 0) ? r : 0.5 * r;
        const double a = a0 + k * std::numbers::pi / 7.0;
        star.push_back(c + rad * Vec2(std::cos(a), std::sin(a)));
      }
      const Box b = bounds(star);
      if (b.x0 < 1 || b.y0 < 1 || b.x1 > w - 2 || b.y1 > h - 2) continue;
      if (std::any_of(occupied.begin(), occupied.end(),
                      [&](const Box& o) { return o.overlaps(b, 6.0); })) {
        continue;
      }
      std::fill(cov.begin(), cov.end(), 0.0f);
      rasterize(cov, w, h, star);
      composite(scene.on_intensity);
      occupied.push_back(b);
      ++rec.distractors;
      break;
    }
  }

  rec.image = GrayImage(w, h);
  for (std::size_t i = 0; i < value.size(); ++i) {
    double v = value[i];
    if (scene.noise_sigma > 0.0) v += scene.noise_sigma * gauss(rng);
    rec.image.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return rec;
}

SceneSpec hallway_scene(const HallwayOptions& opt) {
  SceneSpec s;
  s.seed = opt.seed;
  s.noise_sigma = opt.noise_sigma;
  s.contour_jitter = opt.contour_jitter;
  s.distractors = opt.distractors;
  s.camera.fx = s.camera.fy = 500.0;
  s.camera.cx = 319.5;
  s.camera.cy = 239.5;
  s.camera.width = 640;
  s.camera.height = 480;

  s.building.id = "hallway";
  CeilingSurface ceiling;
  ceiling.vertices = {{-1.0, -2.0, 3.0}, {22.0, -2.0, 3.0}, {22.0, 2.0, 3.0}, {-1.0, 2.0, 3.0}};
  ceiling.normal = Vec3(0.0, 0.0, -1.0);
  s.building.ceilings.push_back(ceiling);

  LampModel panel;
  panel.id = "panel";
  panel.face.vertices = {{-0.3, -0.3, 0.0}, {0.3, -0.3, 0.0}, {0.3, 0.3, 0.0}, {-0.3, 0.3, 0.0}};
  panel.edge_template = outline_template(panel.face);
  LampModel down;
  down.id = "downlight";
  down.face.kind = LampFace::Kind::Circle;
  down.face.radius = 0.15;
  down.edge_template = outline_template(down.face);
  LampModel strip;
  strip.id = "strip";
  strip.face.vertices = {{-0.6, -0.15, 0.0}, {0.6, -0.15, 0.0}, {0.6, 0.15, 0.0}, {-0.6, 0.15, 0.0}};
  strip.edge_template = outline_template(strip.face);
  s.models = {panel, down, strip};

  std::mt19937_64 rng(opt.seed * 0x9e3779b97f4a7c15ULL + 17);
  std::uniform_real_distribution<double> axis_angle(0.0, 2.0 * std::numbers::pi);
  const Mat3 flip = rodrigues(RotVec(std::numbers::pi, 0.0, 0.0));  // model z onto the ceiling normal
  const double yaw[] = {0.0, 0.0, 0.2, 0.0, -0.15, 0.0, 0.1, 0.0};
  for (int i = 0; i < 8; ++i) {
    LampInstance lamp;
    lamp.model_index = i % 2 == 0 ? 0 : 1;
    lamp.state = (i == 2 || i == 5) ? LampState::Off : LampState::On;
    Mat3 R = flip * rodrigues(RotVec(0.0, 0.0, yaw[i]));
    if (opt.tilt_deg != 0.0) {
      const double a = axis_angle(rng);
      const Vec3 axis(std::cos(a), std::sin(a), 0.0);
      R = rodrigues(axis * (opt.tilt_deg * std::numbers::pi / 180.0)) * R;
    }
    lamp.pose.rotation = R;
    lamp.pose.translation = Vec3(2.0 + 2.4 * i, 0.3 * ((i % 3) - 1), 3.0);
    s.lamps.push_back(lamp);
  }
  return s;
}

TrajectorySpec hallway_trajectory(const HallwayOptions& opt) {
  TrajectorySpec t;
  const double len = std::max(1, opt.frames - 1) * t.speed / t.frame_rate;
  t.path = {Vec2(0.0, 0.0), Vec2(len, 0.0)};
  return t;
}

ReferenceSet scene_references(const SceneSpec& scene) {
  ReferenceSet refs;
  for (const auto& l : scene.lamps) {
    refs.push_back({l.pose.translation, scene.models.at(l.model_index).id, l.state});
  }
  return refs;
}

json to_json(const SceneSpec& s) {
  json lamps = json::array();
  for (const auto& l : s.lamps) {
    lamps.push_back({{"model", s.models.at(l.model_index).id},
                     {"pose", to_json(l.pose)},
                     {"state", to_string(l.state)}});
  }
  return {{"building", to_json(s.building)},
          {"models", to_json(s.models).at("models")},
          {"lamps", lamps},
          {"camera", to_json(s.camera)},
          {"ambient", s.ambient},
          {"on_intensity", s.on_intensity},
          {"off_intensity", s.off_intensity},
          {"noise_sigma", s.noise_sigma},
          {"contour_jitter", s.contour_jitter},
          {"distractors", s.distractors},
          {"seed", s.seed}};
}

SceneSpec scene_from_json(const json& j) {
  SceneSpec s;
  try {
    s.building = parse_building(j.at("building"));
    s.models = parse_models(j.at("models"));
    s.camera = camera_from_json(j.at("camera"));
    s.ambient = j.value("ambient", s.ambient);
    s.on_intensity = j.value("on_intensity", s.on_intensity);
    s.off_intensity = j.value("off_intensity", s.off_intensity);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.contour_jitter = j.value("contour_jitter", s.contour_jitter);
    s.distractors = j.value("distractors", s.distractors);
    s.seed = j.value("seed", s.seed);
    for (const auto& l : j.at("lamps")) {
      LampInstance lamp;
      lamp.model_index = find_model(s.models, l.at("model").get<std::string>());
      if (lamp.model_index < 0) throw Error(ErrorCode::SchemaError, "lamp refers to unknown model");
      lamp.pose = transform_from_json(l.at("pose"));
      lamp.state = l.contains("state") ? state_from_json(l.at("state")) : LampState::On;
      s.lamps.push_back(lamp);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("scene: ") + e.what());
  }
  return s;
}

json to_json(const TrajectorySpec& t) {
  json path = json::array();
  for (const auto& p : t.path) path.push_back({p.x(), p.y()});
  return {{"path", path},
          {"speed", t.speed},
          {"frame_rate", t.frame_rate},
          {"height", t.height},
          {"pitch_deg", t.pitch_deg}};
}

TrajectorySpec trajectory_from_json(const json& j) {
  TrajectorySpec t;
  try {
    for (const auto& p : j.at("path")) t.path.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    t.speed = j.value("speed", t.speed);
    t.frame_rate = j.value("frame_rate", t.frame_rate);
    t.height = j.value("height", t.height);
    t.pitch_deg = j.value("pitch_deg", t.pitch_deg);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("trajectory: ") + e.what());
  }
  return t;
}

void write_dataset(const std::filesystem::path& dir, const SceneSpec& scene,
                   const TrajectorySpec& trajectory, int workers) {
  namespace fs = std::filesystem;
  const auto views = generate_trajectory(trajectory);
  fs::create_directories(dir / "frames");

  std::vector<json> frames(views.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < views.size(); i = next++) {
      const FrameRecord rec = render_frame(scene, views[i], static_cast<int>(i));
      char name[32];
      std::snprintf(name, sizeof(name), "%06zu.pgm", i);
      write_pgm(dir / "frames" / name, rec.image);
      json vis = json::array();
      for (const auto& v : rec.visible) {
        vis.push_back({{"lamp", v.lamp},
                       {"model", scene.models.at(v.model_index).id},
                       {"state", to_string(v.state)},
                       {"pose", to_json(v.pose)},
                       {"projected_area", v.projected_area},
                       {"fully_visible", v.fully_visible}});
      }
      frames[i] = {{"index", i},
                   {"image", std::string("frames/") + name},
                   {"view", to_json(views[i])},
                   {"visible", vis},
                   {"distractors", rec.distractors}};
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::max(1, workers); ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  write_json(dir / "poses.json", {{"camera", to_json(scene.camera)}, {"frames", frames}});
  write_json(dir / "models.json", to_json(scene.models));
  write_json(dir / "building.json", to_json(scene.building));
  write_json(dir / "references.json", to_json(scene_references(scene)));
  write_json(dir / "scene.json", to_json(scene));
  write_json(dir / "trajectory.json", to_json(trajectory));
}

}  // namespace lampdet
