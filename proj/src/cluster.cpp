#include "lampdet/cluster.hpp"

#include "lampdet/error.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <tuple>

namespace lampdet {

using nlohmann::json;

namespace {

void rebuild(Cluster& c, const std::vector<Detection>& dets) {
  c.center.setZero();
  c.accumulated_scores.clear();
  c.model_ids.clear();
  c.on_votes = c.off_votes = 0;
  for (int m : c.members) {
    const Detection& d = dets[m];
    c.center += d.position();
    c.accumulated_scores[d.model_index] += 1.0 / (1.0 + d.chamfer_score);
    c.model_ids[d.model_index] = d.model_id;
    if (d.state == LampState::On) ++c.on_votes;
    if (d.state == LampState::Off) ++c.off_votes;
  }
  c.center /= static_cast<double>(c.members.size());
  const ClusterDecision dec = decide_cluster(c);
  c.decided_model = dec.model_index;
  c.decided_model_id = dec.model_id;
  c.decided_state = dec.state;
}

LampState parse_state(const json& j) {
  if (!j.is_string()) throw Error(ErrorCode::SchemaError, "state must be \"on\" or \"off\"");
  const auto s = j.get<std::string>();
  if (s == "on") return LampState::On;
  if (s == "off") return LampState::Off;
  throw Error(ErrorCode::SchemaError, "state must be \"on\" or \"off\"");
}

int label_index(std::vector<std::string>& labels, std::vector<std::vector<int>>& counts,
                const std::string& l) {
  auto it = std::lower_bound(labels.begin(), labels.end(), l);
  const auto pos = static_cast<std::size_t>(it - labels.begin());
  if (it != labels.end() && *it == l) return static_cast<int>(pos);
  labels.insert(it, l);
  for (auto& row : counts) row.insert(row.begin() + static_cast<std::ptrdiff_t>(pos), 0);
  counts.insert(counts.begin() + static_cast<std::ptrdiff_t>(pos),
                std::vector<int>(labels.size(), 0));
  return static_cast<int>(pos);
}

}  // namespace

ClusterDecision decide_cluster(const Cluster& cluster) {
  ClusterDecision d;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [model, score] : cluster.accumulated_scores) {  // ascending model index
    if (score > best) {
      best = score;
      d.model_index = model;
      auto it = cluster.model_ids.find(model);
      d.model_id = it != cluster.model_ids.end() ? it->second : std::to_string(model);
    }
  }
  d.state = cluster.on_votes >= cluster.off_votes ? LampState::On : LampState::Off;
  return d;
}

std::vector<Cluster> cluster_detections(const std::vector<Detection>& dets, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::ValidationError, "cluster radius must be positive");
  std::vector<Cluster> clusters;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const Vec3 p = dets[i].position();
    int best = -1;
    double best_d = radius;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const double d = (clusters[c].center - p).norm();
      if (d <= best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    if (best < 0) {
      Cluster c;
      c.center = p;
      c.members.push_back(static_cast<int>(i));
      clusters.push_back(std::move(c));
    } else {
      Cluster& c = clusters[best];
      c.members.push_back(static_cast<int>(i));
      c.center += (p - c.center) / static_cast<double>(c.members.size());
    }
  }

  // Reassignment pass against the greedy centres.
  std::vector<Vec3> centres;
  for (const auto& c : clusters) centres.push_back(c.center);
  for (auto& c : clusters) c.members.clear();
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const Vec3 p = dets[i].position();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centres.size(); ++c) {
      const double d = (centres[c] - p).norm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    clusters[best].members.push_back(static_cast<int>(i));
  }
  std::erase_if(clusters, [](const Cluster& c) { return c.members.empty(); });
  for (auto& c : clusters) rebuild(c, dets);
  return clusters;
}

ReferenceSet parse_references(const json& doc) {
  const json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("references")) throw Error(ErrorCode::SchemaError, "expected 'references'");
    list = &doc.at("references");
  }
  if (!list->is_array()) throw Error(ErrorCode::SchemaError, "references must be an array");
  ReferenceSet refs;
  for (const auto& r : *list) {
    if (!r.is_object() || !r.contains("position") || !r.contains("model")) {
      throw Error(ErrorCode::SchemaError, "reference needs 'position' and 'model'");
    }
    const json& p = r.at("position");
    if (!p.is_array() || p.size() != 3) throw Error(ErrorCode::SchemaError, "position is [x,y,z]");
    ReferenceLamp l;
    for (int i = 0; i < 3; ++i) l.position[i] = p[i].get<double>();
    l.model = r.at("model").get<std::string>();
    l.state = r.contains("state") ? parse_state(r.at("state")) : LampState::On;
    refs.push_back(l);
  }
  return refs;
}

ReferenceSet load_references(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open references " + path.string());
  try {
    return parse_references(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
}

json to_json(const ReferenceSet& refs) {
  json arr = json::array();
  for (const auto& r : refs) {
    arr.push_back({{"position", {r.position.x(), r.position.y(), r.position.z()}},
                   {"model", r.model},
                   {"state", to_string(r.state)}});
  }
  return arr;
}

void ConfusionMatrix::add(const std::string& truth, const std::string& predicted) {
  label_index(labels, counts, truth);
  const int c = label_index(labels, counts, predicted);
  const int r = label_index(labels, counts, truth);  // inserting `predicted` may shift it
  ++counts[r][c];
}

int ConfusionMatrix::total() const {
  int t = 0;
  for (const auto& row : counts) {
    for (int v : row) t += v;
  }
  return t;
}

int ConfusionMatrix::off_diagonal() const {
  int t = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (std::size_t j = 0; j < counts[i].size(); ++j) {
      if (i != j) t += counts[i][j];
    }
  }
  return t;
}

double ConfusionMatrix::error_rate() const {
  const int t = total();
  return t == 0 ? 0.0 : static_cast<double>(off_diagonal()) / t;
}

EvalReport summarize(const std::vector<Cluster>& clusters) {
  EvalReport rep;
  rep.clusters = static_cast<int>(clusters.size());
  if (clusters.empty()) return rep;
  rep.min_members = std::numeric_limits<int>::max();
  for (const auto& c : clusters) {
    const int m = static_cast<int>(c.members.size());
    rep.total_detections += m;
    rep.min_members = std::min(rep.min_members, m);
    rep.max_members = std::max(rep.max_members, m);
  }
  rep.mean_members = static_cast<double>(rep.total_detections) / rep.clusters;
  return rep;
}

EvalReport evaluate(const std::vector<Cluster>& clusters, const std::vector<Detection>& detections,
                    const ReferenceSet& refs, double match_radius) {
  if (!(match_radius > 0.0)) throw Error(ErrorCode::ValidationError, "match radius must be positive");
  EvalReport rep = summarize(clusters);
  rep.has_references = true;

  std::vector<std::tuple<double, int, int>> pairs;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (std::size_t r = 0; r < refs.size(); ++r) {
      const double d = (clusters[c].center - refs[r].position).norm();
      if (d <= match_radius) pairs.emplace_back(d, static_cast<int>(c), static_cast<int>(r));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<bool> used_c(clusters.size(), false), used_r(refs.size(), false);
  double sum = 0.0;
  for (const auto& [d, c, r] : pairs) {
    if (used_c[c] || used_r[r]) continue;
    used_c[c] = used_r[r] = true;
    rep.matches.push_back({c, r, 100.0 * d});
    sum += 100.0 * d;
  }
  std::sort(rep.matches.begin(), rep.matches.end(),
            [](const ClusterMatch& a, const ClusterMatch& b) { return a.cluster < b.cluster; });
  for (const auto& m : rep.matches) {
    const Cluster& cl = clusters[m.cluster];
    const ReferenceLamp& ref = refs[m.reference];
    rep.model_confusion.add(ref.model, cl.decided_model_id);
    rep.state_confusion.add(to_string(ref.state), to_string(cl.decided_state));
    for (int i : cl.members) {
      if (i < 0 || i >= static_cast<int>(detections.size())) continue;
      rep.detection_model_confusion.add(ref.model, detections[i].model_id);
      rep.detection_state_confusion.add(to_string(ref.state), to_string(detections[i].state));
    }
  }
  rep.false_positives = static_cast<int>(clusters.size() - rep.matches.size());
  rep.misses = static_cast<int>(refs.size() - rep.matches.size());
  rep.mean_distance_cm = rep.matches.empty() ? 0.0 : sum / rep.matches.size();
  return rep;
}

json to_json(const ConfusionMatrix& m) {
  return {{"labels", m.labels}, {"counts", m.counts}};
}

json to_json(const EvalReport& r) {
  json j = {
      {"total_detections", r.total_detections},
      {"clusters", r.clusters},
      {"members", {{"min", r.min_members}, {"mean", r.mean_members}, {"max", r.max_members}}},
  };
  if (r.has_references) {
    json matches = json::array();
    for (const auto& m : r.matches) {
      matches.push_back(
          {{"cluster", m.cluster}, {"reference", m.reference}, {"distance_cm", m.distance_cm}});
    }
    j["matches"] = matches;
    j["false_positives"] = r.false_positives;
    j["misses"] = r.misses;
    j["mean_distance_cm"] = r.mean_distance_cm;
    j["model_confusion"] = to_json(r.model_confusion);
    j["state_confusion"] = to_json(r.state_confusion);
    j["detection_model_confusion"] = to_json(r.detection_model_confusion);
    j["detection_state_confusion"] = to_json(r.detection_state_confusion);
  }
  return j;
}

}  // namespace lampdet
