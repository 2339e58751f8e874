#pragma once

#include "lampdet/detection.hpp"
#include "lampdet/geom.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lampdet {

struct Cluster {
  Vec3 center = Vec3::Zero();
  std::vector<int> members;                  // indices into the clustered detections
  std::map<int, double> accumulated_scores;  // model index -> sum of 1 / (1 + chamfer score)
  std::map<int, std::string> model_ids;
  int on_votes = 0;
  int off_votes = 0;
  int decided_model = -1;
  std::string decided_model_id;
  LampState decided_state = LampState::Unknown;
};

/// Greedy assignment in input order, then one reassignment pass to the final centres.
/// Clusters carry their decisions on return.
std::vector<Cluster> cluster_detections(const std::vector<Detection>& detections, double radius);

struct ClusterDecision {
  int model_index = -1;
  std::string model_id;
  LampState state = LampState::Unknown;
};

/// Argmax of accumulated scores (ties: lower model index); majority state, ties to On.
ClusterDecision decide_cluster(const Cluster& cluster);

struct ReferenceLamp {
  Vec3 position = Vec3::Zero();
  std::string model;
  LampState state = LampState::On;
};
using ReferenceSet = std::vector<ReferenceLamp>;

ReferenceSet parse_references(const nlohmann::json& doc);
ReferenceSet load_references(const std::filesystem::path& path);
nlohmann::json to_json(const ReferenceSet& refs);

/// Square count table; rows are reference labels, columns decided labels.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<int>> counts;

  void add(const std::string& truth, const std::string& predicted);
  int total() const;
  int off_diagonal() const;
  double error_rate() const;
};

struct ClusterMatch {
  int cluster = -1;
  int reference = -1;
  double distance_cm = 0.0;
};

struct EvalReport {
  int total_detections = 0;
  int clusters = 0;
  int min_members = 0;
  double mean_members = 0.0;
  int max_members = 0;
  std::vector<ClusterMatch> matches;
  int false_positives = 0;
  int misses = 0;
  double mean_distance_cm = 0.0;
  ConfusionMatrix model_confusion;            // one entry per matched cluster
  ConfusionMatrix state_confusion;
  ConfusionMatrix detection_model_confusion;  // one entry per member of a matched cluster
  ConfusionMatrix detection_state_confusion;
  bool has_references = false;
};

/// Greedy one-to-one matching by distance within match_radius.
EvalReport evaluate(const std::vector<Cluster>& clusters, const std::vector<Detection>& detections,
                    const ReferenceSet& refs, double match_radius);

/// Counts only; used when no references are available.
EvalReport summarize(const std::vector<Cluster>& clusters);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const ConfusionMatrix& m);

}  // namespace lampdet
