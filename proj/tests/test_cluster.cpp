#include "lampdet/cluster.hpp"
#include "lampdet/error.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lampdet;

namespace {

Detection det(const Vec3& p, int model, const std::string& id, LampState s = LampState::On,
              double score = 1.0) {
  Detection d;
  d.pose.translation = p;
  d.model_index = model;
  d.model_id = id;
  d.state = s;
  d.chamfer_score = score;
  return d;
}

}  // namespace

TEST(Clustering, TwoGroups) {
  std::vector<Detection> d = {det({0, 0, 3}, 0, "a"), det({5, 0, 3}, 0, "a"),
                              det({0.1, 0, 3}, 0, "a"), det({5.1, 0.1, 3}, 0, "a"),
                              det({-0.1, 0, 3}, 0, "a")};
  const auto c = cluster_detections(d, 0.5);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].members, (std::vector<int>{0, 2, 4}));
  EXPECT_EQ(c[1].members, (std::vector<int>{1, 3}));
  EXPECT_NEAR((c[0].center - Vec3(0, 0, 3)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((c[1].center - Vec3(5.05, 0.05, 3)).norm(), 0.0, 1e-12);
}

TEST(Clustering, EmptyAndInvalid) {
  EXPECT_TRUE(cluster_detections({}, 0.5).empty());
  EXPECT_THROW(cluster_detections({}, 0.0), Error);
}

TEST(Clustering, MembersPartitionInput) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::normal_distribution<double> n(0.0, 0.05);
  std::vector<Vec3> lamps;
  for (int i = 0; i < 8; ++i) lamps.emplace_back(u(rng), u(rng), 3.0);
  std::vector<Detection> d;
  for (int i = 0; i < 400; ++i) {
    const Vec3& l = lamps[i % lamps.size()];
    d.push_back(det(l + Vec3(n(rng), n(rng), n(rng)), i % 2, i % 2 ? "b" : "a"));
  }
  const auto c = cluster_detections(d, 0.5);
  std::vector<int> seen(d.size(), 0);
  for (const auto& cl : c) {
    ASSERT_FALSE(cl.members.empty());
    for (int m : cl.members) ++seen[m];
    // Every member is nearest to its own centre.
    for (int m : cl.members)
      for (const auto& other : c)
        EXPECT_LE((cl.center - d[m].position()).norm(),
                  (other.center - d[m].position()).norm() + 0.1);
  }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Decision, ScoresAndVotes) {
  std::vector<Detection> d = {det({0, 0, 3}, 1, "b", LampState::Off, 0.5),
                              det({0, 0, 3}, 0, "a", LampState::On, 3.0),
                              det({0, 0, 3}, 0, "a", LampState::Off, 3.0)};
  const auto c = cluster_detections(d, 0.5);
  ASSERT_EQ(c.size(), 1u);
  // b: 1/1.5 = 0.667; a: 2 * 1/4 = 0.5.
  EXPECT_EQ(c[0].decided_model, 1);
  EXPECT_EQ(c[0].decided_model_id, "b");
  EXPECT_EQ(c[0].off_votes, 2);
  EXPECT_EQ(c[0].decided_state, LampState::Off);
}

TEST(Decision, TiesGoToLowerModelAndOn) {
  Cluster c;
  c.accumulated_scores = {{2, 1.0}, {1, 1.0}};
  c.model_ids = {{1, "one"}, {2, "two"}};
  c.on_votes = c.off_votes = 3;
  const ClusterDecision d = decide_cluster(c);
  EXPECT_EQ(d.model_index, 1);
  EXPECT_EQ(d.model_id, "one");
  EXPECT_EQ(d.state, LampState::On);
}

TEST(References, ParseForms) {
  const nlohmann::json arr = {{{"position", {1, 2, 3}}, {"model", "a"}, {"state", "off"}},
                              {{"position", {4, 5, 6}}, {"model", "b"}}};
  const ReferenceSet r = parse_references(arr);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].state, LampState::Off);
  EXPECT_EQ(r[1].state, LampState::On);
  EXPECT_EQ(parse_references(nlohmann::json{{"references", arr}}).size(), 2u);
  EXPECT_EQ(parse_references(to_json(r)).size(), 2u);
  EXPECT_THROW(parse_references(nlohmann::json{{{"model", "a"}}}), Error);
  EXPECT_THROW(parse_references(nlohmann::json{{{"position", {1, 2, 3}}, {"model", "a"}, {"state", "dim"}}}),
               Error);
}

TEST(Confusion, Counts) {
  ConfusionMatrix m;
  m.add("b", "b");
  m.add("a", "b");
  m.add("a", "a");
  m.add("c", "a");
  EXPECT_EQ(m.labels, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(m.total(), 4);
  EXPECT_EQ(m.off_diagonal(), 2);
  EXPECT_DOUBLE_EQ(m.error_rate(), 0.5);
  EXPECT_EQ(m.counts[0][1], 1);
  EXPECT_EQ(m.counts[2][0], 1);
  EXPECT_DOUBLE_EQ(ConfusionMatrix{}.error_rate(), 0.0);
}

TEST(Evaluate, MatchingAndErrors) {
  std::vector<Detection> d = {det({0, 0, 3}, 0, "a"), det({0.02, 0, 3}, 0, "a"),
                              det({4, 0, 3}, 1, "b", LampState::Off), det({9, 9, 3}, 0, "a")};
  const auto c = cluster_detections(d, 0.5);
  ASSERT_EQ(c.size(), 3u);
  const ReferenceSet refs = {{Vec3(0, 0, 3), "a", LampState::On},
                             {Vec3(4, 0.5, 3), "a", LampState::Off},
                             {Vec3(20, 0, 3), "a", LampState::On}};
  const EvalReport r = evaluate(c, d, refs, 1.0);
  ASSERT_EQ(r.matches.size(), 2u);
  EXPECT_EQ(r.false_positives, 1);
  EXPECT_EQ(r.misses, 1);
  EXPECT_NEAR(r.matches[0].distance_cm, 1.0, 1e-9);
  EXPECT_NEAR(r.matches[1].distance_cm, 50.0, 1e-9);
  EXPECT_NEAR(r.mean_distance_cm, 25.5, 1e-9);
  EXPECT_EQ(r.model_confusion.total(), 2);
  EXPECT_EQ(r.model_confusion.off_diagonal(), 1);
  EXPECT_EQ(r.state_confusion.off_diagonal(), 0);
  EXPECT_EQ(r.detection_model_confusion.total(), 3);
  EXPECT_EQ(r.detection_model_confusion.off_diagonal(), 1);
  EXPECT_EQ(r.total_detections, 4);
  EXPECT_EQ(r.max_members, 2);

  const auto j = to_json(r);
  EXPECT_EQ(j.at("false_positives"), 1);
  EXPECT_FALSE(to_json(summarize(c)).contains("matches"));
}

TEST(Evaluate, OneToOne) {
  std::vector<Detection> d = {det({0, 0, 3}, 0, "a"), det({0.7, 0, 3}, 0, "a")};
  const auto c = cluster_detections(d, 0.3);
  ASSERT_EQ(c.size(), 2u);
  const EvalReport r = evaluate(c, d, {{Vec3(0.3, 0, 3), "a", LampState::On}}, 1.0);
  ASSERT_EQ(r.matches.size(), 1u);
  EXPECT_EQ(r.matches[0].cluster, 0);
  EXPECT_EQ(r.false_positives, 1);
}
