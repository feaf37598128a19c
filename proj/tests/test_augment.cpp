#include <queue>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace scgnn;
using scgnn::testing::TempDir;
using scgnn::testing::two_blobs;

namespace {

// Hand-assembled model: one ball per group, labels taken from train nodes,
// mean-distance radius.
GBModel model_from_groups(const GraphBundle &b,
                          const std::vector<std::vector<NodeId>> &groups) {
  GBModel m;
  const std::size_t n = b.num_nodes(), d = b.feature_dim();
  m.assignment.assign(n, 0);
  m.domains.assign(n, Domain::Chaos);
  auto train = b.train_labels();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    GranularBall ball;
    ball.members = groups[g];
    ball.center.assign(d, 0.0);
    for (NodeId i : ball.members)
      for (std::size_t j = 0; j < d; ++j)
        ball.center[j] += b.features(i, j) / double(ball.members.size());
    std::vector<double> dist;
    double sum = 0;
    for (NodeId i : ball.members) {
      double s = 0;
      for (std::size_t j = 0; j < d; ++j)
        s += (b.features(i, j) - ball.center[j]) *
             (b.features(i, j) - ball.center[j]);
      dist.push_back(std::sqrt(s));
      sum += dist.back();
    }
    ball.radius = sum / double(ball.members.size());
    ball.majority_label = majority_label(ball.members, train);
    ball.purity = purity(ball.members, train);
    for (std::size_t k = 0; k < ball.members.size(); ++k) {
      NodeId i = ball.members[k];
      m.assignment[i] = static_cast<std::uint32_t>(g);
      if (dist[k] <= ball.radius + 1e-12)
        m.domains[i] = ball.majority_label ? Domain::Definite : Domain::Uncertain;
    }
    m.balls.push_back(ball);
  }
  return m;
}

GraphBundle line_bundle(std::vector<float> xs, std::vector<ClassId> labels,
                        std::vector<Split> splits) {
  GraphBundle b;
  b.num_classes = 2;
  b.features = MatrixF(xs.size(), 2);
  for (std::size_t i = 0; i < xs.size(); ++i)
    b.features(i, 0) = xs[i];
  b.labels = std::move(labels);
  b.splits = std::move(splits);
  return b;
}

// Bundle with `count` single-member balls, each a train node of `label`.
std::pair<GraphBundle, GBModel> singleton_balls(std::size_t count,
                                                ClassId label = 0) {
  std::vector<float> xs;
  std::vector<ClassId> ls;
  std::vector<Split> sp;
  std::vector<std::vector<NodeId>> groups;
  for (std::size_t i = 0; i < count; ++i) {
    xs.push_back(static_cast<float>(i));
    ls.push_back(label);
    sp.push_back(Split::Train);
    groups.push_back({static_cast<NodeId>(i)});
  }
  auto b = line_bundle(xs, ls, sp);
  return {b, model_from_groups(b, groups)};
}

constexpr auto T = Split::Train;
constexpr auto X = Split::Test;

} // namespace

TEST(Anchors, FeatureIsMeanOfContributors) {
  auto b = line_bundle({1, 3}, {0, 0}, {T, T});
  auto m = model_from_groups(b, {{0, 1}});
  auto a = build_anchors(m, b);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_FLOAT_EQ(a[0].feature[0], 2.0f);
  EXPECT_FLOAT_EQ(a[0].feature[1], 0.0f);
  EXPECT_EQ(a[0].label, 0);
  EXPECT_EQ(a[0].contributor_count, 2u);
  EXPECT_EQ(a[0].anchor_id, 2u);
}

TEST(Anchors, UnlabeledBallHasNoAnchor) {
  auto b = line_bundle({0, 1, 5, 6}, {0, 0, 1, 1}, {T, X, X, X});
  auto m = model_from_groups(b, {{0, 1}, {2, 3}});
  auto a = build_anchors(m, b);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].source_ball, 0u);
}

TEST(Anchors, TwoBlobsOnePerLabeledPureBall) {
  auto b = two_blobs(40, 5, 6);
  auto m = build(b, GBCConfig{});
  auto anchors = build_anchors(m, b);
  EXPECT_LE(anchors.size(), m.balls.size());
  std::set<std::uint32_t> with_anchor;
  for (const auto &a : anchors) {
    EXPECT_TRUE(with_anchor.insert(a.source_ball).second);
    EXPECT_EQ(m.balls[a.source_ball].purity, 1.0);
  }
  // Oracle: enumerate balls holding a definite train node of the ball label.
  for (std::size_t bi = 0; bi < m.balls.size(); ++bi) {
    const auto &ball = m.balls[bi];
    bool contributes = false;
    for (NodeId i : ball.members)
      contributes |= b.splits[i] == Split::Train &&
                     m.domains[i] == Domain::Definite &&
                     ball.majority_label == b.labels[i];
    EXPECT_EQ(contributes, with_anchor.count(static_cast<std::uint32_t>(bi)) == 1);
  }
  for (std::size_t k = 0; k < anchors.size(); ++k)
    EXPECT_EQ(anchors[k].anchor_id, b.num_nodes() + k);
}

TEST(Augment, SingleAnchorProjectsToEveryMember) {
  // the train node is the center member, inside the mean radius
  auto b = line_bundle({0, 1, 2, 3, 4}, {0, 0, 0, 0, 0}, {X, X, T, X, X});
  b.edges = {{0, 1}};
  auto m = model_from_groups(b, {{0, 1, 2, 3, 4}});
  auto anchors = build_anchors(m, b);
  ASSERT_EQ(anchors.size(), 1u);
  auto g = build_augment(m, b, anchors, BridgeMode::full(), 1);
  EXPECT_EQ(g.projection_edges.size(), 5u);
  EXPECT_EQ(g.bridging_edges.size(), 0u);
  EXPECT_EQ(g.num_nodes(), 6u);
}

TEST(Augment, ThreeSameLabelAnchorsFormATriangle) {
  auto [b, m] = singleton_balls(3);
  auto g = build_augment(m, b, build_anchors(m, b), BridgeMode::full(), 1);
  ASSERT_EQ(g.anchors.size(), 3u);
  EXPECT_EQ(g.bridging_edges.size(), 3u);
}

TEST(Augment, RandomKBoundsAndLabelConsistency) {
  auto [b, m] = singleton_balls(100);
  auto anchors = build_anchors(m, b);
  ASSERT_EQ(anchors.size(), 100u);
  auto g = build_augment(m, b, anchors, BridgeMode::random_k(5), 9);
  EXPECT_LE(g.bridging_edges.size(), 500u);
  EXPECT_GE(g.bridging_edges.size(), 250u);
  const std::size_t n = b.num_nodes();
  for (const auto &e : g.bridging_edges)
    EXPECT_EQ(g.anchors[e.u - n].label, g.anchors[e.v - n].label);
  // same seed reproduces, another seed differs
  EXPECT_EQ(build_augment(m, b, anchors, BridgeMode::random_k(5), 9), g);
  EXPECT_NE(build_augment(m, b, anchors, BridgeMode::random_k(5), 10)
                .bridging_edges,
            g.bridging_edges);
}

TEST(Augment, RandomKNonPositiveThrows) {
  auto [b, m] = singleton_balls(3);
  EXPECT_THROW(build_augment(m, b, build_anchors(m, b), BridgeMode::random_k(0), 1),
               SpecError);
}

TEST(Augment, EdgeClassesAreDisjointAndRemovable) {
  auto b = generate_synthetic(uplift_benchmark(6));
  auto m = build(b, GBCConfig{});
  auto g = build_augment(m, b, build_anchors(m, b), BridgeMode::full(), 1);
  const std::size_t n = b.num_nodes();
  EXPECT_EQ(g.num_nodes(), n + g.anchors.size());
  auto all = augmented_edges(g);
  EXPECT_EQ(all.size(), b.edges.size() + g.projection_edges.size() +
                            g.bridging_edges.size());
  // drop anchors and everything incident to them
  std::vector<Edge> vanilla;
  for (const auto &e : all)
    if (e.u < n && e.v < n)
      vanilla.push_back(e);
  EXPECT_EQ(vanilla, b.edges);
  auto f = augmented_features(g);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < b.feature_dim(); ++j)
      ASSERT_EQ(f(i, j), b.features(i, j));
}

TEST(Augment, SameLabelBallsWithinThreeHops) {
  auto b = generate_synthetic(uplift_benchmark(7));
  auto m = build(b, GBCConfig{});
  auto g = build_augment(m, b, build_anchors(m, b), BridgeMode::full(), 1);
  const std::size_t n = b.num_nodes();
  // adjacency over projection and bridging edges only
  std::vector<std::vector<NodeId>> adj(g.num_nodes());
  for (const auto &e : g.projection_edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  for (const auto &e : g.bridging_edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  std::map<ClassId, std::vector<NodeId>> reps; // one member per anchored ball
  for (const auto &a : g.anchors)
    reps[a.label].push_back(m.balls[a.source_ball].members.back());
  for (const auto &[label, nodes] : reps) {
    // BFS from the first representative, depth-limited to 3
    std::vector<int> depth(g.num_nodes(), -1);
    std::queue<NodeId> q;
    depth[nodes[0]] = 0;
    q.push(nodes[0]);
    while (!q.empty()) {
      NodeId u = q.front();
      q.pop();
      if (depth[u] == 3)
        continue;
      for (NodeId v : adj[u])
        if (depth[v] < 0) {
          depth[v] = depth[u] + 1;
          q.push(v);
        }
    }
    for (NodeId v : nodes) {
      ASSERT_LT(v, n);
      EXPECT_GE(depth[v], 0) << "label " << label;
      EXPECT_LE(depth[v], 3);
    }
  }
}

TEST(Augment, SaveLoadRoundTrip) {
  TempDir t("aug");
  auto b = generate_synthetic(uplift_benchmark(8));
  auto m = build(b, GBCConfig{});
  auto g = build_augment(m, b, build_anchors(m, b), BridgeMode::random_k(3), 4);
  save_augment(g, t.path());
  auto back = load_augment(t.path());
  EXPECT_EQ(back.base, g.base);
  EXPECT_EQ(back.anchors, g.anchors);
  EXPECT_EQ(back.bridging_edges, g.bridging_edges);
  EXPECT_EQ(back.projection_edges.size(), g.projection_edges.size());
  auto sorted = g.projection_edges;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(back.projection_edges, sorted);
  EXPECT_EQ(back.bridge_mode, g.bridge_mode);
}
