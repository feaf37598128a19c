#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace scgnn;

TEST(Slope, CollinearPoints) {
  EXPECT_NEAR(loglog_slope({10, 100, 1000}, {3, 300, 30000}), 2.0, 1e-12);
  EXPECT_NEAR(loglog_slope({2, 4, 8}, {5, 5, 5}), 0.0, 1e-12);
  EXPECT_THROW(loglog_slope({1}, {1}), SpecError);
}

TEST(Knn, MatchesNaiveOracle) {
  SyntheticSpec s;
  s.n = 200;
  s.d = 8;
  s.seed = 4;
  auto b = generate_synthetic(s);
  const std::size_t k = 5;
  // small tile so several blocks are merged
  auto r = knn_graph(b.features, k, 37);
  for (std::size_t i = 0; i < s.n; ++i) {
    std::vector<std::pair<float, NodeId>> all;
    for (std::size_t j = 0; j < s.n; ++j) {
      if (j == i)
        continue;
      float dd = 0;
      for (std::size_t c = 0; c < s.d; ++c) {
        const float t = b.features(i, c) - b.features(j, c);
        dd += t * t;
      }
      all.push_back({dd, static_cast<NodeId>(j)});
    }
    std::sort(all.begin(), all.end());
    std::vector<NodeId> want;
    for (std::size_t t = 0; t < k; ++t)
      want.push_back(all[t].second);
    EXPECT_EQ(r.neighbors[i], want) << "node " << i;
  }
  EXPECT_EQ(r.logical_bytes, 200u * 200u * 4u);
}

TEST(Knn, FullNeighborhoodIsComplete) {
  SyntheticSpec s;
  s.n = 30;
  s.d = 4;
  s.label_rate = 0.2;
  auto b = generate_synthetic(s);
  auto r = knn_graph(b.features, s.n - 1);
  EXPECT_EQ(r.edges.size(), s.n * (s.n - 1) / 2);
}

TEST(Knn, BadKThrows) {
  MatrixF x(5, 2);
  EXPECT_THROW(knn_graph(x, 0), SpecError);
  EXPECT_THROW(knn_graph(x, 5), SpecError);
}

TEST(Bench, SpecValidation) {
  BenchSpec s;
  s.sizes = {100, 50, 200};
  EXPECT_THROW(validate(s), SpecError);
  s.sizes = {50, 100, 200};
  s.repeats = 2;
  EXPECT_THROW(validate(s), SpecError);
  s.repeats = 3;
  s.min_sample_s = -1.0;
  EXPECT_THROW(validate(s), SpecError);
}

TEST(Bench, TinyRunWritesArtifacts) {
  scgnn::testing::TempDir t("bench");
  BenchSpec s;
  s.sizes = {100, 200, 400};
  s.d = 8;
  s.c = 3;
  s.min_sample_s = 0.0;
  auto r = run_bench(s);
  ASSERT_TRUE(r.methods.count("gbc") && r.methods.count("knn"));
  EXPECT_EQ(r.rows.size(), 2u * 3u * 3u);
  EXPECT_TRUE(r.methods["gbc"].slope.has_value());
  EXPECT_EQ(r.methods["knn"].logical_bytes[400], 400u * 400u * 4u);
  write_bench(r, t.path());
  auto j = nlohmann::json::parse(std::ifstream(t / "slopes.json"));
  EXPECT_TRUE(j.at("methods").at("knn").at("slope").is_number());
  EXPECT_TRUE(fs::exists(t / "bench.csv"));
}
