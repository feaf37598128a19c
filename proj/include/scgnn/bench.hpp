#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "scgnn/augment.hpp"
#include "scgnn/error.hpp"
#include "scgnn/gbc.hpp"
#include "scgnn/io.hpp"
#include "scgnn/seeds.hpp"
#include "scgnn/synthetic.hpp"

namespace scgnn {

// ---------------------------------------------------------------------------
// exhaustive kNN baseline

struct KnnResult {
  // per node: k nearest other nodes by (distance, id), nearest first
  std::vector<std::vector<NodeId>> neighbors;
  std::vector<Edge> edges; // undirected, normalized
  std::size_t resident_bytes = 0; // tiles + candidate lists actually held
  std::size_t logical_bytes = 0;  // full n x n float32 similarity matrix
};

/// Exact brute-force Euclidean kNN graph. Distances are evaluated in
/// tile x tile blocks so the intermediate working set stays bounded.
inline KnnResult knn_graph(const MatrixF &x, std::size_t k,
                           std::size_t tile = 256) {
  const std::size_t n = x.rows(), d = x.cols();
  if (k == 0 || k >= n)
    throw SpecError("kNN needs 1 <= k < n");
  tile = std::max<std::size_t>(1, std::min(tile, n));

  using Cand = std::pair<float, NodeId>;
  std::vector<Cand> best(n * k, {std::numeric_limits<float>::infinity(),
                                 std::numeric_limits<NodeId>::max()});
  std::vector<float> colT(d * tile);
  std::vector<float> dist(tile);

  for (std::size_t j0 = 0; j0 < n; j0 += tile) {
    const std::size_t jb = std::min(tile, n - j0);
    for (std::size_t jj = 0; jj < jb; ++jj)
      for (std::size_t c = 0; c < d; ++c)
        colT[c * tile + jj] = x(j0 + jj, c);
    for (std::size_t i = 0; i < n; ++i) {
      const float *xi = x.data() + i * d;
      std::fill(dist.begin(), dist.begin() + jb, 0.0f);
      for (std::size_t c = 0; c < d; ++c) {
        const float xc = xi[c];
        const float *col = colT.data() + c * tile;
        for (std::size_t jj = 0; jj < jb; ++jj) {
          const float t = xc - col[jj];
          dist[jj] += t * t;
        }
      }
      Cand *row = best.data() + i * k;
      for (std::size_t jj = 0; jj < jb; ++jj) {
        const auto j = static_cast<NodeId>(j0 + jj);
        if (j == i)
          continue;
        Cand c{dist[jj], j};
        if (!(c < row[k - 1]))
          continue;
        std::size_t pos = k - 1;
        while (pos > 0 && c < row[pos - 1]) {
          row[pos] = row[pos - 1];
          --pos;
        }
        row[pos] = c;
      }
    }
  }

  KnnResult r;
  r.neighbors.resize(n);
  std::vector<Edge> edges;
  edges.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      NodeId j = best[i * k + t].second;
      r.neighbors[i].push_back(j);
      edges.push_back({static_cast<NodeId>(i), j});
    }
  }
  r.edges = normalize_edges(std::move(edges));
  r.logical_bytes = n * n * sizeof(float);
  r.resident_bytes = colT.size() * sizeof(float) + dist.size() * sizeof(float) +
                     best.size() * sizeof(Cand) + r.edges.size() * sizeof(Edge);
  return r;
}

// ---------------------------------------------------------------------------
// granular-ball working set

/// Bytes held by the ball structures and the anchor graph additions.
inline std::size_t gbc_resident_bytes(const GBModel &m, const AugmentGraph &g) {
  std::size_t bytes = m.assignment.size() * sizeof(std::uint32_t) +
                      m.domains.size() * sizeof(Domain);
  for (const auto &b : m.balls)
    bytes += sizeof(GranularBall) + b.members.size() * sizeof(NodeId) +
             b.center.size() * sizeof(double);
  for (const auto &a : g.anchors)
    bytes += sizeof(Anchor) + a.feature.size() * sizeof(float);
  bytes += (g.projection_edges.size() + g.bridging_edges.size()) * sizeof(Edge);
  return bytes;
}

// ---------------------------------------------------------------------------
// harness

struct BenchSpec {
  std::vector<std::size_t> sizes{2000, 8000, 32000};
  std::size_t d = 32;
  int c = 5;
  std::size_t k_for_knn = 5;
  int repeats = 3;
  std::uint64_t seed = 0;
  double time_budget_s = 300.0; // per single run
  // A timed sample repeats the method until this much wall time has passed
  // and records the mean per call; keeps millisecond-scale runs above jitter.
  double min_sample_s = 0.25;
  double cluster_spread = 0.5;
  double label_rate = 0.05;
};

inline void validate(const BenchSpec &s) {
  if (s.sizes.empty() || !std::is_sorted(s.sizes.begin(), s.sizes.end()) ||
      std::adjacent_find(s.sizes.begin(), s.sizes.end()) != s.sizes.end())
    throw SpecError("bench sizes must be strictly ascending");
  if (s.repeats < 3)
    throw SpecError("bench needs at least 3 repeats");
  if (s.k_for_knn < 1 || s.k_for_knn >= s.sizes.front())
    throw SpecError("k_for_knn must lie in [1, smallest n)");
  if (!(s.min_sample_s >= 0.0))
    throw SpecError("min_sample_s must be >= 0");
}

struct BenchRow {
  std::string method;
  std::size_t n = 0;
  std::size_t d = 0;
  int run = 0;
  double seconds = 0.0;
  std::size_t resident_bytes = 0;
  std::size_t logical_bytes = 0;
  bool timeout = false;
};

struct MethodSummary {
  std::map<std::size_t, double> median_seconds;
  std::map<std::size_t, std::size_t> resident_bytes;
  std::map<std::size_t, std::size_t> logical_bytes;
  std::optional<double> slope; // log-log fit over >= 3 sizes
};

struct BenchReport {
  BenchSpec spec;
  std::vector<BenchRow> rows;
  std::map<std::string, MethodSummary> methods;
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double> &xs,
                           const std::vector<double> &ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw SpecError("slope fit needs >= 2 points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= xs.size();
  my /= ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = std::log(xs[i]) - mx;
    sxy += dx * (std::log(ys[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Times granular-ball construction (with anchors and augment graph) and the
/// exhaustive kNN graph on synthetic data at each size. A warm-up run per
/// (method, n) is discarded; medians over `repeats` are reported. Each
/// sample is the mean per call over a loop lasting at least `min_sample_s`.
inline BenchReport run_bench(const BenchSpec &spec) {
  validate(spec);
  using Clock = std::chrono::steady_clock;
  BenchReport report;
  report.spec = spec;

  std::vector<GraphBundle> data;
  for (std::size_t n : spec.sizes) {
    SyntheticSpec ss;
    ss.n = n;
    ss.d = spec.d;
    ss.c = spec.c;
    ss.cluster_spread = spec.cluster_spread;
    ss.avg_degree = 4.0;
    ss.label_rate = spec.label_rate;
    ss.seed = spec.seed;
    data.push_back(generate_synthetic(ss));
  }
  GBCConfig gcfg;
  gcfg.seed = spec.seed;

  using Bytes = std::pair<std::size_t, std::size_t>;
  struct Method {
    std::string name;
    std::function<Bytes(const GraphBundle &)> run;
  };
  const std::vector<Method> methods{
      {"gbc",
       [&](const GraphBundle &b) {
         auto model = build(b, gcfg);
         auto anchors = build_anchors(model, b);
         auto aug = build_augment(model, b, std::move(anchors),
                                  BridgeMode::full(),
                                  gcfg.seed + seed_offset::kBridge);
         return Bytes{gbc_resident_bytes(model, aug),
                      gbc_resident_bytes(model, aug)};
       }},
      {"knn",
       [&](const GraphBundle &b) {
         auto r = knn_graph(b.features, spec.k_for_knn);
         return Bytes{r.resident_bytes, r.logical_bytes};
       }},
  };

  // Rounds visit every size in turn, so slow drift in machine speed lands on
  // all sizes alike instead of skewing the slope.
  for (const auto &m : methods) {
    auto &summary = report.methods[m.name];
    std::size_t live = data.size(); // sizes past a timeout are dropped
    std::vector<std::vector<double>> times(data.size());
    std::vector<Bytes> bytes(data.size());
    for (int run = 0; run <= spec.repeats; ++run) {
      for (std::size_t i = 0; i < live; ++i) {
        const auto t0 = Clock::now();
        double elapsed = 0.0;
        int calls = 0;
        do {
          bytes[i] = m.run(data[i]);
          ++calls;
          elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
        } while (elapsed < spec.min_sample_s && elapsed <= spec.time_budget_s);
        const double secs = elapsed / calls;
        const bool over = secs > spec.time_budget_s;
        if (run > 0 || over)
          report.rows.push_back({m.name, spec.sizes[i], spec.d, run, secs,
                                 bytes[i].first, bytes[i].second, over});
        if (over) {
          live = i;
          break;
        }
        if (run > 0)
          times[i].push_back(secs);
      }
    }
    for (std::size_t i = 0; i < live; ++i) {
      summary.median_seconds[spec.sizes[i]] = median(times[i]);
      summary.resident_bytes[spec.sizes[i]] = bytes[i].first;
      summary.logical_bytes[spec.sizes[i]] = bytes[i].second;
    }
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const auto &a, const auto &b) {
                     return std::tie(a.method, a.n) < std::tie(b.method, b.n);
                   });

  for (auto &[name, s] : report.methods) {
    if (s.median_seconds.size() < 3)
      continue;
    std::vector<double> xs, ys;
    for (const auto &[n, t] : s.median_seconds) {
      xs.push_back(static_cast<double>(n));
      ys.push_back(std::max(t, 1e-9));
    }
    s.slope = loglog_slope(xs, ys);
  }
  return report;
}

inline void write_bench(const BenchReport &r, const fs::path &dir) {
  detail::ensure_dir(dir);
  {
    auto csv = detail::open_out(dir / "bench.csv");
    csv << "method,n,d,run,seconds,resident_bytes,logical_bytes\n";
    csv.precision(9);
    for (const auto &row : r.rows) {
      csv << row.method << ',' << row.n << ',' << row.d << ',' << row.run
          << ',';
      if (row.timeout)
        csv << "timeout";
      else
        csv << row.seconds;
      csv << ',' << row.resident_bytes << ',' << row.logical_bytes << '\n';
    }
  }
  nlohmann::json j = {{"metric", "euclidean"},
                      {"k_for_knn", r.spec.k_for_knn},
                      {"d", r.spec.d},
                      {"c", r.spec.c},
                      {"repeats", r.spec.repeats},
                      {"min_sample_s", r.spec.min_sample_s},
                      {"threads", 1},
                      {"sizes", r.spec.sizes}};
  for (const auto &[name, s] : r.methods) {
    nlohmann::json med = nlohmann::json::object();
    for (const auto &[n, t] : s.median_seconds)
      med[std::to_string(n)] = t;
    j["methods"][name] = {
        {"slope", s.slope ? nlohmann::json(*s.slope) : nlohmann::json(nullptr)},
        {"median_seconds", med}};
  }
  detail::open_out(dir / "slopes.json") << j.dump(2) << '\n';
}

} // namespace scgnn
