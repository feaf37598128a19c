#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "scgnn/error.hpp"
#include "scgnn/gbc.hpp"
#include "scgnn/graph.hpp"
#include "scgnn/io.hpp"

namespace scgnn {

/// Virtual node summarizing the train nodes of one granular ball.
struct Anchor {
  NodeId anchor_id = 0; // >= number of vanilla nodes
  std::uint32_t source_ball = 0;
  std::vector<float> feature;
  ClassId label = kUnlabeled;
  std::size_t contributor_count = 0;

  bool operator==(const Anchor &) const = default;
};

struct BridgeMode {
  enum class Kind { Full, RandomK } kind = Kind::Full;
  int k = 0; // partners per anchor for RandomK

  static BridgeMode full() { return {}; }
  static BridgeMode random_k(int k) { return {Kind::RandomK, k}; }
  bool operator==(const BridgeMode &) const = default;
};

/// Vanilla graph plus anchors, projection edges and bridging edges. The base
/// bundle is never modified; anchors take ids n, n+1, ...
struct AugmentGraph {
  GraphBundle base;
  std::vector<Anchor> anchors;
  std::vector<Edge> projection_edges; // (anchor, member)
  std::vector<Edge> bridging_edges;   // (anchor, anchor), u < v
  BridgeMode bridge_mode;

  std::size_t num_nodes() const noexcept {
    return base.num_nodes() + anchors.size();
  }
  bool operator==(const AugmentGraph &) const = default;
};

/// One anchor per ball that has at least one definite-domain train node
/// carrying the ball's label; its feature is the mean of those nodes.
inline std::vector<Anchor> build_anchors(const GBModel &model,
                                         const GraphBundle &bundle) {
  const std::size_t n = bundle.num_nodes();
  const std::size_t d = bundle.feature_dim();
  if (model.num_nodes() != n)
    throw EngineError("model and bundle disagree on node count");
  std::vector<Anchor> anchors;
  for (std::size_t bi = 0; bi < model.balls.size(); ++bi) {
    const auto &ball = model.balls[bi];
    if (!ball.majority_label)
      continue;
    const ClassId label = *ball.majority_label;
    std::vector<double> sum(d, 0.0);
    std::size_t count = 0;
    for (NodeId i : ball.members) {
      if (bundle.splits[i] != Split::Train ||
          model.domains[i] != Domain::Definite || bundle.labels[i] != label)
        continue;
      auto x = bundle.features.row(i);
      for (std::size_t j = 0; j < d; ++j)
        sum[j] += x[j];
      ++count;
    }
    if (count == 0)
      continue;
    Anchor a;
    a.anchor_id = static_cast<NodeId>(n + anchors.size());
    a.source_ball = static_cast<std::uint32_t>(bi);
    a.label = label;
    a.contributor_count = count;
    a.feature.resize(d);
    for (std::size_t j = 0; j < d; ++j)
      a.feature[j] = static_cast<float>(sum[j] / static_cast<double>(count));
    anchors.push_back(std::move(a));
  }
  return anchors;
}

/// Assembles projection edges (anchor to every member of its ball) and
/// bridging edges between same-label anchors. RandomK samples k partners per
/// anchor without replacement from an RNG seeded with `seed`.
inline AugmentGraph build_augment(const GBModel &model,
                                  const GraphBundle &bundle,
                                  std::vector<Anchor> anchors,
                                  BridgeMode mode, std::uint64_t seed) {
  if (mode.kind == BridgeMode::Kind::RandomK && mode.k <= 0)
    throw SpecError("random_k bridging needs k > 0");
  AugmentGraph g;
  g.base = bundle;
  g.bridge_mode = mode;

  for (const auto &a : anchors)
    for (NodeId i : model.balls.at(a.source_ball).members)
      g.projection_edges.push_back({a.anchor_id, i});

  std::map<ClassId, std::vector<NodeId>> by_label;
  for (const auto &a : anchors)
    by_label[a.label].push_back(a.anchor_id);

  if (mode.kind == BridgeMode::Kind::Full) {
    for (const auto &[label, ids] : by_label)
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = i + 1; j < ids.size(); ++j)
          g.bridging_edges.push_back({ids[i], ids[j]});
  } else {
    std::mt19937_64 rng(seed);
    std::set<Edge> picked;
    for (const auto &[label, ids] : by_label) {
      for (NodeId a : ids) {
        std::vector<NodeId> cand;
        for (NodeId b : ids)
          if (b != a)
            cand.push_back(b);
        const auto take = std::min<std::size_t>(
            static_cast<std::size_t>(mode.k), cand.size());
        for (std::size_t i = 0; i < take; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, cand.size() - 1);
          std::swap(cand[i], cand[pick(rng)]);
          picked.insert({std::min(a, cand[i]), std::max(a, cand[i])});
        }
      }
    }
    g.bridging_edges.assign(picked.begin(), picked.end());
  }
  std::sort(g.bridging_edges.begin(), g.bridging_edges.end());
  g.anchors = std::move(anchors);
  return g;
}

/// F^aug = [F | F^anchor] as a row-concatenated matrix.
inline MatrixF augmented_features(const AugmentGraph &g) {
  const std::size_t n = g.base.num_nodes(), d = g.base.feature_dim();
  MatrixF f(g.num_nodes(), d);
  std::copy(g.base.features.flat().begin(), g.base.features.flat().end(),
            f.flat().begin());
  for (std::size_t a = 0; a < g.anchors.size(); ++a)
    std::copy(g.anchors[a].feature.begin(), g.anchors[a].feature.end(),
              f.row(n + a).begin());
  return f;
}

/// E^aug = E + E^project + E^bridge, normalized (u < v, sorted).
inline std::vector<Edge> augmented_edges(const AugmentGraph &g) {
  std::vector<Edge> e = g.base.edges;
  e.insert(e.end(), g.projection_edges.begin(), g.projection_edges.end());
  e.insert(e.end(), g.bridging_edges.begin(), g.bridging_edges.end());
  return normalize_edges(std::move(e));
}

/// The augment graph as a plain bundle; anchors carry their label and sit in
/// no split.
inline GraphBundle to_bundle(const AugmentGraph &g) {
  GraphBundle b;
  b.num_classes = g.base.num_classes;
  b.features = augmented_features(g);
  b.edges = augmented_edges(g);
  b.labels = g.base.labels;
  b.splits = g.base.splits;
  for (const auto &a : g.anchors) {
    b.labels.push_back(a.label);
    b.splits.push_back(Split::None);
  }
  return b;
}

inline void save_augment(const AugmentGraph &g, const fs::path &dir) {
  save_bundle(to_bundle(g), dir);
  nlohmann::json anchors = nlohmann::json::array();
  for (const auto &a : g.anchors)
    anchors.push_back({{"id", a.anchor_id},
                       {"source_ball", a.source_ball},
                       {"label", a.label},
                       {"contributors", a.contributor_count}});
  nlohmann::json side = {
      {"format", "scgnn.anchors/1"},
      {"base_nodes", g.base.num_nodes()},
      {"bridge_mode",
       g.bridge_mode.kind == BridgeMode::Kind::Full ? "full" : "random_k"},
      {"bridge_k", g.bridge_mode.k},
      {"projection_edges", g.projection_edges.size()},
      {"bridging_edges", g.bridging_edges.size()},
      {"anchors", anchors},
  };
  auto out = detail::open_out(dir / "anchors.json");
  out << side.dump(2) << '\n';
}

/// Reloads a directory written by save_augment.
inline AugmentGraph load_augment(const fs::path &dir) {
  GraphBundle all = load_bundle(dir);
  if (!fs::exists(dir / "anchors.json"))
    throw IngestError("missing " + (dir / "anchors.json").string());
  nlohmann::json side;
  try {
    auto in = detail::open_in(dir / "anchors.json");
    side = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(std::string("anchors.json: ") + e.what());
  }

  AugmentGraph g;
  std::size_t n = 0;
  try {
    n = side.at("base_nodes");
    g.bridge_mode.kind = side.at("bridge_mode") == "random_k"
                             ? BridgeMode::Kind::RandomK
                             : BridgeMode::Kind::Full;
    g.bridge_mode.k = side.at("bridge_k");
    for (const auto &ja : side.at("anchors")) {
      Anchor a;
      a.anchor_id = ja.at("id");
      a.source_ball = ja.at("source_ball");
      a.label = ja.at("label");
      a.contributor_count = ja.at("contributors");
      g.anchors.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(std::string("anchors.json: ") + e.what());
  }
  if (n + g.anchors.size() != all.num_nodes())
    throw SchemaError("anchors.json disagrees with bundle node count");

  const std::size_t d = all.feature_dim();
  g.base.num_classes = all.num_classes;
  g.base.features = MatrixF(n, d);
  std::copy_n(all.features.data(), n * d, g.base.features.data());
  g.base.labels.assign(all.labels.begin(), all.labels.begin() + n);
  g.base.splits.assign(all.splits.begin(), all.splits.begin() + n);
  for (std::size_t a = 0; a < g.anchors.size(); ++a) {
    if (g.anchors[a].anchor_id != n + a)
      throw SchemaError("anchors.json: anchor ids must be contiguous from n");
    auto row = all.features.row(n + a);
    g.anchors[a].feature.assign(row.begin(), row.end());
  }
  for (const auto &e : all.edges) {
    const bool ua = e.u >= n, va = e.v >= n;
    if (!ua && !va)
      g.base.edges.push_back(e);
    else if (ua && va)
      g.bridging_edges.push_back(e);
    else
      g.projection_edges.push_back({std::max(e.u, e.v), std::min(e.u, e.v)});
  }
  std::sort(g.projection_edges.begin(), g.projection_edges.end());
  validate(g.base);
  return g;
}

} // namespace scgnn
