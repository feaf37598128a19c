#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scgnn/error.hpp"
#include "scgnn/matrix.hpp"

namespace scgnn {

using NodeId = std::uint32_t;
using ClassId = std::int32_t;
inline constexpr ClassId kUnlabeled = -1;

struct Edge {
  NodeId u = 0;
  NodeId v = 0;
  auto operator<=>(const Edge &) const = default;
};

enum class Split : std::uint8_t { None, Train, Val, Test };

/// Sparse node -> class map. Keys are ordered so iteration is deterministic.
struct LabelSet {
  std::map<NodeId, ClassId> entries;
  std::size_t universe = 0;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }
  bool contains(NodeId i) const { return entries.count(i) != 0; }
  bool operator==(const LabelSet &) const = default;
};

/// Attributed graph plus labels and split assignment. The split is stored
/// per node, so the train/val/test sets are disjoint by construction.
struct GraphBundle {
  MatrixF features; // n x d
  std::vector<Edge> edges;   // u < v, sorted, unique
  std::vector<ClassId> labels; // kUnlabeled for missing
  std::vector<Split> splits;
  int num_classes = 0;

  std::size_t num_nodes() const noexcept { return features.rows(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }

  std::vector<NodeId> nodes_in(Split s) const {
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
      if (splits[i] == s)
        out.push_back(static_cast<NodeId>(i));
    return out;
  }

  /// Labels restricted to the training split; everything else unlabeled.
  std::vector<ClassId> train_labels() const {
    std::vector<ClassId> out(labels.size(), kUnlabeled);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (splits[i] == Split::Train)
        out[i] = labels[i];
    return out;
  }

  bool operator==(const GraphBundle &) const = default;
};

/// Drops self-loops, orients every pair as u < v, sorts and deduplicates.
inline std::vector<Edge> normalize_edges(std::vector<Edge> edges) {
  std::erase_if(edges, [](const Edge &e) { return e.u == e.v; });
  for (auto &e : edges)
    if (e.u > e.v)
      std::swap(e.u, e.v);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

/// Throws on any violated bundle invariant.
inline void validate(const GraphBundle &b) {
  const std::size_t n = b.num_nodes();
  if (b.num_classes < 2)
    throw SchemaError("num_classes must be >= 2, got " +
                      std::to_string(b.num_classes));
  if (b.labels.size() != n || b.splits.size() != n)
    throw SchemaError("labels/masks length does not match node count " +
                      std::to_string(n));
  for (float x : b.features.flat())
    if (!std::isfinite(x))
      throw DataError("features contain NaN or Inf");
  for (const auto &e : b.edges)
    if (e.u >= n || e.v >= n)
      throw SchemaError("edge endpoint out of range: " + std::to_string(e.u) +
                        " " + std::to_string(e.v));
  for (std::size_t i = 0; i < n; ++i) {
    if (b.labels[i] < kUnlabeled || b.labels[i] >= b.num_classes)
      throw SchemaError("label out of range at node " + std::to_string(i));
    if (b.splits[i] == Split::Train && b.labels[i] == kUnlabeled)
      throw DataError("train node " + std::to_string(i) + " has no label");
  }
}

/// Fraction of edges whose endpoints share a label (edges with an unlabeled
/// endpoint are ignored). Returns 0 for an edgeless graph.
inline double edge_homophily(const GraphBundle &b) {
  std::size_t same = 0, counted = 0;
  for (const auto &e : b.edges) {
    if (b.labels[e.u] == kUnlabeled || b.labels[e.v] == kUnlabeled)
      continue;
    ++counted;
    same += b.labels[e.u] == b.labels[e.v];
  }
  return counted == 0 ? 0.0 : static_cast<double>(same) / counted;
}

} // namespace scgnn
