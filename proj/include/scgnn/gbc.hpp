#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scgnn/error.hpp"
#include "scgnn/graph.hpp"
#include "scgnn/io.hpp"
#include "scgnn/matrix.hpp"

namespace scgnn {

enum class SizeLimitMode { SqrtN, Fixed };
enum class RadiusMode { MeanDistance, MaxDistance };
enum class PurityDenominator { LabeledOnly, AllMembers };

/// Semantic domain of a node relative to its granular ball.
enum class Domain : std::uint8_t { Definite, Uncertain, Chaos };

struct GBCConfig {
  double purity_threshold = 0.8;
  SizeLimitMode size_limit_mode = SizeLimitMode::SqrtN;
  std::size_t fixed_size_limit = 0; // used when size_limit_mode == Fixed
  int kmeans_max_iters = 50;
  double kmeans_tol = 1e-4;
  RadiusMode radius_mode = RadiusMode::MeanDistance;
  PurityDenominator purity_denominator = PurityDenominator::LabeledOnly;
  std::uint64_t seed = 0;

  bool operator==(const GBCConfig &) const = default;
};

inline void validate(const GBCConfig &cfg) {
  if (!(cfg.purity_threshold > 0.0 && cfg.purity_threshold <= 1.0))
    throw SpecError("purity threshold must lie in (0,1], got " +
                    std::to_string(cfg.purity_threshold));
  if (cfg.kmeans_max_iters < 1)
    throw SpecError("kmeans_max_iters must be >= 1");
  if (!(cfg.kmeans_tol >= 0.0))
    throw SpecError("kmeans_tol must be >= 0");
  if (cfg.size_limit_mode == SizeLimitMode::Fixed && cfg.fixed_size_limit < 1)
    throw SpecError("fixed size limit must be >= 1");
}

struct GranularBall {
  std::vector<NodeId> members; // ascending node ids
  std::vector<double> center;
  double radius = 0.0;
  double purity = 1.0;
  std::optional<ClassId> majority_label;
  std::size_t labeled_count = 0;
  // Set when a split was attempted and could not make progress.
  bool unsplittable = false;

  bool operator==(const GranularBall &) const = default;
};

struct GBModel {
  std::vector<GranularBall> balls;
  std::vector<std::uint32_t> assignment; // node -> ball index
  std::vector<Domain> domains;           // node -> semantic domain
  GBCConfig config;
  std::size_t size_limit = 0;
  std::size_t phase1_passes = 0;
  std::size_t phase2_passes = 0;
  std::size_t repair_passes = 0;

  std::size_t num_nodes() const noexcept { return assignment.size(); }
  bool operator==(const GBModel &) const = default;
};

// ---------------------------------------------------------------------------
// purity / majority label

namespace detail {

inline std::vector<std::size_t> class_counts(std::span<const NodeId> members,
                                             std::span<const ClassId> labels) {
  std::vector<std::size_t> counts;
  for (NodeId i : members) {
    ClassId l = labels[i];
    if (l == kUnlabeled)
      continue;
    auto idx = static_cast<std::size_t>(l);
    if (idx >= counts.size())
      counts.resize(idx + 1, 0);
    ++counts[idx];
  }
  return counts;
}

} // namespace detail

/// Dominant-class share among the members. A ball with no labeled member
/// has purity 1 so that it is never split for purity.
inline double purity(std::span<const NodeId> members,
                     std::span<const ClassId> labels,
                     PurityDenominator denom = PurityDenominator::LabeledOnly) {
  if (members.empty())
    throw EngineError("purity of an empty member set");
  auto counts = detail::class_counts(members, labels);
  std::size_t labeled = 0, best = 0;
  for (auto c : counts) {
    labeled += c;
    best = std::max(best, c);
  }
  if (labeled == 0)
    return 1.0;
  const double den = denom == PurityDenominator::LabeledOnly
                         ? static_cast<double>(labeled)
                         : static_cast<double>(members.size());
  return static_cast<double>(best) / den;
}

/// Most frequent class among labeled members; ties go to the smaller id.
inline std::optional<ClassId> majority_label(std::span<const NodeId> members,
                                             std::span<const ClassId> labels) {
  auto counts = detail::class_counts(members, labels);
  std::optional<ClassId> best;
  std::size_t best_count = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > best_count) {
      best_count = counts[c];
      best = static_cast<ClassId>(c);
    }
  }
  return best;
}

inline std::size_t distinct_classes(std::span<const NodeId> members,
                                    std::span<const ClassId> labels) {
  auto counts = detail::class_counts(members, labels);
  return static_cast<std::size_t>(
      std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
}

// ---------------------------------------------------------------------------
// k-means over a subset of rows

struct KMeansResult {
  std::vector<std::uint32_t> assignment; // parallel to the member list
  MatrixD centers;                       // k x d
  int iterations = 0;
};

namespace detail {

inline double sq_dist(std::span<const float> x, std::span<const double> c) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double t = static_cast<double>(x[j]) - c[j];
    s += t * t;
  }
  return s;
}

inline void copy_row(std::span<const float> x, std::span<double> c) {
  for (std::size_t j = 0; j < x.size(); ++j)
    c[j] = x[j];
}

} // namespace detail

/// Lloyd's k-means (Euclidean) over `members` (ascending node ids).
///
/// Seeding is deterministic farthest-point: the first center is the member
/// with the smallest node id, each next one the member farthest from all
/// chosen centers (first in member order on ties). Nearest-center ties go
/// to the smaller cluster index. An empty cluster receives the member of
/// the largest cluster farthest from that cluster's center.
inline KMeansResult kmeans(const MatrixF &features,
                           std::span<const NodeId> members, std::size_t k,
                           int max_iters, double tol) {
  const std::size_t m = members.size();
  const std::size_t d = features.cols();
  if (k == 0 || m < k)
    throw EngineError("k-means needs 1 <= k <= member count");

  // member rows gathered once; every pass below then streams contiguously
  MatrixF xs(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    auto src = features.row(members[i]);
    std::copy(src.begin(), src.end(), xs.row(i).begin());
  }

  KMeansResult res;
  res.centers = MatrixD(k, d);
  res.assignment.assign(m, 0);

  std::vector<double> min_d2(m, std::numeric_limits<double>::infinity());
  std::size_t pick = 0;
  for (std::size_t c = 0; c < k; ++c) {
    detail::copy_row(xs.row(pick), res.centers.row(c));
    double far = -1.0;
    std::size_t far_i = 0;
    for (std::size_t i = 0; i < m; ++i) {
      min_d2[i] = std::min(
          min_d2[i], detail::sq_dist(xs.row(i), res.centers.row(c)));
      if (min_d2[i] > far) {
        far = min_d2[i];
        far_i = i;
      }
    }
    pick = far_i;
  }

  std::vector<std::size_t> counts(k);
  MatrixD next(k, d);
  for (int it = 1; it <= max_iters; ++it) {
    res.iterations = it;
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < m; ++i) {
      auto x = xs.row(i);
      std::uint32_t best = 0;
      double best_d = detail::sq_dist(x, res.centers.row(0));
      for (std::size_t c = 1; c < k; ++c) {
        double dc = detail::sq_dist(x, res.centers.row(c));
        if (dc < best_d) {
          best_d = dc;
          best = static_cast<std::uint32_t>(c);
        }
      }
      res.assignment[i] = best;
      ++counts[best];
    }

    for (std::size_t e = 0; e < k; ++e) {
      if (counts[e] != 0)
        continue;
      std::size_t largest = 0;
      for (std::size_t c = 1; c < k; ++c)
        if (counts[c] > counts[largest])
          largest = c;
      double far = -1.0;
      std::size_t far_i = 0;
      for (std::size_t i = 0; i < m; ++i) {
        if (res.assignment[i] != largest)
          continue;
        double dd = detail::sq_dist(xs.row(i),
                                    res.centers.row(largest));
        if (dd > far) {
          far = dd;
          far_i = i;
        }
      }
      res.assignment[far_i] = static_cast<std::uint32_t>(e);
      --counts[largest];
      ++counts[e];
    }

    next.fill(0.0);
    for (std::size_t i = 0; i < m; ++i) {
      auto x = xs.row(i);
      auto c = next.row(res.assignment[i]);
      for (std::size_t j = 0; j < d; ++j)
        c[j] += x[j];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      auto nc = next.row(c);
      auto oc = res.centers.row(c);
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        nc[j] /= static_cast<double>(counts[c]);
        const double t = nc[j] - oc[j];
        s += t * t;
      }
      shift = std::max(shift, std::sqrt(s));
    }
    std::swap(res.centers, next);
    if (shift <= tol)
      break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// build

inline std::size_t size_limit_for(const GBCConfig &cfg, std::size_t n) {
  if (cfg.size_limit_mode == SizeLimitMode::Fixed)
    return cfg.fixed_size_limit;
  auto s = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  // guard against floating error on perfect squares
  while (s > 0 && (s - 1) * (s - 1) >= n)
    --s;
  while (s * s < n)
    ++s;
  return s;
}

namespace detail {

struct WorkBall {
  std::vector<NodeId> members;
  bool unsplittable = false;
  bool settled = false; // arity < 2 in the current phase; members are fixed
};

/// Splits `ball` into k parts; returns nothing if any part is empty or fails
/// to shrink.
inline std::optional<std::vector<WorkBall>>
split_ball(const MatrixF &features, const WorkBall &ball, std::size_t k,
           const GBCConfig &cfg) {
  if (ball.members.size() < k || k < 2)
    return std::nullopt;
  auto km = kmeans(features, ball.members, k, cfg.kmeans_max_iters,
                   cfg.kmeans_tol);
  std::vector<WorkBall> parts(k);
  for (std::size_t i = 0; i < ball.members.size(); ++i)
    parts[km.assignment[i]].members.push_back(ball.members[i]);
  for (const auto &p : parts)
    if (p.members.empty() || p.members.size() >= ball.members.size())
      return std::nullopt;
  return parts;
}

/// One Do-While loop of the splitting procedure: passes over the queue until
/// its length stops changing. Split results are enqueued at the back.
template <typename Arity>
std::size_t run_phase(const MatrixF &features, std::vector<WorkBall> &queue,
                      const GBCConfig &cfg, Arity arity) {
  const std::size_t n = features.rows();
  std::size_t passes = 0;
  for (auto &ball : queue)
    ball.settled = false;
  for (;;) {
    if (++passes > n + 1)
      throw EngineError("splitting phase failed to terminate");
    std::vector<WorkBall> kept, appended;
    kept.reserve(queue.size());
    for (auto &ball : queue) {
      std::size_t k = ball.unsplittable || ball.settled ? 0 : arity(ball);
      if (k < 2) {
        ball.settled = true;
        kept.push_back(std::move(ball));
        continue;
      }
      auto parts = split_ball(features, ball, k, cfg);
      if (!parts) {
        ball.unsplittable = true;
        kept.push_back(std::move(ball));
        continue;
      }
      for (auto &p : *parts)
        appended.push_back(std::move(p));
    }
    const bool changed = !appended.empty();
    for (auto &p : appended)
      kept.push_back(std::move(p));
    queue = std::move(kept);
    if (!changed)
      return passes;
  }
}

} // namespace detail

/// Transductive semi-supervised granular-ball construction.
///
/// `labels` carries the supervision used for splitting (typically the train
/// labels only; kUnlabeled elsewhere). Phase 1 splits impure balls with
/// k-means (k = number of labeled classes inside), phase 2 splits balls of
/// size >= limit with 2-means, and a final purity pass repairs balls that
/// phase 2 left impure. Deterministic for fixed inputs.
inline GBModel build(const MatrixF &features, std::span<const ClassId> labels,
                     const GBCConfig &cfg) {
  validate(cfg);
  const std::size_t n = features.rows();
  if (labels.size() != n)
    throw EngineError("label vector length does not match feature rows");
  if (std::none_of(labels.begin(), labels.end(),
                   [](ClassId l) { return l != kUnlabeled; }))
    throw EngineError("granular-ball construction needs at least one labeled node");

  std::vector<detail::WorkBall> queue(1);
  queue[0].members.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    queue[0].members[i] = static_cast<NodeId>(i);

  auto purity_arity = [&](const detail::WorkBall &b) -> std::size_t {
    if (purity(b.members, labels, cfg.purity_denominator) > cfg.purity_threshold)
      return 0;
    return distinct_classes(b.members, labels);
  };
  const std::size_t limit = size_limit_for(cfg, n);
  auto size_arity = [&](const detail::WorkBall &b) -> std::size_t {
    return b.members.size() >= limit ? 2 : 0;
  };

  GBModel model;
  model.config = cfg;
  model.size_limit = limit;
  model.phase1_passes = detail::run_phase(features, queue, cfg, purity_arity);
  model.phase2_passes = detail::run_phase(features, queue, cfg, size_arity);
  // Phase-2 splits can leave a part impure; purity splits only shrink balls,
  // so this pass keeps the size bound intact.
  model.repair_passes = detail::run_phase(features, queue, cfg, purity_arity);

  const std::size_t d = features.cols();
  model.assignment.assign(n, 0);
  model.domains.assign(n, Domain::Chaos);
  model.balls.reserve(queue.size());
  std::vector<double> dist;
  for (std::size_t bi = 0; bi < queue.size(); ++bi) {
    auto &wb = queue[bi];
    GranularBall ball;
    ball.members = std::move(wb.members);
    ball.unsplittable = wb.unsplittable;
    ball.center.assign(d, 0.0);
    for (NodeId i : ball.members) {
      auto x = features.row(i);
      for (std::size_t j = 0; j < d; ++j)
        ball.center[j] += x[j];
    }
    for (auto &c : ball.center)
      c /= static_cast<double>(ball.members.size());

    dist.clear();
    double sum = 0.0, mx = 0.0;
    for (NodeId i : ball.members) {
      double r = std::sqrt(detail::sq_dist(features.row(i), ball.center));
      dist.push_back(r);
      sum += r;
      mx = std::max(mx, r);
    }
    ball.radius = cfg.radius_mode == RadiusMode::MeanDistance
                      ? sum / static_cast<double>(ball.members.size())
                      : mx;
    ball.purity = purity(ball.members, labels, cfg.purity_denominator);
    ball.majority_label = majority_label(ball.members, labels);
    ball.labeled_count = static_cast<std::size_t>(
        std::count_if(ball.members.begin(), ball.members.end(),
                      [&](NodeId i) { return labels[i] != kUnlabeled; }));

    for (std::size_t k = 0; k < ball.members.size(); ++k) {
      NodeId i = ball.members[k];
      model.assignment[i] = static_cast<std::uint32_t>(bi);
      if (dist[k] > ball.radius)
        model.domains[i] = Domain::Chaos;
      else
        model.domains[i] =
            ball.majority_label ? Domain::Definite : Domain::Uncertain;
    }
    model.balls.push_back(std::move(ball));
  }
  return model;
}

/// Convenience overload: features plus train labels of a bundle.
inline GBModel build(const GraphBundle &bundle, const GBCConfig &cfg) {
  auto train = bundle.train_labels();
  return build(bundle.features, train, cfg);
}

/// Ball label for every node in the definite domain; other nodes absent.
inline LabelSet predict(const GBModel &model) {
  LabelSet out;
  out.universe = model.num_nodes();
  for (std::size_t i = 0; i < model.num_nodes(); ++i) {
    if (model.domains[i] != Domain::Definite)
      continue;
    out.entries.emplace(static_cast<NodeId>(i),
                        *model.balls[model.assignment[i]].majority_label);
  }
  return out;
}

/// {definite, uncertain, chaos} node counts.
inline std::array<std::size_t, 3> domain_counts(const GBModel &model) {
  std::array<std::size_t, 3> out{};
  for (Domain d : model.domains)
    ++out[static_cast<std::size_t>(d)];
  return out;
}

// ---------------------------------------------------------------------------
// gbmodel.json (reals as hex-floats so the round-trip is bit-exact)

inline nlohmann::json to_json(const GBCConfig &cfg) {
  return {
      {"purity_threshold", hexfloat(cfg.purity_threshold)},
      {"size_limit_mode",
       cfg.size_limit_mode == SizeLimitMode::SqrtN ? "sqrt_n" : "fixed"},
      {"fixed_size_limit", cfg.fixed_size_limit},
      {"kmeans_max_iters", cfg.kmeans_max_iters},
      {"kmeans_tol", hexfloat(cfg.kmeans_tol)},
      {"radius_mode", cfg.radius_mode == RadiusMode::MeanDistance
                          ? "mean_distance"
                          : "max_distance"},
      {"purity_denominator",
       cfg.purity_denominator == PurityDenominator::LabeledOnly
           ? "labeled_only"
           : "all_members"},
      {"seed", cfg.seed},
  };
}

inline GBCConfig gbc_config_from_json(const nlohmann::json &j) {
  GBCConfig cfg;
  cfg.purity_threshold = parse_hexfloat(j.at("purity_threshold"));
  cfg.size_limit_mode = j.at("size_limit_mode") == "fixed"
                            ? SizeLimitMode::Fixed
                            : SizeLimitMode::SqrtN;
  cfg.fixed_size_limit = j.at("fixed_size_limit");
  cfg.kmeans_max_iters = j.at("kmeans_max_iters");
  cfg.kmeans_tol = parse_hexfloat(j.at("kmeans_tol"));
  cfg.radius_mode = j.at("radius_mode") == "max_distance"
                        ? RadiusMode::MaxDistance
                        : RadiusMode::MeanDistance;
  cfg.purity_denominator = j.at("purity_denominator") == "all_members"
                               ? PurityDenominator::AllMembers
                               : PurityDenominator::LabeledOnly;
  cfg.seed = j.at("seed");
  return cfg;
}

inline nlohmann::json to_json(const GBModel &m) {
  nlohmann::json balls = nlohmann::json::array();
  for (const auto &b : m.balls) {
    nlohmann::json center = nlohmann::json::array();
    for (double c : b.center)
      center.push_back(hexfloat(c));
    balls.push_back({
        {"members", b.members},
        {"center", center},
        {"radius", hexfloat(b.radius)},
        {"purity", hexfloat(b.purity)},
        {"label", b.majority_label ? nlohmann::json(*b.majority_label)
                                   : nlohmann::json(nullptr)},
        {"labeled_count", b.labeled_count},
        {"unsplittable", b.unsplittable},
    });
  }
  std::string domains;
  domains.reserve(m.domains.size());
  for (Domain d : m.domains)
    domains.push_back(d == Domain::Definite    ? 'D'
                      : d == Domain::Uncertain ? 'U'
                                               : 'C');
  return {
      {"format", "scgnn.gbmodel/1"},
      {"config", to_json(m.config)},
      {"size_limit", m.size_limit},
      {"phase1_passes", m.phase1_passes},
      {"phase2_passes", m.phase2_passes},
      {"repair_passes", m.repair_passes},
      {"balls", balls},
      {"assignment", m.assignment},
      {"domains", domains},
  };
}

inline GBModel gbmodel_from_json(const nlohmann::json &j) {
  GBModel m;
  try {
    m.config = gbc_config_from_json(j.at("config"));
    m.size_limit = j.at("size_limit");
    m.phase1_passes = j.at("phase1_passes");
    m.phase2_passes = j.at("phase2_passes");
    m.repair_passes = j.at("repair_passes");
    for (const auto &jb : j.at("balls")) {
      GranularBall b;
      b.members = jb.at("members").get<std::vector<NodeId>>();
      for (const auto &c : jb.at("center"))
        b.center.push_back(parse_hexfloat(c));
      b.radius = parse_hexfloat(jb.at("radius"));
      b.purity = parse_hexfloat(jb.at("purity"));
      if (!jb.at("label").is_null())
        b.majority_label = jb.at("label").get<ClassId>();
      b.labeled_count = jb.at("labeled_count");
      b.unsplittable = jb.at("unsplittable");
      m.balls.push_back(std::move(b));
    }
    m.assignment = j.at("assignment").get<std::vector<std::uint32_t>>();
    for (char c : j.at("domains").get<std::string>()) {
      switch (c) {
      case 'D':
        m.domains.push_back(Domain::Definite);
        break;
      case 'U':
        m.domains.push_back(Domain::Uncertain);
        break;
      case 'C':
        m.domains.push_back(Domain::Chaos);
        break;
      default:
        throw SchemaError(std::string("unknown domain code '") + c + "'");
      }
    }
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(std::string("gbmodel: ") + e.what());
  }
  if (m.domains.size() != m.assignment.size())
    throw SchemaError("gbmodel: domains/assignment length mismatch");
  for (auto a : m.assignment)
    if (a >= m.balls.size())
      throw SchemaError("gbmodel: assignment refers to a missing ball");
  return m;
}

inline void save_gbmodel(const GBModel &m, const fs::path &p) {
  if (p.has_parent_path())
    detail::ensure_dir(p.parent_path());
  auto out = detail::open_out(p);
  out << to_json(m).dump() << '\n';
  if (!out)
    throw IoError("short write to " + p.string());
}

inline GBModel load_gbmodel(const fs::path &p) {
  auto in = detail::open_in(p);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(p.string() + ": " + e.what());
  }
  return gbmodel_from_json(j);
}

} // namespace scgnn
