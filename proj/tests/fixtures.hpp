#pragma once

// Shared helpers for the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "scgnn/scgnn.hpp"

namespace scgnn::testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string &tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("scgnn_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const fs::path &path() const { return path_; }
  fs::path operator/(const std::string &s) const { return path_ / s; }

private:
  fs::path path_;
};

inline MatrixF matrix_from(std::size_t rows, std::size_t cols,
                           std::initializer_list<float> v) {
  MatrixF m(rows, cols);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

/// Six-node path graph plus two anchors; every loss term has support.
struct GradInstance {
  GraphBundle bundle;
  AugmentGraph aug;
  Supervision sup;
};

inline GradInstance grad_instance(std::uint64_t seed) {
  GradInstance g;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto &b = g.bundle;
  b.num_classes = 3;
  b.features = MatrixF(6, 4);
  for (float &x : b.features.flat())
    x = static_cast<float>(nd(rng));
  b.edges = normalize_edges({{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}});
  b.labels = {0, 0, 1, 1, 2, 2};
  b.splits = {Split::Train, Split::Test, Split::Train,
              Split::Test,  Split::Train, Split::Val};

  g.aug.base = b;
  for (std::uint32_t a = 0; a < 2; ++a) {
    Anchor an;
    an.anchor_id = 6 + a;
    an.source_ball = a;
    an.label = static_cast<ClassId>(a);
    an.contributor_count = 1;
    for (std::size_t j = 0; j < 4; ++j)
      an.feature.push_back(static_cast<float>(nd(rng)));
    g.aug.anchors.push_back(an);
  }
  g.aug.projection_edges = {{6, 0}, {6, 1}, {6, 2}, {7, 3}, {7, 4}, {7, 5}};
  g.aug.bridging_edges = {{6, 7}};

  g.sup.train = {{0, 0}, {2, 1}, {4, 2}};
  g.sup.anchor = {{0, 0}, {1, 1}};
  g.sup.lcc = {{1, 0}, {3, 1}, {5, 2}};
  return g;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t tensors = 0;
  std::size_t entries = 0;
};

/// Central finite differences of the total loss against the analytic
/// gradients, for every backbone and fusion tensor. The error of a tensor
/// is ||analytic - numeric|| / max(||analytic||, ||numeric||).
inline GradCheckResult gradient_check(std::uint64_t seed, bool on_logits,
                                      BackboneKind kind = BackboneKind::GCN,
                                      AblationFlags flags = {}) {
  auto g = grad_instance(seed);
  BackboneSpec spec;
  spec.kind = kind;
  spec.hidden = 5;
  spec.dropout = 0.0;
  TrainConfig cfg;
  cfg.beta = 0.7;
  cfg.gamma = 0.6;
  cfg.fusion_hidden = 4;
  cfg.ablation = flags;
  ScgnnModel model(g.bundle, &g.aug, spec, cfg);
  ModelState st = init_state(4, 3, spec, cfg.fusion_hidden, seed);
  st.fusion.on_logits = on_logits;
  // non-zero biases so the check covers their gradients away from zero
  std::mt19937_64 rng(seed + 100);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (double &x : st.backbone.b0.value.flat())
    x = u(rng);
  for (double &x : st.backbone.b1.value.flat())
    x = u(rng);

  std::vector<Param *> params{&st.backbone.w0, &st.backbone.b0,
                              &st.backbone.w1, &st.backbone.b1};
  if (model.parallel()) {
    params.push_back(&st.fusion.w1);
    params.push_back(&st.fusion.w2);
  }
  if (flags.no_augment)
    g.sup.anchor.clear(); // no anchor rows without the augment graph
  for (Param *p : params)
    p->zero_grad();
  model.step(st, g.sup, nullptr, true);

  GradCheckResult res;
  const double h = 1e-6;
  for (Param *p : params) {
    const MatrixD analytic = p->grad;
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      double &w = p->value.flat()[k];
      const double w0 = w;
      w = w0 + h;
      const double lp = model.step(st, g.sup, nullptr, false).total;
      w = w0 - h;
      const double lm = model.step(st, g.sup, nullptr, false).total;
      w = w0;
      const double num = (lp - lm) / (2.0 * h);
      const double an = analytic.flat()[k];
      diff2 += (an - num) * (an - num);
      a2 += an * an;
      n2 += num * num;
      ++res.entries;
    }
    const double scale = std::max(std::sqrt(a2), std::sqrt(n2));
    const double rel = scale == 0.0 ? 0.0 : std::sqrt(diff2) / scale;
    res.max_rel_error = std::max(res.max_rel_error, rel);
    ++res.tensors;
  }
  return res;
}

/// Two isotropic blobs far apart in 2-d; first half class 0.
inline GraphBundle two_blobs(std::size_t per_blob, std::uint64_t seed,
                             std::size_t labeled_per_blob = 3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 0.3);
  GraphBundle b;
  b.num_classes = 2;
  const std::size_t n = 2 * per_blob;
  b.features = MatrixF(n, 2);
  b.labels.resize(n);
  b.splits.assign(n, Split::Test);
  for (std::size_t i = 0; i < n; ++i) {
    const bool second = i >= per_blob;
    b.features(i, 0) = static_cast<float>((second ? 10.0 : 0.0) + nd(rng));
    b.features(i, 1) = static_cast<float>(nd(rng));
    b.labels[i] = second ? 1 : 0;
    const std::size_t local = second ? i - per_blob : i;
    if (local < labeled_per_blob)
      b.splits[i] = Split::Train;
  }
  return b;
}

/// Post-conditions of a built model. Returns an empty string when all
/// hold, otherwise the first violation.
inline std::string gbc_violation(const GBModel &m, const MatrixF &features,
                                 std::span<const ClassId> labels) {
  const std::size_t n = features.rows();
  const auto &cfg = m.config;
  if (m.assignment.size() != n || m.domains.size() != n)
    return "assignment or domains not total";
  std::vector<int> seen(n, 0);
  for (std::size_t b = 0; b < m.balls.size(); ++b) {
    const auto &ball = m.balls[b];
    if (ball.members.empty())
      return "empty ball";
    for (NodeId i : ball.members) {
      if (i >= n || seen[i]++)
        return "balls do not partition the nodes";
      if (m.assignment[i] != b)
        return "assignment disagrees with membership";
    }
    const std::size_t classes = distinct_classes(ball.members, labels);
    if (cfg.purity_denominator == PurityDenominator::LabeledOnly &&
        classes > 1 && !(ball.purity > cfg.purity_threshold))
      return "multi-class ball at or below the purity threshold";
    if (!(ball.members.size() < m.size_limit) && !ball.unsplittable)
      return "ball at the size limit without the unsplittable flag";
    const bool labeled = ball.labeled_count > 0;
    if (labeled != ball.majority_label.has_value())
      return "majority label presence disagrees with labeled count";
    if (!labeled && ball.purity != 1.0)
      return "unlabeled ball purity is not 1";
    for (std::size_t j = 0; j < features.cols(); ++j) {
      double mean = 0.0;
      for (NodeId i : ball.members)
        mean += features(i, j);
      mean /= static_cast<double>(ball.members.size());
      if (std::abs(mean - ball.center[j]) > 1e-5 * std::max(1.0, std::abs(mean)))
        return "center is not the member mean";
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i])
      return "node without a ball";
    const auto &ball = m.balls[m.assignment[i]];
    double d2 = 0.0;
    for (std::size_t j = 0; j < features.cols(); ++j) {
      const double t = features(i, j) - ball.center[j];
      d2 += t * t;
    }
    const bool inside = std::sqrt(d2) <= ball.radius;
    const Domain expect = !inside                ? Domain::Chaos
                          : ball.majority_label ? Domain::Definite
                                                : Domain::Uncertain;
    if (m.domains[i] != expect)
      return "domain of node " + std::to_string(i) + " is wrong";
  }
  return {};
}

} // namespace scgnn::testing
