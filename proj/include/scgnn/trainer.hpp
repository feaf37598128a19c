#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scgnn/augment.hpp"
#include "scgnn/error.hpp"
#include "scgnn/gbc.hpp"
#include "scgnn/graph.hpp"
#include "scgnn/io.hpp"
#include "scgnn/lcc.hpp"
#include "scgnn/nn.hpp"
#include "scgnn/seeds.hpp"

namespace scgnn {

struct AblationFlags {
  bool no_lcc = false;      // drop the pseudo-label loss
  bool no_augment = false;  // second channel runs on the vanilla graph
  bool no_parallel = false; // drop the vanilla channel and the fusion
};

/// Which label set feeds the pseudo-label loss.
enum class PseudoSource { Lcc, Gbc, Model };

struct TrainConfig {
  double beta = 1.0;
  double gamma = 1.0;
  int epochs = 200;
  double lr = 0.01;
  double weight_decay = 5e-4;
  int lcc_start_epoch = 20;
  int lcc_refresh_every = 10;
  std::uint64_t seed = 0;
  AblationFlags ablation;
  std::size_t fusion_hidden = 16;
  bool fusion_on_logits = true;
  PseudoSource pseudo_source = PseudoSource::Lcc;
};

inline void validate(const TrainConfig &c) {
  if (!(c.beta >= 0.0) || !(c.gamma >= 0.0))
    throw ConfigError("beta and gamma must be >= 0");
  if (c.epochs < 1)
    throw ConfigError("epochs must be >= 1");
  if (c.lcc_start_epoch < 0 || c.lcc_start_epoch > c.epochs)
    throw ConfigError("lcc_start_epoch must lie in [0, epochs]");
  if (c.lcc_refresh_every < 1)
    throw ConfigError("lcc_refresh_every must be >= 1");
  if (!(c.lr > 0.0) || !(c.weight_decay >= 0.0))
    throw ConfigError("lr must be > 0 and weight_decay >= 0");
  if (c.fusion_hidden < 1)
    throw ConfigError("fusion_hidden must be >= 1");
}

struct ModelState {
  BackboneParams backbone;
  FusionParams fusion;
  long step = 0;
  int epoch = 0;
  double best_val = -1.0;
  BackboneParams best_backbone;
  FusionParams best_fusion;
};

/// Glorot-uniform weights, zero biases. Backbone tensors are drawn before
/// the fusion tensors so a plain backbone run sees the same initial weights.
inline ModelState init_state(std::size_t d, std::size_t c,
                             const BackboneSpec &spec, std::size_t fusion_h,
                             std::uint64_t seed) {
  ModelState s;
  s.backbone = BackboneParams(d, spec.hidden, c);
  s.fusion = FusionParams(c, fusion_h);
  Rng rng(seed + seed_offset::kInit);
  glorot_uniform(s.backbone.w0.value, rng);
  glorot_uniform(s.backbone.w1.value, rng);
  glorot_uniform(s.fusion.w1.value, rng);
  glorot_uniform(s.fusion.w2.value, rng);
  return s;
}

struct Supervision {
  std::vector<Target> train;  // rows of P
  std::vector<Target> anchor; // rows of the anchor block of P_aug
  std::vector<Target> lcc;    // rows of P_fuse
};

struct LossParts {
  double total = 0.0;
  double train = 0.0;
  double anchor = 0.0;
  double lcc = 0.0;
};

struct ParallelOutputs {
  MatrixD p;     // vanilla channel, n x c
  MatrixD p_aug; // augment channel, (n + anchors) x c
  MatrixD fused; // n x c final prediction
  std::vector<double> alpha;
};

/// Shared-parameter two-channel model over G and G^aug.
class ScgnnModel {
public:
  ScgnnModel(const GraphBundle &base, const AugmentGraph *aug,
             const BackboneSpec &spec, const TrainConfig &cfg)
      : spec_(spec), flags_(cfg.ablation), beta_(cfg.beta), gamma_(cfg.gamma),
        n_(base.num_nodes()), c_(static_cast<std::size_t>(base.num_classes)) {
    validate(spec);
    prop_ = make_propagator(spec.kind, n_, base.edges);
    prop_.apply(to_double(base.features), ax_);
    use_aug_graph_ = !flags_.no_augment && aug != nullptr;
    if (use_aug_graph_) {
      if (aug->base.num_nodes() != n_)
        throw ModelError("augment graph does not extend the vanilla graph");
      auto edges = augmented_edges(*aug);
      prop_aug_ = make_propagator(spec.kind, aug->num_nodes(), edges);
      prop_aug_.apply(to_double(augmented_features(*aug)), ax_aug_);
    }
  }

  std::size_t num_nodes() const noexcept { return n_; }
  std::size_t aug_nodes() const noexcept {
    return use_aug_graph_ ? ax_aug_.rows() : n_;
  }
  bool parallel() const noexcept { return !flags_.no_parallel; }

  /// Forward (optionally with dropout), losses and, if `backward`, the
  /// gradients of the total loss accumulated into `state`.
  LossParts step(ModelState &state, const Supervision &sup, Rng *dropout_rng,
                 bool backward) {
    auto &bb = state.backbone;
    const double dropout = dropout_rng != nullptr ? spec_.dropout : 0.0;
    auto &cv = train_v_;
    auto &ca = train_a_;
    if (parallel())
      forward_channel(bb, prop_, ax_, dropout, dropout_rng, cv);
    forward_channel(bb, aug_prop(), aug_ax(), dropout, dropout_rng, ca);

    MatrixD p_aug_v = head_rows(ca.out);
    const MatrixD &p = parallel() ? cv.out : p_aug_v;
    FusionCache fc;
    if (parallel())
      fuse(p, p_aug_v, state.fusion, fc);
    const MatrixD &fused = parallel() ? fc.fused : p_aug_v;

    auto &dp = dp_, &dp_aug = dp_aug_, &dfused = dfused_;
    dp.assign_zero(n_, c_);
    dp_aug.assign_zero(ca.out.rows(), c_);
    dfused.assign_zero(n_, c_);
    MatrixD *gp = backward ? &dp : nullptr;
    LossParts parts;
    parts.train = cross_entropy(p, sup.train, 1.0, gp);
    parts.anchor = cross_entropy(ca.out, sup.anchor, beta_,
                                 backward ? &dp_aug : nullptr, n_);
    parts.lcc = cross_entropy(fused, sup.lcc, gamma_,
                              backward ? &dfused : nullptr);
    parts.total = parts.train + beta_ * parts.anchor + gamma_ * parts.lcc;
    if (!std::isfinite(parts.total))
      throw ModelError("non-finite loss");
    if (!backward)
      return parts;

    if (parallel()) {
      MatrixD dp_aug_v(n_, c_);
      fuse_backward(p, p_aug_v, state.fusion, fc, dfused, dp, dp_aug_v);
      add_head(dp_aug, dp_aug_v);
      backward_channel(bb, prop_, ax_, cv, dp);
    } else {
      add_head(dp_aug, dp);
      add_head(dp_aug, dfused);
    }
    backward_channel(bb, aug_prop(), aug_ax(), ca, dp_aug);
    return parts;
  }

  /// Evaluation-mode forward of both channels and the fusion.
  ParallelOutputs forward(const ModelState &state) const {
    ParallelOutputs out;
    auto &cv = eval_v_;
    auto &ca = eval_a_;
    forward_channel(state.backbone, aug_prop(), aug_ax(), 0.0, nullptr, ca);
    out.p_aug = ca.out;
    MatrixD p_aug_v = head_rows(out.p_aug);
    if (parallel()) {
      forward_channel(state.backbone, prop_, ax_, 0.0, nullptr, cv);
      out.p = cv.out;
      FusionCache fc;
      fuse(out.p, p_aug_v, state.fusion, fc);
      out.fused = std::move(fc.fused);
      out.alpha = std::move(fc.alpha);
    } else {
      out.p = p_aug_v;
      out.fused = std::move(p_aug_v);
    }
    return out;
  }

private:
  const Propagator &aug_prop() const {
    return use_aug_graph_ ? prop_aug_ : prop_;
  }
  const MatrixD &aug_ax() const { return use_aug_graph_ ? ax_aug_ : ax_; }

  MatrixD head_rows(const MatrixD &m) const {
    MatrixD out(n_, m.cols());
    std::copy_n(m.data(), n_ * m.cols(), out.data());
    return out;
  }
  void add_head(MatrixD &dst, const MatrixD &src) const {
    for (std::size_t i = 0; i < n_ * c_; ++i)
      dst.data()[i] += src.data()[i];
  }

  BackboneSpec spec_;
  AblationFlags flags_;
  double beta_, gamma_;
  std::size_t n_, c_;
  bool use_aug_graph_ = false;
  Propagator prop_, prop_aug_;
  MatrixD ax_, ax_aug_;
  ChannelCache train_v_, train_a_;
  mutable ChannelCache eval_v_, eval_a_;
  MatrixD dp_, dp_aug_, dfused_;
};

// ---------------------------------------------------------------------------
// training

struct EpochRecord {
  int epoch = 0;
  LossParts loss;
  double val_acc = 0.0;
  double test_acc = 0.0;
  double mean_alpha = 0.0;
  std::size_t pseudo_labels = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_acc = 0.0;
  double test_acc = 0.0; // at the best validation epoch
  int threads = 1;
  // argmax of the final prediction / of the vanilla channel at best epoch
  std::vector<ClassId> best_prediction;
  std::vector<ClassId> best_model_prediction;
  LabelSet pseudo_labels; // last generated pseudo-label set
  nlohmann::json config;

  std::vector<double> loss_curve() const {
    std::vector<double> out;
    for (const auto &e : epochs)
      out.push_back(e.loss.total);
    return out;
  }
};

inline double accuracy(std::span<const ClassId> pred, const GraphBundle &b,
                       Split split) {
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < b.num_nodes(); ++i) {
    if (b.splits[i] != split || b.labels[i] == kUnlabeled)
      continue;
    ++total;
    hit += pred[i] == b.labels[i];
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / total;
}

inline std::vector<Target> train_targets(const GraphBundle &b) {
  std::vector<Target> t;
  for (std::size_t i = 0; i < b.num_nodes(); ++i)
    if (b.splits[i] == Split::Train)
      t.push_back({static_cast<std::uint32_t>(i), b.labels[i]});
  return t;
}

inline nlohmann::json to_json(const TrainConfig &c, const BackboneSpec &s) {
  return {
      {"beta", c.beta},
      {"gamma", c.gamma},
      {"epochs", c.epochs},
      {"lr", c.lr},
      {"weight_decay", c.weight_decay},
      {"lcc_start_epoch", c.lcc_start_epoch},
      {"lcc_refresh_every", c.lcc_refresh_every},
      {"seed", c.seed},
      {"ablation",
       {{"no_lcc", c.ablation.no_lcc},
        {"no_augment", c.ablation.no_augment},
        {"no_parallel", c.ablation.no_parallel}}},
      {"fusion_hidden", c.fusion_hidden},
      {"fusion_input", c.fusion_on_logits ? "logits" : "probabilities"},
      {"pseudo_source", c.pseudo_source == PseudoSource::Lcc   ? "lcc"
                        : c.pseudo_source == PseudoSource::Gbc ? "gbc"
                                                               : "model"},
      {"backbone",
       {{"kind", s.kind == BackboneKind::GCN ? "gcn" : "mlp"},
        {"hidden", s.hidden},
        {"layers", s.layers},
        {"dropout", s.dropout}}},
  };
}

namespace detail {

inline void update_best(TrainReport &r, const EpochRecord &rec,
                        std::vector<ClassId> pred,
                        std::vector<ClassId> model_pred) {
  if (rec.val_acc > r.best_val_acc || r.best_epoch < 0) {
    r.best_val_acc = rec.val_acc;
    r.best_epoch = rec.epoch;
    r.test_acc = rec.test_acc;
    r.best_prediction = std::move(pred);
    r.best_model_prediction = std::move(model_pred);
  }
}

} // namespace detail

/// Full pipeline training: parallel channels, attention fusion, train +
/// anchor + pseudo-label losses, Adam, best-validation selection.
inline TrainReport train(const GraphBundle &bundle, const GBModel *gb,
                         const AugmentGraph *aug, const TrainConfig &cfg,
                         const BackboneSpec &spec) {
  validate(cfg);
  validate(spec);
  const auto &flags = cfg.ablation;
  const bool needs_gbc =
      !flags.no_lcc && cfg.pseudo_source != PseudoSource::Model;
  if (needs_gbc && cfg.gamma > 0.0 && gb == nullptr)
    throw ConfigError("pseudo-label loss (gamma > 0) needs a granular-ball model");
  if (!flags.no_augment && aug == nullptr)
    throw ConfigError("structure enhancement needs an augment graph");
  if (gb != nullptr && gb->num_nodes() != bundle.num_nodes())
    throw ConfigError("granular-ball model does not match the bundle");

  const std::size_t n = bundle.num_nodes();
  ScgnnModel model(bundle, flags.no_augment ? nullptr : aug, spec, cfg);
  ModelState state =
      init_state(bundle.feature_dim(), static_cast<std::size_t>(bundle.num_classes),
                 spec, cfg.fusion_hidden, cfg.seed);
  state.fusion.on_logits = cfg.fusion_on_logits;

  Supervision sup;
  sup.train = train_targets(bundle);
  if (!flags.no_augment)
    for (std::size_t a = 0; a < aug->anchors.size(); ++a)
      sup.anchor.push_back(
          {static_cast<std::uint32_t>(a), aug->anchors[a].label});

  LabelSet gbc_pred;
  if (gb != nullptr)
    gbc_pred = predict(*gb);
  std::set<NodeId> train_nodes;
  for (const auto &t : sup.train)
    train_nodes.insert(t.row);

  TrainReport report;
  report.config = to_json(cfg, spec);
  AdamConfig adam{cfg.lr, cfg.weight_decay};
  Rng dropout_rng(cfg.seed + seed_offset::kDropout);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool refresh = !flags.no_lcc && epoch >= cfg.lcc_start_epoch &&
                         (epoch - cfg.lcc_start_epoch) % cfg.lcc_refresh_every == 0;
    if (refresh) {
      auto out = model.forward(state);
      auto pred = argmax_rows(out.p, n);
      LabelSet model_pred;
      model_pred.universe = n;
      for (std::size_t i = 0; i < n; ++i)
        model_pred.entries.emplace(static_cast<NodeId>(i), pred[i]);
      LabelSet pseudo;
      pseudo.universe = n;
      switch (cfg.pseudo_source) {
      case PseudoSource::Lcc:
        pseudo = lcc(model_pred, gbc_pred, train_nodes).retained;
        break;
      case PseudoSource::Gbc:
        for (const auto &[i, l] : gbc_pred.entries)
          if (!train_nodes.count(i))
            pseudo.entries.emplace(i, l);
        break;
      case PseudoSource::Model:
        for (const auto &[i, l] : model_pred.entries)
          if (!train_nodes.count(i))
            pseudo.entries.emplace(i, l);
        break;
      }
      sup.lcc.clear();
      for (const auto &[i, l] : pseudo.entries)
        sup.lcc.push_back({i, l});
      report.pseudo_labels = std::move(pseudo);
    }

    state.backbone.w0.zero_grad();
    state.backbone.b0.zero_grad();
    state.backbone.w1.zero_grad();
    state.backbone.b1.zero_grad();
    state.fusion.w1.zero_grad();
    state.fusion.w2.zero_grad();
    LossParts parts;
    try {
      parts = model.step(state, sup, &dropout_rng, true);
    } catch (const ModelError &e) {
      throw TrainError(epoch, e.what());
    }
    ++state.step;
    for (Param *p : {&state.backbone.w0, &state.backbone.b0,
                     &state.backbone.w1, &state.backbone.b1})
      adam_step(*p, adam, state.step);
    if (model.parallel()) {
      adam_step(state.fusion.w1, adam, state.step);
      adam_step(state.fusion.w2, adam, state.step);
    }
    state.epoch = epoch;

    auto out = model.forward(state);
    auto pred = argmax_rows(out.fused, n);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = parts;
    rec.val_acc = accuracy(pred, bundle, Split::Val);
    rec.test_acc = accuracy(pred, bundle, Split::Test);
    rec.pseudo_labels = sup.lcc.size();
    if (!out.alpha.empty()) {
      double s = 0.0;
      for (double a : out.alpha)
        s += a;
      rec.mean_alpha = s / static_cast<double>(out.alpha.size());
    }
    if (rec.val_acc > state.best_val || report.best_epoch < 0) {
      state.best_val = rec.val_acc;
      state.best_backbone = state.backbone;
      state.best_fusion = state.fusion;
    }
    detail::update_best(report, rec, pred, argmax_rows(out.p, n));
    report.epochs.push_back(rec);
  }
  return report;
}

/// Plain backbone on the vanilla graph with cross-entropy on the train split.
/// Shares initialization and dropout streams with train().
inline TrainReport train_backbone(const GraphBundle &bundle,
                                  const TrainConfig &cfg,
                                  const BackboneSpec &spec) {
  validate(cfg);
  validate(spec);
  const std::size_t n = bundle.num_nodes();
  auto prop = make_propagator(spec.kind, n, bundle.edges);
  MatrixD ax;
  prop.apply(to_double(bundle.features), ax);
  ModelState state =
      init_state(bundle.feature_dim(), static_cast<std::size_t>(bundle.num_classes),
                 spec, cfg.fusion_hidden, cfg.seed);
  auto targets = train_targets(bundle);

  TrainReport report;
  report.config = to_json(cfg, spec);
  report.config["standalone_backbone"] = true;
  AdamConfig adam{cfg.lr, cfg.weight_decay};
  Rng dropout_rng(cfg.seed + seed_offset::kDropout);
  auto &bb = state.backbone;
  ChannelCache cache, eval;
  MatrixD dout;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Param *p : {&bb.w0, &bb.b0, &bb.w1, &bb.b1})
      p->zero_grad();
    forward_channel(bb, prop, ax, spec.dropout, &dropout_rng, cache);
    dout.assign_zero(n, cache.out.cols());
    LossParts parts;
    parts.train = cross_entropy(cache.out, targets, 1.0, &dout);
    parts.total = parts.train;
    if (!std::isfinite(parts.total))
      throw TrainError(epoch, "non-finite loss");
    backward_channel(bb, prop, ax, cache, dout);
    ++state.step;
    for (Param *p : {&bb.w0, &bb.b0, &bb.w1, &bb.b1})
      adam_step(*p, adam, state.step);

    forward_channel(bb, prop, ax, 0.0, nullptr, eval);
    auto pred = argmax_rows(eval.out, n);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = parts;
    rec.val_acc = accuracy(pred, bundle, Split::Val);
    rec.test_acc = accuracy(pred, bundle, Split::Test);
    detail::update_best(report, rec, pred, pred);
    report.epochs.push_back(rec);
  }
  return report;
}

// ---------------------------------------------------------------------------
// report serialization

inline nlohmann::json to_json(const TrainReport &r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto &e : r.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"loss_total", e.loss.total},
                      {"loss_train", e.loss.train},
                      {"loss_anchor", e.loss.anchor},
                      {"loss_lcc", e.loss.lcc},
                      {"val_acc", e.val_acc},
                      {"test_acc", e.test_acc},
                      {"mean_alpha", e.mean_alpha},
                      {"pseudo_labels", e.pseudo_labels}});
  return {{"config", r.config},
          {"threads", r.threads},
          {"best_epoch", r.best_epoch},
          {"best_val_acc", r.best_val_acc},
          {"test_acc", r.test_acc},
          {"prediction", r.best_prediction},
          {"model_prediction", r.best_model_prediction},
          {"pseudo_label_count", r.pseudo_labels.size()},
          {"epochs", epochs}};
}

inline void write_report(const TrainReport &r, const fs::path &json_path) {
  if (json_path.has_parent_path())
    detail::ensure_dir(json_path.parent_path());
  detail::open_out(json_path) << to_json(r).dump(2) << '\n';
  auto csv_path = json_path;
  csv_path.replace_extension(".csv");
  auto csv = detail::open_out(csv_path);
  csv << "epoch,loss_total,loss_train,loss_anchor,loss_lcc,val_acc,test_acc,"
         "mean_alpha,pseudo_labels\n";
  csv.precision(17);
  for (const auto &e : r.epochs)
    csv << e.epoch << ',' << e.loss.total << ',' << e.loss.train << ','
        << e.loss.anchor << ',' << e.loss.lcc << ',' << e.val_acc << ','
        << e.test_acc << ',' << e.mean_alpha << ',' << e.pseudo_labels << '\n';
}

} // namespace scgnn
