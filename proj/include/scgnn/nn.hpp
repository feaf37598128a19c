#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "scgnn/error.hpp"
#include "scgnn/graph.hpp"
#include "scgnn/matrix.hpp"

namespace scgnn {

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// propagation

/// Symmetric-normalized adjacency with self-loops, D^-1/2 (A+I) D^-1/2, in
/// CSR form. An identity propagator stands in for the MLP backbone.
class Propagator {
public:
  static Propagator identity(std::size_t n) {
    Propagator p;
    p.n_ = n;
    p.identity_ = true;
    return p;
  }

  static Propagator gcn(std::size_t n, std::span<const Edge> edges) {
    Propagator p;
    p.n_ = n;
    std::vector<std::vector<NodeId>> adj(n);
    for (const auto &e : edges) {
      if (e.u >= n || e.v >= n)
        throw ModelError("edge endpoint outside the graph");
      if (e.u == e.v)
        continue;
      adj[e.u].push_back(e.v);
      adj[e.v].push_back(e.u);
    }
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto &a = adj[i];
      a.push_back(static_cast<NodeId>(i));
      std::sort(a.begin(), a.end());
      a.erase(std::unique(a.begin(), a.end()), a.end());
      inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(a.size()));
    }
    p.row_ptr_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i)
      p.row_ptr_[i + 1] = p.row_ptr_[i] + adj[i].size();
    p.col_.reserve(p.row_ptr_[n]);
    p.val_.reserve(p.row_ptr_[n]);
    for (std::size_t i = 0; i < n; ++i)
      for (NodeId j : adj[i]) {
        p.col_.push_back(j);
        p.val_.push_back(inv_sqrt[i] * inv_sqrt[j]);
      }
    return p;
  }

  std::size_t size() const noexcept { return n_; }
  bool is_identity() const noexcept { return identity_; }

  /// out = Â in. Â is symmetric, so this is also the backward map.
  void apply(const MatrixD &in, MatrixD &out) const {
    if (in.rows() != n_)
      throw ModelError("propagator/feature row mismatch");
    if (identity_) {
      out = in;
      return;
    }
    const std::size_t m = in.cols();
    out.assign_zero(n_, m);
    for (std::size_t i = 0; i < n_; ++i) {
      double *o = out.data() + i * m;
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        const double w = val_[k];
        const double *r = in.data() + static_cast<std::size_t>(col_[k]) * m;
        for (std::size_t j = 0; j < m; ++j)
          o[j] += w * r[j];
      }
    }
  }

private:
  std::size_t n_ = 0;
  bool identity_ = false;
  std::vector<std::size_t> row_ptr_;
  std::vector<NodeId> col_;
  std::vector<double> val_;
};

// ---------------------------------------------------------------------------
// parameters

/// A trainable tensor with its gradient and Adam moments.
struct Param {
  MatrixD value, grad, m, v;

  Param() = default;
  Param(std::size_t r, std::size_t c)
      : value(r, c), grad(r, c), m(r, c), v(r, c) {}
  void zero_grad() { grad.fill(0.0); }
};

inline void glorot_uniform(MatrixD &w, Rng &rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  std::uniform_real_distribution<double> u(-a, a);
  for (double &x : w.flat())
    x = u(rng);
}

struct AdamConfig {
  double lr = 0.01;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam step with L2 weight decay folded into the gradient.
inline void adam_step(Param &p, const AdamConfig &cfg, long step) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  auto w = p.value.flat();
  auto g = p.grad.flat();
  auto m = p.m.flat();
  auto v = p.v.flat();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = g[i] + cfg.weight_decay * w[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
    const double mh = m[i] / c1;
    const double vh = v[i] / c2;
    w[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
  }
}

// ---------------------------------------------------------------------------
// two-layer backbone

enum class BackboneKind { MLP, GCN };

struct BackboneSpec {
  BackboneKind kind = BackboneKind::GCN;
  std::size_t hidden = 64;
  int layers = 2;
  double dropout = 0.5;
};

inline void validate(const BackboneSpec &s) {
  if (s.hidden < 1)
    throw SpecError("hidden width must be >= 1");
  if (s.layers != 2)
    throw SpecError("only two-layer backbones are supported");
  if (!(s.dropout >= 0.0 && s.dropout < 1.0))
    throw SpecError("dropout must lie in [0,1)");
}

struct BackboneParams {
  Param w0, b0, w1, b1;

  BackboneParams() = default;
  BackboneParams(std::size_t d, std::size_t h, std::size_t c)
      : w0(d, h), b0(1, h), w1(h, c), b1(1, c) {}

  std::size_t in_dim() const { return w0.value.rows(); }
  std::size_t num_classes() const { return w1.value.cols(); }
};

/// Activations of one forward pass kept for the backward pass.
struct ChannelCache {
  MatrixD z1;   // pre-activation of layer 1
  MatrixD hd;   // relu(z1) after dropout
  MatrixD mask; // dropout scale per entry; empty when dropout is off
  MatrixD ahd;  // Â hd
  MatrixD out;  // logits
  // backward scratch, kept to avoid reallocating every step
  MatrixD tmp, dahd, dhd;
};

/// Forward through both layers. `ax` is Â X (X itself for an MLP). Dropout
/// sits between the layers and draws from `rng` only when `rng` is given.
inline void forward_channel(const BackboneParams &p, const Propagator &prop,
                            const MatrixD &ax, double dropout, Rng *rng,
                            ChannelCache &cache) {
  if (ax.cols() != p.in_dim())
    throw ModelError("feature width does not match the first layer");
  matmul(ax, p.w0.value, cache.z1);
  const std::size_t h = cache.z1.cols();
  for (std::size_t i = 0; i < cache.z1.rows(); ++i) {
    auto r = cache.z1.row(i);
    for (std::size_t j = 0; j < h; ++j)
      r[j] += p.b0.value(0, j);
  }
  cache.hd = cache.z1;
  for (double &x : cache.hd.flat())
    x = x > 0.0 ? x : 0.0;
  if (rng != nullptr && dropout > 0.0) {
    const double keep = 1.0 - dropout;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    cache.mask.assign_zero(cache.hd.rows(), h);
    auto mk = cache.mask.flat();
    auto hv = cache.hd.flat();
    for (std::size_t i = 0; i < mk.size(); ++i) {
      mk[i] = u01(*rng) < keep ? 1.0 / keep : 0.0;
      hv[i] *= mk[i];
    }
  } else {
    cache.mask.assign_zero(0, 0);
  }
  prop.apply(cache.hd, cache.ahd);
  matmul(cache.ahd, p.w1.value, cache.out);
  const std::size_t c = cache.out.cols();
  for (std::size_t i = 0; i < cache.out.rows(); ++i) {
    auto r = cache.out.row(i);
    for (std::size_t j = 0; j < c; ++j)
      r[j] += p.b1.value(0, j);
  }
}

/// Accumulates parameter gradients given dL/dlogits.
inline void backward_channel(BackboneParams &p, const Propagator &prop,
                             const MatrixD &ax, ChannelCache &cache,
                             const MatrixD &dout) {
  auto &tmp = cache.tmp;
  auto &dahd = cache.dahd;
  auto &dhd = cache.dhd;
  matmul_tn(cache.ahd, dout, tmp);
  auto g1 = p.w1.grad.flat();
  for (std::size_t i = 0; i < g1.size(); ++i)
    g1[i] += tmp.flat()[i];
  for (std::size_t i = 0; i < dout.rows(); ++i)
    for (std::size_t j = 0; j < dout.cols(); ++j)
      p.b1.grad(0, j) += dout(i, j);

  matmul_nt(dout, p.w1.value, dahd);
  prop.apply(dahd, dhd);
  auto dz = dhd.flat();
  auto z1 = cache.z1.flat();
  const bool masked = !cache.mask.empty();
  for (std::size_t i = 0; i < dz.size(); ++i) {
    if (masked)
      dz[i] *= cache.mask.flat()[i];
    if (!(z1[i] > 0.0))
      dz[i] = 0.0;
  }
  matmul_tn(ax, dhd, tmp);
  auto g0 = p.w0.grad.flat();
  for (std::size_t i = 0; i < g0.size(); ++i)
    g0[i] += tmp.flat()[i];
  for (std::size_t i = 0; i < dhd.rows(); ++i)
    for (std::size_t j = 0; j < dhd.cols(); ++j)
      p.b0.grad(0, j) += dhd(i, j);
}

/// Builds the propagator for a backbone kind over an n-node edge list.
inline Propagator make_propagator(BackboneKind kind, std::size_t n,
                                  std::span<const Edge> edges) {
  return kind == BackboneKind::GCN ? Propagator::gcn(n, edges)
                                   : Propagator::identity(n);
}

inline MatrixD to_double(const MatrixF &f) {
  MatrixD out(f.rows(), f.cols());
  std::copy(f.flat().begin(), f.flat().end(), out.flat().begin());
  return out;
}

/// Stateless forward: logits of a two-layer backbone over `edges`.
inline MatrixD forward_backbone(const BackboneParams &p, BackboneKind kind,
                                std::size_t n, std::span<const Edge> edges,
                                const MatrixF &features, double dropout,
                                Rng *rng) {
  if (features.rows() != n)
    throw ModelError("feature rows do not match node count");
  auto prop = make_propagator(kind, n, edges);
  MatrixD ax;
  prop.apply(to_double(features), ax);
  ChannelCache cache;
  forward_channel(p, prop, ax, dropout, rng, cache);
  return cache.out;
}

// ---------------------------------------------------------------------------
// cross-entropy

struct Target {
  std::uint32_t row = 0;
  ClassId label = 0;
};

/// Mean cross-entropy over `targets` (rows of `logits`, offset by
/// `row_offset`); adds weight * dL/dlogits into `grad` when given. Empty
/// support yields 0.
inline double cross_entropy(const MatrixD &logits, std::span<const Target> targets,
                            double weight = 1.0, MatrixD *grad = nullptr,
                            std::size_t row_offset = 0) {
  if (targets.empty())
    return 0.0;
  const std::size_t c = logits.cols();
  const double inv = 1.0 / static_cast<double>(targets.size());
  double loss = 0.0;
  std::vector<double> prob(c);
  for (const auto &t : targets) {
    if (row_offset + t.row >= logits.rows() ||
        static_cast<std::size_t>(t.label) >= c)
      throw ModelError("loss target outside the prediction matrix");
    auto r = logits.row(row_offset + t.row);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      prob[j] = std::exp(r[j] - mx);
      z += prob[j];
    }
    loss -= (r[static_cast<std::size_t>(t.label)] - mx - std::log(z));
    if (grad != nullptr) {
      auto g = grad->row(row_offset + t.row);
      for (std::size_t j = 0; j < c; ++j) {
        const double y = j == static_cast<std::size_t>(t.label) ? 1.0 : 0.0;
        g[j] += weight * inv * (prob[j] / z - y);
      }
    }
  }
  return loss * inv;
}

inline std::vector<ClassId> argmax_rows(const MatrixD &logits,
                                        std::size_t rows) {
  std::vector<ClassId> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    auto r = logits.row(i);
    out[i] = static_cast<ClassId>(std::max_element(r.begin(), r.end()) -
                                  r.begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// attention fusion

struct FusionParams {
  Param w1; // c x h
  Param w2; // h x 1
  // Score channel logits directly; otherwise softmax probabilities.
  bool on_logits = true;

  FusionParams() = default;
  FusionParams(std::size_t c, std::size_t h) : w1(c, h), w2(h, 1) {}
};

struct FusionCache {
  MatrixD q, q_aug; // fusion inputs (logits or probabilities)
  MatrixD v, v_aug; // tanh(q W1)
  std::vector<double> alpha;
  MatrixD fused;
};

namespace detail {

inline MatrixD softmax_rows(const MatrixD &x) {
  MatrixD out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double &e : r) {
      e = std::exp(e - mx);
      z += e;
    }
    for (double &e : r)
      e /= z;
  }
  return out;
}

inline std::vector<double> scores(const MatrixD &q, const FusionParams &f,
                                  MatrixD &v) {
  matmul(q, f.w1.value, v);
  for (double &x : v.flat())
    x = std::tanh(x);
  std::vector<double> s(q.rows(), 0.0);
  for (std::size_t i = 0; i < v.rows(); ++i) {
    auto r = v.row(i);
    for (std::size_t j = 0; j < r.size(); ++j)
      s[i] += r[j] * f.w2.value(j, 0);
  }
  return s;
}

} // namespace detail

/// Node-wise attention fusion of two prediction matrices (n x c):
/// alpha_i = exp(s_i) / (exp(s_i) + exp(s'_i)), s = tanh(P W1) W2, and
/// fused = diag(alpha) P + diag(1-alpha) P_aug.
inline void fuse(const MatrixD &p, const MatrixD &p_aug, const FusionParams &f,
                 FusionCache &cache) {
  if (p.rows() != p_aug.rows() || p.cols() != p_aug.cols())
    throw ModelError("fusion inputs differ in shape");
  cache.q = f.on_logits ? p : detail::softmax_rows(p);
  cache.q_aug = f.on_logits ? p_aug : detail::softmax_rows(p_aug);
  auto s = detail::scores(cache.q, f, cache.v);
  auto s_aug = detail::scores(cache.q_aug, f, cache.v_aug);
  const std::size_t n = p.rows(), c = p.cols();
  cache.alpha.resize(n);
  cache.fused.assign_zero(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    const double mx = std::max(s[i], s_aug[i]);
    const double e = std::exp(s[i] - mx), ea = std::exp(s_aug[i] - mx);
    const double a = e / (e + ea);
    cache.alpha[i] = a;
    for (std::size_t j = 0; j < c; ++j)
      cache.fused(i, j) = a * p(i, j) + (1.0 - a) * p_aug(i, j);
  }
}

/// Backward of fuse: accumulates into dp, dp_aug and the fusion gradients.
inline void fuse_backward(const MatrixD &p, const MatrixD &p_aug,
                          FusionParams &f, const FusionCache &cache,
                          const MatrixD &dfused, MatrixD &dp, MatrixD &dp_aug) {
  const std::size_t n = p.rows(), c = p.cols(), h = f.w1.value.cols();
  MatrixD ds(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = cache.alpha[i];
    double dalpha = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double g = dfused(i, j);
      dp(i, j) += a * g;
      dp_aug(i, j) += (1.0 - a) * g;
      dalpha += g * (p(i, j) - p_aug(i, j));
    }
    ds(i, 0) = dalpha * a * (1.0 - a);
  }

  // s branch gets +ds, s_aug branch gets -ds
  auto branch = [&](const MatrixD &q, const MatrixD &v, double sign,
                    MatrixD &draw) {
    MatrixD du(n, h);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = sign * ds(i, 0);
      if (g == 0.0)
        continue;
      for (std::size_t j = 0; j < h; ++j) {
        f.w2.grad(j, 0) += g * v(i, j);
        du(i, j) = g * f.w2.value(j, 0) * (1.0 - v(i, j) * v(i, j));
      }
    }
    MatrixD gw1;
    matmul_tn(q, du, gw1);
    for (std::size_t k = 0; k < gw1.size(); ++k)
      f.w1.grad.flat()[k] += gw1.flat()[k];
    MatrixD dq;
    matmul_nt(du, f.w1.value, dq);
    if (f.on_logits) {
      for (std::size_t k = 0; k < dq.size(); ++k)
        draw.flat()[k] += dq.flat()[k];
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j)
          dot += dq(i, j) * q(i, j);
        for (std::size_t j = 0; j < c; ++j)
          draw(i, j) += q(i, j) * (dq(i, j) - dot);
      }
    }
  };
  branch(cache.q, cache.v, 1.0, dp);
  branch(cache.q_aug, cache.v_aug, -1.0, dp_aug);
}

} // namespace scgnn
