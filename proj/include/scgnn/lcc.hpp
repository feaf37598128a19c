#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "scgnn/error.hpp"
#include "scgnn/graph.hpp"

namespace scgnn {

/// Independent symmetric noise rates of two predictors over c classes.
struct NoiseParams {
  double r1 = 0.0;
  double r2 = 0.0;
  int c = 2;
};

inline void validate(const NoiseParams &p) {
  if (!(p.r1 >= 0.0 && p.r1 < 1.0) || !(p.r2 >= 0.0 && p.r2 < 1.0))
    throw SpecError("noise rates must lie in [0,1)");
  if (p.c < 2)
    throw SpecError("class count must be >= 2");
}

/// Label-set noise measured against ground truth.
struct NoiseStats {
  std::size_t errors = 0;
  std::size_t covered = 0;
  // errors / covered; 0 when nothing is covered
  double conditional_noise = 0.0;
  // errors / total nodes
  double coverage_noise = 0.0;
  double coverage = 0.0;
};

inline NoiseStats measure_noise(const LabelSet &set,
                                std::span<const ClassId> truth) {
  NoiseStats s;
  s.covered = set.size();
  for (const auto &[i, l] : set.entries)
    s.errors += truth[i] != l;
  const double total = static_cast<double>(truth.size());
  if (s.covered > 0)
    s.conditional_noise = static_cast<double>(s.errors) / s.covered;
  if (total > 0) {
    s.coverage_noise = static_cast<double>(s.errors) / total;
    s.coverage = static_cast<double>(s.covered) / total;
  }
  return s;
}

struct LccReport {
  LabelSet retained;
  std::size_t n_input = 0;    // n
  std::size_t n_gbc = 0;      // n'
  std::size_t n_retained = 0; // n''
  // (model input, gbc input, retained), filled when truth is supplied
  std::optional<std::array<NoiseStats, 3>> measured_noise;
};

/// Keeps node i iff the GBC prediction exists at i, agrees with the model
/// prediction, and i is not excluded (the train nodes).
inline LccReport lcc(const LabelSet &model_pred, const LabelSet &gbc_pred,
                     const std::set<NodeId> &exclude,
                     std::span<const ClassId> truth = {}) {
  LccReport r;
  r.n_input = model_pred.size();
  r.n_gbc = gbc_pred.size();
  r.retained.universe = model_pred.universe;
  for (const auto &[i, g] : gbc_pred.entries) {
    if (exclude.count(i))
      continue;
    auto it = model_pred.entries.find(i);
    if (it != model_pred.entries.end() && it->second == g)
      r.retained.entries.emplace(i, g);
  }
  r.n_retained = r.retained.size();
  if (!truth.empty())
    r.measured_noise = std::array<NoiseStats, 3>{
        measure_noise(model_pred, truth), measure_noise(gbc_pred, truth),
        measure_noise(r.retained, truth)};
  return r;
}

/// Noise rate among agreeing samples for two independent symmetric-noise
/// predictors.
inline double r3_closed_form(const NoiseParams &p) {
  validate(p);
  const double coincide = p.r1 * p.r2 / (p.c - 1);
  return coincide / ((1.0 - p.r1) * (1.0 - p.r2) + coincide);
}

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t agreeing = 0;
};

/// Simulates two symmetric-noise predictors over a uniform true class; wrong
/// predictions are uniform over the other c-1 classes. Returns the noisy
/// fraction among agreeing trials and its binomial standard error.
inline MonteCarloEstimate r3_monte_carlo(const NoiseParams &p,
                                         std::size_t trials,
                                         std::uint64_t seed) {
  validate(p);
  if (trials < 10000)
    throw SpecError("Monte-Carlo oracle needs at least 10^4 trials");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cls(0, p.c - 1);
  std::uniform_int_distribution<int> other(1, p.c - 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto noisy = [&](int truth, double rate) {
    return u01(rng) < rate ? (truth + other(rng)) % p.c : truth;
  };
  std::size_t agree = 0, wrong = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const int y = cls(rng);
    const int a = noisy(y, p.r1);
    const int b = noisy(y, p.r2);
    if (a != b)
      continue;
    ++agree;
    wrong += a != y;
  }
  if (agree == 0)
    throw OracleError("no agreeing trials");
  MonteCarloEstimate e;
  e.agreeing = agree;
  e.estimate = static_cast<double>(wrong) / static_cast<double>(agree);
  e.std_error = std::sqrt(e.estimate * (1.0 - e.estimate) /
                        static_cast<double>(agree));
  return e;
}

} // namespace scgnn
