#include "optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "errors.hpp"
#include "threading.hpp"

namespace idp {

namespace {

double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

std::vector<double> clip(std::span<const double> g, double C) {
  if (!(C > 0.0)) throw DomainError("clip: C must be > 0");
  for (double x : g) {
    if (!std::isfinite(x)) throw DomainError("clip: non-finite gradient component");
  }
  const double n = norm2(g);
  std::vector<double> out(g.begin(), g.end());
  if (n > C) {
    const double scale = C / n;
    for (double& x : out) x *= scale;
  }
  return out;
}

std::vector<double> GradientBatch::thresholds_in_rank_order() const {
  std::vector<double> out;
  out.reserve(rank_of.size());
  for (int pos : rank_of) out.push_back(per_datum[pos].clip_threshold);
  return out;
}

GradientBatch compute_gradient_batch(const Model& model, const LabeledDataset& data,
                                     const SampledBatch& batch, const OwnerPartition& partition,
                                     const BoundMechanism& bound, SortOrder order,
                                     const std::map<int, int>& owner_privacy_rank) {
  GradientBatch out;
  const int n = static_cast<int>(batch.indices.size());
  out.per_datum.resize(n);
  parallel_for(n, [&](int i) {
    const int idx = batch.indices[i];
    const int owner = partition.owner_of[idx];
    const double C = bound.of(owner).C;
    PerSampleGrad g = per_sample_loss_and_grad(model, data.row(idx), data.labels[idx]);
    PerDatum& d = out.per_datum[i];
    d.index = idx;
    d.owner = owner;
    d.loss = g.loss;
    d.clip_threshold = C;
    d.clipped_grad = clip(g.grad, C);
  });
  for (const PerDatum& d : out.per_datum) out.gamma_total += d.clip_threshold;

  out.rank_of.resize(n);
  std::iota(out.rank_of.begin(), out.rank_of.end(), 0);
  if (order == SortOrder::loss) {
    std::stable_sort(out.rank_of.begin(), out.rank_of.end(), [&](int a, int b) {
      return out.per_datum[a].loss > out.per_datum[b].loss;
    });
  } else {
    std::stable_sort(out.rank_of.begin(), out.rank_of.end(), [&](int a, int b) {
      const int ra = owner_privacy_rank.at(out.per_datum[a].owner);
      const int rb = owner_privacy_rank.at(out.per_datum[b].owner);
      if (ra != rb) return ra < rb;
      return out.per_datum[a].loss > out.per_datum[b].loss;
    });
  }
  return out;
}

std::vector<double> NoisyUpdate::update() const {
  std::vector<double> u(weighted_sum.size(), 0.0);
  if (skipped) return u;
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = (weighted_sum[i] + noise[i]) / b;
  return u;
}

NoisyUpdate apply_step(const Model& model, const GradientBatch& batch,
                       std::span<const double> rank_weights, const BoundMechanism& bound,
                       Rng& noise_rng) {
  const int r = model.spec.param_count();
  NoisyUpdate out;
  out.b = bound.b;
  out.weighted_sum.assign(r, 0.0);
  if (batch.per_datum.empty()) {
    // Poisson sampling already accounts for non-sampling; a pure-noise step
    // would spend utility for nothing. The iteration still counts against T.
    out.skipped = true;
    out.new_theta = model.flat;
    return out;
  }
  if (rank_weights.size() != batch.per_datum.size())
    throw DomainError("apply_step: weight count does not match batch");
  if (!(out.b > 0.0)) throw DomainError("apply_step: expected batch size must be > 0");

  for (std::size_t k = 0; k < batch.rank_of.size(); ++k) {
    const PerDatum& d = batch.per_datum[batch.rank_of[k]];
    const double w = rank_weights[k];
    for (int i = 0; i < r; ++i) out.weighted_sum[i] += w * d.clipped_grad[i];
  }
  out.noise.resize(r);
  for (int i = 0; i < r; ++i) out.noise[i] = bound.sigma * noise_rng.normal();
  out.new_theta = model.flat;
  for (int i = 0; i < r; ++i)
    out.new_theta[i] -= bound.eta * (out.weighted_sum[i] + out.noise[i]) / out.b;
  return out;
}

NoisyUpdate idp_sgd_step(const Model& model, const GradientBatch& batch,
                         const BoundMechanism& bound, Rng& noise_rng) {
  const std::vector<double> ones(batch.per_datum.size(), 1.0);
  return apply_step(model, batch, ones, bound, noise_rng);
}

NoisyUpdate ino_sgd_step(const Model& model, const GradientBatch& batch,
                         const BoundMechanism& bound, const Tif& tif, const FastTable& table,
                         Rng& noise_rng) {
  const auto thresholds = batch.thresholds_in_rank_order();
  const ImportanceAssignment assignment = importance_scores(tif, thresholds, table);
  return apply_step(model, batch, assignment.scores, bound, noise_rng);
}

std::vector<double> ino_sgm_release(const std::vector<std::vector<double>>& values,
                                    std::span<const double> norm_bounds,
                                    std::span<const double> scores, const Tif& tif, double sigma,
                                    Rng& rng) {
  if (values.size() != norm_bounds.size() || values.size() != scores.size())
    throw DomainError("ino_sgm_release: size mismatch");
  if (!(sigma >= 0.0)) throw DomainError("ino_sgm_release: sigma must be >= 0");
  const std::size_t r = values.empty() ? 0 : values.front().size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != r) throw DomainError("ino_sgm_release: ragged values");
    if (norm2(values[i]) > norm_bounds[i] + 1e-12) {
      // exceeding the declared bound voids the sensitivity argument
      throw DomainError("ino_sgm_release: value norm exceeds its declared bound");
    }
  }
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<double> thresholds;
  thresholds.reserve(order.size());
  for (int i : order) thresholds.push_back(norm_bounds[i]);
  const ImportanceAssignment assignment = importance_scores(tif, thresholds);
  std::vector<double> out(r, 0.0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double w = assignment.scores[k];
    const auto& v = values[order[k]];
    for (std::size_t i = 0; i < r; ++i) out[i] += w * v[i];
  }
  for (std::size_t i = 0; i < r; ++i) out[i] += sigma * rng.normal();
  return out;
}

}  // namespace idp
