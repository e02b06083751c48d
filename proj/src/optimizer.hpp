#pragma once

#include <map>
#include <span>
#include <vector>

#include "data.hpp"
#include "importance.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace idp {

// g / max(1, ||g|| / C): norm capped at C, direction preserved.
std::vector<double> clip(std::span<const double> g, double C);

enum class SortOrder { loss, owner_then_loss };

struct PerDatum {
  int index = 0;    // dataset index
  int owner = 0;
  double loss = 0.0;
  double clip_threshold = 0.0;
  std::vector<double> clipped_grad;  // ||.|| <= clip_threshold
};

struct GradientBatch {
  std::vector<PerDatum> per_datum;   // batch (dataset) order
  std::vector<int> rank_of;          // pi_t: rank k -> position in per_datum
  double gamma_total = 0.0;          // sum of clip thresholds

  std::vector<double> thresholds_in_rank_order() const;
};

// One forward/backward pass per datum at the current parameters; losses used
// for ranking are the ones from this same pass. Sorting is stable on loss
// descending, ties broken by batch position; the owner_then_loss order ranks
// more private owners (smaller privacy rank) first.
GradientBatch compute_gradient_batch(const Model& model, const LabeledDataset& data,
                                     const SampledBatch& batch, const OwnerPartition& partition,
                                     const BoundMechanism& bound, SortOrder order,
                                     const std::map<int, int>& owner_privacy_rank);

struct NoisyUpdate {
  std::vector<double> weighted_sum;  // G_bar, pre-noise
  std::vector<double> noise;         // Z (empty when the step was skipped)
  double b = 0.0;
  std::vector<double> new_theta;
  bool skipped = false;              // empty batch: iteration counted, no update

  std::vector<double> update() const;  // (G_bar + Z) / b
};

// Weighted clipped sum in rank order, Gaussian noise, descent by eta/b.
// weights.size() must match the batch; empty batches skip the update and
// draw no noise.
NoisyUpdate apply_step(const Model& model, const GradientBatch& batch,
                       std::span<const double> rank_weights, const BoundMechanism& bound,
                       Rng& noise_rng);

// Uniform weights (Alg. 3; Alg. 2 when all owners share q and C).
NoisyUpdate idp_sgd_step(const Model& model, const GradientBatch& batch,
                         const BoundMechanism& bound, Rng& noise_rng);

// Rank weights from the batch importance function via the fast table.
NoisyUpdate ino_sgd_step(const Model& model, const GradientBatch& batch,
                         const BoundMechanism& bound, const Tif& tif, const FastTable& table,
                         Rng& noise_rng);

// Generic ordered weighted release: values with per-owner norm bounds,
// ordering by descending score (the ordering must be privacy-protected or
// input-independent), importance weights as in the BIF, Gaussian noise.
std::vector<double> ino_sgm_release(const std::vector<std::vector<double>>& values,
                                    std::span<const double> norm_bounds,
                                    std::span<const double> scores, const Tif& tif, double sigma,
                                    Rng& rng);

}  // namespace idp
