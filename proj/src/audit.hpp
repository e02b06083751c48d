#pragma once

#include <optional>
#include <string>
#include <vector>

#include "importance.hpp"
#include "rng.hpp"
#include "trace.hpp"

namespace idp {

// Batch weighting under audit. ino weights come from the importance scores
// of the given tail function; top_mu keeps only the mu highest-loss data and
// drop_smallest_mu zeroes the mu lowest-loss data (both break the modular
// bound, which is the point of auditing them).
struct WeightingScheme {
  enum class Kind { ino, idp, top_mu, drop_smallest_mu };
  Kind kind = Kind::ino;
  std::optional<Tif> tif;  // required for ino
  int mu = 8;              // top_mu / drop_smallest_mu

  static WeightingScheme parse(const std::string& name, const std::optional<Tif>& tif, int mu);
};

struct ProbeTrial {
  double C_of_datum = 0.0;      // clip threshold of the added/removed datum
  double observed_change = 0.0;  // ||Delta G_bar|| pre-noise
  bool removed = false;
  int batch_size = 0;
};

struct SensitivityProbeReport {
  long trials = 0;
  double max_change_norm = 0.0;
  double max_excess = 0.0;  // max over trials of observed - C
  long violations = 0;      // observed > C + 1e-9
  std::vector<ProbeTrial> trial_log;
  std::optional<ProbeTrial> worst_violation;
  // ino-only telescoping checks (quadrature tolerance 1e-6)
  long telescoping_failures = 0;
  long decomposition_failures = 0;
};

// Randomized add/remove probes of the pre-noise weighted sum: random batch
// sizes 1-64, random per-owner thresholds in [0.1, 3], random gradient
// directions in dimension 8 and random losses. The top_mu and
// drop_smallest_mu schemes additionally face crafted adversarial trials.
// When `randomize_tif` is set, each trial draws a fresh tail function.
SensitivityProbeReport modular_sensitivity_probe(const WeightingScheme& scheme, Rng& rng,
                                                 long trials, bool randomize_tif = false);

// Analytic per-rank weights of the effective objective on a
// uniform-privacy-extension dataset of K data sampled at rate q_hat with
// unit clipping thresholds and an integer tail length:
//   w_k = sum_{i=0}^{gamma-1} B(K-k, i) int_{gamma-i-1}^{gamma-i} f
//       + sum_{i=gamma}^{K-k} B(K-k, i)
// with B(m, i) the Binomial(m, q_hat) pmf. The optional table serves the
// unit-slot integrals.
std::vector<double> expected_weights_oracle(int K, double q_hat, const Tif& tif,
                                            const FastTable* table = nullptr);

// Monte-Carlo estimate of the same quantity: per-datum mean realized weight
// (zero when not sampled) over simulated batches, divided by q_hat.
struct McWeights {
  std::vector<double> mean;        // divided by q_hat, comparable to the oracle
  std::vector<double> std_error;  // of the divided mean
};
McWeights simulate_effective_weights(int K, double q_hat, const Tif& tif, long trials, Rng& rng);

struct MidMonitorSample {
  double cos_angle = 0.0;
  double ratio = 0.0;  // q2 |D2| C2 / (q1 |D1| C1)
  double lhs = 0.0;    // 1 + cos * ratio
  bool defined = false;
};

MidMonitorSample mid_condition_lhs(std::span<const double> sum_grad_1,
                                   std::span<const double> sum_grad_2, double q1, double d1_size,
                                   double C1, double q2, double d2_size, double C2);

// Iterations until the group's eval loss has permanently fallen below its
// initial value: 0 when that holds from the first post-initial row on, the
// iteration of the first row of the final below-initial run otherwise, and
// T + 1 when the group never recovers.
long mid_duration(const TrainingTrace& trace, int group_id, long T);

}  // namespace idp
