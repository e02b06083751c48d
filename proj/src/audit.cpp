#include "audit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "errors.hpp"
#include "optimizer.hpp"
#include "special.hpp"

namespace idp {

namespace {

constexpr int kProbeDim = 8;
constexpr double kSensitivitySlack = 1e-9;

double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

struct ProbeDatum {
  double loss = 0.0;
  double C = 0.0;
  std::vector<double> clipped;  // ||.|| <= C
};

std::vector<double> random_clipped_grad(Rng& rng, double C) {
  std::vector<double> g(kProbeDim);
  for (double& x : g) x = rng.normal();
  const double n = norm2(g);
  const double radius = rng.uniform_in(0.0, 2.0 * C);
  for (double& x : g) x *= radius / std::max(n, 1e-12);
  return clip(g, C);
}

// ranks sorted by loss descending, ties by position
std::vector<int> rank_order(const std::vector<ProbeDatum>& batch) {
  std::vector<int> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return batch[a].loss > batch[b].loss; });
  return order;
}

std::vector<double> scheme_weights(const WeightingScheme& scheme, const Tif* tif,
                                   const std::vector<double>& thresholds) {
  const int n = static_cast<int>(thresholds.size());
  switch (scheme.kind) {
    case WeightingScheme::Kind::ino:
      return importance_scores(*tif, thresholds).scores;
    case WeightingScheme::Kind::idp:
      return std::vector<double>(n, 1.0);
    case WeightingScheme::Kind::top_mu: {
      std::vector<double> w(n, 0.0);
      for (int k = 0; k < std::min(n, scheme.mu); ++k) w[k] = 1.0;
      return w;
    }
    case WeightingScheme::Kind::drop_smallest_mu: {
      std::vector<double> w(n, 0.0);
      for (int k = 0; k < n - scheme.mu; ++k) w[k] = 1.0;
      return w;
    }
  }
  return {};
}

std::vector<double> weighted_sum(const std::vector<ProbeDatum>& batch,
                                 const WeightingScheme& scheme, const Tif* tif) {
  const auto order = rank_order(batch);
  std::vector<double> thresholds;
  thresholds.reserve(order.size());
  for (int i : order) thresholds.push_back(batch[i].C);
  const auto w = scheme_weights(scheme, tif, thresholds);
  std::vector<double> sum(kProbeDim, 0.0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    for (int d = 0; d < kProbeDim; ++d) sum[d] += w[k] * batch[order[k]].clipped[d];
  }
  return sum;
}

Tif random_tif(Rng& rng) {
  switch (rng.uniform_int(0, 2)) {
    case 0:
      return Tif::beta(rng.uniform_in(0.4, 4.0), rng.uniform_in(0.4, 4.0),
                       rng.uniform_in(0.5, 20.0));
    case 1: {
      const int n = rng.uniform_int(1, 6);
      std::vector<double> levels(n);
      for (double& v : levels) v = rng.uniform();
      std::sort(levels.rbegin(), levels.rend());
      return Tif::step(std::move(levels), rng.uniform_in(0.2, 4.0));
    }
    default: {
      const int n = rng.uniform_int(2, 9);
      std::vector<double> samples(n);
      for (double& v : samples) v = rng.uniform();
      std::sort(samples.rbegin(), samples.rend());
      return Tif::tabulated(std::move(samples), rng.uniform_in(0.5, 10.0));
    }
  }
}

// Adversarial construction for the rank-cutoff schemes: a batch of data with
// large thresholds and full-norm aligned gradients, plus one tiny-threshold
// datum whose insertion moves a large gradient across the cutoff.
std::vector<ProbeDatum> crafted_batch(const WeightingScheme& scheme, Rng& rng,
                                      ProbeDatum& to_add) {
  const int mu = std::max(1, scheme.mu);
  const int n = 2 * mu;
  std::vector<ProbeDatum> batch(n);
  for (int i = 0; i < n; ++i) {
    batch[i].loss = 1.0 + (n - i) * 0.01;
    batch[i].C = 3.0;
    batch[i].clipped.assign(kProbeDim, 0.0);
    batch[i].clipped[0] = 3.0;  // full norm, shared direction
  }
  to_add.C = 0.1;
  to_add.clipped.assign(kProbeDim, 0.0);
  if (scheme.kind == WeightingScheme::Kind::top_mu) {
    to_add.loss = 10.0;  // ranks first, evicting the old rank-mu datum
    to_add.clipped[0] = -0.1;
  } else {
    to_add.loss = 0.0;  // ranks last, rescuing the previously dropped datum
    to_add.clipped[0] = 0.1;
  }
  (void)rng;
  return batch;
}

struct InoCheck {
  bool decomposition_ok = true;
  bool telescoping_ok = true;
};

// Verifies the structure the privacy proof relies on when a datum enters at
// rank a: ranks below a keep their weights, ranks above a change by amounts
// whose interval masses telescope to at most C_a, and those pieces
// reconstruct the observed change.
InoCheck check_ino_decomposition(const Tif& tif, const std::vector<ProbeDatum>& batch,
                                 const ProbeDatum& added,
                                 std::span<const double> observed_delta) {
  InoCheck result;
  std::vector<ProbeDatum> extended = batch;
  extended.push_back(added);
  const auto old_order = rank_order(batch);
  const auto new_order = rank_order(extended);
  const int added_pos = static_cast<int>(batch.size());
  int a = -1;
  for (std::size_t k = 0; k < new_order.size(); ++k) {
    if (new_order[k] == added_pos) a = static_cast<int>(k);
  }
  std::vector<double> old_thresholds, new_thresholds;
  for (int i : old_order) old_thresholds.push_back(batch[i].C);
  for (int i : new_order) new_thresholds.push_back(extended[i].C);
  const auto old_scores = importance_scores(tif, old_thresholds);
  const auto new_scores = importance_scores(tif, new_thresholds);

  std::vector<double> reconstructed(kProbeDim, 0.0);
  double mass = 0.0;
  for (std::size_t k = 0; k < new_order.size(); ++k) {
    const int pos = new_order[k];
    const double len = new_scores.cumulative[k + 1] - new_scores.cumulative[k];
    if (static_cast<int>(k) == a) {
      for (int d = 0; d < kProbeDim; ++d)
        reconstructed[d] += new_scores.scores[k] * extended[pos].clipped[d];
      mass += new_scores.scores[k] * len;
      continue;
    }
    const std::size_t old_k = static_cast<int>(k) < a ? k : k - 1;
    const double dw = new_scores.scores[k] - old_scores.scores[old_k];
    if (static_cast<int>(k) < a) {
      for (int d = 0; d < kProbeDim; ++d) reconstructed[d] += dw * extended[pos].clipped[d];
      mass += dw * len;
    } else if (std::fabs(dw) > 1e-9) {
      result.decomposition_ok = false;  // lower ranks must keep their weights
    }
  }
  if (mass > added.C + 1e-6) result.telescoping_ok = false;
  for (int d = 0; d < kProbeDim; ++d) {
    if (std::fabs(reconstructed[d] - observed_delta[d]) > 1e-9) result.decomposition_ok = false;
  }
  return result;
}

}  // namespace

WeightingScheme WeightingScheme::parse(const std::string& name, const std::optional<Tif>& tif,
                                       int mu) {
  WeightingScheme s;
  s.tif = tif;
  s.mu = mu;
  if (name == "ino") {
    s.kind = Kind::ino;
  } else if (name == "idp") {
    s.kind = Kind::idp;
  } else if (name == "top_mu") {
    s.kind = Kind::top_mu;
  } else if (name == "drop_smallest_mu") {
    s.kind = Kind::drop_smallest_mu;
  } else {
    throw ConfigError("unknown weighting scheme: " + name);
  }
  return s;
}

SensitivityProbeReport modular_sensitivity_probe(const WeightingScheme& scheme, Rng& rng,
                                                 long trials, bool randomize_tif) {
  if (scheme.kind == WeightingScheme::Kind::ino && !scheme.tif.has_value() && !randomize_tif)
    throw ConfigError("sensitivity probe: ino scheme needs a tail function");
  const bool crafted_scheme = scheme.kind == WeightingScheme::Kind::top_mu ||
                              scheme.kind == WeightingScheme::Kind::drop_smallest_mu;
  SensitivityProbeReport report;
  report.trials = trials;
  report.trial_log.reserve(static_cast<std::size_t>(trials));

  for (long t = 0; t < trials; ++t) {
    Tif trial_tif = scheme.tif.has_value() ? *scheme.tif : Tif::step({1.0}, 1.0);
    if (randomize_tif && scheme.kind == WeightingScheme::Kind::ino) trial_tif = random_tif(rng);

    const int edge = static_cast<int>(t % 16);
    std::vector<ProbeDatum> batch;
    ProbeDatum candidate;
    bool remove = false;

    if (crafted_scheme && t % 10 == 0) {
      batch = crafted_batch(scheme, rng, candidate);
    } else {
      const int n_owners = rng.uniform_int(1, 4);
      std::vector<double> owner_c(n_owners);
      for (double& c : owner_c) c = rng.uniform_in(0.1, 3.0);
      int n = rng.uniform_int(1, 64);
      if (edge == 0) n = 1;
      const bool equal_losses = edge == 1;
      batch.resize(n);
      for (auto& d : batch) {
        d.C = owner_c[rng.uniform_int(0, n_owners - 1)];
        d.loss = equal_losses ? 0.5 : rng.uniform();
        d.clipped = random_clipped_grad(rng, d.C);
      }
      remove = rng.uniform() < 0.5;
      if (!remove) {
        double c = owner_c[rng.uniform_int(0, n_owners - 1)];
        if (edge == 2) c = *std::min_element(owner_c.begin(), owner_c.end());
        if (edge == 3) c = *std::max_element(owner_c.begin(), owner_c.end());
        candidate.C = c;
        candidate.loss = equal_losses ? 0.5 : rng.uniform();
        candidate.clipped = random_clipped_grad(rng, c);
      }
    }

    std::vector<ProbeDatum> before = batch;
    std::vector<ProbeDatum> after;
    if (remove) {
      const int victim = rng.uniform_int(0, static_cast<int>(batch.size()) - 1);
      candidate = batch[victim];
      after = batch;
      after.erase(after.begin() + victim);
    } else {
      after = batch;
      after.push_back(candidate);
    }

    const auto g_before = weighted_sum(before, scheme, &trial_tif);
    const auto g_after = weighted_sum(after, scheme, &trial_tif);
    std::vector<double> delta(kProbeDim);
    for (int d = 0; d < kProbeDim; ++d) delta[d] = g_after[d] - g_before[d];
    const double change = norm2(delta);

    ProbeTrial logged{candidate.C, change, remove, static_cast<int>(before.size())};
    report.trial_log.push_back(logged);
    report.max_change_norm = std::max(report.max_change_norm, change);
    report.max_excess = std::max(report.max_excess, change - candidate.C);
    if (change > candidate.C + kSensitivitySlack) {
      ++report.violations;
      if (!report.worst_violation.has_value() ||
          change - candidate.C > report.worst_violation->observed_change -
                                     report.worst_violation->C_of_datum) {
        report.worst_violation = logged;
      }
    }

    if (scheme.kind == WeightingScheme::Kind::ino && !remove) {
      const auto check = check_ino_decomposition(trial_tif, before, candidate, delta);
      if (!check.decomposition_ok) ++report.decomposition_failures;
      if (!check.telescoping_ok) ++report.telescoping_failures;
    }
  }
  return report;
}

std::vector<double> expected_weights_oracle(int K, double q_hat, const Tif& tif,
                                            const FastTable* table) {
  if (K < 1) throw DomainError("expected_weights_oracle: K must be >= 1");
  if (!(q_hat > 0.0 && q_hat <= 1.0))
    throw DomainError("expected_weights_oracle: q_hat must be in (0, 1]");
  const double gamma_real = tif.gamma();
  const int gamma = static_cast<int>(std::llround(gamma_real));
  if (std::fabs(gamma_real - gamma) > 1e-9 || gamma < 1)
    throw DomainError("expected_weights_oracle: gamma must be a positive integer");

  // unit-slot integrals of the tail, slot i covering [gamma-i-1, gamma-i]
  std::vector<double> unit(gamma);
  for (int i = 0; i < gamma; ++i) {
    const double lo = gamma_real - (i + 1);
    const double hi = gamma_real - i;
    if (table != nullptr) {
      const double base = table->kappa() - table->gamma();
      unit[i] = table->cumulative(base + hi) - table->cumulative(base + lo);
    } else {
      unit[i] = tif.integral(lo, hi);
    }
  }

  const double log_q = std::log(q_hat);
  const double log_1mq = q_hat < 1.0 ? std::log1p(-q_hat) : 0.0;
  std::vector<double> w(K);
  for (int k = 1; k <= K; ++k) {
    const int m = K - k;  // potential lower-ranked companions
    double acc = 0.0;
    double pmf_below_gamma = 0.0;
    for (int i = 0; i <= std::min(gamma - 1, m); ++i) {
      double pmf;
      if (q_hat == 1.0) {
        pmf = (i == m) ? 1.0 : 0.0;
      } else {
        pmf = std::exp(log_binom_int(m, i) + i * log_q + (m - i) * log_1mq);
      }
      pmf_below_gamma += pmf;
      acc += pmf * unit[i];
    }
    if (m >= gamma) acc += std::max(0.0, 1.0 - pmf_below_gamma);
    w[k - 1] = acc;
  }
  return w;
}

McWeights simulate_effective_weights(int K, double q_hat, const Tif& tif, long trials, Rng& rng) {
  if (trials < 1) throw DomainError("simulate_effective_weights: trials must be >= 1");
  std::vector<double> sum(K, 0.0), sumsq(K, 0.0);
  std::vector<int> batch_ranks;
  batch_ranks.reserve(K);
  for (long t = 0; t < trials; ++t) {
    batch_ranks.clear();
    for (int k = 0; k < K; ++k) {
      if (rng.uniform() < q_hat) batch_ranks.push_back(k);
    }
    if (batch_ranks.empty()) continue;
    const std::vector<double> thresholds(batch_ranks.size(), 1.0);
    const auto scores = importance_scores(tif, thresholds).scores;
    for (std::size_t j = 0; j < batch_ranks.size(); ++j) {
      const double v = scores[j];
      sum[batch_ranks[j]] += v;
      sumsq[batch_ranks[j]] += v * v;
    }
  }
  McWeights out;
  out.mean.resize(K);
  out.std_error.resize(K);
  const double n = static_cast<double>(trials);
  for (int k = 0; k < K; ++k) {
    const double mean = sum[k] / n;
    const double var = std::max(0.0, sumsq[k] / n - mean * mean);
    out.mean[k] = mean / q_hat;
    out.std_error[k] = std::sqrt(var / n) / q_hat;
  }
  return out;
}

MidMonitorSample mid_condition_lhs(std::span<const double> sum_grad_1,
                                   std::span<const double> sum_grad_2, double q1, double d1_size,
                                   double C1, double q2, double d2_size, double C2) {
  if (sum_grad_1.size() != sum_grad_2.size()) throw DomainError("mid_condition_lhs: size mismatch");
  const double denom = q1 * d1_size * C1;
  if (!(denom > 0.0)) throw DomainError("mid_condition_lhs: q1 |D1| C1 must be > 0");
  MidMonitorSample s;
  s.ratio = q2 * d2_size * C2 / denom;
  const double n1 = norm2(sum_grad_1);
  const double n2 = norm2(sum_grad_2);
  if (n1 == 0.0 || n2 == 0.0) {
    s.defined = false;
    s.cos_angle = std::nan("");
    s.lhs = std::nan("");
    return s;
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < sum_grad_1.size(); ++i) dot += sum_grad_1[i] * sum_grad_2[i];
  s.cos_angle = std::clamp(dot / (n1 * n2), -1.0, 1.0);
  s.lhs = 1.0 + s.cos_angle * s.ratio;
  s.defined = true;
  return s;
}

long mid_duration(const TrainingTrace& trace, int group_id, long T) {
  int gi = -1;
  for (std::size_t i = 0; i < trace.group_ids.size(); ++i) {
    if (trace.group_ids[i] == group_id) gi = static_cast<int>(i);
  }
  if (gi < 0) throw ConfigError("mid_duration: unknown group " + std::to_string(group_id));
  const auto& rows = trace.rows;
  if (rows.size() <= 1) return 0;
  const double initial = rows.front().group_loss[gi];
  std::size_t last_bad = 0;
  for (std::size_t j = 1; j < rows.size(); ++j) {
    if (rows[j].group_loss[gi] >= initial) last_bad = j;
  }
  if (last_bad == 0) return 0;                       // below initial throughout
  if (last_bad == rows.size() - 1) return T + 1;     // never recovers
  return rows[last_bad + 1].iter;
}

}  // namespace idp
