#pragma once

#include <span>
#include <utility>
#include <vector>

namespace idp {

// One (alpha, eps_bar) Renyi budget curve. Alphas are distinct and > 1,
// eps_bar >= 0 throughout.
struct RdpCurve {
  std::vector<std::pair<double, double>> entries;  // (alpha, eps_bar)

  RdpCurve scaled_by(double steps) const;
  void validate() const;
};

struct PrivacyProfile {
  int owner_id = 0;
  double epsilon = 0.0;     // > 0
  double delta = 0.0;       // in (0, 1)
  void validate() const;
};

struct OwnerMechanism {
  int owner_id = 0;
  double q = 0.0;  // sampling rate in [0, 1]
  double C = 0.0;  // clipping threshold > 0
};

struct MechanismParams {
  std::vector<OwnerMechanism> per_owner;
  double sigma = 0.0;              // noise std, > 0
  int T = 0;                       // iterations, >= 0
  double eta = 0.0;                // learning rate, > 0
  double expected_batch_size = 0;  // sum_n q_n |D_n| once bound

  const OwnerMechanism& owner(int owner_id) const;
  void validate() const;
};

// Alpha grid used by the accountant: {1.25, 1.5, 1.75}, integers 2..64 and a
// sparse extension up to 1024. The extension is needed for sub-0.1 epsilon
// targets, where the RDP-to-DP conversion term alone exceeds 0.1 at alpha 64.
std::vector<double> default_alpha_grid();

// Closed-form step bound eps_bar = 2 alpha q^2 C^2 / sigma^2. A valid upper
// bound in the usual high-noise regime and the reference formula for the
// per-owner composition guarantee.
double rdp_of_sgm_step(double q, double C, double sigma, double alpha);

// Numerically tight per-step RDP of the subsampled Gaussian mechanism with
// sampling rate q, sensitivity C and noise std sigma. Integer alphas use the
// exact binomial sum, fractional alphas the two-sided series.
double sgm_rdp_step_tight(double q, double C, double sigma, double alpha);

RdpCurve sgm_rdp_curve(double q, double C, double sigma,
                       std::span<const double> alphas = {});

// Sequential composition: T steps of eps_bar each.
double compose_rdp(double step_eps_bar, double steps);

// (alpha, eps_bar)-RDP to (epsilon, delta)-DP conversion.
double rdp_to_dp(double alpha, double eps_bar, double delta);

struct DpPoint {
  double epsilon = 0.0;
  double alpha = 0.0;
};

// Minimum of rdp_to_dp over the curve; ties broken toward smaller alpha.
DpPoint best_dp_epsilon(const RdpCurve& curve, double delta);

// Full pipeline: tight step curve, scaled by T, converted at delta.
DpPoint sgm_epsilon(double q, double C, double sigma, long T, double delta,
                    std::span<const double> alphas = {});

// Largest q in [0, 1] with sgm_epsilon(q, C, sigma, T, delta) <= eps_target.
// Throws InfeasibleError when even q -> 0 overshoots the target.
double calibrate_sampling_rate(double eps_target, double delta, double C,
                               double sigma, long T);

// Largest C in (0, c_max] with sgm_epsilon(q, C, sigma, T, delta) <= target.
double calibrate_clipping_threshold(double eps_target, double delta, double q,
                                    double sigma, long T, double c_max = 1e3);

}  // namespace idp
