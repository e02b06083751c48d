#include "accounting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"
#include "special.hpp"

namespace idp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_integer(double x) { return x == std::floor(x); }

void check_sgm_args(double q, double C, double sigma, double alpha) {
  if (!(alpha > 1.0)) throw DomainError("sgm rdp: alpha must be > 1");
  if (!(sigma > 0.0)) throw DomainError("sgm rdp: sigma must be > 0");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("sgm rdp: q must be in [0, 1]");
  if (!(C > 0.0)) throw DomainError("sgm rdp: C must be > 0");
}

// log A_alpha for integer alpha >= 2: the binomial expansion of the
// subsampled Gaussian moment, evaluated in log space.
double log_a_int(double q, double nm, int alpha) {
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  const double half_inv_nm2 = 0.5 / (nm * nm);
  double acc = -kInf;
  for (int i = 0; i <= alpha; ++i) {
    const double t = log_binom_int(alpha, i) + i * log_q + (alpha - i) * log_1mq +
                     static_cast<double>(i) * (i - 1.0) * half_inv_nm2;
    acc = log_add(acc, t);
  }
  return acc;
}

// log A_alpha for fractional alpha > 1: two-sided series with the split point
// z0 of the Gaussian mixture densities.
double log_a_frac(double q, double nm, double alpha) {
  const double sigma2 = nm * nm;
  const double z0 = sigma2 * std::log(1.0 / q - 1.0) + 0.5;
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  const double sqrt2s = std::sqrt(2.0) * nm;

  double log_a0 = -kInf;
  double log_a1 = -kInf;
  SignedLog coef{1.0, 0.0};
  constexpr int kMaxIter = 20000;
  for (int i = 0; i < kMaxIter; ++i) {
    if (i > 0) {
      const double factor = (alpha - (i - 1)) / i;
      if (factor == 0.0) break;
      if (factor < 0.0) coef.sign = -coef.sign;
      coef.log_abs += std::log(std::fabs(factor));
    }
    const double j = alpha - i;
    const double log_t0 = coef.log_abs + i * log_q + j * log_1mq;
    const double log_t1 = coef.log_abs + j * log_q + i * log_1mq;
    const double log_e0 = std::log(0.5) + log_erfc((i - z0) / sqrt2s);
    const double log_e1 = std::log(0.5) + log_erfc((z0 - j) / sqrt2s);
    const double log_s0 = log_t0 + (i * i - i) / (2.0 * sigma2) + log_e0;
    const double log_s1 = log_t1 + (j * j - j) / (2.0 * sigma2) + log_e1;
    if (coef.sign > 0.0) {
      log_a0 = log_add(log_a0, log_s0);
      log_a1 = log_add(log_a1, log_s1);
    } else {
      log_a0 = log_sub(log_a0, log_s0);
      log_a1 = log_sub(log_a1, log_s1);
    }
    if (i > alpha && std::max(log_s0, log_s1) < -40.0) break;
  }
  return log_add(log_a0, log_a1);
}

}  // namespace

RdpCurve RdpCurve::scaled_by(double steps) const {
  if (!(steps >= 0.0)) throw DomainError("RdpCurve::scaled_by: steps must be >= 0");
  RdpCurve out;
  out.entries.reserve(entries.size());
  for (const auto& [a, e] : entries) out.entries.emplace_back(a, e * steps);
  return out;
}

void RdpCurve::validate() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!(entries[i].first > 1.0)) throw DomainError("RdpCurve: alpha must be > 1");
    if (!(entries[i].second >= 0.0)) throw DomainError("RdpCurve: eps_bar must be >= 0");
    for (std::size_t j = i + 1; j < entries.size(); ++j) {
      if (entries[i].first == entries[j].first)
        throw DomainError("RdpCurve: duplicate alpha");
    }
  }
}

void PrivacyProfile::validate() const {
  if (!(epsilon > 0.0)) throw DomainError("PrivacyProfile: epsilon must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("PrivacyProfile: delta must be in (0, 1)");
}

const OwnerMechanism& MechanismParams::owner(int owner_id) const {
  for (const auto& m : per_owner) {
    if (m.owner_id == owner_id) return m;
  }
  throw ConfigError("MechanismParams: no entry for owner " + std::to_string(owner_id));
}

void MechanismParams::validate() const {
  if (!(sigma > 0.0)) throw DomainError("MechanismParams: sigma must be > 0");
  if (T < 0) throw DomainError("MechanismParams: T must be >= 0");
  if (!(eta > 0.0)) throw DomainError("MechanismParams: eta must be > 0");
  for (const auto& m : per_owner) {
    if (!(m.q >= 0.0 && m.q <= 1.0)) throw DomainError("MechanismParams: q must be in [0, 1]");
    if (!(m.C > 0.0)) throw DomainError("MechanismParams: C must be > 0");
  }
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid{1.25, 1.5, 1.75};
  for (int a = 2; a <= 64; ++a) grid.push_back(a);
  for (double a : {72.0, 80.0, 96.0, 128.0, 160.0, 192.0, 256.0, 320.0, 384.0,
                   448.0, 512.0, 768.0, 1024.0}) {
    grid.push_back(a);
  }
  return grid;
}

double rdp_of_sgm_step(double q, double C, double sigma, double alpha) {
  check_sgm_args(q, C, sigma, alpha);
  return 2.0 * alpha * q * q * C * C / (sigma * sigma);
}

double sgm_rdp_step_tight(double q, double C, double sigma, double alpha) {
  check_sgm_args(q, C, sigma, alpha);
  if (q == 0.0) return 0.0;
  const double nm = sigma / C;  // noise multiplier against this sensitivity
  if (q == 1.0) return alpha / (2.0 * nm * nm);
  const double log_a =
      is_integer(alpha) ? log_a_int(q, nm, static_cast<int>(alpha)) : log_a_frac(q, nm, alpha);
  return std::max(0.0, log_a / (alpha - 1.0));
}

RdpCurve sgm_rdp_curve(double q, double C, double sigma, std::span<const double> alphas) {
  const std::vector<double> fallback = alphas.empty() ? default_alpha_grid() : std::vector<double>{};
  const std::span<const double> grid = alphas.empty() ? std::span<const double>(fallback) : alphas;
  RdpCurve curve;
  curve.entries.reserve(grid.size());
  for (double a : grid) curve.entries.emplace_back(a, sgm_rdp_step_tight(q, C, sigma, a));
  return curve;
}

double compose_rdp(double step_eps_bar, double steps) {
  if (!(steps >= 0.0)) throw DomainError("compose_rdp: steps must be >= 0");
  if (!(step_eps_bar >= 0.0)) throw DomainError("compose_rdp: eps_bar must be >= 0");
  return step_eps_bar * steps;
}

double rdp_to_dp(double alpha, double eps_bar, double delta) {
  if (!(alpha > 1.0)) throw DomainError("rdp_to_dp: alpha must be > 1");
  if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("rdp_to_dp: delta must be in (0, 1]");
  if (!(eps_bar >= 0.0)) throw DomainError("rdp_to_dp: eps_bar must be >= 0");
  return eps_bar + std::log((alpha - 1.0) / alpha) -
         (std::log(delta) + std::log(alpha)) / (alpha - 1.0);
}

DpPoint best_dp_epsilon(const RdpCurve& curve, double delta) {
  if (curve.entries.empty()) throw DomainError("best_dp_epsilon: empty curve");
  auto sorted = curve.entries;
  std::sort(sorted.begin(), sorted.end());
  DpPoint best{kInf, 0.0};
  for (const auto& [alpha, eps_bar] : sorted) {
    const double eps = rdp_to_dp(alpha, eps_bar, delta);
    if (eps < best.epsilon) best = {eps, alpha};
  }
  return best;
}

DpPoint sgm_epsilon(double q, double C, double sigma, long T, double delta,
                    std::span<const double> alphas) {
  if (T < 0) throw DomainError("sgm_epsilon: T must be >= 0");
  return best_dp_epsilon(sgm_rdp_curve(q, C, sigma, alphas).scaled_by(static_cast<double>(T)),
                         delta);
}

namespace {

// Largest x in [0, hi] with eps(x) <= target, for eps monotone increasing.
// eps(0) is taken from the caller since x = 0 may be outside the evaluable
// domain (C = 0 is not a valid mechanism parameter).
template <typename F>
double bisect_calibration(const F& eps_of, double eps_at_zero, double hi, double eps_target,
                          const char* what) {
  if (!(eps_target > 0.0)) throw DomainError(std::string(what) + ": target must be > 0");
  if (eps_at_zero > eps_target) {
    throw InfeasibleError(std::string(what) + ": target epsilon " + std::to_string(eps_target) +
                          " is below the conversion floor " + std::to_string(eps_at_zero) +
                          " reachable at the lower bracket");
  }
  if (eps_of(hi) <= eps_target) return hi;
  double lo = 0.0;
  for (int iter = 0; iter < 200 && (hi - lo) > 1e-5 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (eps_of(mid) <= eps_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace

double calibrate_sampling_rate(double eps_target, double delta, double C, double sigma, long T) {
  const auto eps_of = [&](double q) { return sgm_epsilon(q, C, sigma, T, delta).epsilon; };
  return bisect_calibration(eps_of, eps_of(0.0), 1.0, eps_target, "calibrate_sampling_rate");
}

double calibrate_clipping_threshold(double eps_target, double delta, double q, double sigma,
                                    long T, double c_max) {
  if (!(c_max > 0.0)) throw DomainError("calibrate_clipping_threshold: c_max must be > 0");
  const auto eps_of = [&](double C) {
    return C <= 0.0 ? 0.0 : sgm_epsilon(q, C, sigma, T, delta).epsilon;
  };
  // As C -> 0 the noise multiplier diverges and per-step eps_bar -> 0, so the
  // floor is the same conversion-only epsilon as for q -> 0.
  const double floor_eps = best_dp_epsilon(
      sgm_rdp_curve(0.0, 1.0, sigma, {}).scaled_by(static_cast<double>(T)), delta).epsilon;
  return bisect_calibration(eps_of, floor_eps, c_max, eps_target,
                            "calibrate_clipping_threshold");
}

}  // namespace idp
