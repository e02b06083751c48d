#include "importance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "errors.hpp"
#include "special.hpp"

namespace idp {

namespace {

void check_unit_range(const std::vector<double>& vals, const char* what) {
  for (double v : vals) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError(std::string(what) + ": values must be in [0, 1]");
  }
}

void check_non_increasing(const std::vector<double>& vals, const char* what) {
  for (std::size_t i = 1; i < vals.size(); ++i) {
    if (vals[i] > vals[i - 1] + 1e-12)
      throw DomainError(std::string(what) + ": values must be non-increasing");
  }
}

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

}  // namespace

Tif Tif::beta(double a, double b, double gamma) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("Tif::beta: a and b must be > 0");
  if (!(gamma > 0.0)) throw DomainError("Tif::beta: gamma must be > 0");
  Tif f;
  f.kind_ = TifKind::beta;
  f.gamma_ = gamma;
  f.a_ = a;
  f.b_ = b;
  f.constant_one_ = false;
  return f;
}

Tif Tif::step(std::vector<double> levels, double step_length) {
  if (levels.empty()) throw DomainError("Tif::step: levels must be non-empty");
  if (!(step_length > 0.0)) throw DomainError("Tif::step: step_length must be > 0");
  check_unit_range(levels, "Tif::step");
  check_non_increasing(levels, "Tif::step");
  Tif f;
  f.kind_ = TifKind::step;
  f.gamma_ = step_length * static_cast<double>(levels.size());
  f.step_length_ = step_length;
  f.constant_one_ = std::all_of(levels.begin(), levels.end(), [](double v) { return v == 1.0; });
  f.levels_ = std::move(levels);
  return f;
}

Tif Tif::tabulated(std::vector<double> samples, double gamma) {
  if (samples.size() < 2) throw DomainError("Tif::tabulated: need at least 2 samples");
  if (!(gamma > 0.0)) throw DomainError("Tif::tabulated: gamma must be > 0");
  check_unit_range(samples, "Tif::tabulated");
  check_non_increasing(samples, "Tif::tabulated");
  Tif f;
  f.kind_ = TifKind::tabulated;
  f.gamma_ = gamma;
  f.constant_one_ = std::all_of(samples.begin(), samples.end(), [](double v) { return v == 1.0; });
  f.samples_ = std::move(samples);
  return f;
}

double Tif::eval(double c) const {
  if (!(c >= -1e-12 && c <= gamma_ + 1e-12))
    throw DomainError("Tif::eval: c outside [0, gamma]");
  c = std::min(gamma_, std::max(0.0, c));
  switch (kind_) {
    case TifKind::beta:
      return ibeta_reg(a_, b_, 1.0 - c / gamma_);
    case TifKind::step: {
      auto idx = static_cast<std::size_t>(c / step_length_);
      if (idx >= levels_.size()) idx = levels_.size() - 1;
      return levels_[idx];
    }
    case TifKind::tabulated: {
      const double pos = c / gamma_ * static_cast<double>(samples_.size() - 1);
      auto i = static_cast<std::size_t>(pos);
      if (i >= samples_.size() - 1) return samples_.back();
      const double t = pos - static_cast<double>(i);
      return samples_[i] + t * (samples_[i + 1] - samples_[i]);
    }
  }
  return 0.0;
}

namespace {

// cumulative integral of a step tif over [0, c]
double step_cumulative(const std::vector<double>& levels, double L, double c) {
  const auto full = std::min(levels.size(), static_cast<std::size_t>(c / L));
  double acc = 0.0;
  for (std::size_t i = 0; i < full; ++i) acc += levels[i] * L;
  if (full < levels.size()) {
    const double rem = c - static_cast<double>(full) * L;
    if (rem > 0.0) acc += levels[full] * rem;
  }
  return acc;
}

// cumulative integral of a piecewise-linear tif over [0, c]
double tab_cumulative(const std::vector<double>& s, double gamma, double c) {
  const double dx = gamma / static_cast<double>(s.size() - 1);
  const auto full = std::min(s.size() - 1, static_cast<std::size_t>(c / dx));
  double acc = 0.0;
  for (std::size_t i = 0; i < full; ++i) acc += 0.5 * (s[i] + s[i + 1]) * dx;
  if (full < s.size() - 1) {
    const double h = c - static_cast<double>(full) * dx;
    if (h > 0.0) {
      const double slope = (s[full + 1] - s[full]) / dx;
      acc += h * s[full] + 0.5 * h * h * slope;
    }
  }
  return acc;
}

// int_0^z I_u(a, b) du
double beta_cdf_antideriv(double a, double b, double z) {
  if (z <= 0.0) return 0.0;
  if (z > 1.0) z = 1.0;
  return z * ibeta_reg(a, b, z) - a / (a + b) * ibeta_reg(a + 1.0, b, z);
}

}  // namespace

double Tif::integral(double c1, double c2) const {
  if (c2 < c1 - 1e-12) throw DomainError("Tif::integral: c2 < c1");
  if (c1 < -1e-9 || c2 > gamma_ + 1e-9) throw DomainError("Tif::integral: outside [0, gamma]");
  c1 = std::min(gamma_, std::max(0.0, c1));
  c2 = std::min(gamma_, std::max(0.0, c2));
  if (c2 <= c1) return 0.0;
  switch (kind_) {
    case TifKind::step:
      return step_cumulative(levels_, step_length_, c2) - step_cumulative(levels_, step_length_, c1);
    case TifKind::tabulated:
      return tab_cumulative(samples_, gamma_, c2) - tab_cumulative(samples_, gamma_, c1);
    case TifKind::beta: {
      // int_{c1}^{c2} I_{1-c/gamma}(a,b) dc = gamma * int_{z2}^{z1} I_z dz
      const double z1 = 1.0 - c1 / gamma_;
      const double z2 = 1.0 - c2 / gamma_;
      return gamma_ * (beta_cdf_antideriv(a_, b_, z1) - beta_cdf_antideriv(a_, b_, z2));
    }
  }
  return 0.0;
}

double bif_eval(const Tif& f, double Gamma, double c) {
  if (!(Gamma >= 0.0)) throw DomainError("bif_eval: Gamma must be >= 0");
  if (!(c >= -1e-12 && c <= Gamma + 1e-12)) throw DomainError("bif_eval: c outside [0, Gamma]");
  c = std::min(Gamma, std::max(0.0, c));
  const double gamma = f.gamma();
  if (Gamma >= gamma) {
    const double plateau_end = Gamma - gamma;
    if (c <= plateau_end) return 1.0;
    return f.eval(c - plateau_end);
  }
  return f.eval(c + (gamma - Gamma));
}

double bif_interval_mean(const Tif& f, double Gamma, double c1, double c2) {
  if (c2 < c1) throw DomainError("bif_interval_mean: c2 < c1");
  if (c1 < -1e-9 || c2 > Gamma + 1e-9)
    throw DomainError("bif_interval_mean: interval outside [0, Gamma]");
  if (f.constant_one()) return 1.0;
  if (c2 <= c1) return bif_eval(f, Gamma, c1);
  const double gamma = f.gamma();
  // distances from the batch's right end; the tail occupies [0, gamma]
  const double r_hi = Gamma - c1;
  const double r_lo = std::max(0.0, Gamma - c2);
  if (r_lo >= gamma) return 1.0;  // fully inside the plateau
  const double plateau = std::max(0.0, r_hi - gamma);
  const double u_lo = std::max(0.0, gamma - std::min(r_hi, gamma));
  const double u_hi = gamma - r_lo;
  const double tail = f.integral(u_lo, u_hi);
  return clamp01((plateau + tail) / (c2 - c1));
}

namespace {

template <typename MeanFn>
ImportanceAssignment scores_impl(std::span<const double> thresholds, bool all_ones,
                                 const MeanFn& mean_over) {
  ImportanceAssignment out;
  out.cumulative.reserve(thresholds.size() + 1);
  out.cumulative.push_back(0.0);
  double acc = 0.0;
  for (double c : thresholds) {
    if (!(c > 0.0)) throw DomainError("importance_scores: thresholds must be > 0");
    acc += c;
    out.cumulative.push_back(acc);
  }
  out.gamma_total = acc;
  out.scores.reserve(thresholds.size());
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    out.scores.push_back(all_ones ? 1.0
                                  : mean_over(out.cumulative[k], out.cumulative[k + 1], acc));
  }
  return out;
}

}  // namespace

ImportanceAssignment importance_scores(const Tif& f, std::span<const double> thresholds) {
  return scores_impl(thresholds, f.constant_one(), [&](double c1, double c2, double Gamma) {
    return bif_interval_mean(f, Gamma, c1, c2);
  });
}

ImportanceAssignment importance_scores(const Tif& f, std::span<const double> thresholds,
                                       const FastTable& table) {
  return scores_impl(thresholds, f.constant_one(), [&](double c1, double c2, double Gamma) {
    return table.interval_mean(c1, c2, Gamma);
  });
}

int FastTable::default_resolution(const Tif& f) {
  // 16 knots per unit of clipping-threshold mass
  const double knots = std::ceil(16.0 * f.gamma()) + 1.0;
  return static_cast<int>(std::min(4.0e6, std::max(2.0, knots)));
}

FastTable::FastTable(const Tif& f, double kappa, int resolution) {
  if (!(kappa >= f.gamma())) throw DomainError("FastTable: kappa must be >= gamma");
  if (resolution < 2) throw DomainError("FastTable: resolution must be >= 2");
  kappa_ = kappa;
  gamma_ = f.gamma();
  constant_one_ = f.constant_one();
  step_kind_ = f.kind() == TifKind::step;
  if (step_kind_) {
    // knots at the breakpoints; the cumulative integral is piecewise linear
    // between them, so lookups are exact
    const auto n = f.levels().size();
    xs_.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
      xs_[i] = std::min(gamma_, static_cast<double>(i) * f.step_length());
    xs_.back() = gamma_;
  } else if (f.kind() == TifKind::tabulated) {
    // the sample grid itself: linear f between knots, lookups exact
    const auto n = f.samples().size();
    xs_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      xs_[i] = gamma_ * static_cast<double>(i) / static_cast<double>(n - 1);
  } else {
    xs_.resize(static_cast<std::size_t>(resolution));
    for (std::size_t i = 0; i < xs_.size(); ++i)
      xs_[i] = gamma_ * static_cast<double>(i) / static_cast<double>(xs_.size() - 1);
  }
  F_.resize(xs_.size());
  F_[0] = 0.0;
  for (std::size_t i = 1; i < xs_.size(); ++i)
    F_[i] = F_[i - 1] + f.integral(xs_[i - 1], xs_[i]);
  if (!step_kind_) {
    fv_.resize(xs_.size());
    for (std::size_t i = 0; i < xs_.size(); ++i) fv_[i] = f.eval(xs_[i]);
  }
}

double FastTable::tail_cum(double u) const {
  if (u <= 0.0) return 0.0;
  if (u >= gamma_) return F_.back();
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), u);
  const auto i = static_cast<std::size_t>(std::distance(xs_.begin(), it)) - 1;
  const double dx = xs_[i + 1] - xs_[i];
  const double h = u - xs_[i];
  if (step_kind_ || dx <= 0.0) {
    const double slope = dx > 0.0 ? (F_[i + 1] - F_[i]) / dx : 0.0;
    return F_[i] + h * slope;
  }
  // integral of the linear interpolant of f, with the residual against the
  // stored exact increment spread linearly so F stays continuous at knots
  const double trap = dx * 0.5 * (fv_[i] + fv_[i + 1]);
  const double corr = F_[i + 1] - F_[i] - trap;
  return F_[i] + h * fv_[i] + 0.5 * h * h * (fv_[i + 1] - fv_[i]) / dx + (h / dx) * corr;
}

double FastTable::cumulative(double x) const {
  if (x < -1e-9 || x > kappa_ + 1e-9) throw DomainError("FastTable::cumulative: x outside [0, kappa]");
  x = std::min(kappa_, std::max(0.0, x));
  const double plateau_end = kappa_ - gamma_;
  if (x <= plateau_end) return x;
  return plateau_end + tail_cum(x - plateau_end);
}

double FastTable::interval_integral(double c1, double c2, double Gamma) const {
  if (Gamma > kappa_ + 1e-9) {
    throw DomainError("FastTable: batch mass Gamma " + std::to_string(Gamma) +
                      " exceeds table coverage kappa " + std::to_string(kappa_));
  }
  if (c2 < c1) throw DomainError("FastTable: c2 < c1");
  if (c1 < -1e-9 || c2 > Gamma + 1e-9) throw DomainError("FastTable: interval outside [0, Gamma]");
  const double shift = kappa_ - Gamma;
  const double x1 = std::max(0.0, c1 + shift);
  const double x2 = std::min(kappa_, c2 + shift);
  if (x2 <= x1) return 0.0;
  const double plateau_end = kappa_ - gamma_;
  const double plateau = std::max(0.0, std::min(x2, plateau_end) - x1);
  const double u1 = std::max(0.0, x1 - plateau_end);
  const double u2 = std::max(0.0, x2 - plateau_end);
  const double tail = u2 > u1 ? tail_cum(u2) - tail_cum(u1) : 0.0;
  return plateau + tail;
}

double FastTable::interval_mean(double c1, double c2, double Gamma) const {
  if (constant_one_) {
    // still enforce the coverage contract
    if (Gamma > kappa_ + 1e-9)
      throw DomainError("FastTable: batch mass Gamma exceeds table coverage kappa");
    return 1.0;
  }
  if (c2 + (kappa_ - Gamma) <= kappa_ - gamma_) {
    if (Gamma > kappa_ + 1e-9)
      throw DomainError("FastTable: batch mass Gamma exceeds table coverage kappa");
    return 1.0;  // fully inside the plateau
  }
  if (c2 <= c1) return clamp01(interval_integral(c1, c2, Gamma));
  return clamp01(interval_integral(c1, c2, Gamma) / (c2 - c1));
}

}  // namespace idp
