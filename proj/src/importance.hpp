#pragma once

#include <span>
#include <vector>

namespace idp {

enum class TifKind { beta, step, tabulated };

// Tail importance function: non-increasing, piecewise-continuous map from
// tail position [0, gamma] into [0, 1]. The beta kind is the horizontal flip
// of a Beta(a, b) cdf; step kinds are constant on fixed-length segments;
// tabulated kinds interpolate linearly between uniform samples.
class Tif {
 public:
  static Tif beta(double a, double b, double gamma);
  static Tif step(std::vector<double> levels, double step_length);
  static Tif tabulated(std::vector<double> samples, double gamma);

  TifKind kind() const { return kind_; }
  double gamma() const { return gamma_; }
  bool constant_one() const { return constant_one_; }

  double beta_a() const { return a_; }
  double beta_b() const { return b_; }
  const std::vector<double>& levels() const { return levels_; }
  double step_length() const { return step_length_; }
  const std::vector<double>& samples() const { return samples_; }

  // f_tail(c), domain error outside [0, gamma]
  double eval(double c) const;

  // Exact integral of f_tail over [c1, c2] within [0, gamma]. Step and
  // tabulated kinds are closed-form; the beta kind uses the antiderivative
  //   int_0^z I_u(a,b) du = z I_z(a,b) - a/(a+b) I_z(a+1,b).
  double integral(double c1, double c2) const;
  double cumulative(double c) const { return integral(0.0, c); }

 private:
  Tif() = default;
  TifKind kind_ = TifKind::step;
  double gamma_ = 0.0;
  double a_ = 0.0, b_ = 0.0;
  std::vector<double> levels_;
  double step_length_ = 0.0;
  std::vector<double> samples_;
  bool constant_one_ = false;
};

// Batch importance function built from the tail function and the batch's
// total clipping mass Gamma: a unit plateau followed by the shifted tail
// when Gamma >= gamma, and the left-truncated tail otherwise.
double bif_eval(const Tif& f, double Gamma, double c);

// Mean of the BIF over [c1, c2] (c2 <= Gamma), computed from exact tail
// integrals. Intervals fully inside the plateau return exactly 1.
double bif_interval_mean(const Tif& f, double Gamma, double c1, double c2);

struct ImportanceAssignment {
  std::vector<double> cumulative;  // c_0 = 0, ..., c_K = Gamma
  std::vector<double> scores;      // rho_1 ... rho_K, non-increasing
  double gamma_total = 0.0;        // Gamma
};

// Precomputed cumulative integrals of the BIF of a fixed large batch mass
// kappa. Any iteration's interval integral is two lookups:
//   int_{c1}^{c2} f_t = F_kappa(c2 + kappa - Gamma_t) - F_kappa(c1 + kappa - Gamma_t).
// The plateau part of F_kappa is analytic, so only the tail is tabulated.
class FastTable {
 public:
  // resolution = number of knots across the tail. Step tifs snap their
  // breakpoints onto the knot grid (and are then exact); tabulated tifs use
  // their own sample grid (also exact); beta tifs interpolate.
  FastTable(const Tif& f, double kappa, int resolution);

  static int default_resolution(const Tif& f);

  double kappa() const { return kappa_; }
  double gamma() const { return gamma_; }
  bool constant_one() const { return constant_one_; }

  double cumulative(double x) const;  // F_kappa(x), x in [0, kappa]
  double interval_integral(double c1, double c2, double Gamma) const;
  double interval_mean(double c1, double c2, double Gamma) const;

 private:
  double tail_cum(double u) const;  // cumulative tail integral at u in [0, gamma]

  double kappa_ = 0.0;
  double gamma_ = 0.0;
  bool step_kind_ = false;
  bool constant_one_ = false;
  std::vector<double> xs_;  // knots over [0, gamma]
  std::vector<double> F_;   // cumulative tail integral at knots
  std::vector<double> fv_;  // f values at knots (smooth kinds)
};

// Average importance scores of Alg.-style rank intervals: c_k are cumulative
// clipping thresholds in rank order, rho_k the mean BIF over the k-th slot.
ImportanceAssignment importance_scores(const Tif& f, std::span<const double> thresholds);
ImportanceAssignment importance_scores(const Tif& f, std::span<const double> thresholds,
                                       const FastTable& table);

}  // namespace idp
