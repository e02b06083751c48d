#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "errors.hpp"
#include "importance.hpp"
#include "rng.hpp"

using namespace idp;

namespace {

// adaptive Simpson oracle, independent of the closed-form integrals the
// implementation uses
double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                   double fb, double fm, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, fm, flm, left, tol / 2.0, depth - 1) +
         simpson_rec(f, m, b, fm, fb, frm, right, tol / 2.0, depth - 1);
}

double quad(const std::function<double(double)>& f, double a, double b, double tol = 1e-10) {
  if (b <= a) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fb, fm, whole, tol, 40);
}

Tif linear_ramp(double gamma) { return Tif::beta(1.0, 1.0, gamma); }

}  // namespace

TEST_CASE("tif_eval anchors") {
  const Tif ramp = linear_ramp(4.0);
  CHECK(ramp.eval(1.0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(ramp.eval(0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ramp.eval(4.0) == doctest::Approx(0.0).epsilon(1e-12));

  const Tif quad_tif = Tif::beta(2.0, 1.0, 1.0);  // I_{1-c}(2,1) = (1-c)^2
  CHECK(quad_tif.eval(0.5) == doctest::Approx(0.25).epsilon(1e-10));

  const Tif st = Tif::step({0.8, 0.3}, 1.5);
  CHECK(st.eval(0.0) == 0.8);
  CHECK(st.eval(1.49) == 0.8);
  CHECK(st.eval(1.5) == 0.3);
  CHECK(st.eval(3.0) == 0.3);

  const Tif tab = Tif::tabulated({1.0, 0.5, 0.0}, 2.0);
  CHECK(tab.eval(0.5) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(tab.eval(0.0) == 1.0);

  CHECK_THROWS_AS(ramp.eval(-0.1), DomainError);
  CHECK_THROWS_AS(ramp.eval(4.1), DomainError);
}

TEST_CASE("tif constructors enforce the invariants") {
  CHECK_THROWS_AS(Tif::beta(0.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(Tif::step({0.3, 0.8}, 1.0), DomainError);   // increasing
  CHECK_THROWS_AS(Tif::step({1.2}, 1.0), DomainError);        // outside [0,1]
  CHECK_THROWS_AS(Tif::tabulated({0.5}, 1.0), DomainError);   // too short
  CHECK_THROWS_AS(Tif::tabulated({0.1, 0.9}, 1.0), DomainError);
}

TEST_CASE("tif_eval is non-increasing on a dense grid for every kind") {
  Rng rng(42);
  const std::vector<Tif> tifs = {Tif::beta(2.5, 1.3, 3.0), Tif::beta(0.6, 0.6, 1.0),
                                 Tif::step({1.0, 0.7, 0.2, 0.0}, 0.5),
                                 Tif::tabulated({1.0, 0.9, 0.4, 0.4, 0.1}, 2.0)};
  for (const Tif& f : tifs) {
    double prev = f.eval(0.0);
    for (int i = 1; i <= 500; ++i) {
      const double c = f.gamma() * i / 500.0;
      const double v = f.eval(c);
      CHECK(v <= prev + 1e-12);
      CHECK(v >= -1e-12);
      CHECK(v <= 1.0 + 1e-12);
      prev = v;
    }
  }
}

TEST_CASE("exact tif integrals match adaptive quadrature") {
  const std::vector<Tif> tifs = {Tif::beta(1.0, 1.0, 4.0), Tif::beta(2.0, 3.0, 2.5),
                                 Tif::beta(0.7, 1.9, 1.0),
                                 Tif::step({0.9, 0.5, 0.1}, 0.8),
                                 Tif::tabulated({1.0, 0.8, 0.3, 0.0}, 3.0)};
  Rng rng(7);
  for (const Tif& f : tifs) {
    for (int trial = 0; trial < 50; ++trial) {
      double c1 = rng.uniform_in(0.0, f.gamma());
      double c2 = rng.uniform_in(0.0, f.gamma());
      if (c1 > c2) std::swap(c1, c2);
      const double oracle = quad([&](double c) { return f.eval(c); }, c1, c2);
      CHECK(f.integral(c1, c2) == doctest::Approx(oracle).epsilon(1e-7));
    }
  }
}

TEST_CASE("bif piecewise definition") {
  const Tif ramp = linear_ramp(4.0);
  CHECK(bif_eval(ramp, 10.0, 8.0) == doctest::Approx(0.5).epsilon(1e-12));  // tail branch
  CHECK(bif_eval(ramp, 2.0, 0.0) == doctest::Approx(0.5).epsilon(1e-12));   // truncated branch
  CHECK(bif_eval(ramp, 10.0, 0.0) == 1.0);                                   // plateau
  CHECK(bif_eval(ramp, 10.0, 6.0) == 1.0);                                   // plateau edge
  CHECK_THROWS_AS(bif_eval(ramp, 10.0, 10.5), DomainError);
}

TEST_CASE("bif shift identity in the plateau-free region") {
  Rng rng(99);
  const std::vector<Tif> tifs = {Tif::beta(1.5, 2.0, 3.0), Tif::step({0.9, 0.4}, 1.0),
                                 Tif::tabulated({1.0, 0.6, 0.2}, 2.0)};
  for (const Tif& f : tifs) {
    for (int trial = 0; trial < 100; ++trial) {
      const double gamma = f.gamma();
      const double big_gamma = rng.uniform_in(gamma, gamma + 10.0);
      const double c = rng.uniform_in(std::max(0.0, big_gamma - gamma), big_gamma);
      const double shift = rng.uniform_in(0.0, 5.0);
      CHECK(bif_eval(f, big_gamma, c) ==
            doctest::Approx(bif_eval(f, big_gamma + shift, c + shift)).epsilon(1e-9));
    }
  }
}

TEST_CASE("importance scores of the unit-threshold ramp batch") {
  const Tif ramp = linear_ramp(4.0);
  const std::vector<double> thresholds(10, 1.0);
  const ImportanceAssignment a = importance_scores(ramp, thresholds);
  const std::vector<double> expected{1, 1, 1, 1, 1, 1, 0.875, 0.625, 0.375, 0.125};
  REQUIRE(a.scores.size() == expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) {
    if (expected[k] == 1.0) {
      CHECK(a.scores[k] == 1.0);  // plateau slots are exact
    } else {
      CHECK(a.scores[k] == doctest::Approx(expected[k]).epsilon(1e-12));
    }
  }
  CHECK(a.gamma_total == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("constant tif scores are exactly one") {
  const Tif ones = Tif::step({1.0}, 2.0);
  const std::vector<double> thresholds{0.3, 1.7, 0.2, 2.4};
  const ImportanceAssignment a = importance_scores(ones, thresholds);
  for (double s : a.scores) CHECK(s == 1.0);
}

TEST_CASE("all-zero tail with gamma covering the batch zeroes every score") {
  const Tif zeros = Tif::step({0.0}, 50.0);
  const std::vector<double> thresholds{1.0, 2.0, 3.0};
  const ImportanceAssignment a = importance_scores(zeros, thresholds);
  for (double s : a.scores) CHECK(s == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("empty batch yields an empty assignment") {
  const ImportanceAssignment a = importance_scores(linear_ramp(2.0), std::vector<double>{});
  CHECK(a.scores.empty());
  CHECK(a.gamma_total == 0.0);
}

TEST_CASE("scores are non-increasing for random tifs and thresholds") {
  Rng rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    Tif f = [&]() -> Tif {
      switch (rng.uniform_int(0, 2)) {
        case 0:
          return Tif::beta(rng.uniform_in(0.4, 4.0), rng.uniform_in(0.4, 4.0),
                           rng.uniform_in(0.5, 10.0));
        case 1: {
          std::vector<double> lv(rng.uniform_int(1, 5));
          for (double& v : lv) v = rng.uniform();
          std::sort(lv.rbegin(), lv.rend());
          return Tif::step(std::move(lv), rng.uniform_in(0.3, 3.0));
        }
        default: {
          std::vector<double> sm(rng.uniform_int(2, 7));
          for (double& v : sm) v = rng.uniform();
          std::sort(sm.rbegin(), sm.rend());
          return Tif::tabulated(std::move(sm), rng.uniform_in(0.5, 6.0));
        }
      }
    }();
    std::vector<double> thresholds(rng.uniform_int(1, 30));
    for (double& c : thresholds) c = rng.uniform_in(0.05, 3.0);
    const ImportanceAssignment a = importance_scores(f, thresholds);
    for (std::size_t k = 1; k < a.scores.size(); ++k) {
      CHECK(a.scores[k] <= a.scores[k - 1] + 1e-12);
    }
    for (double s : a.scores) {
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
    // rho_k (c_k - c_{k-1}) equals the BIF integral over the slot
    for (std::size_t k = 0; k < a.scores.size(); ++k) {
      const double len = a.cumulative[k + 1] - a.cumulative[k];
      const double direct = quad(
          [&](double c) { return bif_eval(f, a.gamma_total, c); }, a.cumulative[k],
          a.cumulative[k + 1], 1e-9);
      CHECK(a.scores[k] * len == doctest::Approx(direct).epsilon(5e-6));
    }
    if (trial >= 20) break;  // the slot-integral oracle is the slow part
  }
}

TEST_CASE("fast table cumulative of the constant tif is the identity") {
  const Tif ones = Tif::step({1.0}, 2.0);
  const FastTable table(ones, 100.0, 64);
  for (double x : {0.0, 13.7, 50.0, 98.0, 100.0}) {
    CHECK(table.cumulative(x) == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("fast table ramp integral over the tail window") {
  const Tif ramp = linear_ramp(4.0);
  const FastTable table(ramp, 100.0, FastTable::default_resolution(ramp));
  CHECK(table.interval_integral(96.0, 100.0, 100.0) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("fast table lookups match adaptive quadrature within 1e-4") {
  Rng rng(5150);
  const std::vector<Tif> tifs = {Tif::beta(2.0, 3.0, 4.0), Tif::beta(1.0, 1.0, 2.0),
                                 Tif::step({0.8, 0.5, 0.2, 0.0}, 1.1),
                                 Tif::tabulated({1.0, 0.7, 0.45, 0.2, 0.0}, 3.0)};
  for (const Tif& f : tifs) {
    const double kappa = 50.0;
    const FastTable table(f, kappa, FastTable::default_resolution(f));
    for (int trial = 0; trial < 250; ++trial) {
      const double Gamma = rng.uniform_in(f.gamma() * 0.5, kappa);
      double c1 = rng.uniform_in(0.0, Gamma);
      double c2 = rng.uniform_in(0.0, Gamma);
      if (c1 > c2) std::swap(c1, c2);
      const double oracle =
          quad([&](double c) { return bif_eval(f, Gamma, c); }, c1, c2, 1e-9);
      CHECK(std::fabs(table.interval_integral(c1, c2, Gamma) - oracle) < 1e-4);
    }
  }
}

TEST_CASE("fast table refuses batches beyond its coverage") {
  const Tif ramp = linear_ramp(2.0);
  const FastTable table(ramp, 10.0, 33);
  CHECK_THROWS_AS(table.interval_integral(0.0, 1.0, 11.0), DomainError);
  CHECK_THROWS_AS(table.interval_mean(0.0, 1.0, 12.0), DomainError);
}

TEST_CASE("table-backed scores agree with direct scores") {
  Rng rng(808);
  const Tif f = Tif::beta(1.7, 2.4, 3.0);
  const FastTable table(f, 200.0, FastTable::default_resolution(f));
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> thresholds(rng.uniform_int(1, 40));
    for (double& c : thresholds) c = rng.uniform_in(0.05, 3.0);
    const auto direct = importance_scores(f, thresholds);
    const auto tabled = importance_scores(f, thresholds, table);
    for (std::size_t k = 0; k < direct.scores.size(); ++k) {
      CHECK(tabled.scores[k] == doctest::Approx(direct.scores[k]).epsilon(1e-5));
    }
  }
}

TEST_CASE("adding one datum changes upstream masses by at most its threshold") {
  // numerical restatement of the telescoping argument behind the
  // sensitivity bound, on exact integrals
  Rng rng(31337);
  for (int trial = 0; trial < 100; ++trial) {
    const Tif f = Tif::beta(rng.uniform_in(0.5, 3.0), rng.uniform_in(0.5, 3.0),
                            rng.uniform_in(0.5, 8.0));
    const int n = rng.uniform_int(1, 20);
    std::vector<double> thresholds(n);
    for (double& c : thresholds) c = rng.uniform_in(0.1, 3.0);
    const double c_new = rng.uniform_in(0.1, 3.0);
    const int rank = rng.uniform_int(0, n);
    std::vector<double> extended = thresholds;
    extended.insert(extended.begin() + rank, c_new);

    const auto before = importance_scores(f, thresholds);
    const auto after = importance_scores(f, extended);
    double mass = after.scores[rank] * c_new;
    for (int k = 0; k < rank; ++k) {
      mass += (after.scores[k] - before.scores[k]) * (before.cumulative[k + 1] - before.cumulative[k]);
    }
    CHECK(mass <= c_new + 1e-6);
    for (int k = rank; k < n; ++k) {
      CHECK(after.scores[k + 1] == doctest::Approx(before.scores[k]).epsilon(1e-9));
    }
  }
}
