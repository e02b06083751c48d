#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "data.hpp"
#include "errors.hpp"
#include "optimizer.hpp"

using namespace idp;

namespace {

double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

BoundMechanism hand_bound(double sigma, double eta, double b) {
  BoundMechanism bound;
  bound.sigma = sigma;
  bound.eta = eta;
  bound.b = b;
  bound.by_owner[0] = {0, 1.0, 1.0};
  return bound;
}

}  // namespace

TEST_CASE("clipping keeps direction and caps the norm") {
  const std::vector<double> v{6.0, 8.0};
  CHECK(clip(v, 5.0) == std::vector<double>{3.0, 4.0});
  const std::vector<double> small{2.0, 2.0};
  CHECK(clip(small, 5.0) == small);
  const std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK(clip(zero, 1.0) == zero);
  CHECK_THROWS_AS(clip(std::vector<double>{std::nan("")}, 1.0), DomainError);
  CHECK_THROWS_AS(clip(v, 0.0), DomainError);
}

TEST_CASE("idp step: single clipped datum moves theta by eta/b") {
  // sigma = 0, one datum with raw gradient 4 clipped to 1, b = 1, eta = 1
  Model m;
  m.spec = ModelSpec{Arch::logistic, 1, 2, 0};
  m.flat = {0.0, 0.0};
  GradientBatch batch;
  PerDatum d;
  d.index = 0;
  d.owner = 0;
  d.loss = 1.0;
  d.clip_threshold = 1.0;
  d.clipped_grad = clip(std::vector<double>{4.0, 0.0}, 1.0);
  batch.per_datum.push_back(d);
  batch.gamma_total = 1.0;
  batch.rank_of = {0};
  Rng noise(1);
  const NoisyUpdate u = idp_sgd_step(m, batch, hand_bound(0.0, 1.0, 1.0), noise);
  CHECK(u.new_theta[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(u.new_theta[1] == 0.0);
  CHECK(u.weighted_sum[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("empty batches skip the update and draw no noise") {
  Model m;
  m.spec = ModelSpec{Arch::logistic, 1, 2, 0};
  m.flat = {0.3, -0.7};
  GradientBatch empty;
  Rng noise(5);
  const std::uint64_t before = Rng(5).next_u64();
  const NoisyUpdate u = idp_sgd_step(m, empty, hand_bound(2.0, 1.0, 10.0), noise);
  CHECK(u.skipped);
  CHECK(u.new_theta == m.flat);
  CHECK(u.noise.empty());
  CHECK(noise.next_u64() == before);  // stream untouched
  CHECK(u.update() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("opposite equal-norm gradients cancel") {
  Model m;
  m.spec = ModelSpec{Arch::logistic, 1, 2, 0};
  m.flat = {0.0, 0.0};
  GradientBatch batch;
  for (double sign : {1.0, -1.0}) {
    PerDatum d;
    d.index = sign > 0 ? 0 : 1;
    d.owner = 0;
    d.loss = 0.5;
    d.clip_threshold = 2.0;
    d.clipped_grad = {sign * 1.5, 0.0};
    batch.per_datum.push_back(d);
    batch.gamma_total += 2.0;
  }
  batch.rank_of = {0, 1};
  Rng noise(2);
  const NoisyUpdate u = idp_sgd_step(m, batch, hand_bound(0.0, 1.0, 2.0), noise);
  CHECK(u.new_theta == std::vector<double>{0.0, 0.0});
}

TEST_CASE("ino step reproduces the hand-integrated ramp example") {
  // three 1-parameter data, losses (3,2,1), C=1, gradients (1,1,1),
  // linear tif gamma=2, b=3, eta=1, sigma=0 -> G_bar=2.0, theta=-2/3
  Model m;
  m.spec = ModelSpec{Arch::logistic, 1, 2, 0};
  m.flat = {0.0, 0.0};
  GradientBatch batch;
  for (int i = 0; i < 3; ++i) {
    PerDatum d;
    d.index = i;
    d.owner = 0;
    d.loss = 3.0 - i;
    d.clip_threshold = 1.0;
    d.clipped_grad = {1.0, 0.0};
    batch.per_datum.push_back(d);
    batch.gamma_total += 1.0;
  }
  batch.rank_of = {0, 1, 2};
  const Tif ramp = Tif::beta(1.0, 1.0, 2.0);
  const FastTable table(ramp, 50.0, FastTable::default_resolution(ramp));
  Rng noise(3);
  const NoisyUpdate u =
      ino_sgd_step(m, batch, hand_bound(0.0, 1.0, 3.0), ramp, table, noise);
  CHECK(u.weighted_sum[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(u.new_theta[0] == doctest::Approx(-2.0 / 3.0).epsilon(1e-9));

  // single-datum batch: rho_1 is the mean of the tail's top-C slice
  GradientBatch single;
  single.per_datum = {batch.per_datum[0]};
  single.gamma_total = 1.0;
  single.rank_of = {0};
  Rng noise2(4);
  const NoisyUpdate u1 =
      ino_sgd_step(m, single, hand_bound(0.0, 1.0, 1.0), ramp, table, noise2);
  CHECK(u1.weighted_sum[0] == doctest::Approx(ramp.integral(0.0, 1.0)).epsilon(1e-9));
}

TEST_CASE("constant tif makes ino and idp steps bit-identical") {
  Model m;
  m.spec = ModelSpec{Arch::logistic, 2, 2, 0};
  m.flat = {0.1, -0.2, 0.05};
  GradientBatch batch;
  Rng grads(17);
  for (int i = 0; i < 12; ++i) {
    PerDatum d;
    d.index = i;
    d.owner = 0;
    d.loss = grads.uniform();
    d.clip_threshold = 1.0;
    d.clipped_grad = clip(std::vector<double>{grads.normal(), grads.normal(), grads.normal()}, 1.0);
    batch.per_datum.push_back(d);
    batch.gamma_total += 1.0;
  }
  batch.rank_of.resize(12);
  std::iota(batch.rank_of.begin(), batch.rank_of.end(), 0);
  std::stable_sort(batch.rank_of.begin(), batch.rank_of.end(), [&](int a, int b) {
    return batch.per_datum[a].loss > batch.per_datum[b].loss;
  });
  const Tif ones = Tif::step({1.0}, 1.0);
  const FastTable table(ones, 100.0, 16);
  Rng na = Rng::substream(5, "noise", 1);
  Rng nb = Rng::substream(5, "noise", 1);
  const NoisyUpdate ua = idp_sgd_step(m, batch, hand_bound(1.5, 0.5, 12.0), na);
  const NoisyUpdate ub = ino_sgd_step(m, batch, hand_bound(1.5, 0.5, 12.0), ones, table, nb);
  CHECK(ua.new_theta == ub.new_theta);
  CHECK(ua.weighted_sum == ub.weighted_sum);
  CHECK(ua.noise == ub.noise);
}

TEST_CASE("weighted sum norm is bounded by the weighted threshold mass") {
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.uniform_int(1, 30);
    GradientBatch batch;
    for (int i = 0; i < n; ++i) {
      PerDatum d;
      d.index = i;
      d.owner = 0;
      d.loss = rng.uniform();
      d.clip_threshold = rng.uniform_in(0.1, 2.0);
      std::vector<double> g{rng.normal(), rng.normal(), rng.normal()};
      const double target = rng.uniform_in(0.0, 2.0 * d.clip_threshold);
      const double nrm = norm2(g);
      for (double& x : g) x *= target / std::max(nrm, 1e-12);
      d.clipped_grad = clip(g, d.clip_threshold);
      batch.per_datum.push_back(d);
      batch.gamma_total += d.clip_threshold;
    }
    batch.rank_of.resize(n);
    std::iota(batch.rank_of.begin(), batch.rank_of.end(), 0);
    std::stable_sort(batch.rank_of.begin(), batch.rank_of.end(), [&](int a, int b) {
      return batch.per_datum[a].loss > batch.per_datum[b].loss;
    });
    Model m;
    m.spec = ModelSpec{Arch::logistic, 2, 2, 0};
    m.flat = {0.0, 0.0, 0.0};
    const Tif f = Tif::beta(1.3, 0.9, rng.uniform_in(0.5, 5.0));
    const FastTable table(f, 100.0, FastTable::default_resolution(f));
    Rng noise(trial);
    const NoisyUpdate u = ino_sgd_step(m, batch, hand_bound(0.0, 1.0, n), f, table, noise);
    const auto scores = importance_scores(f, batch.thresholds_in_rank_order(), table);
    double bound = 0.0;
    for (std::size_t k = 0; k < scores.scores.size(); ++k) {
      bound += scores.scores[k] * batch.per_datum[batch.rank_of[k]].clip_threshold;
    }
    CHECK(norm2(u.weighted_sum) <= bound + 1e-12);
    CHECK(bound <= batch.gamma_total + 1e-12);
  }
}

TEST_CASE("ino_sgm_release degenerate forms") {
  Rng rng(7);
  const std::vector<std::vector<double>> values{{1.0, 0.0}, {0.5, 0.5}, {0.0, -1.0}};
  const std::vector<double> bounds{2.0, 2.0, 2.0};
  const std::vector<double> scores{0.3, 0.9, 0.1};

  const Tif ones = Tif::step({1.0}, 1.0);
  const auto plain = ino_sgm_release(values, bounds, scores, ones, 0.0, rng);
  CHECK(plain[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(plain[1] == doctest::Approx(-0.5).epsilon(1e-12));

  const Tif zeros = Tif::step({0.0}, 6.0);  // gamma = 6 = sum of bounds
  const auto nothing = ino_sgm_release(values, bounds, scores, zeros, 0.0, rng);
  CHECK(nothing[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(nothing[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ino_sgm_release reproduces the three-value hand computation") {
  Rng rng(8);
  const std::vector<std::vector<double>> values{{1.0}, {1.0}, {1.0}};
  const std::vector<double> bounds{1.0, 1.0, 1.0};
  const std::vector<double> scores{3.0, 2.0, 1.0};
  const Tif ramp = Tif::beta(1.0, 1.0, 2.0);
  const auto out = ino_sgm_release(values, bounds, scores, ramp, 0.0, rng);
  CHECK(out[0] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("ino_sgm_release rejects norm-bound violations") {
  Rng rng(9);
  const std::vector<std::vector<double>> values{{3.0, 0.0}};
  CHECK_THROWS_AS(
      ino_sgm_release(values, std::vector<double>{2.0}, std::vector<double>{1.0},
                      Tif::beta(1, 1, 1), 0.0, rng),
      DomainError);
}
