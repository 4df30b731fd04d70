#include <cmath>
#include <random>
#include <sstream>

#include "cdan/error.hpp"
#include "cdan/conditioning.hpp"
#include "doctest.h"
#include "fd_oracle.hpp"

using namespace cdan;
using cdan::testing::random_vector;

namespace {

double dot_span(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("multilinear map is the flattened outer product") {
  const std::vector<double> f{1, 2}, g{3, 4};
  CHECK(multilinear_map(f, g) == Tensor::row({3, 4, 6, 8}));
}

TEST_CASE("one-hot g places f in its block") {
  const std::vector<double> f{0.5, -1.5, 2.0};
  for (std::size_t c = 0; c < 4; ++c) {
    std::vector<double> g(4, 0.0);
    g[c] = 1.0;
    const Tensor t = multilinear_map(f, g);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j) CHECK(t[i * 4 + j] == (j == c ? f[i] : 0.0));
  }
}

TEST_CASE("inner products of multilinear maps factorize") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = random_vector(rng, 7), f2 = random_vector(rng, 7);
    const auto g = random_vector(rng, 5), g2 = random_vector(rng, 5);
    const double lhs = dot_span(multilinear_map(f, g).values(), multilinear_map(f2, g2).values());
    CHECK(std::abs(lhs - dot_span(f, f2) * dot_span(g, g2)) <= 1e-10);
  }
}

TEST_CASE("batched maps agree with the per-row maps") {
  std::mt19937_64 rng(2);
  const Tensor F({6, 4}, random_vector(rng, 24)), G({6, 3}, random_vector(rng, 18));
  const RandomProjection proj = sample_projection(32, 4, 3, Sampler::Gaussian, 5);
  Tape t;
  const Tensor m = multilinear_map(t.constant(F), t.constant(G)).value();
  const Tensor r = randomized_multilinear_map(t.constant(F), t.constant(G), proj).value();
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(m.slice_rows(i, i + 1) == multilinear_map(F.row_span(i), G.row_span(i)));
    const Tensor ri = randomized_multilinear_map(F.row_span(i), G.row_span(i), proj);
    for (std::size_t k = 0; k < 32; ++k) CHECK(r(i, k) == doctest::Approx(ri[k]).epsilon(1e-14));
  }
}

TEST_CASE("sampled projections") {
  SUBCASE("uniform entries stay within the unit-variance half width") {
    const RandomProjection p = sample_projection(500, 20, 10, Sampler::Uniform, 3);
    const double h = std::sqrt(3.0);
    for (double v : p.R_f.values()) CHECK(std::abs(v) <= h);
    for (double v : p.R_g.values()) CHECK(std::abs(v) <= h);
  }
  SUBCASE("same seed gives the same matrices") {
    const RandomProjection a = sample_projection(16, 4, 3, Sampler::Gaussian, 9);
    const RandomProjection b = sample_projection(16, 4, 3, Sampler::Gaussian, 9);
    CHECK(a.R_f == b.R_f);
    CHECK(a.R_g == b.R_g);
    const RandomProjection c = sample_projection(16, 4, 3, Sampler::Gaussian, 10);
    CHECK_FALSE(a.R_f == c.R_f);
  }
  SUBCASE("moments of 1e5 entries") {
    for (Sampler s : {Sampler::Gaussian, Sampler::Uniform}) {
      const RandomProjection p = sample_projection(1000, 100, 1, s, 4);
      const auto& v = p.R_f.values();
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      var /= static_cast<double>(v.size());
      CHECK(std::abs(mean) < 0.02);
      CHECK(std::abs(var - 1.0) < 0.02);
    }
  }
  SUBCASE("unknown sampler name") { CHECK_THROWS_AS(parse_sampler("cauchy"), UsageError); }
  SUBCASE("zero dimension") { CHECK_THROWS(sample_projection(0, 4, 3, Sampler::Gaussian, 1)); }
}

TEST_CASE("randomized map examples") {
  const RandomProjection p = sample_projection(64, 3, 2, Sampler::Gaussian, 11);
  const std::vector<double> zero(3, 0.0), g{0.3, 0.7};
  const Tensor z = randomized_multilinear_map(zero, g, p);
  for (double v : z.values()) CHECK(v == 0.0);

  const std::vector<double> f{0.5, -1.0, 2.0}, f2{1.0, -2.0, 4.0};
  const Tensor a = randomized_multilinear_map(f, g, p), b = randomized_multilinear_map(f2, g, p);
  for (std::size_t k = 0; k < 64; ++k) CHECK(b[k] == doctest::Approx(2.0 * a[k]).epsilon(1e-14));

  // Direct evaluation of (1/sqrt d)(R_f f) .* (R_g g).
  for (std::size_t k = 0; k < 64; ++k) {
    double rf = 0.0, rg = 0.0;
    for (std::size_t i = 0; i < 3; ++i) rf += p.R_f(k, i) * f[i];
    for (std::size_t j = 0; j < 2; ++j) rg += p.R_g(k, j) * g[j];
    CHECK(a[k] == doctest::Approx(rf * rg / 8.0).epsilon(1e-13));
  }
  const std::vector<double> wrong(4, 1.0);
  CHECK_THROWS_AS(randomized_multilinear_map(wrong, g, p), ShapeError);
}

TEST_CASE("gradients of both maps against finite differences") {
  std::mt19937_64 rng(6);
  const Tensor F({4, 3}, random_vector(rng, 12)), G({4, 2}, random_vector(rng, 8));
  const Tensor W({4, 20}, random_vector(rng, 80));
  const RandomProjection proj = sample_projection(20, 3, 2, Sampler::Uniform, 8);
  for (bool randomized : {false, true}) {
    CAPTURE(randomized);
    // Multilinear output is 4x6: use the first 24 weights.
    const Tensor ww = randomized ? W : Tensor({4, 6}, std::vector<double>(W.values().begin(), W.values().begin() + 24));
    auto value = [&](const Tensor& f, const Tensor& g) {
      Tape t;
      Var y = randomized ? randomized_multilinear_map(t.constant(f), t.constant(g), proj)
                         : multilinear_map(t.constant(f), t.constant(g));
      return sum(mul(y, t.constant(ww))).value().item();
    };
    Tape t;
    Var vf = t.variable(F), vg = t.variable(G);
    Var y = randomized ? randomized_multilinear_map(vf, vg, proj) : multilinear_map(vf, vg);
    t.backward(sum(mul(y, t.constant(ww))));
    const auto nf = cdan::testing::central_difference(
        [&](const std::vector<double>& v) { return value(Tensor(F.shape(), v), G); }, F.values());
    const auto ng = cdan::testing::central_difference(
        [&](const std::vector<double>& v) { return value(F, Tensor(G.shape(), v)); }, G.values());
    CHECK(cdan::testing::max_relative_error(vf.grad().values(), nf) < 1e-6);
    CHECK(cdan::testing::max_relative_error(vg.grad().values(), ng) < 1e-6);
  }
}

TEST_CASE("strategy selection threshold") {
  CHECK(select_strategy(64, 10) == StrategyTag::Multilinear);
  CHECK(select_strategy(256, 31) == StrategyTag::RandomizedMultilinear);
  CHECK(select_strategy(4096, 1) == StrategyTag::Multilinear);
  CHECK(select_strategy(4097, 1) == StrategyTag::RandomizedMultilinear);
  CHECK(select_strategy(2, 3, 1) == StrategyTag::RandomizedMultilinear);
}

TEST_CASE("condition delegates per tag") {
  Tape t;
  Var f = t.constant(Tensor::row({1, 2}));
  Var g = t.constant(Tensor::row({3}));
  ConditioningStrategy s;
  s.tag = StrategyTag::Concat;
  CHECK(condition(f, g, s, nullptr).value() == Tensor::row({1, 2, 3}));
  s.tag = StrategyTag::FeatureOnly;
  CHECK(condition(f, g, s, nullptr).value() == Tensor::row({1, 2}));
  s.tag = StrategyTag::PredictionOnly;
  CHECK(condition(f, g, s, nullptr).value() == Tensor::row({3}));
  s.tag = StrategyTag::Multilinear;
  CHECK(condition(f, g, s, nullptr).value() == multilinear_map(f, g).value());

  s.tag = StrategyTag::RandomizedMultilinear;
  s.dim = 16;
  CHECK_THROWS_AS(condition(f, g, s, nullptr), UsageError);
  const RandomProjection p = sample_projection(16, 2, 1, Sampler::Gaussian, 1);
  CHECK(condition(f, g, s, &p).value() == randomized_multilinear_map(f, g, p).value());
  s.tag = StrategyTag::Multilinear;
  CHECK_THROWS_AS(condition(f, g, s, &p), UsageError);
}

TEST_CASE("conditioned width is a function of strategy and dims") {
  ConditioningStrategy s;
  s.dim = 100;
  const std::vector<std::pair<StrategyTag, std::size_t>> expected = {
      {StrategyTag::FeatureOnly, 8},
      {StrategyTag::PredictionOnly, 3},
      {StrategyTag::Concat, 11},
      {StrategyTag::Multilinear, 24},
      {StrategyTag::RandomizedMultilinear, 100}};
  for (const auto& [tag, w] : expected) {
    s.tag = tag;
    CHECK(conditioned_width(s, 8, 3) == w);
    const RandomProjection p = sample_projection(100, 8, 3, Sampler::Gaussian, 2);
    Tape t;
    Var f = t.constant(Tensor({5, 8}, 0.5)), g = t.constant(Tensor({5, 3}, 0.25));
    CHECK(condition(f, g, s, tag == StrategyTag::RandomizedMultilinear ? &p : nullptr).shape() == Shape{5, w});
  }
}

TEST_CASE("bilinearity of both maps") {
  std::mt19937_64 rng(8);
  const RandomProjection p = sample_projection(40, 5, 3, Sampler::Gaussian, 3);
  const auto f1 = random_vector(rng, 5), f2 = random_vector(rng, 5), g = random_vector(rng, 3);
  const auto g1 = random_vector(rng, 3), g2 = random_vector(rng, 3), f = random_vector(rng, 5);
  const double a = 0.7, b = -1.3;
  auto lin = [&](const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = a * x[i] + b * y[i];
    return z;
  };
  for (bool rnd : {false, true}) {
    auto T = [&](const std::vector<double>& u, const std::vector<double>& v) {
      return rnd ? randomized_multilinear_map(u, v, p) : multilinear_map(u, v);
    };
    const Tensor lf = T(lin(f1, f2), g), l1 = T(f1, g), l2 = T(f2, g);
    const Tensor lg = T(f, lin(g1, g2)), m1 = T(f, g1), m2 = T(f, g2);
    for (std::size_t k = 0; k < lf.size(); ++k) CHECK(std::abs(lf[k] - (a * l1[k] + b * l2[k])) <= 1e-12);
    for (std::size_t k = 0; k < lg.size(); ++k) CHECK(std::abs(lg[k] - (a * m1[k] + b * m2[k])) <= 1e-12);
  }
}

TEST_CASE("mean of the multilinear map over a one-hot sample gives class means") {
  std::mt19937_64 rng(10);
  const std::size_t n = 200, d = 3, C = 4;
  std::vector<std::vector<double>> x(n);
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = random_vector(rng, d, -5, 5);
    y[i] = rng() % C;
  }
  std::vector<double> mean(d * C, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> g(C, 0.0);
    g[y[i]] = 1.0;
    const Tensor t = multilinear_map(x[i], g);
    for (std::size_t k = 0; k < d * C; ++k) mean[k] += t[k];
  }
  for (double& v : mean) v /= static_cast<double>(n);
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t nc = 0;
    std::vector<double> cm(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (y[i] == c) {
        ++nc;
        for (std::size_t k = 0; k < d; ++k) cm[k] += x[i][k];
      }
    REQUIRE(nc > 0);
    for (std::size_t k = 0; k < d; ++k) {
      const double expected = (static_cast<double>(nc) / n) * (cm[k] / static_cast<double>(nc));
      CHECK(std::abs(mean[k * C + c] - expected) <= 1e-12);
    }
  }
}

TEST_CASE("normalize_f scales rows to unit norm before the randomized map") {
  Tape t;
  Var f = t.constant(Tensor::from_rows({{3, 4}, {0, 2}}));
  const Tensor n = normalize_rows(f).value();
  CHECK(n == Tensor::from_rows({{0.6, 0.8}, {0, 1}}));
  ConditioningStrategy s{StrategyTag::RandomizedMultilinear, 8, Sampler::Gaussian, true};
  const RandomProjection p = sample_projection(8, 2, 1, Sampler::Gaussian, 4);
  Var g = t.constant(Tensor::from_rows({{1}, {1}}));
  CHECK(condition(f, g, s, &p).value() == randomized_multilinear_map(t.constant(n), g, p).value());
}

TEST_CASE("projection text round trip") {
  const RandomProjection p = sample_projection(6, 3, 2, Sampler::Uniform, 77);
  std::stringstream ss;
  save_projection(p, ss);
  const RandomProjection q = load_projection(ss);
  CHECK(q.R_f == p.R_f);
  CHECK(q.R_g == p.R_g);
  CHECK(q.sampler == Sampler::Uniform);
  CHECK(q.seed == 77);
}
