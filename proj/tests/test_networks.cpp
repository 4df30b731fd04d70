#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cdan/error.hpp"
#include "cdan/networks.hpp"
#include "doctest.h"
#include "fd_oracle.hpp"

using namespace cdan;

namespace {

ModelBundle small_model(std::uint64_t seed = 7) {
  return init_model(MlpSpec{{2, 8, 6}, OutputHead::Linear}, MlpSpec{{6, 3}, OutputHead::Softmax},
                    MlpSpec{{18, 5, 5, 1}, OutputHead::Sigmoid}, 18, seed);
}

Tensor random_batch(std::mt19937_64& rng, std::size_t n, std::size_t d, double scale = 3.0) {
  return Tensor({n, d}, cdan::testing::random_vector(rng, n * d, -scale, scale));
}

}  // namespace

TEST_CASE("init is deterministic per seed") {
  ModelBundle a = small_model(3), b = small_model(3), c = small_model(4);
  auto pa = a.all_params(), pb = b.all_params(), pc = c.all_params();
  REQUIRE(pa.size() == pb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->value == pb[i]->value);
    CHECK(pa[i]->name == pb[i]->name);
    if (!(pa[i]->value == pc[i]->value)) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("biases start at zero and weights respect the Glorot bound") {
  ModelBundle m = small_model();
  for (Mlp* net : {&m.F, &m.G, &m.D}) {
    for (const auto& b : net->biases)
      for (double v : b.value.values()) CHECK(v == 0.0);
    for (const auto& w : net->weights) {
      const double a = std::sqrt(6.0 / static_cast<double>(w.value.rows() + w.value.cols()));
      for (double v : w.value.values()) CHECK(std::abs(v) <= a);
    }
  }
}

TEST_CASE("256x256 layer has variance near 2/(fan_in+fan_out)") {
  const Mlp net = init_mlp(MlpSpec{{256, 256}, OutputHead::Linear}, "L", 12);
  const auto& w = net.weights[0].value.values();
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size());
  const double expected = 2.0 / 512.0;
  CHECK(std::abs(var - expected) < 0.2 * expected);
}

TEST_CASE("inconsistent widths are configuration errors") {
  CHECK_THROWS_AS(init_model(MlpSpec{{2, 8, 6}}, MlpSpec{{5, 3}, OutputHead::Softmax},
                             MlpSpec{{18, 5, 1}, OutputHead::Sigmoid}, 18, 0),
                  ConfigError);
  CHECK_THROWS_AS(init_model(MlpSpec{{2, 8, 6}}, MlpSpec{{6, 3}, OutputHead::Softmax},
                             MlpSpec{{17, 5, 1}, OutputHead::Sigmoid}, 18, 0),
                  ConfigError);
  CHECK_THROWS_AS(init_model(MlpSpec{{2, 8, 6}}, MlpSpec{{6, 3}, OutputHead::Softmax},
                             MlpSpec{{18, 5, 2}, OutputHead::Sigmoid}, 18, 0),
                  ConfigError);
  CHECK_THROWS_AS(init_mlp(MlpSpec{{4}}, "x", 0), ConfigError);
  CHECK_THROWS_AS(init_mlp(MlpSpec{{4, 0, 2}}, "x", 0), ConfigError);
}

TEST_CASE("zero-weight G head gives the uniform prediction") {
  ModelBundle m = small_model();
  for (auto& w : m.G.weights) w.value = Tensor(w.value.shape(), 0.0);
  std::mt19937_64 rng(1);
  const Tensor p = eval_probs(m, random_batch(rng, 10, 2));
  for (double v : p.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("discriminator output stays inside (0, 1) on 1000 random inputs") {
  ModelBundle m = small_model();
  std::mt19937_64 rng(2);
  Tape t;
  const Tensor d = forward_D(t, m, t.constant(random_batch(rng, 1000, 18, 50.0))).value();
  CHECK(d.shape() == Shape{1000, 1});
  for (double v : d.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("prediction rows sit on the simplex") {
  ModelBundle m = small_model();
  std::mt19937_64 rng(3);
  Tape t;
  const ClassifierOutput out = forward_G(t, m, forward_F(t, m, t.constant(random_batch(rng, 200, 2, 20.0))));
  for (std::size_t r = 0; r < out.probs.value().rows(); ++r) {
    double s = 0.0;
    for (double v : out.probs.value().row_span(r)) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("batched forwards equal row-by-row evaluation") {
  ModelBundle m = small_model();
  std::mt19937_64 rng(4);
  const Tensor x = random_batch(rng, 16, 2);
  const Tensor h = random_batch(rng, 16, 18);
  Tape t;
  const Tensor f = forward_F(t, m, t.constant(x)).value();
  const Tensor g = forward_G(t, m, t.constant(f)).probs.value();
  const Tensor d = forward_D(t, m, t.constant(h)).value();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    Tape one;
    CHECK(forward_F(one, m, one.constant(x.slice_rows(r, r + 1))).value() == f.slice_rows(r, r + 1));
    CHECK(forward_G(one, m, one.constant(f.slice_rows(r, r + 1))).probs.value() == g.slice_rows(r, r + 1));
    CHECK(forward_D(one, m, one.constant(h.slice_rows(r, r + 1))).value() == d.slice_rows(r, r + 1));
  }
  CHECK(eval_features(m, x) == f);
  CHECK(eval_probs(m, x) == g);
}

TEST_CASE("forward rejects a wrong input width") {
  ModelBundle m = small_model();
  Tape t;
  CHECK_THROWS_AS(forward_F(t, m, t.constant(Tensor({4, 3}))), ShapeError);
  CHECK_THROWS_AS(forward_D(t, m, t.constant(Tensor({4, 6}))), ShapeError);
}

TEST_CASE("parameter gradients of the classifier match finite differences") {
  ModelBundle m = small_model(9);
  std::mt19937_64 rng(5);
  const Tensor x = random_batch(rng, 5, 2);
  const Tensor wts = random_batch(rng, 5, 3, 1.0);
  auto loss = [&](ModelBundle& mm, Tape& t) {
    Var p = forward_G(t, mm, forward_F(t, mm, t.constant(x))).probs;
    return sum(mul(p, t.constant(wts)));
  };
  Tape t;
  t.backward(loss(m, t));
  auto params = m.all_params();
  std::size_t checked = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->name.rfind("D.", 0) == 0) continue;
    CAPTURE(params[k]->name);
    auto f = [&](const std::vector<double>& v) {
      ModelBundle copy = m;
      copy.all_params()[k]->value = Tensor(params[k]->value.shape(), v);
      Tape tt;
      return loss(copy, tt).value().item();
    };
    CHECK(cdan::testing::max_relative_error(params[k]->grad.values(),
                                            cdan::testing::central_difference(f, params[k]->value.values())) < 1e-5);
    ++checked;
  }
  CHECK(checked == 6);
}

TEST_CASE("model text round trip is bit-exact") {
  ModelBundle m = small_model(21);
  // Values that do not survive a decimal round trip at default precision.
  m.F.weights[0].value[0] = 0.1 + 0.2;
  m.F.weights[0].value[1] = -std::nextafter(1.0, 2.0);
  m.F.weights[0].value[2] = 5e-324;
  m.F.biases[1].value[0] = -0.0;
  const auto path = std::filesystem::temp_directory_path() / "cdan_test_model.txt";
  save_model(m, path.string());
  const ModelBundle back = load_model(path.string());
  std::filesystem::remove(path);
  CHECK(back.d_f == m.d_f);
  CHECK(back.d_g == m.d_g);
  CHECK(back.G.spec.head == OutputHead::Softmax);
  CHECK(back.D.spec.head == OutputHead::Sigmoid);
  ModelBundle b2 = back;
  auto pa = m.all_params(), pb = b2.all_params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    REQUIRE(pa[i]->value.shape() == pb[i]->value.shape());
    for (std::size_t j = 0; j < pa[i]->value.size(); ++j) {
      const double u = pa[i]->value[j], v = pb[i]->value[j];
      CHECK(std::memcmp(&u, &v, sizeof u) == 0);
    }
  }
}

TEST_CASE("tensor text format lines") {
  Parameter p("w", Tensor::from_rows({{1.0, -0.5}}));
  std::ostringstream out;
  save_tensors(out, {&p});
  CHECK(out.str() == "w 1x2 0x1p+0 -0x1p-1\n");
  std::istringstream in("# a comment\nw 1x2 0x1p+0 -0x1p-1\n");
  const auto back = load_tensors(in);
  REQUIRE(back.size() == 1);
  CHECK(back[0].value == p.value);
  std::istringstream bad("w 1x3 0x1p+0 -0x1p-1\n");
  CHECK_THROWS_AS(load_tensors(bad), FormatError);
}
