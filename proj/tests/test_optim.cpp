#include <cmath>

#include "cdan/error.hpp"
#include "cdan/optim.hpp"
#include "doctest.h"

using namespace cdan;

TEST_CASE("learning rate schedule") {
  const ScheduleParams sp;
  CHECK(lr_schedule(0.0, sp) == 0.01);
  CHECK(lr_schedule(1.0, sp) == doctest::Approx(0.01 * std::pow(11.0, -0.75)).epsilon(1e-15));
  CHECK(lr_schedule(1.0, sp) == doctest::Approx(1.656e-3).epsilon(1e-3));
  ScheduleParams flat = sp;
  flat.alpha = 0.0;
  for (double p : {0.0, 0.3, 1.0}) CHECK(lr_schedule(p, flat) == 0.01);
  CHECK_THROWS_AS(lr_schedule(-0.01, sp), UsageError);
  CHECK_THROWS_AS(lr_schedule(1.01, sp), UsageError);
}

TEST_CASE("lambda schedule") {
  CHECK(lambda_schedule(0.0, 10.0) == 0.0);
  CHECK(lambda_schedule(0.5, 10.0) == doctest::Approx((1 - std::exp(-5.0)) / (1 + std::exp(-5.0))).epsilon(1e-15));
  CHECK(lambda_schedule(0.5, 10.0) == doctest::Approx(0.98661).epsilon(1e-5));
  CHECK(lambda_schedule(1.0, 10.0) == doctest::Approx(0.99991).epsilon(1e-5));
}

TEST_CASE("schedules are monotone on a 1000-point grid") {
  const ScheduleParams sp;
  double lr_prev = lr_schedule(0.0, sp), lam_prev = lambda_schedule(0.0, sp.delta);
  for (int i = 1; i <= 1000; ++i) {
    const double p = i / 1000.0;
    const double lr = lr_schedule(p, sp), lam = lambda_schedule(p, sp.delta);
    CHECK(lr < lr_prev);
    CHECK(lam > lam_prev);
    CHECK(lam < 1.0);
    CHECK(effective_lambda(p, sp) == sp.lambda * lam);
    lr_prev = lr;
    lam_prev = lam;
  }
}

TEST_CASE("schedule parameter validation") {
  ScheduleParams sp;
  CHECK_NOTHROW(sp.validate());
  sp.momentum = 1.0;
  CHECK_THROWS(sp.validate());
  sp = {};
  sp.eta0 = 0.0;
  CHECK_THROWS(sp.validate());
  sp = {};
  sp.delta = 0.0;
  CHECK_THROWS(sp.validate());
  sp = {};
  sp.lambda = -1.0;
  CHECK_THROWS(sp.validate());
}

TEST_CASE("momentum step") {
  SUBCASE("momentum 0 is plain SGD") {
    Tensor p = Tensor::row({1.0, -2.0}), v({1, 2});
    sgd_momentum_step(p, Tensor::row({0.5, 4.0}), v, 0.1, 0.0);
    CHECK(p == Tensor::row({1.0 - 0.05, -2.0 - 0.4}));
  }
  SUBCASE("zero gradients leave parameters alone") {
    Tensor p = Tensor::row({3.0, 4.0}), v({1, 2});
    for (int i = 0; i < 10; ++i) sgd_momentum_step(p, Tensor({1, 2}), v, 0.5, 0.9);
    CHECK(p == Tensor::row({3.0, 4.0}));
  }
  SUBCASE("two steps with constant gradient move by -2.9 g") {
    Tensor p({1, 3}), v({1, 3});
    const Tensor g = Tensor::row({1.0, -2.0, 0.5});
    sgd_momentum_step(p, g, v, 1.0, 0.9);
    sgd_momentum_step(p, g, v, 1.0, 0.9);
    for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(-2.9 * g[i]).epsilon(1e-15));
  }
  SUBCASE("shape mismatch") {
    Tensor p({1, 3}), v({1, 3});
    CHECK_THROWS_AS(sgd_momentum_step(p, Tensor({1, 2}), v, 1.0, 0.9), ShapeError);
  }
}

TEST_CASE("optimizer groups apply their multipliers") {
  Parameter a("a", Tensor::row({0.0})), b("b", Tensor::row({0.0}));
  SgdMomentum opt(0.0);
  opt.add_group({&a}, 1.0);
  opt.add_group({&b}, 10.0);
  a.grad = Tensor::row({1.0});
  b.grad = Tensor::row({1.0});
  opt.step(0.01);
  CHECK(a.value[0] == doctest::Approx(-0.01));
  CHECK(b.value[0] == doctest::Approx(-0.1));
  opt.zero_grad();
  CHECK(a.grad[0] == 0.0);
  CHECK(b.grad[0] == 0.0);
}
