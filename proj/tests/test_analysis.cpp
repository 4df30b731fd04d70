#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cdan/analysis.hpp"
#include "cdan/error.hpp"
#include "doctest.h"
#include "fd_oracle.hpp"

using namespace cdan;

namespace {

Tensor gaussian_rows(std::mt19937_64& rng, std::size_t n, std::size_t d, double shift = 0.0) {
  std::normal_distribution<double> nd;
  Tensor t({n, d});
  for (double& v : t.data()) v = nd(rng) + shift;
  return t;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("accuracy and ties") {
  const Tensor p = Tensor::from_rows({{0.9, 0.1}, {0.2, 0.8}});
  const std::vector<int> right{0, 1}, wrong{1, 0};
  CHECK(accuracy(p, right) == 1.0);
  CHECK(accuracy(p, wrong) == 0.0);
  const std::vector<int> zero{0};
  CHECK(accuracy(Tensor::row({0.5, 0.5}), zero) == 1.0);
  CHECK(argmax(std::vector<double>{0.2, 0.4, 0.4}) == 1);
}

TEST_CASE("accuracy ignores example order") {
  std::mt19937_64 rng(1);
  const Tensor p = softmax_rows(gaussian_rows(rng, 50, 4));
  std::vector<int> y(50);
  for (int& v : y) v = static_cast<int>(rng() % 4);
  std::vector<std::size_t> perm(50);
  for (std::size_t i = 0; i < 50; ++i) perm[i] = (i * 17) % 50;
  std::vector<int> yp(50);
  for (std::size_t i = 0; i < 50; ++i) yp[i] = y[perm[i]];
  CHECK(accuracy(p.gather_rows(perm), yp) == accuracy(p, y));
}

TEST_CASE("A-distance formula") {
  CHECK(a_distance_from_error(0.5) == 0.0);
  CHECK(a_distance_from_error(0.05) == doctest::Approx(1.8).epsilon(1e-15));
  CHECK(a_distance_from_error(0.7) == 0.0);
  CHECK(a_distance_from_error(0.0) == 2.0);
}

TEST_CASE("proxy A-distance") {
  std::mt19937_64 rng(2);
  const Tensor a = gaussian_rows(rng, 300, 4), b = gaussian_rows(rng, 300, 4);
  const ADistanceResult same = proxy_a_distance(a, b, 3);
  CHECK(same.distance < 0.3);
  CHECK(same.distance >= 0.0);

  const Tensor far = gaussian_rows(rng, 300, 4, 6.0);
  const ADistanceResult apart = proxy_a_distance(a, far, 3);
  CHECK(apart.distance > 1.8);
  CHECK(apart.distance <= 2.0);

  CHECK(proxy_a_distance(a, b, 3).distance == same.distance);
  // Swapping the domains only flips the domain labels.
  CHECK(std::abs(proxy_a_distance(b, a, 3).distance - same.distance) < 0.2);
  CHECK(std::abs(proxy_a_distance(far, a, 3).distance - apart.distance) < 0.05);

  CHECK_THROWS_AS(proxy_a_distance(gaussian_rows(rng, 39, 4), b, 1), UsageError);
}

TEST_CASE("estimator check on simple inputs") {
  const std::vector<double> e1{1, 0, 0}, e2{0, 1, 0}, g{1, 0};
  const EstimatorReport same = theorem1_verify(e1, g, e1, g, 32, 4000, Sampler::Gaussian, 1);
  CHECK(same.exact == 1.0);
  CHECK(same.unbiased_within(3.0));
  const EstimatorReport orth = theorem1_verify(e1, g, e2, g, 32, 4000, Sampler::Uniform, 1);
  CHECK(orth.exact == 0.0);
  CHECK(orth.unbiased_within(3.0));
  CHECK(std::abs(orth.mc_mean) < 3.0 * orth.standard_error);
  const EstimatorReport small = theorem1_verify(e1, g, e1, g, 64, 4000, Sampler::Gaussian, 2);
  const EstimatorReport large = theorem1_verify(e1, g, e1, g, 128, 4000, Sampler::Gaussian, 2);
  CHECK(large.mc_var < small.mc_var);
  CHECK_THROWS_AS(theorem1_verify(e1, g, e1, g, 32, 999, Sampler::Gaussian, 1), UsageError);
}

TEST_CASE("estimator result does not depend on the thread count") {
  std::mt19937_64 rng(4);
  const auto f = cdan::testing::random_vector(rng, 5), f2 = cdan::testing::random_vector(rng, 5);
  const auto g = cdan::testing::random_vector(rng, 3), g2 = cdan::testing::random_vector(rng, 3);
  const EstimatorReport one = theorem1_verify(f, g, f2, g2, 16, 2000, Sampler::Uniform, 9, 1);
  const EstimatorReport four = theorem1_verify(f, g, f2, g2, 16, 2000, Sampler::Uniform, 9, 4);
  CHECK(one.mc_mean == four.mc_mean);
  CHECK(one.mc_var == four.mc_var);
}

TEST_CASE("entropy correctness report") {
  const Tensor onehot = Tensor::from_rows({{1, 0, 0}, {0, 1, 0}});
  const std::vector<int> y{0, 1};
  const EntropyCorrectness all = entropy_correctness_report(onehot, y);
  REQUIRE(all.mean_correct.has_value());
  CHECK(*all.mean_correct == 1.0);
  CHECK_FALSE(all.mean_incorrect.has_value());
  CHECK(all.n_correct == 2);

  const Tensor u({4, 10}, 0.1);
  const std::vector<int> y4{0, 3, 5, 0};
  const EntropyCorrectness un = entropy_correctness_report(u, y4);
  REQUIRE(un.mean_correct.has_value());
  REQUIRE(un.mean_incorrect.has_value());
  CHECK(*un.mean_correct == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(*un.mean_incorrect == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(un.n_correct == 2);
  CHECK(un.n_incorrect == 2);
}

TEST_CASE("feature export") {
  ModelBundle m = init_model(MlpSpec{{2, 4, 2}}, MlpSpec{{2, 3}, OutputHead::Softmax},
                             MlpSpec{{6, 4, 1}, OutputHead::Sigmoid}, 6, 3);
  ShiftSpec s = default_spec(Generator::RotatedBlobs);
  s.n_source = 30;
  s.n_target = 27;
  const auto [src, tgt] = make_rotated_blobs(s);
  const auto dir = std::filesystem::temp_directory_path();
  const std::string p1 = (dir / "cdan_feat1.csv").string(), p2 = (dir / "cdan_feat2.csv").string();
  export_features(m, src, tgt, p1);
  export_features(m, src, tgt, p2);
  const std::string text = slurp(p1);
  CHECK(text == slurp(p2));
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  CHECK(line == "f0,f1,label,domain");
  std::size_t rows = 0, target_rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (line.ends_with(",target")) ++target_rows;
  }
  CHECK(rows == 57);
  CHECK(target_rows == 27);
  export_features(m, src, p1);
  std::istringstream in2(slurp(p1));
  rows = 0;
  while (std::getline(in2, line)) ++rows;
  CHECK(rows == 31);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}
