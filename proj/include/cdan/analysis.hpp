#pragma once

// Diagnostics: accuracy, proxy A-distance, Monte-Carlo check of the
// randomized multilinear estimator, entropy/correctness report, feature export.

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "cdan/conditioning.hpp"
#include "cdan/datagen.hpp"
#include "cdan/networks.hpp"

namespace cdan {

// Ties go to the lowest index.
std::size_t argmax(std::span<const double> row);
double accuracy(const Tensor& probs, std::span<const int> labels);

struct ADistanceOptions {
  std::size_t hidden = 16;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
};

struct ADistanceResult {
  double distance = 0.0;
  // Test error of the domain classifier before clamping.
  double test_error = 0.0;
};

// 2 (1 - 2 eps) with eps the held-out error of a fresh two-layer domain
// classifier, each domain split 50/50. eps is clamped to <= 0.5. Throws
// UsageError with fewer than 40 rows in either domain.
ADistanceResult proxy_a_distance(const Tensor& f_src, const Tensor& f_tgt, std::uint64_t seed,
                                 const ADistanceOptions& opt = {});
inline double a_distance_from_error(double eps) { return 2.0 * (1.0 - 2.0 * std::min(eps, 0.5)); }

struct EstimatorReport {
  double mc_mean = 0.0;
  double exact = 0.0;  // <f, f'> <g, g'>
  double mc_var = 0.0;
  double standard_error = 0.0;
  std::size_t dim = 0;
  std::size_t resamples = 0;

  // |mc_mean - exact| / standard_error.
  double z() const;
  bool unbiased_within(double k = 3.0) const { return z() < k; }
};

// Monte-Carlo mean and variance of <T(f, g), T(f', g')> for the randomized
// map over independently sampled projections. Resample r uses a seed derived
// from (seed, d, r); the result does not depend on `threads`.
EstimatorReport theorem1_verify(std::span<const double> f, std::span<const double> g, std::span<const double> f2,
                                std::span<const double> g2, std::size_t d, std::size_t n_resamples, Sampler sampler,
                                std::uint64_t seed, unsigned threads = 1);

inline constexpr std::size_t kMinResamples = 1000;

struct EntropyCorrectness {
  // Mean exp(-H(g)) over correctly / incorrectly classified rows; empty
  // when the group has no members.
  std::optional<double> mean_correct;
  std::optional<double> mean_incorrect;
  std::size_t n_correct = 0;
  std::size_t n_incorrect = 0;
};

EntropyCorrectness entropy_correctness_report(const Tensor& probs, std::span<const int> labels);

// Writes f0..f{d-1},label,domain with a header, one row per example.
void export_features(const ModelBundle& m, const LabeledSet& set, const std::string& path);
void export_features(const ModelBundle& m, const LabeledSet& source, const LabeledSet& target,
                     const std::string& path);

}  // namespace cdan
