#pragma once

// Ways of combining a feature row f and a prediction row g into the input of
// the domain discriminator.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "cdan/tensor.hpp"

namespace cdan {

enum class StrategyTag { FeatureOnly, PredictionOnly, Concat, Multilinear, RandomizedMultilinear };
enum class Sampler { Gaussian, Uniform };

std::string to_string(StrategyTag t);
std::string to_string(Sampler s);
StrategyTag parse_strategy(const std::string& s);
// Throws UsageError on an unknown tag.
Sampler parse_sampler(const std::string& s);

struct ConditioningStrategy {
  StrategyTag tag = StrategyTag::Multilinear;
  // Output width of the randomized map.
  std::size_t dim = 1024;
  Sampler sampler = Sampler::Gaussian;
  // Scale each f row to unit norm before the randomized map.
  bool normalize_f = false;
};

// Fixed random matrices of the randomized multilinear map. Entries are i.i.d.
// with mean 0 and variance 1.
struct RandomProjection {
  Tensor R_f;  // d x d_f
  Tensor R_g;  // d x d_g
  Sampler sampler = Sampler::Gaussian;
  std::uint64_t seed = 0;

  std::size_t dim() const { return R_f.rows(); }
  std::size_t d_f() const { return R_f.cols(); }
  std::size_t d_g() const { return R_g.cols(); }
};

RandomProjection sample_projection(std::size_t d, std::size_t d_f, std::size_t d_g, Sampler sampler,
                                   std::uint64_t seed);

// Flattened outer product: entry i*d_g + j is f_i * g_j.
Tensor multilinear_map(std::span<const double> f, std::span<const double> g);
// (1/sqrt d) (R_f f) .* (R_g g).
Tensor randomized_multilinear_map(std::span<const double> f, std::span<const double> g,
                                  const RandomProjection& proj);

// Row-wise batched versions on the tape. No gradient reaches R_f or R_g.
Var multilinear_map(Var f, Var g);
Var randomized_multilinear_map(Var f, Var g, const RandomProjection& proj);
Var normalize_rows(Var a);

// Multilinear when d_f * d_g <= threshold, randomized otherwise.
StrategyTag select_strategy(std::size_t d_f, std::size_t d_g, std::size_t threshold = 4096);

std::size_t conditioned_width(const ConditioningStrategy& s, std::size_t d_f, std::size_t d_g);

// `proj` is required exactly when the strategy is randomized.
Var condition(Var f, Var g, const ConditioningStrategy& s, const RandomProjection* proj);
Tensor condition(const Tensor& f, const Tensor& g, const ConditioningStrategy& s, const RandomProjection* proj);

void save_projection(const RandomProjection& p, std::ostream& out);
RandomProjection load_projection(std::istream& in);

}  // namespace cdan
