#pragma once

// The three players: feature extractor F, classifier head G and the
// conditional domain discriminator D, each a small fully connected network.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cdan/tensor.hpp"

namespace cdan {

enum class OutputHead { Linear, Softmax, Sigmoid };

struct MlpSpec {
  // input, hidden..., output. Hidden layers use ReLU.
  std::vector<std::size_t> widths;
  OutputHead head = OutputHead::Linear;

  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  void validate(const std::string& name) const;
};

struct Mlp {
  MlpSpec spec;
  // weights[l] is fan_in x fan_out, biases[l] is 1 x fan_out.
  std::vector<Parameter> weights;
  std::vector<Parameter> biases;

  std::size_t layers() const { return weights.size(); }
};

struct ModelBundle {
  Mlp F;
  Mlp G;
  Mlp D;
  std::size_t d_f = 0;
  std::size_t d_g = 0;

  std::vector<Parameter*> params_F();
  std::vector<Parameter*> params_G();
  std::vector<Parameter*> params_D();
  std::vector<Parameter*> all_params();
  void zero_grad();
};

// Glorot-uniform weights in [-a, a], a = sqrt(6 / (fan_in + fan_out)); zero
// biases. Tensors are named <prefix>.<layer>.weight / .bias.
Mlp init_mlp(const MlpSpec& spec, const std::string& prefix, std::uint64_t seed);

// Glorot-uniform weights, zero biases. G must take d_f inputs and D must take
// `conditioned_width` inputs with a single sigmoid output.
ModelBundle init_model(const MlpSpec& spec_F, const MlpSpec& spec_G, const MlpSpec& spec_D,
                       std::size_t conditioned_width, std::uint64_t seed);

// Builds the network on the tape. Parameters are bound as leaves.
Var forward_mlp(Tape& tape, Mlp& net, Var x);

Var forward_F(Tape& tape, ModelBundle& m, Var x);

struct ClassifierOutput {
  Var logits;
  Var probs;
};
ClassifierOutput forward_G(Tape& tape, ModelBundle& m, Var f);

// Sigmoid probability of "source" per row, n x 1.
Var forward_D(Tape& tape, ModelBundle& m, Var conditioned);
// The same before the sigmoid.
Var forward_D_logits(Tape& tape, ModelBundle& m, Var conditioned);

// Tape-free evaluation helpers.
Tensor eval_mlp(const Mlp& net, const Tensor& x);
Tensor eval_features(const ModelBundle& m, const Tensor& x);
Tensor eval_probs(const ModelBundle& m, const Tensor& x);

// Flat text model format: one line per tensor,
//   <name> <rows>x<cols> <hex-float values...>
// Values use %a encoding so a round trip is bit-exact.
void save_tensors(std::ostream& out, const std::vector<const Parameter*>& tensors);
std::vector<Parameter> load_tensors(std::istream& in);

void save_model(const ModelBundle& m, const std::string& path);
// Layer widths and heads are recovered from the tensor shapes; F and D hidden
// layers are ReLU, G ends in softmax and D in sigmoid.
ModelBundle load_model(const std::string& path);

}  // namespace cdan
