#pragma once

// Classifier and adversarial losses, entropy criterion, and the assembled
// per-step CDAN / CDAN+E training graph.

#include <optional>
#include <span>
#include <vector>

#include "cdan/conditioning.hpp"
#include "cdan/networks.hpp"
#include "cdan/tensor.hpp"

namespace cdan {

// Mean over the batch of -log probs[label]. Throws UsageError for a label
// outside [0, C).
Var cross_entropy(Var probs, std::span<const int> labels);
double cross_entropy(const Tensor& probs, std::span<const int> labels);

// -sum g_c log g_c with 0 log 0 = 0.
double entropy(std::span<const double> g);
// Per-row entropy, n x 1.
Var entropy_rows(Var g);

// 1 + exp(-H), in (1, 2].
double entropy_weight(double H);
// Per-row 1 + exp(-H(g)), n x 1.
Var entropy_weights(Var g);

// -mean_w log d_src - mean_w log(1 - d_tgt), each mean normalized by the sum
// of its weights. Missing weights mean unit weights.
Var adversarial_loss(Var d_src, Var d_tgt, std::optional<Var> w_src = std::nullopt,
                     std::optional<Var> w_tgt = std::nullopt);
// The same loss from discriminator logits z (d = sigmoid(z)):
// -log d = softplus(-z) and -log(1 - d) = softplus(z). No clamping is needed,
// so the discriminator keeps a gradient however confident it is.
Var adversarial_loss_logits(Var z_src, Var z_tgt, std::optional<Var> w_src = std::nullopt,
                            std::optional<Var> w_tgt = std::nullopt);
double adversarial_loss(std::span<const double> d_src, std::span<const double> d_tgt,
                        std::span<const double> w_src = {}, std::span<const double> w_tgt = {});

struct LossBreakdown {
  double classifier_loss = 0.0;
  double discriminator_loss = 0.0;
  // lambda_eff * discriminator_loss, the term F and G ascend.
  double adversarial_term = 0.0;
  // classifier_loss - adversarial_term: the value F and G minimize.
  double total_G = 0.0;
  std::optional<Tensor> weights_src;
  std::optional<Tensor> weights_tgt;
  // Scalar to backpropagate. D receives d(loss_D); F and G receive
  // d(classifier_loss) - lambda_eff * d(loss_D) through gradient reversal.
  Var objective;
};

struct StepInputs {
  const Tensor& x_src;
  std::span<const int> y_src;
  // Target rows only; no labels are ever passed in.
  const Tensor& x_tgt;
};

struct GraphOptions {
  // Feed D a constant copy of g, so the adversarial gradient reaches G and F
  // only through f.
  bool detach_prediction = false;
  // Treat the entropy weights as constants.
  bool detach_weights = false;
};

LossBreakdown cdan_step_losses(Tape& tape, const StepInputs& batch, ModelBundle& model,
                               const ConditioningStrategy& strategy, const RandomProjection* proj,
                               double lambda_eff, bool entropy_flag, const GraphOptions& opts = {});

}  // namespace cdan
