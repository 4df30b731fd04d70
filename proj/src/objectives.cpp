#include "cdan/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "cdan/error.hpp"

namespace cdan {

namespace {

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
  Tensor t({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw UsageError("label " + std::to_string(labels[i]) + " out of range [0, " + std::to_string(classes) + ")");
    t(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return t;
}

Var weighted_mean(Var values, std::optional<Var> w) {
  if (!w) return mean(values);
  if (!(w->shape() == values.shape()))
    throw ShapeError("weight length mismatch: weights " + w->shape().str() + " for values " + values.shape().str());
  return div(sum(mul(values, *w)), sum(*w));
}

}  // namespace

Var cross_entropy(Var probs, std::span<const int> labels) {
  if (probs.shape().rows != labels.size())
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for probabilities " + probs.shape().str());
  Var mask = probs.tape()->constant(one_hot(labels, probs.shape().cols));
  return scale(sum(mul(log(probs), mask)), -1.0 / static_cast<double>(labels.size()));
}

double cross_entropy(const Tensor& probs, std::span<const int> labels) {
  Tape t;
  return cross_entropy(t.constant(probs), labels).value().item();
}

double entropy(std::span<const double> g) {
  double h = 0.0;
  for (double p : g)
    if (p > 0.0) h -= p * std::log(p);
  return std::max(h, 0.0);
}

Var entropy_rows(Var g) { return scale(sum_cols(mul(g, log(g))), -1.0); }

double entropy_weight(double H) { return 1.0 + std::exp(-H); }

Var entropy_weights(Var g) { return add_scalar(exp(scale(entropy_rows(g), -1.0)), 1.0); }

Var adversarial_loss(Var d_src, Var d_tgt, std::optional<Var> w_src, std::optional<Var> w_tgt) {
  Var src_term = weighted_mean(log(d_src), w_src);
  Var tgt_term = weighted_mean(log(add_scalar(scale(d_tgt, -1.0), 1.0)), w_tgt);
  return scale(add(src_term, tgt_term), -1.0);
}

Var adversarial_loss_logits(Var z_src, Var z_tgt, std::optional<Var> w_src, std::optional<Var> w_tgt) {
  return add(weighted_mean(softplus(scale(z_src, -1.0)), w_src), weighted_mean(softplus(z_tgt), w_tgt));
}

double adversarial_loss(std::span<const double> d_src, std::span<const double> d_tgt,
                        std::span<const double> w_src, std::span<const double> w_tgt) {
  Tape t;
  auto col = [&](std::span<const double> v) { return t.constant(Tensor({v.size(), 1}, {v.begin(), v.end()})); };
  std::optional<Var> ws, wt;
  if (!w_src.empty()) ws = col(w_src);
  if (!w_tgt.empty()) wt = col(w_tgt);
  return adversarial_loss(col(d_src), col(d_tgt), ws, wt).value().item();
}

LossBreakdown cdan_step_losses(Tape& tape, const StepInputs& batch, ModelBundle& model,
                               const ConditioningStrategy& strategy, const RandomProjection* proj,
                               double lambda_eff, bool entropy_flag, const GraphOptions& opts) {
  if (!(lambda_eff >= 0.0)) throw UsageError("lambda_eff must be nonnegative");
  Var f_s = forward_F(tape, model, tape.constant(batch.x_src));
  Var f_t = forward_F(tape, model, tape.constant(batch.x_tgt));
  Var g_s = forward_G(tape, model, f_s).probs;
  Var g_t = forward_G(tape, model, f_t).probs;

  Var cls = cross_entropy(g_s, batch.y_src);

  // Everything D sees from F and G passes through reversal, so F and G
  // ascend loss_D (weights included) while D descends it.
  auto reversed_g = [&](Var g) {
    return opts.detach_prediction ? tape.constant(g.value()) : gradient_reversal(g, lambda_eff);
  };
  Var fr_s = gradient_reversal(f_s, lambda_eff), gr_s = reversed_g(g_s);
  Var fr_t = gradient_reversal(f_t, lambda_eff), gr_t = reversed_g(g_t);
  Var z_s = forward_D_logits(tape, model, condition(fr_s, gr_s, strategy, proj));
  Var z_t = forward_D_logits(tape, model, condition(fr_t, gr_t, strategy, proj));

  LossBreakdown out;
  std::optional<Var> w_s, w_t;
  if (entropy_flag) {
    w_s = entropy_weights(gr_s);
    w_t = entropy_weights(gr_t);
    if (opts.detach_weights) {
      w_s = tape.constant(w_s->value());
      w_t = tape.constant(w_t->value());
    }
    out.weights_src = w_s->value();
    out.weights_tgt = w_t->value();
  }
  Var loss_d = adversarial_loss_logits(z_s, z_t, w_s, w_t);

  out.classifier_loss = cls.value().item();
  out.discriminator_loss = loss_d.value().item();
  out.adversarial_term = lambda_eff * out.discriminator_loss;
  out.total_G = out.classifier_loss - out.adversarial_term;
  out.objective = add(cls, loss_d);
  return out;
}

}  // namespace cdan
