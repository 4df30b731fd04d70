#include "cdan/optim.hpp"

#include <cmath>

#include "cdan/error.hpp"

namespace cdan {

void ScheduleParams::validate() const {
  if (!(eta0 > 0.0)) throw ConfigError("schedule.eta0 must be > 0");
  if (!(alpha >= 0.0)) throw ConfigError("schedule.alpha must be >= 0");
  if (!(beta >= 0.0)) throw ConfigError("schedule.beta must be >= 0");
  if (!(delta > 0.0)) throw ConfigError("schedule.delta must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("schedule.momentum must be in [0, 1)");
  if (!(lambda >= 0.0)) throw ConfigError("schedule.lambda must be >= 0");
}

double lr_schedule(double p, const ScheduleParams& sp) {
  if (!(p >= 0.0 && p <= 1.0)) throw UsageError("training progress must lie in [0, 1]");
  return sp.eta0 * std::pow(1.0 + sp.alpha * p, -sp.beta);
}

double lambda_schedule(double p, double delta) {
  if (!(p >= 0.0 && p <= 1.0)) throw UsageError("training progress must lie in [0, 1]");
  const double e = std::exp(-delta * p);
  return (1.0 - e) / (1.0 + e);
}

double effective_lambda(double p, const ScheduleParams& sp) { return sp.lambda * lambda_schedule(p, sp.delta); }

void sgd_momentum_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum) {
  if (!(param.shape() == grad.shape()) || !(param.shape() == velocity.shape()))
    throw ShapeError("sgd step: param " + param.shape().str() + ", grad " + grad.shape().str() + ", velocity " +
                     velocity.shape().str());
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i];
    param[i] -= lr * velocity[i];
  }
}

void SgdMomentum::add_group(std::vector<Parameter*> params, double lr_mult) {
  for (Parameter* p : params) slots_.push_back({p, Tensor(p->value.shape()), lr_mult});
}

void SgdMomentum::step(double lr) {
  for (Slot& s : slots_) sgd_momentum_step(s.param->value, s.param->grad, s.velocity, lr * s.lr_mult, momentum_);
}

void SgdMomentum::zero_grad() {
  for (Slot& s : slots_) s.param->zero_grad();
}

}  // namespace cdan
