#pragma once

#include <vector>

#include "cdan/tensor.hpp"

namespace cdan {

struct ScheduleParams {
  double eta0 = 0.01;
  double alpha = 10.0;
  double beta = 0.75;
  double delta = 10.0;
  double momentum = 0.9;
  double lambda = 1.0;

  void validate() const;
};

// eta0 * (1 + alpha p)^(-beta). Throws UsageError for p outside [0, 1].
double lr_schedule(double p, const ScheduleParams& sp);
// (1 - e^{-delta p}) / (1 + e^{-delta p}).
double lambda_schedule(double p, double delta);
// lambda * lambda_schedule(p, delta).
double effective_lambda(double p, const ScheduleParams& sp);

// v <- momentum v + grad; param <- param - lr v.
void sgd_momentum_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum);

// Classical momentum SGD over parameter groups, each with a learning-rate
// multiplier.
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum) : momentum_(momentum) {}

  void add_group(std::vector<Parameter*> params, double lr_mult);
  void step(double lr);
  void zero_grad();

 private:
  struct Slot {
    Parameter* param;
    Tensor velocity;
    double lr_mult;
  };
  double momentum_;
  std::vector<Slot> slots_;
};

}  // namespace cdan
