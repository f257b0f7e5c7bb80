#pragma once

// ADADELTA: per-parameter adaptive steps from decaying accumulators of
// squared gradients and squared updates. lr multiplies the raw update and
// defaults to 1.0.

#include <span>
#include <vector>

#include "arn/tensor.hpp"

namespace arn {

struct AdadeltaState {
  double rho = 0.95;
  double epsilon = 1e-6;
  double lr = 1.0;
  std::vector<std::vector<double>> acc_grad_sq;    // E[g^2] per parameter
  std::vector<std::vector<double>> acc_delta_sq;   // E[dx^2] per parameter

  /// Allocates zero accumulators mirroring `params` shapes.
  void init(std::span<const Tensor> params);
  bool initialized() const { return !acc_grad_sq.empty(); }
};

/// One ADADELTA update over `params` using their .grad buffers:
///   E[g^2]  <- rho E[g^2] + (1-rho) g^2
///   dx       = -lr * sqrt(E[dx^2]+eps)/sqrt(E[g^2]+eps) * g
///   E[dx^2] <- rho E[dx^2] + (1-rho) dx^2
///   x       <- x + dx
/// Parameters without a grad buffer are treated as zero-gradient.
/// Throws NumericError on non-finite gradients; no parameter is touched then.
void adadelta_step(std::span<Tensor> params, AdadeltaState& state);

/// Binds a parameter list to an AdadeltaState.
class AdadeltaOptimizer {
 public:
  explicit AdadeltaOptimizer(std::vector<Tensor> params, double rho = 0.95,
                             double epsilon = 1e-6, double lr = 1.0);
  void step();
  void zero_grad();
  AdadeltaState& state() { return state_; }
  std::span<Tensor> params() { return params_; }

 private:
  std::vector<Tensor> params_;
  AdadeltaState state_;
};

}  // namespace arn
