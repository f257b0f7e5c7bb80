#include "arn/optim.hpp"

#include <cmath>

namespace arn {

void AdadeltaState::init(std::span<const Tensor> params) {
  acc_grad_sq.clear();
  acc_delta_sq.clear();
  acc_grad_sq.reserve(params.size());
  acc_delta_sq.reserve(params.size());
  for (const auto& p : params) {
    acc_grad_sq.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
    acc_delta_sq.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
  }
}

void adadelta_step(std::span<Tensor> params, AdadeltaState& state) {
  if (!state.initialized()) state.init(params);
  if (state.acc_grad_sq.size() != params.size())
    throw ConfigError("adadelta state does not match parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.acc_grad_sq[i].size() != static_cast<std::size_t>(params[i].size()))
      throw ShapeError("adadelta accumulator shape does not mirror parameter " +
                       std::to_string(i));
    if (params[i].has_grad())
      for (double g : params[i].grad())
        if (!std::isfinite(g))
          throw NumericError("non-finite gradient in adadelta_step, parameter " +
                             std::to_string(i));
  }

  const double rho = state.rho, eps = state.epsilon, lr = state.lr;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& eg2 = state.acc_grad_sq[i];
    auto& ed2 = state.acc_delta_sq[i];
    auto x = params[i].data();
    const bool has_grad = params[i].has_grad();
    const double* g = has_grad ? params[i].grad().data() : nullptr;
    for (std::size_t j = 0; j < eg2.size(); ++j) {
      const double gj = has_grad ? g[j] : 0.0;
      eg2[j] = rho * eg2[j] + (1.0 - rho) * gj * gj;
      const double dx = -lr * std::sqrt(ed2[j] + eps) / std::sqrt(eg2[j] + eps) * gj;
      ed2[j] = rho * ed2[j] + (1.0 - rho) * dx * dx;
      x[j] += dx;
    }
  }
}

AdadeltaOptimizer::AdadeltaOptimizer(std::vector<Tensor> params, double rho, double epsilon,
                                     double lr)
    : params_(std::move(params)) {
  state_.rho = rho;
  state_.epsilon = epsilon;
  state_.lr = lr;
  state_.init(params_);
}

void AdadeltaOptimizer::step() { adadelta_step(params_, state_); }

void AdadeltaOptimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace arn
