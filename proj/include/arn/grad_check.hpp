#pragma once

// Central-difference gradient verification oracle. Compares tape gradients
// against (f(t+h) - f(t-h)) / 2h per sampled parameter coordinate.

#include <cstdint>
#include <functional>
#include <span>

#include "arn/tensor.hpp"

namespace arn {

struct GradCheckOptions {
  double h = 1e-3;
  int sample_coords = 100;  // checks all coordinates when total <= this
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

/// `f` recomputes the scalar loss from the current parameter values.
/// It must be deterministic (dropout off, batchnorm inference or fixed-batch);
/// two forward passes are compared bitwise and a mismatch raises NumericError.
/// Returns the max over sampled coordinates of
///   |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8).
/// Coordinates where the step straddles a relu/argmax kink are not valid
/// central-difference probes (no finite difference estimates a derivative
/// there); they are detected from function values alone, at two step sizes,
/// and replaced by further sampled coordinates.
double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                  const GradCheckOptions& opts = {});

}  // namespace arn
