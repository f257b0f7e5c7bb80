#pragma once

// Neural operations over Tensor. Every op validates shapes, computes its
// forward value with float64 accumulation, and (when a tape is active and an
// input requires grad) records a backward closure on the active tape.
//
// Sequence tensors are time-major [T, C]; a leading batch dimension is
// accepted everywhere it makes sense, giving [N, T, C] / [N, F].

#include <cstdint>
#include <string>

#include "arn/tensor.hpp"

namespace arn {

/// 1-D convolution filter bank: `kernels` is [K, s, C_in], `bias` is [K].
struct ConvLayerParams {
  Tensor kernels;
  Tensor bias;
  int stride = 1;

  int out_channels() const { return kernels.dim(0); }
  int kernel_size() const { return kernels.dim(1); }
  int in_channels() const { return kernels.dim(2); }
  void validate() const;
};

/// Fully-connected layer: `weights` is [out, in], `bias` (optional) is [out].
struct DenseParams {
  Tensor weights;
  Tensor bias;  // undefined tensor means no bias

  int out_dim() const { return weights.dim(0); }
  int in_dim() const { return weights.dim(1); }
  void validate() const;
};

/// Per-channel batch normalization state. `training` selects batch statistics
/// (and running-stat updates) vs. stored running statistics.
struct BatchNormState {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.9;
  double epsilon = 1e-5;
  bool training = true;

  static BatchNormState make(int channels, double epsilon = 1e-5);
  int channels() const { return gamma.dim(0); }
  void validate() const;
};

enum class Activation { Relu, Sigmoid, Tanh };
Activation activation_from_string(const std::string& name);

/// Valid cross-correlation over the time axis. Input is [T, C_in] or
/// [N, T, C_in]; output [T', K] with T' = floor((T - s)/stride) + 1.
Tensor conv1d(const Tensor& input, const ConvLayerParams& params);

/// Element-wise relu / sigmoid / tanh.
Tensor activation(const Tensor& x, Activation kind);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);

/// Per-channel max over sliding windows; gradient routes to the first
/// occurrence of each window maximum.
Tensor maxpool1d(const Tensor& x, int width, int stride);

/// Mean over the time axis: [T, C] -> [C], [N, T, C] -> [N, C].
Tensor global_avg_pool(const Tensor& x);

/// x @ W^T + b. Input [in] or [N, in]; output [out] or [N, out].
Tensor dense(const Tensor& x, const DenseParams& params);

/// Normalizes over all leading axes per channel (last axis).
Tensor batchnorm(const Tensor& x, BatchNormState& state);

/// Last-axis concatenation of [A]+[B] or [N,A]+[N,B].
Tensor concat_features(const Tensor& a, const Tensor& b);

/// Row-wise softmax with max-subtraction; last axis is the class axis.
Tensor softmax(const Tensor& z);

/// -(1/N) sum_n sum_k q log max(p, 1e-12). `p` rows are distributions
/// (e.g. softmax output); `q` rows are one-hot or soft targets.
Tensor cross_entropy_loss(const Tensor& p, const Tensor& q);

/// Fused softmax + cross-entropy on logits; gradient w.r.t. logits is
/// (softmax(z) - q)/N exactly.
Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& q);

/// Mean of squared differences.
Tensor mse_loss(const Tensor& x, const Tensor& target);

/// Training mode: zero each element with probability `rate`, scale survivors
/// by 1/(1-rate), deterministic under `seed`. Inference mode: identity.
Tensor dropout(const Tensor& x, double rate, bool training, std::uint64_t seed);

// Plumbing ops used to compose models on the tape.

/// Element-wise sum / product of same-shape tensors.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// Sum of all elements, as a scalar tensor.
Tensor sum(const Tensor& x);

/// Zero-pad `left`/`right` rows along the time axis of [T, C] / [N, T, C].
Tensor pad1d(const Tensor& x, int left, int right);

/// Rows [r0, r1) of the time axis: [T, C] -> [r1-r0, C], batched likewise.
Tensor slice_rows(const Tensor& x, int r0, int r1);

/// Same data, new shape (sizes must agree). [N, ...] -> [N, F] flattening
/// is reshape with the leading dim kept.
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor flatten_per_row(const Tensor& x);  // [N, T, C] -> [N, T*C]

}  // namespace arn
