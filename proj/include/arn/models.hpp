#pragma once

// Model zoo: the two-path asymmetric residual network, a single-path variant,
// and the conventional learning baselines (MLP, CNN, LSTM, Hybrid, AE,
// feature head), plus the shared training/evaluation loop.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arn/dataset.hpp"
#include "arn/metrics.hpp"
#include "arn/ops.hpp"
#include "arn/optim.hpp"
#include "arn/tensor.hpp"

namespace arn {

enum class ModelKind { Arn, Resnet, Cnn, Mlp, Lstm, Hybrid, Ae, FeatureHead };
std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// Bottleneck residual unit: 1x1 reduce -> 3x1 (zero-padded to keep length)
/// -> 1x1 expand, batchnorm after each conv, relu between, identity shortcut
/// (1x1 projection when channel counts differ), relu after the addition.
struct BottleneckBlock {
  ConvLayerParams reduce, spatial, expand;
  BatchNormState bn_reduce, bn_spatial, bn_expand;
  std::optional<ConvLayerParams> projection;

  static BottleneckBlock make(int c_in, int c_mid, int c_out, std::mt19937_64& rng,
                              double bn_epsilon = 1e-5);
  Tensor forward(const Tensor& x);
  void set_training(bool training);
  void zero_residual_branch();  // test hook: F(x) == 0 exactly
};

Tensor residual_block_forward(const Tensor& x, BottleneckBlock& block);

/// One gate set of Eq. 4-9 style LSTM cells; w_* act on the input (with
/// bias), u_* on the previous hidden state (no bias).
struct LstmCellParams {
  DenseParams w_f, u_f, w_i, u_i, w_o, u_o, w_c, u_c;
  static LstmCellParams make(int input_dim, int hidden, std::mt19937_64& rng);
  int hidden() const { return w_f.out_dim(); }
  int input_dim() const { return w_f.in_dim(); }
};

struct LstmStepResult {
  Tensor h;
  Tensor c;
};

/// f = sig(W_f x + U_f h + b_f), i/o likewise, c~ = tanh(W_c x + U_c h + b_c),
/// c_t = f*c + i*c~, h_t = o * tanh(c_t). Inputs [H]/[D] or batched [N,*].
LstmStepResult lstm_cell_step(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev,
                              const LstmCellParams& params);

/// Two structurally identical residual paths over the narrow/wide windows.
/// base_width scales every stage; 64 reproduces the published layer table
/// (conv1 64x5, stages (64,256)x3 (512,2048)x4 (256,1024)x6 (128,512)x3,
/// per-path fc 512). resnet50_order swaps in the conventional monotone
/// (64,256)(128,512)(256,1024)(512,2048) progression for comparison.
struct ArnConfig {
  int t_narrow = 32;
  int t_wide = 96;
  int base_width = 64;
  bool resnet50_order = false;
  // eps inside 1/sqrt(var+eps); raising it bounds the amplification of
  // batch-vs-population variance differences on near-constant channels
  double bn_epsilon = 1e-5;

  struct Stage {
    int mid, out, repeat;
  };
  std::array<Stage, 4> stages() const;
  int conv1_kernels() const { return base_width; }
  int kernel_size() const { return 5; }
  int fc_width() const { return base_width * 8; }
  void validate() const;
};

struct CnnStageSpec {
  int kernel = 1;
  int stride = 1;
  int filters = 1;
  int pool = 1;  // pool width == stride; 1 means no pooling
};

/// Architecture + hyperparameters of one model instance.
struct ModelSpec {
  ModelKind kind = ModelKind::Arn;
  int input_t = 64;   // window length consumed (ARN uses arn.t_narrow/t_wide)
  int channels = 3;   // sensor channels D (feature dim for FeatureHead)
  int classes = 2;
  ArnConfig arn;

  std::vector<int> mlp_units{2000, 2000, 2000};
  std::vector<CnnStageSpec> cnn_stages{{11, 1, 50, 2}, {10, 1, 40, 3}, {6, 1, 30, 1}};
  int cnn_dense = 1000;
  int lstm_hidden = 64;
  int lstm_proj = 600;  // per-layer output projection width
  int lstm_layers = 2;
  int hybrid_hidden = 27;
  CnnStageSpec hybrid_conv{11, 1, 50, 2};
  int ae_hidden = 5000;
  int ae_bottleneck = 512;
  int head_dense = 512;  // dense between sequence models and the classifier
  double dropout_rate = 0.0;

  void validate() const;
};

struct NamedParam {
  std::string name;
  Tensor tensor;
};

/// One training batch. `narrow` is undefined for single-window models;
/// `wide` carries [N,T,D] windows or [N,F] feature rows.
struct Batch {
  Tensor narrow;
  Tensor wide;
  Tensor targets;  // [N,K] one-hot
  std::vector<int> labels;
};

class Model {
 public:
  virtual ~Model() = default;
  virtual const ModelSpec& spec() const = 0;
  virtual Tensor forward(const Batch& batch) = 0;  // logits [N,K]
  virtual std::vector<NamedParam> named_params() = 0;
  virtual void set_training(bool training) = 0;

  // AE-style models expose an unsupervised phase ahead of classifier training.
  virtual bool has_pretrain_phase() const { return false; }
  virtual Tensor pretrain_loss(const Batch&) {
    throw ConfigError("model has no pretrain phase");
  }
  virtual void enter_head_phase() {}

  std::vector<Tensor> parameters();            // all, named order
  std::vector<Tensor> trainable_parameters();  // requires_grad subset
};

std::unique_ptr<Model> build_arn(const ArnConfig& cfg, int channels, int classes,
                                 std::uint64_t seed);
std::unique_ptr<Model> build_baseline(const ModelSpec& spec, std::uint64_t seed);
std::unique_ptr<Model> build_model(const ModelSpec& spec, std::uint64_t seed);

struct TrainConfig {
  int epochs = 50;
  int batch_size = 128;
  double lr = 1.0;
  double rho = 0.95;
  double adadelta_epsilon = 1e-6;
  std::uint64_t seed = 1;
  bool shuffle = true;
  int pretrain_epochs = -1;  // AE MSE phase; -1 means `epochs`

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double train_f1 = 0.0;
  double test_f1 = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::vector<double> pretrain_loss;  // AE only
};

Batch make_batch(std::span<const WindowPair> pairs, std::span<const std::size_t> indices,
                 const DatasetSplit& meta);

/// Shuffle/batch/forward/cross-entropy/backward/adadelta per epoch; history
/// carries per-epoch mean loss and train/test weighted F1. Deterministic
/// under a fixed seed.
TrainHistory train(Model& model, const DatasetSplit& split, const TrainConfig& cfg);

/// Inference-mode argmax evaluation.
MetricsReport evaluate(Model& model, std::span<const WindowPair> pairs,
                       const DatasetSplit& meta);

}  // namespace arn
