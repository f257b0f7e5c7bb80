#include "arn/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace arn {

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Arn: return "arn";
    case ModelKind::Resnet: return "resnet";
    case ModelKind::Cnn: return "cnn";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::Lstm: return "lstm";
    case ModelKind::Hybrid: return "hybrid";
    case ModelKind::Ae: return "ae";
    case ModelKind::FeatureHead: return "feature_head";
  }
  throw InternalError("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  for (ModelKind k : {ModelKind::Arn, ModelKind::Resnet, ModelKind::Cnn, ModelKind::Mlp,
                      ModelKind::Lstm, ModelKind::Hybrid, ModelKind::Ae, ModelKind::FeatureHead})
    if (model_kind_name(k) == name) return k;
  throw ConfigError("unknown model kind: " + name);
}

namespace {

ConvLayerParams make_conv(int kernels, int size, int channels, int stride, std::mt19937_64& rng) {
  ConvLayerParams p;
  p.kernels = glorot_uniform(Shape{kernels, size, channels}, size * channels, size * kernels, rng);
  p.bias = Tensor(Shape{kernels}, 0.0, true);
  p.stride = stride;
  return p;
}

DenseParams make_dense(int out, int in, std::mt19937_64& rng, bool bias = true) {
  DenseParams p;
  p.weights = glorot_uniform(Shape{out, in}, in, out, rng);
  if (bias) p.bias = Tensor(Shape{out}, 0.0, true);
  return p;
}

void collect_conv(std::vector<NamedParam>& out, const std::string& prefix,
                  const ConvLayerParams& p) {
  out.push_back({prefix + ".kernels", p.kernels});
  out.push_back({prefix + ".bias", p.bias});
}

void collect_dense(std::vector<NamedParam>& out, const std::string& prefix,
                   const DenseParams& p) {
  out.push_back({prefix + ".weights", p.weights});
  if (p.bias.defined()) out.push_back({prefix + ".bias", p.bias});
}

void collect_bn(std::vector<NamedParam>& out, const std::string& prefix,
                const BatchNormState& s) {
  out.push_back({prefix + ".gamma", s.gamma});
  out.push_back({prefix + ".beta", s.beta});
  out.push_back({prefix + ".running_mean", s.running_mean});
  out.push_back({prefix + ".running_var", s.running_var});
}

void zero_all(Tensor t) {
  for (auto& v : t.data()) v = 0.0;
}

}  // namespace

BottleneckBlock BottleneckBlock::make(int c_in, int c_mid, int c_out, std::mt19937_64& rng,
                                      double bn_epsilon) {
  BottleneckBlock b;
  b.reduce = make_conv(c_mid, 1, c_in, 1, rng);
  b.spatial = make_conv(c_mid, 3, c_mid, 1, rng);
  b.expand = make_conv(c_out, 1, c_mid, 1, rng);
  b.bn_reduce = BatchNormState::make(c_mid, bn_epsilon);
  b.bn_spatial = BatchNormState::make(c_mid, bn_epsilon);
  b.bn_expand = BatchNormState::make(c_out, bn_epsilon);
  if (c_in != c_out) b.projection = make_conv(c_out, 1, c_in, 1, rng);
  return b;
}

Tensor BottleneckBlock::forward(const Tensor& x) {
  Tensor y = conv1d(x, reduce);
  y = relu(batchnorm(y, bn_reduce));
  y = conv1d(pad1d(y, 1, 1), spatial);  // zero-pad keeps the time extent
  y = relu(batchnorm(y, bn_spatial));
  y = conv1d(y, expand);
  y = batchnorm(y, bn_expand);
  Tensor shortcut = projection ? conv1d(x, *projection) : x;
  return relu(add(shortcut, y));
}

void BottleneckBlock::set_training(bool training) {
  bn_reduce.training = training;
  bn_spatial.training = training;
  bn_expand.training = training;
}

void BottleneckBlock::zero_residual_branch() {
  zero_all(reduce.kernels);
  zero_all(reduce.bias);
  zero_all(spatial.kernels);
  zero_all(spatial.bias);
  zero_all(expand.kernels);
  zero_all(expand.bias);
}

Tensor residual_block_forward(const Tensor& x, BottleneckBlock& block) {
  return block.forward(x);
}

LstmCellParams LstmCellParams::make(int input_dim, int hidden, std::mt19937_64& rng) {
  LstmCellParams p;
  p.w_f = make_dense(hidden, input_dim, rng);
  p.u_f = make_dense(hidden, hidden, rng, /*bias=*/false);
  p.w_i = make_dense(hidden, input_dim, rng);
  p.u_i = make_dense(hidden, hidden, rng, false);
  p.w_o = make_dense(hidden, input_dim, rng);
  p.u_o = make_dense(hidden, hidden, rng, false);
  p.w_c = make_dense(hidden, input_dim, rng);
  p.u_c = make_dense(hidden, hidden, rng, false);
  return p;
}

LstmStepResult lstm_cell_step(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev,
                              const LstmCellParams& params) {
  const Tensor f = sigmoid(add(dense(x_t, params.w_f), dense(h_prev, params.u_f)));
  const Tensor i = sigmoid(add(dense(x_t, params.w_i), dense(h_prev, params.u_i)));
  const Tensor o = sigmoid(add(dense(x_t, params.w_o), dense(h_prev, params.u_o)));
  const Tensor c_cand = tanh_op(add(dense(x_t, params.w_c), dense(h_prev, params.u_c)));
  LstmStepResult r;
  r.c = add(mul(f, c_prev), mul(i, c_cand));
  r.h = mul(o, tanh_op(r.c));
  return r;
}

std::array<ArnConfig::Stage, 4> ArnConfig::stages() const {
  const int b = base_width;
  if (resnet50_order)
    return {{{b, 4 * b, 3}, {2 * b, 8 * b, 4}, {4 * b, 16 * b, 6}, {8 * b, 32 * b, 3}}};
  return {{{b, 4 * b, 3}, {8 * b, 32 * b, 4}, {4 * b, 16 * b, 6}, {2 * b, 8 * b, 3}}};
}

void ArnConfig::validate() const {
  if (base_width < 1) throw ConfigError("arn base_width must be >= 1");
  if (t_narrow < 1 || t_wide < t_narrow)
    throw ConfigError("arn window lengths must satisfy 1 <= t_narrow <= t_wide");
}

namespace {

// conv1 (valid, s=5) then /2 max pooling; residual stages keep the length.
int arn_path_length(int t, const std::string& path_name) {
  if (t < 5)
    throw ConfigError("arn " + path_name + " path: conv1 needs window length >= 5, got " +
                      std::to_string(t));
  const int after_conv = t - 4;
  if (after_conv < 2)
    throw ConfigError("arn " + path_name + " path: max-pool input length " +
                      std::to_string(after_conv) + " < 2");
  return (after_conv - 2) / 2 + 1;
}

struct ResidualPath {
  ConvLayerParams conv1;
  BatchNormState bn1;
  std::vector<BottleneckBlock> blocks;
  DenseParams fc;

  static ResidualPath make(const ArnConfig& cfg, int channels, std::mt19937_64& rng) {
    ResidualPath p;
    p.conv1 = make_conv(cfg.conv1_kernels(), cfg.kernel_size(), channels, 1, rng);
    p.bn1 = BatchNormState::make(cfg.conv1_kernels(), cfg.bn_epsilon);
    int c_in = cfg.conv1_kernels();
    for (const auto& st : cfg.stages())
      for (int r = 0; r < st.repeat; ++r) {
        p.blocks.push_back(BottleneckBlock::make(c_in, st.mid, st.out, rng, cfg.bn_epsilon));
        c_in = st.out;
      }
    p.fc = make_dense(cfg.fc_width(), c_in, rng);
    return p;
  }

  Tensor forward(const Tensor& x) {
    Tensor y = relu(batchnorm(conv1d(x, conv1), bn1));
    y = maxpool1d(y, 2, 2);
    for (auto& b : blocks) y = b.forward(y);
    return relu(dense(global_avg_pool(y), fc));
  }

  void set_training(bool training) {
    bn1.training = training;
    for (auto& b : blocks) b.set_training(training);
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    collect_conv(out, prefix + ".conv1", conv1);
    collect_bn(out, prefix + ".bn1", bn1);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string bp = prefix + ".block" + std::to_string(i);
      collect_conv(out, bp + ".reduce", blocks[i].reduce);
      collect_bn(out, bp + ".bn_reduce", blocks[i].bn_reduce);
      collect_conv(out, bp + ".spatial", blocks[i].spatial);
      collect_bn(out, bp + ".bn_spatial", blocks[i].bn_spatial);
      collect_conv(out, bp + ".expand", blocks[i].expand);
      collect_bn(out, bp + ".bn_expand", blocks[i].bn_expand);
      if (blocks[i].projection) collect_conv(out, bp + ".projection", *blocks[i].projection);
    }
    collect_dense(out, prefix + ".fc", fc);
  }
};

class ArnModel final : public Model {
 public:
  ArnModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.arn.validate();
    arn_path_length(spec_.arn.t_narrow, "narrow");
    arn_path_length(spec_.arn.t_wide, "wide");
    std::mt19937_64 rng(seed);
    narrow_ = ResidualPath::make(spec_.arn, spec_.channels, rng);
    wide_ = ResidualPath::make(spec_.arn, spec_.channels, rng);
    classifier_ = make_dense(spec_.classes, 2 * spec_.arn.fc_width(), rng);
  }

  const ModelSpec& spec() const override { return spec_; }

  Tensor forward(const Batch& batch) override {
    if (!batch.narrow.defined() || !batch.wide.defined())
      throw ShapeError("arn forward needs both narrow and wide windows");
    Tensor n = narrow_.forward(batch.narrow);
    Tensor w = wide_.forward(batch.wide);
    Tensor fused = concat_features(n, w);
    if (spec_.dropout_rate > 0.0)
      fused = dropout(fused, spec_.dropout_rate, training_, dropout_seed_++);
    return dense(fused, classifier_);
  }

  std::vector<NamedParam> named_params() override {
    std::vector<NamedParam> out;
    narrow_.collect("narrow", out);
    wide_.collect("wide", out);
    collect_dense(out, "classifier", classifier_);
    return out;
  }

  void set_training(bool training) override {
    training_ = training;
    narrow_.set_training(training);
    wide_.set_training(training);
  }

 private:
  ModelSpec spec_;
  ResidualPath narrow_, wide_;
  DenseParams classifier_;
  bool training_ = true;
  std::uint64_t dropout_seed_ = 0x5eed;
};

class ResnetModel final : public Model {
 public:
  ResnetModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.arn.validate();
    arn_path_length(spec_.input_t, "single");
    std::mt19937_64 rng(seed);
    path_ = ResidualPath::make(spec_.arn, spec_.channels, rng);
    classifier_ = make_dense(spec_.classes, spec_.arn.fc_width(), rng);
  }

  const ModelSpec& spec() const override { return spec_; }

  Tensor forward(const Batch& batch) override {
    Tensor y = path_.forward(batch.wide);
    if (spec_.dropout_rate > 0.0) y = dropout(y, spec_.dropout_rate, training_, dropout_seed_++);
    return dense(y, classifier_);
  }

  std::vector<NamedParam> named_params() override {
    std::vector<NamedParam> out;
    path_.collect("path", out);
    collect_dense(out, "classifier", classifier_);
    return out;
  }

  void set_training(bool training) override {
    training_ = training;
    path_.set_training(training);
  }

 private:
  ModelSpec spec_;
  ResidualPath path_;
  DenseParams classifier_;
  bool training_ = true;
  std::uint64_t dropout_seed_ = 0x5eed;
};

class MlpModel final : public Model {
 public:
  MlpModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    std::mt19937_64 rng(seed);
    int in = spec_.input_t * spec_.channels;
    for (int units : spec_.mlp_units) {
      layers_.push_back(make_dense(units, in, rng));
      in = units;
    }
    classifier_ = make_dense(spec_.classes, in, rng);
  }

  const ModelSpec& spec() const override { return spec_; }

  Tensor forward(const Batch& batch) override {
    Tensor y = flatten_per_row(batch.wide);
    for (auto& l : layers_) {
      y = relu(dense(y, l));
      if (spec_.dropout_rate > 0.0) y = dropout(y, spec_.dropout_rate, training_, dropout_seed_++);
    }
    return dense(y, classifier_);
  }

  std::vector<NamedParam> named_params() override {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      collect_dense(out, "dense" + std::to_string(i), layers_[i]);
    collect_dense(out, "classifier", classifier_);
    return out;
  }

  void set_training(bool training) override { training_ = training; }

 private:
  ModelSpec spec_;
  std::vector<DenseParams> layers_;
  DenseParams classifier_;
  bool training_ = true;
  std::uint64_t dropout_seed_ = 0x5eed;
};

class CnnModel final : public Model {
 public:
  CnnModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    std::mt19937_64 rng(seed);
    int t = spec_.input_t, c = spec_.channels;
    for (std::size_t i = 0; i < spec_.cnn_stages.size(); ++i) {
      const auto& st = spec_.cnn_stages[i];
      if (t < st.kernel)
        throw ConfigError("cnn stage " + std::to_string(i + 1) + ": kernel " +
                          std::to_string(st.kernel) + " exceeds input length " +
                          std::to_string(t));
      stages_.push_back(make_conv(st.filters, st.kernel, c, st.stride, rng));
      t = (t - st.kernel) / st.stride + 1;
      if (st.pool > 1) {
        if (t < st.pool)
          throw ConfigError("cnn stage " + std::to_string(i + 1) + ": pool " +
                            std::to_string(st.pool) + " exceeds length " + std::to_string(t));
        t = (t - st.pool) / st.pool + 1;
      }
      c = st.filters;
    }
    dense_ = make_dense(spec_.cnn_dense, t * c, rng);
    classifier_ = make_dense(spec_.classes, spec_.cnn_dense, rng);
  }

  const ModelSpec& spec() const override { return spec_; }

  Tensor forward(const Batch& batch) override {
    Tensor y = batch.wide;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      y = relu(conv1d(y, stages_[i]));
      const int pool = spec_.cnn_stages[i].pool;
      if (pool > 1) y = maxpool1d(y, pool, pool);
    }
    y = relu(dense(flatten_per_row(y), dense_));
    if (spec_.dropout_rate > 0.0) y = dropout(y, spec_.dropout_rate, training_, dropout_seed_++);
    return dense(y, classifier_);
  }

  std::vector<NamedParam> named_params() override {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < stages_.size(); ++i)
      collect_conv(out, "conv" + std::to_string(i), stages_[i]);
    collect_dense(out, "dense", dense_);
    collect_dense(out, "classifier", classifier_);
    return out;
  }

  void set_training(bool training) override { training_ = training; }

 private:
  ModelSpec spec_;
  std::vector<ConvLayerParams> stages_;
  DenseParams dense_, classifier_;
  bool training_ = true;
  std::uint64_t dropout_seed_ = 0x5eed;
};

// LSTM layer: cell of the given hidden size plus a per-timestep linear
// projection to the layer's output dim.
struct LstmLayer {
  LstmCellParams cell;
  DenseParams proj;

  static LstmLayer make(int input_dim, int hidden, int proj_dim, std::mt19937_64& rng) {
    LstmLayer l;
    l.cell = LstmCellParams::make(input_dim, hidden, rng);
    l.proj = make_dense(proj_dim, hidden, rng);
    return l;
  }

  std::vector<Tensor> forward(const std::vector<Tensor>& steps, int batch) {
    Tensor h(Shape{batch, cell.hidden()}, 0.0, false);
    Tensor c(Shape{batch, cell.hidden()}, 0.0, false);
    std::vector<Tensor> out;
    out.reserve(steps.size());
    for (const auto& x : steps) {
      auto r = lstm_cell_step(x, h, c, cell);
      h = r.h;
      c = r.c;
      out.push_back(dense(h, proj));
    }
    return out;
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    collect_dense(out, prefix + ".w_f", cell.w_f);
    collect_dense(out, prefix + ".u_f", cell.u_f);
    collect_dense(out, prefix + ".w_i", cell.w_i);
    collect_dense(out, prefix + ".u_i", cell.u_i);
    collect_dense(out, prefix + ".w_o", cell.w_o);
    collect_dense(out, prefix + ".u_o", cell.u_o);
    collect_dense(out, prefix + ".w_c", cell.w_c);
    collect_dense(out, prefix + ".u_c", cell.u_c);
    collect_dense(out, prefix + ".proj", proj);
  }
};

std::vector<Tensor> sequence_steps(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("sequence models need [N,T,C] input");
  const int n = x.dim(0), t = x.dim(1), c = x.dim(2);
  std::vector<Tensor> steps;
  steps.reserve(static_cast<std::size_t>(t));
  for (int i = 0; i < t; ++i)
    steps.push_back(reshape(slice_rows(x, i, i + 1), Shape{n, c}));
  return steps;
}

class LstmModel final : public Model {
 public:
  LstmModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    std::mt19937_64 rng(seed);
    int in = spec_.channels;
    for (int i = 0; i < spec_.lstm_layers; ++i) {
      layers_.push_back(LstmLayer::make(in, spec_.lstm_hidden, spec_.lstm_proj, rng));
      in = spec_.lstm_proj;
    }
    head_ = make_dense(spec_.head_dense, in, rng);
    classifier_ = make_dense(spec_.classes, spec_.head_dense, rng);
  }

  const ModelSpec& spec() const override { return spec_; }

  Tensor forward(const Batch& batch) override {
    auto steps = sequence_steps(batch.wide);
    const int n = batch.wide.dim(0);
    for (auto& l : layers_) steps = l.forward(steps, n);
    Tensor y = relu(dense(steps.back(), head_));
    return dense(y, classifier_);
  }

  std::vector<NamedParam> named_params() override {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i].collect("lstm" + std::to_string(i), out);
    collect_dense(out, "head", head_);
    collect_dense(out, "classifier", classifier_);
    return out;
  }

  void set_training(bool training) override { training_ = training; }

 private:
  ModelSpec spec_;
  std::vector<LstmLayer> layers_;
  DenseParams head_, classifier_;
  bool training_ = true;
};

class HybridModel final : public Model {
 public:
  HybridModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    std::mt19937_64 rng(seed);
    const auto& cs = spec_.hybrid_conv;
    if (spec_.input_t < cs.kernel)
      throw ConfigError("hybrid conv kernel exceeds input length");
    conv_ = make_conv(cs.filters, cs.kernel, spec_.channels, cs.stride, rng);
    int t = (spec_.input_t - cs.kernel) / cs.stride + 1;
    if (cs.pool > 1) {
      if (t < cs.pool) throw ConfigError("hybrid pool exceeds conv output length");
      t = (t - cs.pool) / cs.pool + 1;
    }
    int in = cs.filters;
    for (int i = 0; i < spec_.lstm_layers; ++i) {
      layers_.push_back(LstmLayer::make(in, spec_.hybrid_hidden, spec_.lstm_proj, rng));
      in = spec_.lstm_proj;
    }
    head_ = make_dense(spec_.head_dense, in, rng);
    classifier_ = make_dense(spec_.classes, spec_.head_dense, rng);
  }

  const ModelSpec& spec() const override { return spec_; }

  Tensor forward(const Batch& batch) override {
    Tensor y = relu(conv1d(batch.wide, conv_));
    if (spec_.hybrid_conv.pool > 1) y = maxpool1d(y, spec_.hybrid_conv.pool, spec_.hybrid_conv.pool);
    auto steps = sequence_steps(y);
    const int n = batch.wide.dim(0);
    for (auto& l : layers_) steps = l.forward(steps, n);
    Tensor z = relu(dense(steps.back(), head_));
    return dense(z, classifier_);
  }

  std::vector<NamedParam> named_params() override {
    std::vector<NamedParam> out;
    collect_conv(out, "conv", conv_);
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i].collect("lstm" + std::to_string(i), out);
    collect_dense(out, "head", head_);
    collect_dense(out, "classifier", classifier_);
    return out;
  }

  void set_training(bool training) override { training_ = training; }

 private:
  ModelSpec spec_;
  ConvLayerParams conv_;
  std::vector<LstmLayer> layers_;
  DenseParams head_, classifier_;
  bool training_ = true;
};

class AeModel final : public Model {
 public:
  AeModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    std::mt19937_64 rng(seed);
    const int f = spec_.input_t * spec_.channels;
    enc1_ = make_dense(spec_.ae_hidden, f, rng);
    enc2_ = make_dense(spec_.ae_bottleneck, spec_.ae_hidden, rng);
    dec1_ = make_dense(spec_.ae_hidden, spec_.ae_bottleneck, rng);
    dec2_ = make_dense(f, spec_.ae_hidden, rng);
    head_ = make_dense(spec_.classes, spec_.ae_bottleneck, rng);
  }

  const ModelSpec& spec() const override { return spec_; }

  Tensor encode(const Batch& batch) {
    Tensor x = flatten_per_row(batch.wide);
    return relu(dense(relu(dense(x, enc1_)), enc2_));
  }

  Tensor forward(const Batch& batch) override { return dense(encode(batch), head_); }

  bool has_pretrain_phase() const override { return true; }

  Tensor pretrain_loss(const Batch& batch) override {
    Tensor x = flatten_per_row(batch.wide);
    Tensor z = relu(dense(relu(dense(x, enc1_)), enc2_));
    Tensor recon = dense(relu(dense(z, dec1_)), dec2_);
    return mse_loss(recon, x);
  }

  void enter_head_phase() override {
    // classifier training keeps the reconstruction-trained encoder frozen
    for (auto* p : {&enc1_, &enc2_, &dec1_, &dec2_}) {
      p->weights.set_requires_grad(false);
      p->bias.set_requires_grad(false);
    }
  }

  std::vector<NamedParam> named_params() override {
    std::vector<NamedParam> out;
    collect_dense(out, "enc1", enc1_);
    collect_dense(out, "enc2", enc2_);
    collect_dense(out, "dec1", dec1_);
    collect_dense(out, "dec2", dec2_);
    collect_dense(out, "head", head_);
    return out;
  }

  void set_training(bool training) override { training_ = training; }

 private:
  ModelSpec spec_;
  DenseParams enc1_, enc2_, dec1_, dec2_, head_;
  bool training_ = true;
};

class FeatureHeadModel final : public Model {
 public:
  FeatureHeadModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    std::mt19937_64 rng(seed);
    classifier_ = make_dense(spec_.classes, spec_.channels, rng);
  }

  const ModelSpec& spec() const override { return spec_; }

  Tensor forward(const Batch& batch) override {
    if (batch.wide.rank() != 2) throw ShapeError("feature head expects [N,F] feature rows");
    return dense(batch.wide, classifier_);
  }

  std::vector<NamedParam> named_params() override {
    std::vector<NamedParam> out;
    collect_dense(out, "classifier", classifier_);
    return out;
  }

  void set_training(bool training) override { training_ = training; }

 private:
  ModelSpec spec_;
  DenseParams classifier_;
  bool training_ = true;
};

}  // namespace

void ModelSpec::validate() const {
  if (classes < 2) throw ConfigError("model needs at least 2 classes");
  if (channels < 1) throw ConfigError("model needs at least 1 input channel");
  if (input_t < 1) throw ConfigError("input window length must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("dropout rate must be in [0,1)");
  if (kind == ModelKind::Arn || kind == ModelKind::Resnet) arn.validate();
}

std::vector<Tensor> Model::parameters() {
  std::vector<Tensor> out;
  for (auto& np : named_params()) out.push_back(np.tensor);
  return out;
}

std::vector<Tensor> Model::trainable_parameters() {
  std::vector<Tensor> out;
  for (auto& np : named_params())
    if (np.tensor.requires_grad()) out.push_back(np.tensor);
  return out;
}

std::unique_ptr<Model> build_arn(const ArnConfig& cfg, int channels, int classes,
                                 std::uint64_t seed) {
  ModelSpec spec;
  spec.kind = ModelKind::Arn;
  spec.arn = cfg;
  spec.input_t = cfg.t_narrow;
  spec.channels = channels;
  spec.classes = classes;
  spec.validate();
  return std::make_unique<ArnModel>(spec, seed);
}

std::unique_ptr<Model> build_baseline(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  switch (spec.kind) {
    case ModelKind::Resnet: return std::make_unique<ResnetModel>(spec, seed);
    case ModelKind::Cnn: return std::make_unique<CnnModel>(spec, seed);
    case ModelKind::Mlp: return std::make_unique<MlpModel>(spec, seed);
    case ModelKind::Lstm: return std::make_unique<LstmModel>(spec, seed);
    case ModelKind::Hybrid: return std::make_unique<HybridModel>(spec, seed);
    case ModelKind::Ae: return std::make_unique<AeModel>(spec, seed);
    case ModelKind::FeatureHead: return std::make_unique<FeatureHeadModel>(spec, seed);
    case ModelKind::Arn:
      throw ConfigError("build_baseline does not build the two-path model; use build_arn");
  }
  throw InternalError("unhandled model kind");
}

std::unique_ptr<Model> build_model(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.kind == ModelKind::Arn) {
    spec.validate();
    return std::make_unique<ArnModel>(spec, seed);
  }
  return build_baseline(spec, seed);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train batch size must be >= 1");
  if (rho <= 0.0 || rho >= 1.0) throw ConfigError("adadelta rho must be in (0,1)");
  if (adadelta_epsilon <= 0.0) throw ConfigError("adadelta epsilon must be positive");
}

Batch make_batch(std::span<const WindowPair> pairs, std::span<const std::size_t> indices,
                 const DatasetSplit& meta) {
  if (indices.empty()) throw ConfigError("make_batch: empty index list");
  const int n = static_cast<int>(indices.size());
  const int k = meta.classes;
  Batch b;
  b.targets = Tensor(Shape{n, k}, 0.0, false);
  b.labels.reserve(static_cast<std::size_t>(n));

  const bool feature_rows = meta.t_wide == 0;
  const int wide_cols = feature_rows ? static_cast<int>(pairs[indices[0]].wide.size())
                                     : meta.t_wide * meta.channels;
  b.wide = Tensor(feature_rows ? Shape{n, wide_cols} : Shape{n, meta.t_wide, meta.channels}, 0.0,
                  false);
  if (meta.t_narrow > 0)
    b.narrow = Tensor(Shape{n, meta.t_narrow, meta.channels}, 0.0, false);

  auto wd = b.wide.data();
  auto td = b.targets.data();
  for (int i = 0; i < n; ++i) {
    const auto& p = pairs[indices[static_cast<std::size_t>(i)]];
    if (p.label < 0 || p.label >= k)
      throw ConfigError("make_batch: label " + std::to_string(p.label) + " out of range");
    if (static_cast<int>(p.wide.size()) != wide_cols)
      throw ShapeError("make_batch: inconsistent window size");
    std::copy(p.wide.begin(), p.wide.end(), wd.begin() + static_cast<std::size_t>(i) * wide_cols);
    if (b.narrow.defined()) {
      auto nd = b.narrow.data();
      const auto len = static_cast<std::size_t>(meta.t_narrow) * meta.channels;
      if (p.narrow.size() != len) throw ShapeError("make_batch: inconsistent narrow window size");
      std::copy(p.narrow.begin(), p.narrow.end(), nd.begin() + static_cast<std::size_t>(i) * len);
    }
    td[static_cast<std::size_t>(i) * k + p.label] = 1.0;
    b.labels.push_back(p.label);
  }
  return b;
}

MetricsReport evaluate(Model& model, std::span<const WindowPair> pairs,
                       const DatasetSplit& meta) {
  if (pairs.empty()) throw ConfigError("evaluate: no pairs to score");
  model.set_training(false);
  constexpr std::size_t kEvalBatch = 256;
  std::vector<int> truth, predicted;
  truth.reserve(pairs.size());
  predicted.reserve(pairs.size());
  std::vector<std::size_t> idx(kEvalBatch);
  for (std::size_t start = 0; start < pairs.size(); start += kEvalBatch) {
    const std::size_t count = std::min(kEvalBatch, pairs.size() - start);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), start);
    Batch b = make_batch(pairs, idx, meta);
    Tensor logits = model.forward(b);
    const int k = meta.classes;
    const auto ld = logits.data();
    for (std::size_t i = 0; i < count; ++i) {
      int best = 0;
      for (int c = 1; c < k; ++c)
        if (ld[i * k + c] > ld[i * k + best]) best = c;
      predicted.push_back(best);
      truth.push_back(b.labels[i]);
    }
  }
  return evaluate_labels(truth, predicted, meta.classes);
}

namespace {

double run_epoch(Model& model, const DatasetSplit& split, const TrainConfig& cfg,
                 AdadeltaOptimizer& opt, std::mt19937_64& rng, int epoch, bool pretrain) {
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);

  double loss_sum = 0.0;
  std::size_t seen = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t count =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
    std::span<const std::size_t> chunk(order.data() + start, count);
    Batch b = make_batch(split.train, chunk, split);
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = pretrain ? model.pretrain_loss(b)
                      : softmax_cross_entropy(model.forward(b), b.targets);
    }
    const double lv = loss.value();
    if (!std::isfinite(lv))
      throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(start / cfg.batch_size));
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
    loss_sum += lv * static_cast<double>(count);
    seen += count;
  }
  return loss_sum / static_cast<double>(seen);
}

}  // namespace

TrainHistory train(Model& model, const DatasetSplit& split, const TrainConfig& cfg) {
  cfg.validate();
  if (split.train.empty()) throw ConfigError("train: empty training split");

  TrainHistory hist;
  std::mt19937_64 rng(cfg.seed);

  if (model.has_pretrain_phase()) {
    const int pe = cfg.pretrain_epochs < 0 ? cfg.epochs : cfg.pretrain_epochs;
    AdadeltaOptimizer opt(model.trainable_parameters(), cfg.rho, cfg.adadelta_epsilon, cfg.lr);
    model.set_training(true);
    for (int e = 0; e < pe; ++e)
      hist.pretrain_loss.push_back(run_epoch(model, split, cfg, opt, rng, e, /*pretrain=*/true));
    model.enter_head_phase();
  }

  AdadeltaOptimizer opt(model.trainable_parameters(), cfg.rho, cfg.adadelta_epsilon, cfg.lr);
  for (int e = 0; e < cfg.epochs; ++e) {
    model.set_training(true);
    EpochStats s;
    s.epoch = e;
    s.loss = run_epoch(model, split, cfg, opt, rng, e, /*pretrain=*/false);
    s.train_f1 = evaluate(model, split.train, split).weighted_f1;
    s.test_f1 = split.test.empty() ? 0.0 : evaluate(model, split.test, split).weighted_f1;
    hist.epochs.push_back(s);
  }
  model.set_training(false);
  return hist;
}

}  // namespace arn
