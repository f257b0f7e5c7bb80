#include "arn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

namespace arn {

namespace {

double dot(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double* y, const double* x, double a, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

// Sequence view: [T, C] or [N, T, C] with N = 1 for the unbatched case.
struct Seq3 {
  int n, t, c;
  bool batched;
};

Seq3 seq_view(const Tensor& x, const char* op) {
  if (x.rank() == 2) return {1, x.dim(0), x.dim(1), false};
  if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2), true};
  throw ShapeError(std::string(op) + ": expected [T,C] or [N,T,C], got " + shape_str(x.shape()));
}

// Row view: [C] or [N, C] (also flattens higher ranks to rows x last-dim).
struct Rows {
  int n, c;
};

Rows row_view(const Tensor& x) {
  const auto& s = x.shape();
  if (s.empty()) throw ShapeError("expected at least rank-1 tensor");
  int c = s.back();
  if (c < 1) throw ShapeError("last axis must be non-empty, got " + shape_str(s));
  int n = static_cast<int>(x.size() / c);
  return {n, c};
}

bool tape_should_record(bool any_input_grad) {
  return any_input_grad && active_tape() != nullptr;
}

Tensor make_output(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), 0.0, requires_grad);
}

void finish(Tensor& out, bool recorded, std::function<void()> backward_fn) {
  if (recorded) {
    out.node()->tape_id = active_tape()->id();
    active_tape()->record(std::move(backward_fn));
  }
}

}  // namespace

void ConvLayerParams::validate() const {
  if (!kernels.defined() || kernels.rank() != 3)
    throw ShapeError("conv kernels must be [K,s,C_in]");
  if (kernels.dim(0) < 1 || kernels.dim(1) < 1 || kernels.dim(2) < 1)
    throw ShapeError("conv kernels must have positive extents, got " + shape_str(kernels.shape()));
  if (!bias.defined() || bias.rank() != 1 || bias.dim(0) != kernels.dim(0))
    throw ShapeError("conv bias length must equal kernel count");
  if (stride < 1) throw ConfigError("conv stride must be >= 1");
}

void DenseParams::validate() const {
  if (!weights.defined() || weights.rank() != 2) throw ShapeError("dense weights must be [out,in]");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weights.dim(0)))
    throw ShapeError("dense bias length must equal out dim");
}

BatchNormState BatchNormState::make(int channels, double epsilon) {
  BatchNormState s;
  s.epsilon = epsilon;
  s.gamma = Tensor(Shape{channels}, 1.0, true);
  s.beta = Tensor(Shape{channels}, 0.0, true);
  s.running_mean = Tensor(Shape{channels}, 0.0, false);
  s.running_var = Tensor(Shape{channels}, 1.0, false);
  return s;
}

void BatchNormState::validate() const {
  const int c = gamma.dim(0);
  if (beta.dim(0) != c || running_mean.dim(0) != c || running_var.dim(0) != c)
    throw ShapeError("batchnorm state tensors must share channel count");
  if (momentum <= 0.0 || momentum >= 1.0) throw ConfigError("batchnorm momentum must be in (0,1)");
  if (epsilon <= 0.0) throw ConfigError("batchnorm epsilon must be positive");
  for (double v : running_var.data())
    if (v < 0.0) throw NumericError("negative running variance in batchnorm state");
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation kind: " + name);
}

Tensor conv1d(const Tensor& input, const ConvLayerParams& params) {
  params.validate();
  const Seq3 v = seq_view(input, "conv1d");
  const int K = params.out_channels(), s = params.kernel_size(), C = params.in_channels();
  const int stride = params.stride;
  if (v.c != C)
    throw ShapeError("conv1d: input channels " + std::to_string(v.c) + " != kernel channels " +
                     std::to_string(C));
  if (v.t < s)
    throw ShapeError("conv1d: window of size " + std::to_string(s) + " longer than input length " +
                     std::to_string(v.t));
  input.require_finite("conv1d input");

  const int tp = (v.t - s) / stride + 1;
  const int sC = s * C;
  const bool rg = input.requires_grad() || params.kernels.requires_grad() ||
                  params.bias.requires_grad();
  Tensor out = make_output(v.batched ? Shape{v.n, tp, K} : Shape{tp, K}, rg);

  const double* x = input.data().data();
  const double* w = params.kernels.data().data();
  const double* b = params.bias.data().data();
  double* y = out.data().data();
  for (int n = 0; n < v.n; ++n) {
    const double* xn = x + static_cast<std::size_t>(n) * v.t * C;
    double* yn = y + static_cast<std::size_t>(n) * tp * K;
    for (int t = 0; t < tp; ++t) {
      const double* xr = xn + static_cast<std::size_t>(t) * stride * C;
      double* yr = yn + static_cast<std::size_t>(t) * K;
      for (int k = 0; k < K; ++k) yr[k] = dot(xr, w + static_cast<std::size_t>(k) * sC, sC) + b[k];
    }
  }

  if (tape_should_record(rg)) {
    auto xin = input, kern = params.kernels, bias = params.bias, o = out;
    finish(out, true, [xin, kern, bias, o, v, K, s, C, sC, tp, stride]() mutable {
      if (!o.has_grad()) return;
      const double* go = o.grad().data();
      const double* x = xin.data().data();
      const double* w = kern.data().data();
      if (kern.requires_grad() || bias.requires_grad()) {
        kern.ensure_grad();
        bias.ensure_grad();
        double* gw = kern.grad().data();
        double* gb = bias.grad().data();
        for (int n = 0; n < v.n; ++n) {
          const double* xn = x + static_cast<std::size_t>(n) * v.t * C;
          const double* gn = go + static_cast<std::size_t>(n) * tp * K;
          for (int t = 0; t < tp; ++t) {
            const double* xr = xn + static_cast<std::size_t>(t) * stride * C;
            const double* gr = gn + static_cast<std::size_t>(t) * K;
            for (int k = 0; k < K; ++k) {
              const double g = gr[k];
              if (g == 0.0) continue;
              gb[k] += g;
              axpy(gw + static_cast<std::size_t>(k) * sC, xr, g, sC);
            }
          }
        }
      }
      if (xin.requires_grad()) {
        xin.ensure_grad();
        double* gx = xin.grad().data();
        for (int n = 0; n < v.n; ++n) {
          double* gxn = gx + static_cast<std::size_t>(n) * v.t * C;
          const double* gn = go + static_cast<std::size_t>(n) * tp * K;
          for (int t = 0; t < tp; ++t) {
            double* gxr = gxn + static_cast<std::size_t>(t) * stride * C;
            const double* gr = gn + static_cast<std::size_t>(t) * K;
            for (int k = 0; k < K; ++k) {
              const double g = gr[k];
              if (g == 0.0) continue;
              axpy(gxr, w + static_cast<std::size_t>(k) * sC, g, sC);
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor activation(const Tensor& x, Activation kind) {
  const bool rg = x.requires_grad();
  Tensor out = make_output(x.shape(), rg);
  const auto xs = x.data();
  auto ys = out.data();
  switch (kind) {
    case Activation::Relu:
      for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = xs[i] > 0.0 ? xs[i] : 0.0;
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = 1.0 / (1.0 + std::exp(-xs[i]));
      break;
    case Activation::Tanh:
      for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = std::tanh(xs[i]);
      break;
  }
  if (tape_should_record(rg)) {
    auto xin = x, o = out;
    finish(out, true, [xin, o, kind]() mutable {
      if (!o.has_grad()) return;
      xin.ensure_grad();
      const double* go = o.grad().data();
      const double* y = o.data().data();
      double* gx = xin.grad().data();
      const std::size_t n = o.data().size();
      switch (kind) {
        case Activation::Relu:
          for (std::size_t i = 0; i < n; ++i)
            if (y[i] > 0.0) gx[i] += go[i];
          break;
        case Activation::Sigmoid:
          for (std::size_t i = 0; i < n; ++i) gx[i] += go[i] * y[i] * (1.0 - y[i]);
          break;
        case Activation::Tanh:
          for (std::size_t i = 0; i < n; ++i) gx[i] += go[i] * (1.0 - y[i] * y[i]);
          break;
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& x) { return activation(x, Activation::Relu); }
Tensor sigmoid(const Tensor& x) { return activation(x, Activation::Sigmoid); }
Tensor tanh_op(const Tensor& x) { return activation(x, Activation::Tanh); }

Tensor maxpool1d(const Tensor& x, int width, int stride) {
  if (width < 1 || stride < 1) throw ConfigError("maxpool1d: width and stride must be >= 1");
  const Seq3 v = seq_view(x, "maxpool1d");
  if (v.t < width)
    throw ShapeError("maxpool1d: width " + std::to_string(width) + " exceeds input length " +
                     std::to_string(v.t));
  const int tp = (v.t - width) / stride + 1;
  const bool rg = x.requires_grad();
  Tensor out = make_output(v.batched ? Shape{v.n, tp, v.c} : Shape{tp, v.c}, rg);

  const double* xd = x.data().data();
  double* y = out.data().data();
  std::vector<std::int64_t> argmax(rg ? out.data().size() : 0);
  for (int n = 0; n < v.n; ++n) {
    const std::size_t xbase = static_cast<std::size_t>(n) * v.t * v.c;
    const std::size_t ybase = static_cast<std::size_t>(n) * tp * v.c;
    for (int t = 0; t < tp; ++t) {
      for (int c = 0; c < v.c; ++c) {
        std::size_t idx = xbase + static_cast<std::size_t>(t) * stride * v.c + c;
        double best = xd[idx];
        std::size_t best_idx = idx;
        for (int i = 1; i < width; ++i) {
          const std::size_t j = idx + static_cast<std::size_t>(i) * v.c;
          if (xd[j] > best) {  // strict: first occurrence wins ties
            best = xd[j];
            best_idx = j;
          }
        }
        const std::size_t oi = ybase + static_cast<std::size_t>(t) * v.c + c;
        y[oi] = best;
        if (rg) argmax[oi] = static_cast<std::int64_t>(best_idx);
      }
    }
  }

  if (tape_should_record(rg)) {
    auto xin = x, o = out;
    finish(out, true, [xin, o, argmax = std::move(argmax)]() mutable {
      if (!o.has_grad()) return;
      xin.ensure_grad();
      const double* go = o.grad().data();
      double* gx = xin.grad().data();
      for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += go[i];
    });
  }
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  const Seq3 v = seq_view(x, "global_avg_pool");
  if (v.t < 1) throw ShapeError("global_avg_pool: empty time axis");
  const bool rg = x.requires_grad();
  Tensor out = make_output(v.batched ? Shape{v.n, v.c} : Shape{v.c}, rg);
  const double* xd = x.data().data();
  double* y = out.data().data();
  for (int n = 0; n < v.n; ++n) {
    const double* xn = xd + static_cast<std::size_t>(n) * v.t * v.c;
    double* yn = y + static_cast<std::size_t>(n) * v.c;
    for (int c = 0; c < v.c; ++c) {
      double acc = 0.0;
      for (int t = 0; t < v.t; ++t) acc += xn[static_cast<std::size_t>(t) * v.c + c];
      yn[c] = acc / v.t;
    }
  }
  if (tape_should_record(rg)) {
    auto xin = x, o = out;
    finish(out, true, [xin, o, v]() mutable {
      if (!o.has_grad()) return;
      xin.ensure_grad();
      const double* go = o.grad().data();
      double* gx = xin.grad().data();
      const double inv = 1.0 / v.t;
      for (int n = 0; n < v.n; ++n)
        for (int t = 0; t < v.t; ++t)
          for (int c = 0; c < v.c; ++c)
            gx[(static_cast<std::size_t>(n) * v.t + t) * v.c + c] +=
                go[static_cast<std::size_t>(n) * v.c + c] * inv;
    });
  }
  return out;
}

Tensor dense(const Tensor& x, const DenseParams& params) {
  params.validate();
  if (x.rank() != 1 && x.rank() != 2)
    throw ShapeError("dense: expected [in] or [N,in], got " + shape_str(x.shape()));
  const int in = params.in_dim(), outd = params.out_dim();
  const int last = x.dim(x.rank() - 1);
  if (last != in)
    throw ShapeError("dense: input dim " + std::to_string(last) + " != weight in dim " +
                     std::to_string(in));
  const int N = x.rank() == 2 ? x.dim(0) : 1;
  const bool has_bias = params.bias.defined();
  const bool rg = x.requires_grad() || params.weights.requires_grad() ||
                  (has_bias && params.bias.requires_grad());
  Tensor out = make_output(x.rank() == 2 ? Shape{N, outd} : Shape{outd}, rg);

  const double* xd = x.data().data();
  const double* w = params.weights.data().data();
  double* y = out.data().data();
  for (int n = 0; n < N; ++n) {
    const double* xn = xd + static_cast<std::size_t>(n) * in;
    double* yn = y + static_cast<std::size_t>(n) * outd;
    for (int o = 0; o < outd; ++o)
      yn[o] = dot(xn, w + static_cast<std::size_t>(o) * in, in) +
              (has_bias ? params.bias.data()[o] : 0.0);
  }

  if (tape_should_record(rg)) {
    auto xin = x, wt = params.weights, bt = params.bias, o = out;
    finish(out, true, [xin, wt, bt, o, N, in, outd, has_bias]() mutable {
      if (!o.has_grad()) return;
      const double* go = o.grad().data();
      const double* xd = xin.data().data();
      const double* w = wt.data().data();
      if (wt.requires_grad()) {
        wt.ensure_grad();
        double* gw = wt.grad().data();
        for (int n = 0; n < N; ++n) {
          const double* xn = xd + static_cast<std::size_t>(n) * in;
          const double* gn = go + static_cast<std::size_t>(n) * outd;
          for (int od = 0; od < outd; ++od)
            if (gn[od] != 0.0) axpy(gw + static_cast<std::size_t>(od) * in, xn, gn[od], in);
        }
      }
      if (has_bias && bt.requires_grad()) {
        bt.ensure_grad();
        double* gb = bt.grad().data();
        for (int n = 0; n < N; ++n)
          for (int od = 0; od < outd; ++od) gb[od] += go[static_cast<std::size_t>(n) * outd + od];
      }
      if (xin.requires_grad()) {
        xin.ensure_grad();
        double* gx = xin.grad().data();
        for (int n = 0; n < N; ++n) {
          double* gxn = gx + static_cast<std::size_t>(n) * in;
          const double* gn = go + static_cast<std::size_t>(n) * outd;
          for (int od = 0; od < outd; ++od)
            if (gn[od] != 0.0) axpy(gxn, w + static_cast<std::size_t>(od) * in, gn[od], in);
        }
      }
    });
  }
  return out;
}

Tensor batchnorm(const Tensor& x, BatchNormState& state) {
  state.validate();
  const Rows v = row_view(x);
  if (v.c != state.channels())
    throw ShapeError("batchnorm: input channels " + std::to_string(v.c) +
                     " != state channels " + std::to_string(state.channels()));
  const int M = v.n, C = v.c;
  const bool rg = x.requires_grad() || state.gamma.requires_grad() || state.beta.requires_grad();
  Tensor out = make_output(x.shape(), rg);

  const double* xd = x.data().data();
  const double* gm = state.gamma.data().data();
  const double* bt = state.beta.data().data();
  double* y = out.data().data();

  std::vector<double> mean(C), rstd(C);
  if (state.training) {
    if (M < 2) throw ShapeError("batchnorm: training mode needs at least 2 rows per channel");
    std::vector<double> var(C, 0.0);
    for (int c = 0; c < C; ++c) mean[c] = 0.0;
    for (int r = 0; r < M; ++r)
      for (int c = 0; c < C; ++c) mean[c] += xd[static_cast<std::size_t>(r) * C + c];
    for (int c = 0; c < C; ++c) mean[c] /= M;
    for (int r = 0; r < M; ++r)
      for (int c = 0; c < C; ++c) {
        const double d = xd[static_cast<std::size_t>(r) * C + c] - mean[c];
        var[c] += d * d;
      }
    for (int c = 0; c < C; ++c) {
      var[c] /= M;
      rstd[c] = 1.0 / std::sqrt(var[c] + state.epsilon);
    }
    auto rm = state.running_mean.data();
    auto rv = state.running_var.data();
    for (int c = 0; c < C; ++c) {
      rm[c] = state.momentum * rm[c] + (1.0 - state.momentum) * mean[c];
      rv[c] = state.momentum * rv[c] + (1.0 - state.momentum) * var[c];
    }
  } else {
    const auto rm = state.running_mean.data();
    const auto rv = state.running_var.data();
    for (int c = 0; c < C; ++c) {
      mean[c] = rm[c];
      rstd[c] = 1.0 / std::sqrt(rv[c] + state.epsilon);
    }
  }

  std::vector<double> xhat(rg ? static_cast<std::size_t>(M) * C : 0);
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < C; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * C + c;
      const double xh = (xd[i] - mean[c]) * rstd[c];
      if (rg) xhat[i] = xh;
      y[i] = gm[c] * xh + bt[c];
    }

  if (tape_should_record(rg)) {
    auto xin = x, gamma = state.gamma, beta = state.beta, o = out;
    const bool train_stats = state.training;
    finish(out, true,
           [xin, gamma, beta, o, M, C, train_stats, rstd = std::move(rstd),
            xhat = std::move(xhat)]() mutable {
             if (!o.has_grad()) return;
             const double* go = o.grad().data();
             const double* gm = gamma.data().data();
             std::vector<double> s1(C, 0.0), s2(C, 0.0);
             for (int r = 0; r < M; ++r)
               for (int c = 0; c < C; ++c) {
                 const std::size_t i = static_cast<std::size_t>(r) * C + c;
                 s1[c] += go[i];
                 s2[c] += go[i] * xhat[i];
               }
             if (gamma.requires_grad()) {
               gamma.ensure_grad();
               beta.ensure_grad();
               double* gg = gamma.grad().data();
               double* gb = beta.grad().data();
               for (int c = 0; c < C; ++c) {
                 gg[c] += s2[c];
                 gb[c] += s1[c];
               }
             }
             if (xin.requires_grad()) {
               xin.ensure_grad();
               double* gx = xin.grad().data();
               for (int r = 0; r < M; ++r)
                 for (int c = 0; c < C; ++c) {
                   const std::size_t i = static_cast<std::size_t>(r) * C + c;
                   if (train_stats) {
                     gx[i] += gm[c] * rstd[c] * (go[i] - s1[c] / M - xhat[i] * s2[c] / M);
                   } else {
                     gx[i] += gm[c] * rstd[c] * go[i];
                   }
                 }
             }
           });
  }
  return out;
}

Tensor concat_features(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() < 1 || a.rank() > 2)
    throw ShapeError("concat_features: expected matching rank-1 or rank-2 inputs, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const int N = a.rank() == 2 ? a.dim(0) : 1;
  if (a.rank() == 2 && b.dim(0) != N)
    throw ShapeError("concat_features: batch mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const int A = a.dim(a.rank() - 1), B = b.dim(b.rank() - 1);
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = make_output(a.rank() == 2 ? Shape{N, A + B} : Shape{A + B}, rg);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* y = out.data().data();
  for (int n = 0; n < N; ++n) {
    if (A)
      std::memcpy(y + static_cast<std::size_t>(n) * (A + B), ad + static_cast<std::size_t>(n) * A,
                  sizeof(double) * A);
    if (B)
      std::memcpy(y + static_cast<std::size_t>(n) * (A + B) + A,
                  bd + static_cast<std::size_t>(n) * B, sizeof(double) * B);
  }
  if (tape_should_record(rg)) {
    auto at = a, btt = b, o = out;
    finish(out, true, [at, btt, o, N, A, B]() mutable {
      if (!o.has_grad()) return;
      const double* go = o.grad().data();
      if (at.requires_grad()) {
        at.ensure_grad();
        double* ga = at.grad().data();
        for (int n = 0; n < N; ++n)
          for (int i = 0; i < A; ++i)
            ga[static_cast<std::size_t>(n) * A + i] +=
                go[static_cast<std::size_t>(n) * (A + B) + i];
      }
      if (btt.requires_grad()) {
        btt.ensure_grad();
        double* gb = btt.grad().data();
        for (int n = 0; n < N; ++n)
          for (int i = 0; i < B; ++i)
            gb[static_cast<std::size_t>(n) * B + i] +=
                go[static_cast<std::size_t>(n) * (A + B) + A + i];
      }
    });
  }
  return out;
}

Tensor softmax(const Tensor& z) {
  const Rows v = row_view(z);
  z.require_finite("softmax logits");
  const bool rg = z.requires_grad();
  Tensor out = make_output(z.shape(), rg);
  const double* zd = z.data().data();
  double* p = out.data().data();
  for (int n = 0; n < v.n; ++n) {
    const double* zn = zd + static_cast<std::size_t>(n) * v.c;
    double* pn = p + static_cast<std::size_t>(n) * v.c;
    double mx = zn[0];
    for (int k = 1; k < v.c; ++k) mx = std::max(mx, zn[k]);
    double s = 0.0;
    for (int k = 0; k < v.c; ++k) {
      pn[k] = std::exp(zn[k] - mx);
      s += pn[k];
    }
    for (int k = 0; k < v.c; ++k) pn[k] /= s;
  }
  if (tape_should_record(rg)) {
    auto zin = z, o = out;
    finish(out, true, [zin, o, v]() mutable {
      if (!o.has_grad()) return;
      zin.ensure_grad();
      const double* go = o.grad().data();
      const double* p = o.data().data();
      double* gz = zin.grad().data();
      for (int n = 0; n < v.n; ++n) {
        const std::size_t base = static_cast<std::size_t>(n) * v.c;
        double inner = 0.0;
        for (int k = 0; k < v.c; ++k) inner += go[base + k] * p[base + k];
        for (int k = 0; k < v.c; ++k) gz[base + k] += p[base + k] * (go[base + k] - inner);
      }
    });
  }
  return out;
}

namespace {
constexpr double kLogClamp = 1e-12;
}

Tensor cross_entropy_loss(const Tensor& p, const Tensor& q) {
  if (p.shape() != q.shape())
    throw ShapeError("cross_entropy_loss: shape mismatch " + shape_str(p.shape()) + " vs " +
                     shape_str(q.shape()));
  const Rows v = row_view(p);
  const bool rg = p.requires_grad() || q.requires_grad();
  const double* pd = p.data().data();
  const double* qd = q.data().data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.data().size(); ++i)
    acc -= qd[i] * std::log(std::max(pd[i], kLogClamp));
  Tensor out(Shape{1}, std::vector<double>{acc / v.n}, rg);
  if (tape_should_record(rg)) {
    auto pt = p, qt = q, o = out;
    finish(out, true, [pt, qt, o, v]() mutable {
      if (!o.has_grad()) return;
      const double gl = o.grad()[0] / v.n;
      const double* pd = pt.data().data();
      const double* qd = qt.data().data();
      if (pt.requires_grad()) {
        pt.ensure_grad();
        double* gp = pt.grad().data();
        for (std::size_t i = 0; i < pt.data().size(); ++i)
          gp[i] -= gl * qd[i] / std::max(pd[i], kLogClamp);
      }
      if (qt.requires_grad()) {
        qt.ensure_grad();
        double* gq = qt.grad().data();
        for (std::size_t i = 0; i < qt.data().size(); ++i)
          gq[i] -= gl * std::log(std::max(pd[i], kLogClamp));
      }
    });
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& q) {
  if (logits.shape() != q.shape())
    throw ShapeError("softmax_cross_entropy: shape mismatch " + shape_str(logits.shape()) +
                     " vs " + shape_str(q.shape()));
  const Rows v = row_view(logits);
  logits.require_finite("softmax_cross_entropy logits");
  const bool rg = logits.requires_grad() || q.requires_grad();

  std::vector<double> p(logits.data().size());
  const double* zd = logits.data().data();
  const double* qd = q.data().data();
  double acc = 0.0;
  for (int n = 0; n < v.n; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * v.c;
    double mx = zd[base];
    for (int k = 1; k < v.c; ++k) mx = std::max(mx, zd[base + k]);
    double s = 0.0;
    for (int k = 0; k < v.c; ++k) {
      p[base + k] = std::exp(zd[base + k] - mx);
      s += p[base + k];
    }
    for (int k = 0; k < v.c; ++k) {
      p[base + k] /= s;
      acc -= qd[base + k] * std::log(std::max(p[base + k], kLogClamp));
    }
  }
  Tensor out(Shape{1}, std::vector<double>{acc / v.n}, rg);
  if (tape_should_record(rg)) {
    auto zt = logits, qt = q, o = out;
    finish(out, true, [zt, qt, o, v, p = std::move(p)]() mutable {
      if (!o.has_grad()) return;
      const double gl = o.grad()[0] / v.n;
      const double* qd = qt.data().data();
      if (zt.requires_grad()) {
        zt.ensure_grad();
        double* gz = zt.grad().data();
        for (std::size_t i = 0; i < p.size(); ++i) gz[i] += gl * (p[i] - qd[i]);
      }
      if (qt.requires_grad()) {
        qt.ensure_grad();
        double* gq = qt.grad().data();
        for (std::size_t i = 0; i < p.size(); ++i)
          gq[i] -= gl * std::log(std::max(p[i], kLogClamp));
      }
    });
  }
  return out;
}

Tensor mse_loss(const Tensor& x, const Tensor& target) {
  if (x.shape() != target.shape())
    throw ShapeError("mse_loss: shape mismatch " + shape_str(x.shape()) + " vs " +
                     shape_str(target.shape()));
  const bool rg = x.requires_grad() || target.requires_grad();
  const double* xd = x.data().data();
  const double* td = target.data().data();
  const std::size_t n = x.data().size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = xd[i] - td[i];
    acc += d * d;
  }
  Tensor out(Shape{1}, std::vector<double>{acc / static_cast<double>(n)}, rg);
  if (tape_should_record(rg)) {
    auto xt = x, tt = target, o = out;
    finish(out, true, [xt, tt, o, n]() mutable {
      if (!o.has_grad()) return;
      const double gl = o.grad()[0] * 2.0 / static_cast<double>(n);
      const double* xd = xt.data().data();
      const double* td = tt.data().data();
      if (xt.requires_grad()) {
        xt.ensure_grad();
        double* g = xt.grad().data();
        for (std::size_t i = 0; i < n; ++i) g[i] += gl * (xd[i] - td[i]);
      }
      if (tt.requires_grad()) {
        tt.ensure_grad();
        double* g = tt.grad().data();
        for (std::size_t i = 0; i < n; ++i) g[i] -= gl * (xd[i] - td[i]);
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, bool training, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout rate must be in [0,1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;  // identity, bit-exact

  const bool rg = x.requires_grad();
  Tensor out = make_output(x.shape(), rg);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double scale = 1.0 / (1.0 - rate);
  const double* xd = x.data().data();
  double* y = out.data().data();
  std::vector<double> factor(x.data().size());
  for (std::size_t i = 0; i < factor.size(); ++i) {
    factor[i] = u(rng) < rate ? 0.0 : scale;
    y[i] = xd[i] * factor[i];
  }
  if (tape_should_record(rg)) {
    auto xt = x, o = out;
    finish(out, true, [xt, o, factor = std::move(factor)]() mutable {
      if (!o.has_grad()) return;
      xt.ensure_grad();
      const double* go = o.grad().data();
      double* gx = xt.grad().data();
      for (std::size_t i = 0; i < factor.size(); ++i) gx[i] += go[i] * factor[i];
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = make_output(a.shape(), rg);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* y = out.data().data();
  for (std::size_t i = 0; i < a.data().size(); ++i) y[i] = ad[i] + bd[i];
  if (tape_should_record(rg)) {
    auto at = a, bt = b, o = out;
    finish(out, true, [at, bt, o]() mutable {
      if (!o.has_grad()) return;
      const double* go = o.grad().data();
      if (at.requires_grad()) {
        at.ensure_grad();
        double* g = at.grad().data();
        for (std::size_t i = 0; i < at.data().size(); ++i) g[i] += go[i];
      }
      if (bt.requires_grad()) {
        bt.ensure_grad();
        double* g = bt.grad().data();
        for (std::size_t i = 0; i < bt.data().size(); ++i) g[i] += go[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = make_output(a.shape(), rg);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* y = out.data().data();
  for (std::size_t i = 0; i < a.data().size(); ++i) y[i] = ad[i] * bd[i];
  if (tape_should_record(rg)) {
    auto at = a, bt = b, o = out;
    finish(out, true, [at, bt, o]() mutable {
      if (!o.has_grad()) return;
      const double* go = o.grad().data();
      const double* ad = at.data().data();
      const double* bd = bt.data().data();
      if (at.requires_grad()) {
        at.ensure_grad();
        double* g = at.grad().data();
        for (std::size_t i = 0; i < at.data().size(); ++i) g[i] += go[i] * bd[i];
      }
      if (bt.requires_grad()) {
        bt.ensure_grad();
        double* g = bt.grad().data();
        for (std::size_t i = 0; i < bt.data().size(); ++i) g[i] += go[i] * ad[i];
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  const bool rg = x.requires_grad();
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out(Shape{1}, std::vector<double>{acc}, rg);
  if (tape_should_record(rg)) {
    auto xt = x, o = out;
    finish(out, true, [xt, o]() mutable {
      if (!o.has_grad()) return;
      xt.ensure_grad();
      const double g = o.grad()[0];
      double* gx = xt.grad().data();
      for (std::size_t i = 0; i < xt.data().size(); ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor pad1d(const Tensor& x, int left, int right) {
  if (left < 0 || right < 0) throw ConfigError("pad1d: negative padding");
  if (left == 0 && right == 0) return x;
  const Seq3 v = seq_view(x, "pad1d");
  const int tp = v.t + left + right;
  const bool rg = x.requires_grad();
  Tensor out = make_output(v.batched ? Shape{v.n, tp, v.c} : Shape{tp, v.c}, rg);
  const double* xd = x.data().data();
  double* y = out.data().data();
  for (int n = 0; n < v.n; ++n)
    std::memcpy(y + (static_cast<std::size_t>(n) * tp + left) * v.c,
                xd + static_cast<std::size_t>(n) * v.t * v.c,
                sizeof(double) * static_cast<std::size_t>(v.t) * v.c);
  if (tape_should_record(rg)) {
    auto xt = x, o = out;
    finish(out, true, [xt, o, v, tp, left]() mutable {
      if (!o.has_grad()) return;
      xt.ensure_grad();
      const double* go = o.grad().data();
      double* gx = xt.grad().data();
      for (int n = 0; n < v.n; ++n)
        for (int t = 0; t < v.t; ++t)
          for (int c = 0; c < v.c; ++c)
            gx[(static_cast<std::size_t>(n) * v.t + t) * v.c + c] +=
                go[(static_cast<std::size_t>(n) * tp + left + t) * v.c + c];
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& x, int r0, int r1) {
  const Seq3 v = seq_view(x, "slice_rows");
  if (r0 < 0 || r1 > v.t || r0 >= r1)
    throw ShapeError("slice_rows: bad range [" + std::to_string(r0) + "," + std::to_string(r1) +
                     ") for length " + std::to_string(v.t));
  const int tp = r1 - r0;
  const bool rg = x.requires_grad();
  Tensor out = make_output(v.batched ? Shape{v.n, tp, v.c} : Shape{tp, v.c}, rg);
  const double* xd = x.data().data();
  double* y = out.data().data();
  for (int n = 0; n < v.n; ++n)
    std::memcpy(y + static_cast<std::size_t>(n) * tp * v.c,
                xd + (static_cast<std::size_t>(n) * v.t + r0) * v.c,
                sizeof(double) * static_cast<std::size_t>(tp) * v.c);
  if (tape_should_record(rg)) {
    auto xt = x, o = out;
    finish(out, true, [xt, o, v, tp, r0]() mutable {
      if (!o.has_grad()) return;
      xt.ensure_grad();
      const double* go = o.grad().data();
      double* gx = xt.grad().data();
      for (int n = 0; n < v.n; ++n)
        for (int t = 0; t < tp; ++t)
          for (int c = 0; c < v.c; ++c)
            gx[(static_cast<std::size_t>(n) * v.t + r0 + t) * v.c + c] +=
                go[(static_cast<std::size_t>(n) * tp + t) * v.c + c];
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_size(new_shape) != x.size())
    throw ShapeError("reshape: size mismatch " + shape_str(x.shape()) + " -> " +
                     shape_str(new_shape));
  const bool rg = x.requires_grad();
  Tensor out(new_shape, std::vector<double>(x.data().begin(), x.data().end()), rg);
  if (tape_should_record(rg)) {
    auto xt = x, o = out;
    finish(out, true, [xt, o]() mutable {
      if (!o.has_grad()) return;
      xt.ensure_grad();
      const double* go = o.grad().data();
      double* gx = xt.grad().data();
      for (std::size_t i = 0; i < xt.data().size(); ++i) gx[i] += go[i];
    });
  }
  return out;
}

Tensor flatten_per_row(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("flatten_per_row: rank must be >= 2");
  const int n = x.dim(0);
  return reshape(x, Shape{n, static_cast<int>(x.size() / n)});
}

}  // namespace arn
