#pragma once

#include "fgnic/core.hpp"
#include "fgnic/random.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace fgnic::nn {

/// Learnable tensor with its accumulated gradient.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  bool frozen = false;
  /// Non-learned state (running statistics): checkpointed and hashed, never
  /// optimised or counted as a parameter. Buffers stay frozen.
  bool buffer = false;

  Parameter() = default;
  Parameter(std::string n, Index rows, Index cols)
      : name(std::move(n)), value(Matrix<Scalar>::Zero(rows, cols)), grad(Matrix<Scalar>::Zero(rows, cols)) {}

  Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }

  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) zero_grad();
    grad += g;
  }

  void init_normal(Rng& rng, double stddev) {
    std::normal_distribution<double> normal(0.0, stddev);
    for (Index i = 0; i < value.size(); ++i) value.data()[i] = static_cast<Scalar>(normal(rng));
  }
};

template <typename Scalar>
using ParamList = std::vector<Parameter<Scalar>*>;
template <typename Scalar>
using ConstParamList = std::vector<const Parameter<Scalar>*>;

/// Architectural description of one layer, consumed by cost accounting.
struct LayerDesc {
  enum class Kind { conv, fully_connected, pool, norm, activation, global_pool, block_begin, block_end, other };
  Kind kind = Kind::other;
  std::string name;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int in = 0;
  int out = 0;
  /// Side branch (residual shortcut) fed by the enclosing block's input.
  bool from_block_input = false;
};

// Elementwise activations operate on any matrix and are stateless.

template <typename Scalar>
Matrix<Scalar> relu(const Matrix<Scalar>& x) {
  return x.cwiseMax(Scalar(0));
}

/// Gradient through a ReLU given its forward output.
template <typename Scalar>
Matrix<Scalar> relu_backward(const Matrix<Scalar>& dy, const Matrix<Scalar>& y) {
  return (y.array() > Scalar(0)).select(dy, Scalar(0));
}

template <typename Scalar>
Matrix<Scalar> sigmoid(const Matrix<Scalar>& x) {
  return (Scalar(1) / (Scalar(1) + (-x.array()).exp())).matrix();
}

template <typename Scalar>
Matrix<Scalar> sigmoid_backward(const Matrix<Scalar>& dy, const Matrix<Scalar>& y) {
  return (dy.array() * y.array() * (Scalar(1) - y.array())).matrix();
}

/// Square-kernel 2-D convolution with "same"-style padding (kernel / 2).
template <typename Scalar>
class Conv2d {
 public:
  struct Context {
    Tensor<Scalar> input;
  };

  Conv2d() = default;
  Conv2d(const std::string& name, int in, int out, int kernel, int stride = 1)
      : weight(name + ".weight", out, Index(in) * kernel * kernel),
        bias(name + ".bias", out, 1),
        in_channels(in),
        out_channels(out),
        kernel(kernel),
        stride(stride),
        padding(kernel / 2) {}

  Parameter<Scalar> weight;  // out x (kernel*kernel*in), tap-major then channel
  Parameter<Scalar> bias;    // out x 1
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;

  int out_size(int s) const { return (s + 2 * padding - kernel) / stride + 1; }

  /// He-normal weights, zero bias.
  void init(Rng& rng, double gain = 2.0) {
    weight.init_normal(rng, std::sqrt(gain / double(Index(kernel) * kernel * in_channels)));
    bias.value.setZero();
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context* ctx = nullptr) const {
    if (x.c() != in_channels)
      throw ShapeError(weight.name + ": expected " + std::to_string(in_channels) + " input channels, got " +
                       shape_string(x));
    Tensor<Scalar> y(x.n, out_size(x.h), out_size(x.w), out_channels);
    if (is_pointwise()) {
      y.data.noalias() = weight.value * x.data;
    } else {
      const Index opix = Index(y.h) * y.w;
      Matrix<Scalar> cols;
      for (int n0 = 0; n0 < x.n; n0 += chunk(x)) {
        const int n1 = std::min(x.n, n0 + chunk(x));
        im2col(x, y.h, y.w, n0, n1, cols);
        y.data.middleCols(n0 * opix, (n1 - n0) * opix).noalias() = weight.value * cols;
      }
    }
    y.data.colwise() += bias.value.col(0);
    if (ctx) ctx->input = x;
    return y;
  }

  /// Accumulates parameter gradients unless frozen; returns dL/dx when
  /// `input_grad` is set (otherwise an empty tensor).
  Tensor<Scalar> backward(const Tensor<Scalar>& dy, const Context& ctx, bool input_grad = true) {
    const Tensor<Scalar>& x = ctx.input;
    if (!bias.frozen) bias.accumulate(dy.data.rowwise().sum());
    Tensor<Scalar> dx;
    if (is_pointwise()) {
      if (!weight.frozen) weight.accumulate(dy.data * x.data.transpose());
      if (!input_grad) return dx;
      dx = Tensor<Scalar>(x.n, x.h, x.w, in_channels);
      dx.data.noalias() = weight.value.transpose() * dy.data;
      return dx;
    }
    if (weight.frozen && !input_grad) return dx;
    if (input_grad) dx = Tensor<Scalar>::zeros(x.n, x.h, x.w, in_channels);
    const Index opix = Index(dy.h) * dy.w;
    Matrix<Scalar> cols, dcols;
    Matrix<Scalar> dw;
    if (!weight.frozen) dw.setZero(weight.value.rows(), weight.value.cols());
    for (int n0 = 0; n0 < x.n; n0 += chunk(x)) {
      const int n1 = std::min(x.n, n0 + chunk(x));
      const auto g = dy.data.middleCols(n0 * opix, (n1 - n0) * opix);
      if (!weight.frozen) {
        im2col(x, dy.h, dy.w, n0, n1, cols);
        dw.noalias() += g * cols.transpose();
      }
      if (input_grad) {
        dcols.noalias() = weight.value.transpose() * g;
        col2im(dcols, dy.h, dy.w, n0, n1, dx);
      }
    }
    if (!weight.frozen) weight.accumulate(dw);
    return dx;
  }

  void collect(ParamList<Scalar>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
  void collect(ConstParamList<Scalar>& out) const {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  LayerDesc desc(bool side = false) const {
    LayerDesc d;
    d.kind = LayerDesc::Kind::conv;
    d.name = weight.name.substr(0, weight.name.size() - 7);
    d.kernel = kernel;
    d.stride = stride;
    d.padding = padding;
    d.in = in_channels;
    d.out = out_channels;
    d.from_block_input = side;
    return d;
  }

 private:
  bool is_pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }

  /// Samples per im2col block; keeps the column buffer cache-sized.
  int chunk(const Tensor<Scalar>& x) const {
    const Index per_sample = Index(kernel) * kernel * in_channels * x.h * x.w;
    return static_cast<int>(std::clamp<Index>((Index(1) << 18) / std::max<Index>(per_sample, 1), 1, x.n));
  }

  /// Columns for samples [n0, n1): one column per output pixel.
  void im2col(const Tensor<Scalar>& x, int ho, int wo, int n0, int n1, Matrix<Scalar>& cols) const {
    const int c = in_channels;
    cols.resize(Index(kernel) * kernel * c, Index(n1 - n0) * ho * wo);
    Index col = 0;
    for (int n = n0; n < n1; ++n) {
      const Index base = Index(n) * x.h * x.w;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox, ++col) {
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - padding + ky;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - padding + kx;
              auto dst = cols.col(col).segment(Index(ky * kernel + kx) * c, c);
              if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w)
                dst.setZero();
              else
                dst = x.data.col(base + Index(iy) * x.w + ix);
            }
          }
        }
      }
    }
  }

  /// Scatter-adds column gradients of samples [n0, n1) into `dx`.
  void col2im(const Matrix<Scalar>& dcols, int ho, int wo, int n0, int n1, Tensor<Scalar>& dx) const {
    const int c = in_channels;
    Index col = 0;
    for (int n = n0; n < n1; ++n) {
      const Index base = Index(n) * dx.h * dx.w;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox, ++col) {
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - padding + ky;
            if (iy < 0 || iy >= dx.h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - padding + kx;
              if (ix < 0 || ix >= dx.w) continue;
              dx.data.col(base + Index(iy) * dx.w + ix) += dcols.col(col).segment(Index(ky * kernel + kx) * c, c);
            }
          }
        }
      }
    }
  }
};

/// Fully connected layer acting on `features x batch` matrices.
template <typename Scalar>
class Linear {
 public:
  struct Context {
    Matrix<Scalar> input;
  };

  Linear() = default;
  Linear(const std::string& name, int in, int out)
      : weight(name + ".weight", out, in), bias(name + ".bias", out, 1), in_features(in), out_features(out) {}

  Parameter<Scalar> weight;  // out x in
  Parameter<Scalar> bias;    // out x 1
  int in_features = 0;
  int out_features = 0;

  void init(Rng& rng, double gain = 2.0) {
    weight.init_normal(rng, std::sqrt(gain / double(in_features)));
    bias.value.setZero();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Context* ctx = nullptr) const {
    if (x.rows() != in_features)
      throw ShapeError(weight.name + ": expected " + std::to_string(in_features) + " features, got " +
                       std::to_string(x.rows()));
    Matrix<Scalar> y = weight.value * x;
    y.colwise() += bias.value.col(0);
    if (ctx) ctx->input = x;
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy, const Context& ctx, bool input_grad = true) {
    if (!weight.frozen) weight.accumulate(dy * ctx.input.transpose());
    if (!bias.frozen) bias.accumulate(dy.rowwise().sum());
    if (!input_grad) return {};
    return weight.value.transpose() * dy;
  }

  void collect(ParamList<Scalar>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
  void collect(ConstParamList<Scalar>& out) const {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  LayerDesc desc() const {
    LayerDesc d;
    d.kind = LayerDesc::Kind::fully_connected;
    d.name = weight.name.substr(0, weight.name.size() - 7);
    d.in = in_features;
    d.out = out_features;
    return d;
  }
};

/// Per-channel batch normalisation over (batch, rows, cols).
///
/// Training mode normalises with the batch statistics; evaluation mode with
/// the running estimates. The running estimates move only when a
/// training-mode pass is backpropagated, so frozen or evaluation-only use
/// never changes them.
template <typename Scalar>
class BatchNorm2d {
 public:
  struct Context {
    bool training = false;
    Matrix<Scalar> xhat;
    Vector<Scalar> inv_std;
    Vector<Scalar> batch_mean;
    Vector<Scalar> batch_var;
  };

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, int channels)
      : gamma(name + ".gamma", channels, 1),
        beta(name + ".beta", channels, 1),
        running_mean(name + ".running_mean", channels, 1),
        running_var(name + ".running_var", channels, 1),
        channels(channels) {
    gamma.value.setOnes();
    running_var.value.setOnes();
    for (auto* b : {&running_mean, &running_var}) b->buffer = b->frozen = true;
  }

  Parameter<Scalar> gamma;
  Parameter<Scalar> beta;
  Parameter<Scalar> running_mean;
  Parameter<Scalar> running_var;
  int channels = 0;
  double momentum = 0.1;
  double eps = 1e-5;

  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool training, Context* ctx = nullptr) const {
    if (x.c() != channels)
      throw ShapeError(gamma.name + ": expected " + std::to_string(channels) + " channels, got " + shape_string(x));
    Vector<Scalar> mean, var;
    if (training) {
      mean = x.data.rowwise().mean();
      var = (x.data.colwise() - mean).cwiseAbs2().rowwise().mean();
    } else {
      mean = running_mean.value.col(0);
      var = running_var.value.col(0);
    }
    const Vector<Scalar> inv_std = (var.array() + static_cast<Scalar>(eps)).rsqrt().matrix();
    Matrix<Scalar> xhat = inv_std.asDiagonal() * (x.data.colwise() - mean);
    Tensor<Scalar> y(x.n, x.h, x.w, x.c());
    y.data = gamma.value.col(0).asDiagonal() * xhat;
    y.data.colwise() += beta.value.col(0);
    if (ctx) {
      ctx->training = training;
      ctx->xhat = std::move(xhat);
      ctx->inv_std = inv_std;
      if (training) {
        ctx->batch_mean = std::move(mean);
        ctx->batch_var = std::move(var);
      }
    }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy, const Context& ctx, bool input_grad = true) {
    if (!gamma.frozen) gamma.accumulate(dy.data.cwiseProduct(ctx.xhat).rowwise().sum());
    if (!beta.frozen) beta.accumulate(dy.data.rowwise().sum());
    if (ctx.training) {
      const Index m = dy.data.cols();
      const Scalar mom = static_cast<Scalar>(momentum);
      const Scalar unbias = m > 1 ? Scalar(double(m) / double(m - 1)) : Scalar(1);
      running_mean.value = (Scalar(1) - mom) * running_mean.value + mom * ctx.batch_mean;
      running_var.value = (Scalar(1) - mom) * running_var.value + (mom * unbias) * ctx.batch_var;
    }
    if (!input_grad) return {};
    const Matrix<Scalar> dxhat = gamma.value.col(0).asDiagonal() * dy.data;
    Tensor<Scalar> dx(dy.n, dy.h, dy.w, dy.c());
    if (ctx.training) {
      const Vector<Scalar> m1 = dxhat.rowwise().mean();
      const Vector<Scalar> m2 = dxhat.cwiseProduct(ctx.xhat).rowwise().mean();
      dx.data = ctx.inv_std.asDiagonal() * ((dxhat.colwise() - m1) - m2.asDiagonal() * ctx.xhat);
    } else {
      dx.data = ctx.inv_std.asDiagonal() * dxhat;
    }
    return dx;
  }

  void collect(ParamList<Scalar>& out) {
    for (auto* p : {&gamma, &beta, &running_mean, &running_var}) out.push_back(p);
  }
  void collect(ConstParamList<Scalar>& out) const {
    for (const auto* p : {&gamma, &beta, &running_mean, &running_var}) out.push_back(p);
  }

  LayerDesc desc(bool from_block_input = false) const {
    LayerDesc d;
    d.kind = LayerDesc::Kind::norm;
    d.name = gamma.name.substr(0, gamma.name.size() - 6);
    d.in = d.out = channels;
    d.from_block_input = from_block_input;
    return d;
  }
};

/// Non-overlapping-or-strided average pooling without padding.
template <typename Scalar>
class AvgPool2d {
 public:
  AvgPool2d() = default;
  AvgPool2d(std::string name, int kernel, int stride) : name(std::move(name)), kernel(kernel), stride(stride) {}

  std::string name;
  int kernel = 2;
  int stride = 2;

  int out_size(int s) const { return (s - kernel) / stride + 1; }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) const {
    if (x.h < kernel || x.w < kernel) throw ShapeError(name + ": input smaller than pooling window");
    Tensor<Scalar> y = Tensor<Scalar>::zeros(x.n, out_size(x.h), out_size(x.w), x.c());
    const Scalar inv = Scalar(1) / Scalar(kernel * kernel);
    for (int n = 0; n < x.n; ++n)
      for (int oy = 0; oy < y.h; ++oy)
        for (int ox = 0; ox < y.w; ++ox) {
          auto dst = y.data.col((Index(n) * y.h + oy) * y.w + ox);
          for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx)
              dst += x.data.col((Index(n) * x.h + oy * stride + ky) * x.w + ox * stride + kx);
          dst *= inv;
        }
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy, const Tensor<Scalar>& x) const {
    Tensor<Scalar> dx = Tensor<Scalar>::zeros(x.n, x.h, x.w, x.c());
    const Scalar inv = Scalar(1) / Scalar(kernel * kernel);
    for (int n = 0; n < x.n; ++n)
      for (int oy = 0; oy < dy.h; ++oy)
        for (int ox = 0; ox < dy.w; ++ox) {
          const auto g = dy.data.col((Index(n) * dy.h + oy) * dy.w + ox);
          for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx)
              dx.data.col((Index(n) * x.h + oy * stride + ky) * x.w + ox * stride + kx) += g * inv;
        }
    return dx;
  }

  LayerDesc desc() const {
    LayerDesc d;
    d.kind = LayerDesc::Kind::pool;
    d.name = name;
    d.kernel = kernel;
    d.stride = stride;
    return d;
  }
};

/// Spatial mean per sample: `channels x batch`.
template <typename Scalar>
Matrix<Scalar> global_avg_pool(const Tensor<Scalar>& x) {
  Matrix<Scalar> out(x.c(), x.n);
  for (int n = 0; n < x.n; ++n) out.col(n) = x.sample(n).rowwise().sum() / static_cast<Scalar>(x.pixels());
  return out;
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool_backward(const Matrix<Scalar>& dy, int n, int h, int w) {
  Tensor<Scalar> dx(n, h, w, static_cast<int>(dy.rows()));
  const Scalar inv = Scalar(1) / static_cast<Scalar>(Index(h) * w);
  for (int i = 0; i < n; ++i) dx.sample(i) = (dy.col(i) * inv).replicate(1, Index(h) * w);
  return dx;
}

template <typename Scalar>
Index count_params(const ConstParamList<Scalar>& params, bool trainable_only) {
  Index total = 0;
  for (const auto* p : params)
    if (!p->buffer && (!trainable_only || !p->frozen)) total += p->size();
  return total;
}

template <typename Scalar>
void set_frozen(const ParamList<Scalar>& params, bool frozen) {
  for (auto* p : params) p->frozen = frozen || p->buffer;
}

template <typename Scalar>
void zero_grad(const ParamList<Scalar>& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace fgnic::nn
