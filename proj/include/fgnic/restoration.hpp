#pragma once

#include "fgnic/checkpoint.hpp"
#include "fgnic/dataset.hpp"
#include "fgnic/fidelity.hpp"
#include "fgnic/nn/layers.hpp"
#include "fgnic/train_config.hpp"

#include <string>
#include <vector>

namespace fgnic {

/// Depth/width of the residual denoiser and the fidelity estimator.
struct RestorationArch {
  int depth = 8;
  int width = 32;
  int channels = 3;

  void validate() const {
    if (depth < 2) throw ConfigError("restoration depth must be >= 2");
    if (width < 1 || channels < 1) throw ConfigError("restoration width/channels must be >= 1");
  }
  nlohmann::json to_json() const { return {{"depth", depth}, {"width", width}, {"channels", channels}}; }
  static RestorationArch from_json(const nlohmann::json& j) { return from_json(j, RestorationArch()); }
  static RestorationArch from_json(const nlohmann::json& j, RestorationArch d) {
    d.depth = j.value("depth", d.depth);
    d.width = j.value("width", d.width);
    d.channels = j.value("channels", d.channels);
    d.validate();
    return d;
  }
};

/// Plain convolution stack: 3x3 conv + ReLU for every layer but the last.
template <typename Scalar>
class ConvStack {
 public:
  struct Context {
    std::vector<typename nn::Conv2d<Scalar>::Context> convs;
    std::vector<Matrix<Scalar>> activations;
  };

  ConvStack() = default;
  ConvStack(const std::string& prefix, int in, int width, int out, int depth) {
    for (int l = 0; l < depth; ++l) {
      const int ci = l == 0 ? in : width;
      const int co = l == depth - 1 ? out : width;
      convs.emplace_back(prefix + ".conv" + std::to_string(l), ci, co, 3);
    }
  }

  std::vector<nn::Conv2d<Scalar>> convs;

  void init(Rng& rng, double head_gain) {
    for (std::size_t l = 0; l < convs.size(); ++l) convs[l].init(rng, l + 1 == convs.size() ? head_gain : 2.0);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context* ctx = nullptr) const {
    if (ctx) {
      ctx->convs.assign(convs.size(), {});
      ctx->activations.assign(convs.size(), {});
    }
    Tensor<Scalar> a = x;
    for (std::size_t l = 0; l < convs.size(); ++l) {
      a = convs[l].forward(a, ctx ? &ctx->convs[l] : nullptr);
      if (l + 1 < convs.size()) {
        a.data = nn::relu(a.data);
        if (ctx) ctx->activations[l] = a.data;
      }
    }
    return a;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy, Context& ctx, bool input_grad) {
    Tensor<Scalar> g = dy;
    for (std::size_t l = convs.size(); l-- > 0;) {
      if (l + 1 < convs.size()) g.data = nn::relu_backward(g.data, ctx.activations[l]);
      g = convs[l].backward(g, ctx.convs[l], input_grad || l > 0);
    }
    return g;
  }

  void collect(nn::ParamList<Scalar>& out) {
    for (auto& c : convs) c.collect(out);
  }
  void collect(nn::ConstParamList<Scalar>& out) const {
    for (const auto& c : convs) c.collect(out);
  }

  void describe(std::vector<nn::LayerDesc>& out) const {
    for (std::size_t l = 0; l < convs.size(); ++l) {
      out.push_back(convs[l].desc());
      if (l + 1 < convs.size()) out.push_back({nn::LayerDesc::Kind::activation, convs[l].desc().name + ".relu"});
    }
  }
};

/// Residual denoiser: the network predicts the noise and the restored image
/// is the input minus that prediction, clamped to [0,1].
template <typename Scalar>
class Denoiser {
 public:
  using Context = typename ConvStack<Scalar>::Context;

  Denoiser() = default;
  explicit Denoiser(const RestorationArch& a, std::uint64_t seed = 0)
      : arch(a), net("denoiser", a.channels, a.width, a.channels, a.depth), seed(seed) {
    a.validate();
    Rng rng(derive_seed(seed, {0xDE}));
    net.init(rng, 0.1);
  }

  RestorationArch arch;
  ConvStack<Scalar> net;
  std::uint64_t seed = 0;

  /// Zero the last layer so that restore() is the identity.
  void zero_head() {
    net.convs.back().weight.value.setZero();
    net.convs.back().bias.value.setZero();
  }

  Tensor<Scalar> predict_residual(const Tensor<Scalar>& noisy, Context* ctx = nullptr) const {
    check_channels(noisy.c());
    return net.forward(noisy, ctx);
  }

  Tensor<Scalar> restore(const Tensor<Scalar>& noisy) const {
    Tensor<Scalar> out = noisy;
    out.data = (noisy.data - predict_residual(noisy).data).cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
    return out;
  }

  Image<Scalar> restore(const Image<Scalar>& noisy) const {
    Tensor<Scalar> t(1, noisy.h, noisy.w, noisy.c());
    t.data = noisy.data;
    Image<Scalar> out = noisy;
    out.data = restore(t).data;
    return out;
  }

  nn::ParamList<Scalar> params() {
    nn::ParamList<Scalar> p;
    net.collect(p);
    return p;
  }
  nn::ConstParamList<Scalar> params() const {
    nn::ConstParamList<Scalar> p;
    net.collect(p);
    return p;
  }

  std::vector<nn::LayerDesc> describe() const {
    std::vector<nn::LayerDesc> d;
    net.describe(d);
    return d;
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.meta = {{"kind", "denoiser"}, {"arch", arch.to_json()}, {"seed", seed}};
    ck.dtype = dtype_name<Scalar>();
    ck.add_params(params());
    return ck;
  }

  static Denoiser from_checkpoint(const Checkpoint& ck) {
    if (ck.meta.value("kind", "") != "denoiser") throw IoError("checkpoint is not a denoiser");
    Denoiser d(RestorationArch::from_json(ck.meta.at("arch")), ck.meta.value("seed", std::uint64_t(0)));
    ck.load_params(d.params());
    return d;
  }

 private:
  void check_channels(int c) const {
    if (c != arch.channels)
      throw ShapeError("denoiser expects " + std::to_string(arch.channels) + " channels, got " + std::to_string(c));
  }
};

/// Predicts the fidelity map of a restored image; sigmoid output in [0,1].
template <typename Scalar>
class FidelityEstimator {
 public:
  struct Context {
    typename ConvStack<Scalar>::Context net;
    Matrix<Scalar> output;
  };

  FidelityEstimator() = default;
  explicit FidelityEstimator(const RestorationArch& a, std::uint64_t seed = 0)
      : arch(a), net("estimator", a.channels, a.width, 1, a.depth), seed(seed) {
    a.validate();
    Rng rng(derive_seed(seed, {0xE5}));
    net.init(rng, 0.1);
    // Start near the typical fidelity of a restored image.
    net.convs.back().bias.value.setConstant(Scalar(2));
  }

  RestorationArch arch;
  ConvStack<Scalar> net;
  std::uint64_t seed = 0;

  /// Single-channel tensor of per-pixel fidelity estimates.
  Tensor<Scalar> estimate(const Tensor<Scalar>& restored, Context* ctx = nullptr) const {
    if (restored.c() != arch.channels)
      throw ShapeError("fidelity estimator expects " + std::to_string(arch.channels) + " channels, got " +
                       std::to_string(restored.c()));
    Tensor<Scalar> z = net.forward(restored, ctx ? &ctx->net : nullptr);
    z.data = nn::sigmoid(z.data);
    if (ctx) ctx->output = z.data;
    return z;
  }

  FidelityMap<Scalar> estimate(const Image<Scalar>& restored) const {
    Tensor<Scalar> t(1, restored.h, restored.w, restored.c());
    t.data = restored.data;
    return FidelityMap<Scalar>(restored.h, restored.w, estimate(t).data.transpose());
  }

  /// Backpropagates dL/dF into the estimator parameters.
  void backward(const Tensor<Scalar>& dfid, Context& ctx) {
    Tensor<Scalar> g = dfid;
    g.data = nn::sigmoid_backward(dfid.data, ctx.output);
    net.backward(g, ctx.net, false);
  }

  nn::ParamList<Scalar> params() {
    nn::ParamList<Scalar> p;
    net.collect(p);
    return p;
  }
  nn::ConstParamList<Scalar> params() const {
    nn::ConstParamList<Scalar> p;
    net.collect(p);
    return p;
  }

  std::vector<nn::LayerDesc> describe() const {
    std::vector<nn::LayerDesc> d;
    net.describe(d);
    d.push_back({nn::LayerDesc::Kind::activation, "estimator.sigmoid"});
    return d;
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.meta = {{"kind", "fidelity_estimator"}, {"arch", arch.to_json()}, {"seed", seed}};
    ck.dtype = dtype_name<Scalar>();
    ck.add_params(params());
    return ck;
  }

  static FidelityEstimator from_checkpoint(const Checkpoint& ck) {
    if (ck.meta.value("kind", "") != "fidelity_estimator") throw IoError("checkpoint is not a fidelity estimator");
    FidelityEstimator e(RestorationArch::from_json(ck.meta.at("arch")), ck.meta.value("seed", std::uint64_t(0)));
    ck.load_params(e.params());
    return e;
  }
};

template <typename Scalar>
Image<Scalar> restore(const Denoiser<Scalar>& model, const Image<Scalar>& noisy) {
  return model.restore(noisy);
}

template <typename Scalar>
FidelityMap<Scalar> estimate_fidelity(const FidelityEstimator<Scalar>& model, const Image<Scalar>& restored) {
  return model.estimate(restored);
}

/// Restores a whole image list in chunks of `batch` images.
std::vector<Image<float>> restore_all(const Denoiser<float>& model, const std::vector<Image<float>>& images,
                                      int batch = 64);

struct NoiseRange {
  double lo = 0.0;
  double hi = 0.5;
};

/// Blind residual training: sigma ~ U[range] per sample and epoch, MSE
/// between predicted and true residual.
Denoiser<float> train_denoiser(const Dataset& data, NoiseRange range, const TrainConfig& cfg,
                               const RestorationArch& arch = {}, MetricLog* log = nullptr);

/// Regresses l1 oracle fidelity of `denoiser` outputs with MSE. Noise is
/// drawn per `cfg` (same scheme as the denoiser).
FidelityEstimator<float> train_fidelity_estimator(const Dataset& data, const Denoiser<float>& denoiser,
                                                  const TrainConfig& cfg, const RestorationArch& arch = {},
                                                  MetricLog* log = nullptr);

/// Training targets for the estimator: oracle l1 fidelity of restored
/// versions of the batch images.
Tensor<float> estimator_targets(const NoisyBatch& batch, const Denoiser<float>& denoiser, Tensor<float>* restored);

}  // namespace fgnic
