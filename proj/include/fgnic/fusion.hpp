#pragma once

#include "fgnic/backbone.hpp"
#include "fgnic/checkpoint.hpp"
#include "fgnic/fidelity.hpp"
#include "fgnic/restoration.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fgnic {

enum class FidelitySource { oracle, estimator, end_to_end };

std::string to_string(FidelitySource s);
FidelitySource fidelity_source_from_string(const std::string& s);

/// Switchboard for the fusion ablations.
struct FusionConfig {
  /// Stages whose output passes through spatial fusion; empty optional = all.
  std::optional<std::vector<int>> stages_with_spatial_fusion;
  FidelityMetric fidelity_metric = FidelityMetric::l1;
  DownsampleMethod downsample_method = DownsampleMethod::average_pool;
  bool use_ensemble = false;
  bool pass_through = false;
  FidelitySource fidelity_source = FidelitySource::oracle;

  std::vector<int> spatial_stages(int num_stages) const;
  void validate(int num_stages) const;
  nlohmann::json to_json() const;
  static FusionConfig from_json(const nlohmann::json& j);
  static FusionConfig from_json(const nlohmann::json& j, const FusionConfig& defaults);
};

/// Resizes a batch of single-channel maps to (hs, ws); returns 1 x (n*hs*ws).
template <typename Scalar>
RowVector<Scalar> resize_batch(const Tensor<Scalar>& fid, int hs, int ws, DownsampleMethod method) {
  const auto op = resize_operator<Scalar>(fid.h, fid.w, hs, ws, method);
  Eigen::Map<const Matrix<Scalar>> src(fid.data.data(), fid.pixels(), fid.n);
  const Matrix<Scalar> dst = op * src;
  return Eigen::Map<const RowVector<Scalar>>(dst.data(), dst.size());
}

/// Adjoint of resize_batch, accumulated into `dfid`.
template <typename Scalar>
void resize_batch_adjoint(const RowVector<Scalar>& dres, int hs, int ws, DownsampleMethod method,
                          Tensor<Scalar>& dfid) {
  const auto op = resize_operator<Scalar>(dfid.h, dfid.w, hs, ws, method);
  Eigen::Map<const Matrix<Scalar>> g(dres.data(), Index(hs) * ws, dfid.n);
  Eigen::Map<Matrix<Scalar>> dst(dfid.data.data(), dfid.pixels(), dfid.n);
  dst += op.transpose() * g;
}

/// Multiply by the (resized) fidelity map, trainable conv + ReLU, add the map.
template <typename Scalar>
class SpatialFusionBlock {
 public:
  struct Context {
    typename nn::Conv2d<Scalar>::Context conv;
    Matrix<Scalar> features;
    RowVector<Scalar> fid;
    Matrix<Scalar> activated;
  };

  SpatialFusionBlock() = default;
  SpatialFusionBlock(int stage, int channels)
      : stage_index(stage), conv("fusion.spatial" + std::to_string(stage), channels, channels, 3) {}

  int stage_index = 0;
  nn::Conv2d<Scalar> conv;

  void init(Rng& rng) { conv.init(rng, 2.0); }

  /// Center-tap identity weights, zero bias.
  void set_identity() {
    const int c = conv.in_channels;
    conv.weight.value.setZero();
    conv.weight.value.middleCols(Index(conv.kernel * conv.kernel / 2) * c, c).setIdentity();
    conv.bias.value.setZero();
  }

  /// `fid` holds the resized map, one entry per pixel column of `x`.
  Tensor<Scalar> forward(const Tensor<Scalar>& x, const RowVector<Scalar>& fid, Context* ctx = nullptr) const {
    if (fid.size() != x.data.cols()) throw ShapeError("spatial fusion: map and feature sizes differ");
    Tensor<Scalar> m = x;
    m.data = (x.data.array().rowwise() * fid.array()).matrix();
    Tensor<Scalar> z = conv.forward(m, ctx ? &ctx->conv : nullptr);
    z.data = nn::relu(z.data);
    if (ctx) {
      ctx->features = x.data;
      ctx->fid = fid;
      ctx->activated = z.data;
    }
    z.data.rowwise() += fid;
    return z;
  }

  /// Returns dL/dx; accumulates dL/dfid into `dfid`.
  Tensor<Scalar> backward(const Tensor<Scalar>& dy, Context& ctx, RowVector<Scalar>& dfid) {
    dfid = dy.data.colwise().sum();
    Tensor<Scalar> g = dy;
    g.data = nn::relu_backward(dy.data, ctx.activated);
    Tensor<Scalar> dm = conv.backward(g, ctx.conv, true);
    dfid += (dm.data.array() * ctx.features.array()).matrix().colwise().sum();
    dm.data = (dm.data.array().rowwise() * ctx.fid.array()).matrix();
    return dm;
  }
};

/// Feature vector times ReLU(FC(fidelity feature)).
template <typename Scalar>
class ChannelFusionBlock {
 public:
  struct Context {
    typename nn::Linear<Scalar>::Context fc;
    Matrix<Scalar> features;
    Matrix<Scalar> gate;
  };

  ChannelFusionBlock() = default;
  explicit ChannelFusionBlock(int dim) : fc("fusion.channel", dim, dim) {}

  nn::Linear<Scalar> fc;

  void init(Rng& rng) { fc.init(rng, 2.0); }

  Matrix<Scalar> transform(const Matrix<Scalar>& fvec, Context* ctx = nullptr) const {
    return nn::relu(fc.forward(fvec, ctx ? &ctx->fc : nullptr));
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& features, const Matrix<Scalar>& fvec, Context* ctx = nullptr) const {
    if (features.rows() != fc.out_features || features.cols() != fvec.cols())
      throw ShapeError("channel fusion: feature/fidelity sizes differ");
    Matrix<Scalar> h = transform(fvec, ctx);
    if (ctx) {
      ctx->features = features;
      ctx->gate = h;
    }
    return features.cwiseProduct(h);
  }

  /// Returns dL/dfeatures; writes dL/dfvec.
  Matrix<Scalar> backward(const Matrix<Scalar>& dy, Context& ctx, Matrix<Scalar>& dfvec) {
    const Matrix<Scalar> dh = nn::relu_backward<Scalar>(dy.cwiseProduct(ctx.features), ctx.gate);
    dfvec = fc.backward(dh, ctx.fc, true);
    return dy.cwiseProduct(ctx.gate);
  }
};

/// ReLU(FC([features; fidelity feature])) back to the original width.
template <typename Scalar>
class ConcatBlock {
 public:
  struct Context {
    typename nn::Linear<Scalar>::Context fc;
    Matrix<Scalar> output;
  };

  ConcatBlock() = default;
  explicit ConcatBlock(int dim) : fc("fusion.concat", 2 * dim, dim) {}

  nn::Linear<Scalar> fc;

  void init(Rng& rng) { fc.init(rng, 2.0); }

  /// Weights [I | 0], zero bias.
  void set_identity() {
    const int d = fc.out_features;
    fc.weight.value.setZero();
    fc.weight.value.leftCols(d).setIdentity();
    fc.bias.value.setZero();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& features, const Matrix<Scalar>& fvec, Context* ctx = nullptr) const {
    const int d = fc.out_features;
    if (features.rows() != d || fvec.rows() != d || features.cols() != fvec.cols())
      throw ShapeError("channel concat: expected two " + std::to_string(d) + "-dim inputs, got " +
                       std::to_string(features.rows()) + " and " + std::to_string(fvec.rows()));
    Matrix<Scalar> cat(2 * d, features.cols());
    cat.topRows(d) = features;
    cat.bottomRows(d) = fvec;
    Matrix<Scalar> y = nn::relu(fc.forward(cat, ctx ? &ctx->fc : nullptr));
    if (ctx) ctx->output = y;
    return y;
  }

  void backward(const Matrix<Scalar>& dy, Context& ctx, Matrix<Scalar>& dfeatures, Matrix<Scalar>& dfvec) {
    const int d = fc.out_features;
    const Matrix<Scalar> dcat = fc.backward(nn::relu_backward(dy, ctx.output), ctx.fc, true);
    dfeatures = dcat.topRows(d);
    dfvec = dcat.bottomRows(d);
  }
};

/// Elementwise convex combination g * orig + (1 - g) * manipulated, g = sigmoid(w).
template <typename Scalar>
class EnsembleGate {
 public:
  struct Context {
    Matrix<Scalar> orig;
    Matrix<Scalar> manipulated;
  };

  EnsembleGate() = default;
  explicit EnsembleGate(int dim) : w("fusion.gate.w", dim, 1) {}

  nn::Parameter<Scalar> w;

  Vector<Scalar> gate() const { return nn::sigmoid<Scalar>(w.value).col(0); }

  Matrix<Scalar> forward(const Matrix<Scalar>& orig, const Matrix<Scalar>& manipulated, Context* ctx = nullptr) const {
    if (orig.rows() != w.value.rows() || manipulated.rows() != w.value.rows() || orig.cols() != manipulated.cols())
      throw ShapeError("ensemble: feature lengths differ");
    const Vector<Scalar> g = gate();
    if (ctx) {
      ctx->orig = orig;
      ctx->manipulated = manipulated;
    }
    return (orig.array().colwise() * g.array() + manipulated.array().colwise() * (Scalar(1) - g.array())).matrix();
  }

  /// Returns dL/dmanipulated; accumulates dL/dw.
  Matrix<Scalar> backward(const Matrix<Scalar>& dy, const Context& ctx) {
    const Vector<Scalar> g = gate();
    if (!w.frozen) {
      const Vector<Scalar> dg = (dy.cwiseProduct(ctx.orig - ctx.manipulated)).rowwise().sum();
      w.accumulate(dg.cwiseProduct((g.array() * (Scalar(1) - g.array())).matrix()));
    }
    return (dy.array().colwise() * (Scalar(1) - g.array())).matrix();
  }
};

// Free-function forms of the individual fusion operations (single image /
// feature batch), used directly by tests and tools.

template <typename Scalar>
Tensor<Scalar> spatial_fuse(const Tensor<Scalar>& features, const FidelityMap<Scalar>& fmap,
                            const SpatialFusionBlock<Scalar>& block,
                            DownsampleMethod method = DownsampleMethod::average_pool) {
  if (features.n != 1) throw ShapeError("spatial_fuse expects a single-sample tensor");
  const auto resized = resize_fidelity(fmap, features.h, features.w, method);
  if (resized.values.size() != features.data.cols()) throw ShapeError("spatial_fuse: internal resize mismatch");
  return block.forward(features, resized.values.transpose(), nullptr);
}

template <typename Scalar>
Vector<Scalar> channel_fuse(const Vector<Scalar>& features, const FidelityMap<Scalar>& fmap,
                            const ChannelFusionBlock<Scalar>& block,
                            DownsampleMethod method = DownsampleMethod::average_pool) {
  const Vector<Scalar> fvec = flatten_downsample(fmap, static_cast<int>(features.size()), method);
  return block.forward(features, fvec).col(0);
}

template <typename Scalar>
Vector<Scalar> channel_concat(const Vector<Scalar>& features, const Vector<Scalar>& fvec,
                              const ConcatBlock<Scalar>& block) {
  if (features.size() != fvec.size()) throw ShapeError("channel_concat: length mismatch");
  return block.forward(features, fvec).col(0);
}

template <typename Scalar>
Vector<Scalar> ensemble_combine(const Vector<Scalar>& orig, const Vector<Scalar>& manipulated,
                                const EnsembleGate<Scalar>& gate) {
  if (orig.size() != manipulated.size()) throw ShapeError("ensemble_combine: length mismatch");
  return gate.forward(orig, manipulated).col(0);
}

/// Pretrained classifier with fidelity-guided fusion blocks: logits =
/// head(phi'(restored)), with optional ensembling against phi(restored).
template <typename Scalar>
class FGNICModel {
 public:
  struct Context {
    std::vector<typename ClassifierSplit<Scalar>::StageContext> stages;
    std::vector<std::optional<typename SpatialFusionBlock<Scalar>::Context>> spatial;
    std::vector<std::pair<int, int>> stage_hw;
    int fh = 0, fw = 0, n = 0;
    int final_h = 0, final_w = 0;
    typename ChannelFusionBlock<Scalar>::Context channel;
    typename ConcatBlock<Scalar>::Context concat;
    typename EnsembleGate<Scalar>::Context ensemble;
    typename nn::Linear<Scalar>::Context head;
    typename FidelityEstimator<Scalar>::Context estimator;
    bool estimator_used = false;
  };

  FGNICModel() = default;

  /// `split` and `denoiser` are frozen on assembly; the estimator is
  /// trainable only in end_to_end mode.
  FGNICModel(ClassifierSplit<Scalar> split_, Denoiser<Scalar> denoiser_,
             std::optional<FidelityEstimator<Scalar>> estimator_, FusionConfig cfg, std::uint64_t seed_ = 0)
      : split(freeze(std::move(split_))),
        denoiser(std::move(denoiser_)),
        estimator(std::move(estimator_)),
        config(std::move(cfg)),
        seed(seed_) {
    nn::set_frozen(denoiser.params(), true);
    config.validate(split.num_stages());
    if (config.fidelity_source != FidelitySource::oracle && !estimator && !config.pass_through)
      throw ConfigError("fidelity source '" + to_string(config.fidelity_source) + "' requires a fidelity estimator");
    if (estimator) nn::set_frozen(estimator->params(), config.fidelity_source != FidelitySource::end_to_end);
    if (config.pass_through) return;
    Rng rng(derive_seed(seed, {0xF5}));
    const auto shapes = split.stage_shapes(32, 32);
    for (int s : config.spatial_stages(split.num_stages())) {
      spatial_blocks.emplace_back(s, shapes[std::size_t(s)].c);
      spatial_blocks.back().init(rng);
    }
    const int d = split.feature_dim();
    channel_block = ChannelFusionBlock<Scalar>(d);
    channel_block.init(rng);
    concat_block = ConcatBlock<Scalar>(d);
    concat_block.init(rng);
    if (config.use_ensemble) ensemble = EnsembleGate<Scalar>(d);
  }

  ClassifierSplit<Scalar> split;
  Denoiser<Scalar> denoiser;
  std::optional<FidelityEstimator<Scalar>> estimator;
  FusionConfig config;
  std::uint64_t seed = 0;
  std::vector<SpatialFusionBlock<Scalar>> spatial_blocks;
  ChannelFusionBlock<Scalar> channel_block;
  ConcatBlock<Scalar> concat_block;
  std::optional<EnsembleGate<Scalar>> ensemble;

  bool needs_clean() const { return !config.pass_through && config.fidelity_source == FidelitySource::oracle; }

  /// Fidelity maps for a restored batch (1-channel tensor). `clean` is
  /// required for the oracle source.
  Tensor<Scalar> fidelity(const Tensor<Scalar>& restored, const Tensor<Scalar>* clean, Context* ctx = nullptr) const {
    if (config.fidelity_source == FidelitySource::oracle) {
      if (!clean) throw InputError("oracle fidelity source requires the clean image");
      return oracle_fidelity(*clean, restored, config.fidelity_metric);
    }
    if (ctx) ctx->estimator_used = true;
    return estimator->estimate(restored, ctx ? &ctx->estimator : nullptr);
  }

  /// Logits for already-restored inputs and their fidelity maps.
  Matrix<Scalar> forward(const Tensor<Scalar>& restored, const Tensor<Scalar>& fid, Context* ctx = nullptr) const {
    if (config.pass_through) return split.logits(restored);
    if (fid.n != restored.n || fid.h != restored.h || fid.w != restored.w || fid.c() != 1)
      throw ShapeError("fidelity batch does not match the restored batch");
    const int stages = split.num_stages();
    if (ctx) {
      ctx->stages.assign(std::size_t(stages), {});
      ctx->spatial.assign(std::size_t(stages), std::nullopt);
      ctx->stage_hw.assign(std::size_t(stages), {0, 0});
      ctx->fh = fid.h;
      ctx->fw = fid.w;
      ctx->n = fid.n;
    }
    Tensor<Scalar> a = restored;
    for (int s = 0; s < stages; ++s) {
      a = split.run_stage(s, a, ctx ? &ctx->stages[std::size_t(s)] : nullptr);
      if (const auto* blk = block_at(s)) {
        const RowVector<Scalar> fr = resize_batch(fid, a.h, a.w, config.downsample_method);
        typename SpatialFusionBlock<Scalar>::Context* sctx = nullptr;
        if (ctx) {
          ctx->spatial[std::size_t(s)].emplace();
          ctx->stage_hw[std::size_t(s)] = {a.h, a.w};
          sctx = &*ctx->spatial[std::size_t(s)];
        }
        a = blk->forward(a, fr, sctx);
      }
    }
    if (ctx) {
      ctx->final_h = a.h;
      ctx->final_w = a.w;
    }
    const Matrix<Scalar> pooled = nn::global_avg_pool(a);
    const Matrix<Scalar> fvec = fidelity_features(fid, split.feature_dim());
    const Matrix<Scalar> cf = channel_block.forward(pooled, fvec, ctx ? &ctx->channel : nullptr);
    Matrix<Scalar> phi = concat_block.forward(cf, fvec, ctx ? &ctx->concat : nullptr);
    if (ensemble) phi = ensemble->forward(split.extract(restored), phi, ctx ? &ctx->ensemble : nullptr);
    return split.model.head.forward(phi, ctx ? &ctx->head : nullptr);
  }

  /// Backpropagates dL/dlogits into the trainable blocks. Returns dL/dF
  /// (1-channel tensor) and, in end_to_end mode, also updates the estimator.
  Tensor<Scalar> backward(const Matrix<Scalar>& dlogits, Context& ctx) {
    if (config.pass_through) throw InputError("pass-through model has nothing to train");
    Tensor<Scalar> dfid = Tensor<Scalar>::zeros(ctx.n, ctx.fh, ctx.fw, 1);
    Matrix<Scalar> g = split.model.head.backward(dlogits, ctx.head, true);
    if (ensemble) g = ensemble->backward(g, ctx.ensemble);
    Matrix<Scalar> dcf, dfvec_a, dfvec_b;
    concat_block.backward(g, ctx.concat, dcf, dfvec_a);
    const Matrix<Scalar> dpooled = channel_block.backward(dcf, ctx.channel, dfvec_b);
    fidelity_features_adjoint(dfvec_a + dfvec_b, dfid);
    Tensor<Scalar> da = nn::global_avg_pool_backward(dpooled, ctx.n, ctx.final_h, ctx.final_w);
    for (int s = split.num_stages(); s-- > 0;) {
      if (auto* blk = block_at(s)) {
        RowVector<Scalar> dfr;
        da = blk->backward(da, *ctx.spatial[std::size_t(s)], dfr);
        const auto [hs, ws] = ctx.stage_hw[std::size_t(s)];
        resize_batch_adjoint(dfr, hs, ws, config.downsample_method, dfid);
      }
      if (!has_block_before(s)) break;
      da = split.backward_stage(s, da, ctx.stages[std::size_t(s)], true);
    }
    if (ctx.estimator_used && config.fidelity_source == FidelitySource::end_to_end) estimator->backward(dfid, ctx.estimator);
    return dfid;
  }

  /// Full pipeline from noisy inputs: restore, obtain fidelity, classify.
  Matrix<Scalar> predict(const Tensor<Scalar>& noisy, const Tensor<Scalar>* clean = nullptr) const {
    const Tensor<Scalar> restored = denoiser.restore(noisy);
    return predict_restored(restored, clean);
  }

  Matrix<Scalar> predict_restored(const Tensor<Scalar>& restored, const Tensor<Scalar>* clean = nullptr) const {
    if (config.pass_through) return split.logits(restored);
    const Tensor<Scalar> fid = fidelity(restored, clean);
    return forward(restored, fid);
  }

  /// Parameters of fusion blocks and gate (the estimator excluded).
  nn::ParamList<Scalar> block_params() {
    nn::ParamList<Scalar> p;
    if (config.pass_through) return p;
    for (auto& b : spatial_blocks) b.conv.collect(p);
    channel_block.fc.collect(p);
    concat_block.fc.collect(p);
    if (ensemble) p.push_back(&ensemble->w);
    return p;
  }
  nn::ConstParamList<Scalar> block_params() const {
    nn::ConstParamList<Scalar> p;
    if (config.pass_through) return p;
    for (const auto& b : spatial_blocks) b.conv.collect(p);
    channel_block.fc.collect(p);
    concat_block.fc.collect(p);
    if (ensemble) p.push_back(&ensemble->w);
    return p;
  }

  /// Every parameter of the assembled model.
  nn::ParamList<Scalar> all_params() {
    auto p = split.params();
    for (auto* q : denoiser.params()) p.push_back(q);
    if (estimator)
      for (auto* q : estimator->params()) p.push_back(q);
    for (auto* q : block_params()) p.push_back(q);
    return p;
  }
  nn::ConstParamList<Scalar> all_params() const {
    auto p = split.params();
    for (const auto* q : denoiser.params()) p.push_back(q);
    if (estimator)
      for (const auto* q : estimator->params()) p.push_back(q);
    for (const auto* q : block_params()) p.push_back(q);
    return p;
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.dtype = dtype_name<Scalar>();
    ck.meta = {{"kind", "fgnic"},
               {"fusion", config.to_json()},
               {"seed", seed},
               {"backbone", split.model.to_checkpoint().meta},
               {"stage_end", split.stage_end},
               {"backbone_params_sha256", hash_params(split.params())},
               {"denoiser", denoiser.to_checkpoint().meta},
               {"denoiser_params_sha256", hash_params(denoiser.params())}};
    ck.add_params(split.params());
    ck.add_params(denoiser.params());
    if (estimator) {
      ck.meta["estimator"] = estimator->to_checkpoint().meta;
      ck.add_params(estimator->params());
    }
    ck.add_params(block_params());
    return ck;
  }

  static FGNICModel from_checkpoint(const Checkpoint& ck) {
    if (ck.meta.value("kind", "") != "fgnic") throw IoError("checkpoint is not an FG-NIC model");
    auto seed_of = [&](const char* key) { return ck.meta.at(key).value("seed", std::uint64_t(0)); };
    Classifier<Scalar> cls(BackboneArch::from_json(ck.meta.at("backbone").at("arch")), seed_of("backbone"));
    ClassifierSplit<Scalar> sp(std::move(cls), ck.meta.at("stage_end").template get<std::vector<int>>());
    Denoiser<Scalar> den(RestorationArch::from_json(ck.meta.at("denoiser").at("arch")), seed_of("denoiser"));
    std::optional<FidelityEstimator<Scalar>> est;
    if (ck.meta.contains("estimator"))
      est.emplace(RestorationArch::from_json(ck.meta.at("estimator").at("arch")), seed_of("estimator"));
    FGNICModel m(std::move(sp), std::move(den), std::move(est), FusionConfig::from_json(ck.meta.at("fusion")),
                 ck.meta.value("seed", std::uint64_t(0)));
    nn::ParamList<Scalar> ps = m.all_params();
    ck.load_params(ps);
    return m;
  }

 private:
  const SpatialFusionBlock<Scalar>* block_at(int s) const {
    for (const auto& b : spatial_blocks)
      if (b.stage_index == s) return &b;
    return nullptr;
  }
  SpatialFusionBlock<Scalar>* block_at(int s) {
    for (auto& b : spatial_blocks)
      if (b.stage_index == s) return &b;
    return nullptr;
  }
  bool has_block_before(int s) const {
    for (const auto& b : spatial_blocks)
      if (b.stage_index < s) return true;
    return false;
  }

  Matrix<Scalar> fidelity_features(const Tensor<Scalar>& fid, int d) const {
    const auto op = flatten_operator<Scalar>(fid.h, fid.w, d, config.downsample_method);
    Eigen::Map<const Matrix<Scalar>> src(fid.data.data(), fid.pixels(), fid.n);
    return op * src;
  }

  void fidelity_features_adjoint(const Matrix<Scalar>& dfvec, Tensor<Scalar>& dfid) const {
    const auto op = flatten_operator<Scalar>(dfid.h, dfid.w, static_cast<int>(dfvec.rows()), config.downsample_method);
    Eigen::Map<Matrix<Scalar>> dst(dfid.data.data(), dfid.pixels(), dfid.n);
    dst += op.transpose() * dfvec;
  }
};

/// Logits for one noisy image (clean image needed for the oracle source).
template <typename Scalar>
Vector<Scalar> fgnic_forward(const FGNICModel<Scalar>& model, const Image<Scalar>& noisy,
                             const Image<Scalar>* clean = nullptr) {
  Tensor<Scalar> x(1, noisy.h, noisy.w, noisy.c());
  x.data = noisy.data;
  if (!clean) return model.predict(x, nullptr).col(0);
  Tensor<Scalar> c(1, clean->h, clean->w, clean->c());
  c.data = clean->data;
  return model.predict(x, &c).col(0);
}

/// Exact count of non-frozen parameters.
template <typename Scalar>
Index count_trainable_params(const FGNICModel<Scalar>& model) {
  return nn::count_params<Scalar>(model.all_params(), true);
}

template <typename Scalar>
Index count_trainable_params(const nn::ConstParamList<Scalar>& params) {
  return nn::count_params<Scalar>(params, true);
}

}  // namespace fgnic
