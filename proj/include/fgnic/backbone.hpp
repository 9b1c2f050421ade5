#pragma once

#include "fgnic/checkpoint.hpp"
#include "fgnic/imaging.hpp"
#include "fgnic/nn/layers.hpp"

#include <string>
#include <vector>

namespace fgnic {

enum class BlockKind { basic, bottleneck };

/// ResNet-style classifier layout: stem conv, residual stages, global
/// average pool, one fully connected head.
struct BackboneArch {
  std::string name = "desk";
  int in_channels = 3;
  int stem_width = 16;
  std::vector<int> widths = {16, 32, 64, 128};
  std::vector<int> blocks = {1, 1, 1, 1};
  BlockKind block = BlockKind::basic;
  int num_classes = 10;
  bool batch_norm = true;

  static BackboneArch desk(int classes = 10) {
    BackboneArch a;
    a.num_classes = classes;
    return a;
  }
  static BackboneArch resnet18_like(int classes = 10) {
    BackboneArch a;
    a.name = "resnet18_like";
    a.stem_width = 64;
    a.widths = {64, 128, 256, 512};
    a.blocks = {2, 2, 2, 2};
    a.num_classes = classes;
    return a;
  }
  static BackboneArch resnet50_like(int classes = 10) {
    BackboneArch a = resnet18_like(classes);
    a.name = "resnet50_like";
    a.blocks = {3, 4, 6, 3};
    a.block = BlockKind::bottleneck;
    return a;
  }

  int expansion() const { return block == BlockKind::bottleneck ? 4 : 1; }
  int feature_dim() const { return widths.back() * expansion(); }

  void validate() const;
  nlohmann::json to_json() const;
  static BackboneArch from_json(const nlohmann::json& j);
};

/// One top-level trunk unit: the stem or a residual block. With batch
/// normalisation every conv (shortcut included) is followed by a norm layer.
template <typename Scalar>
class TrunkUnit {
 public:
  enum class Kind { stem, basic, bottleneck };

  struct Context {
    std::vector<typename nn::Conv2d<Scalar>::Context> convs;
    std::vector<typename nn::BatchNorm2d<Scalar>::Context> norms;
    typename nn::Conv2d<Scalar>::Context shortcut;
    typename nn::BatchNorm2d<Scalar>::Context shortcut_norm;
    std::vector<Matrix<Scalar>> activations;
    Matrix<Scalar> output;
  };

  TrunkUnit() = default;

  static TrunkUnit stem(const std::string& name, int in, int out, bool norm) {
    TrunkUnit u;
    u.name = name;
    u.kind = Kind::stem;
    u.add_conv(name + ".conv", name + ".bn", in, out, 3, 1, norm);
    return u;
  }

  static TrunkUnit basic(const std::string& name, int in, int out, int stride, bool norm) {
    TrunkUnit u;
    u.name = name;
    u.kind = Kind::basic;
    u.add_conv(name + ".conv1", name + ".bn1", in, out, 3, stride, norm);
    u.add_conv(name + ".conv2", name + ".bn2", out, out, 3, 1, norm);
    if (stride != 1 || in != out) u.add_shortcut(in, out, stride, norm);
    return u;
  }

  static TrunkUnit bottleneck(const std::string& name, int in, int mid, int stride, bool norm) {
    TrunkUnit u;
    u.name = name;
    u.kind = Kind::bottleneck;
    u.add_conv(name + ".conv1", name + ".bn1", in, mid, 1, 1, norm);
    u.add_conv(name + ".conv2", name + ".bn2", mid, mid, 3, stride, norm);
    u.add_conv(name + ".conv3", name + ".bn3", mid, mid * 4, 1, 1, norm);
    if (stride != 1 || in != mid * 4) u.add_shortcut(in, mid * 4, stride, norm);
    return u;
  }

  std::string name;
  Kind kind = Kind::stem;
  std::vector<nn::Conv2d<Scalar>> convs;
  /// Empty when the unit has no normalisation; otherwise one per conv.
  std::vector<nn::BatchNorm2d<Scalar>> norms;
  bool has_shortcut = false;
  nn::Conv2d<Scalar> shortcut;
  nn::BatchNorm2d<Scalar> shortcut_norm;

  int out_channels() const { return convs.back().out_channels; }
  bool normalised() const { return !norms.empty(); }

  void init(Rng& rng) {
    for (std::size_t i = 0; i < convs.size(); ++i)
      convs[i].init(rng, kind != Kind::stem && i + 1 == convs.size() && !normalised() ? 0.5 : 2.0);
    if (has_shortcut) shortcut.init(rng, 1.0);
  }

  /// `training` selects batch statistics in the norm layers; every other
  /// caller (inference, frozen feature extraction) uses running estimates.
  Tensor<Scalar> forward(const Tensor<Scalar>& x, Context* ctx = nullptr, bool training = false) const {
    if (ctx) {
      ctx->convs.assign(convs.size(), {});
      ctx->norms.assign(norms.size(), {});
      ctx->activations.assign(convs.size(), {});
    }
    Tensor<Scalar> a = x;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      a = convs[i].forward(a, ctx ? &ctx->convs[i] : nullptr);
      if (normalised()) a = norms[i].forward(a, training, ctx ? &ctx->norms[i] : nullptr);
      if (i + 1 < convs.size()) {
        a.data = nn::relu(a.data);
        if (ctx) ctx->activations[i] = a.data;
      }
    }
    if (kind != Kind::stem) {
      if (has_shortcut) {
        Tensor<Scalar> sc = shortcut.forward(x, ctx ? &ctx->shortcut : nullptr);
        if (normalised()) sc = shortcut_norm.forward(sc, training, ctx ? &ctx->shortcut_norm : nullptr);
        a.data += sc.data;
      } else {
        a.data += x.data;
      }
    }
    a.data = nn::relu(a.data);
    if (ctx) ctx->output = a.data;
    return a;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& dy, Context& ctx, bool input_grad) {
    Tensor<Scalar> g = dy;
    g.data = nn::relu_backward(dy.data, ctx.output);
    const Tensor<Scalar> g_out = g;
    for (std::size_t i = convs.size(); i-- > 0;) {
      if (i + 1 < convs.size()) g.data = nn::relu_backward(g.data, ctx.activations[i]);
      if (normalised()) g = norms[i].backward(g, ctx.norms[i], true);
      g = convs[i].backward(g, ctx.convs[i], input_grad || i > 0);
    }
    if (kind == Kind::stem) return g;
    if (has_shortcut) {
      Tensor<Scalar> gs = g_out;
      if (normalised()) gs = shortcut_norm.backward(gs, ctx.shortcut_norm, true);
      Tensor<Scalar> dx = shortcut.backward(gs, ctx.shortcut, input_grad);
      if (input_grad) g.data += dx.data;
    } else if (input_grad) {
      g.data += g_out.data;
    }
    return g;
  }

  void collect(nn::ParamList<Scalar>& out) {
    for (std::size_t i = 0; i < convs.size(); ++i) {
      convs[i].collect(out);
      if (normalised()) norms[i].collect(out);
    }
    if (has_shortcut) {
      shortcut.collect(out);
      if (normalised()) shortcut_norm.collect(out);
    }
  }
  void collect(nn::ConstParamList<Scalar>& out) const {
    for (std::size_t i = 0; i < convs.size(); ++i) {
      convs[i].collect(out);
      if (normalised()) norms[i].collect(out);
    }
    if (has_shortcut) {
      shortcut.collect(out);
      if (normalised()) shortcut_norm.collect(out);
    }
  }

  /// Names of internal layers (not valid split points).
  std::vector<std::string> sublayer_names() const {
    std::vector<std::string> n;
    for (const auto& c : convs) n.push_back(c.desc().name);
    for (const auto& b : norms) n.push_back(b.desc().name);
    if (has_shortcut) n.push_back(shortcut.desc().name);
    if (has_shortcut && normalised()) n.push_back(shortcut_norm.desc().name);
    return n;
  }

  void describe(std::vector<nn::LayerDesc>& out) const {
    using K = nn::LayerDesc::Kind;
    if (kind != Kind::stem) out.push_back({K::block_begin, name});
    for (std::size_t i = 0; i < convs.size(); ++i) {
      out.push_back(convs[i].desc());
      if (normalised()) out.push_back(norms[i].desc());
      if (i + 1 < convs.size()) out.push_back({K::activation, convs[i].desc().name + ".relu"});
    }
    if (has_shortcut) {
      out.push_back(shortcut.desc(true));
      if (normalised()) out.push_back(shortcut_norm.desc(true));
    }
    if (kind != Kind::stem) out.push_back({K::block_end, name});
    out.push_back({K::activation, name + ".relu"});
  }

 private:
  void add_conv(const std::string& conv_name, const std::string& norm_name, int in, int out, int k, int stride,
                bool norm) {
    convs.emplace_back(conv_name, in, out, k, stride);
    if (norm) norms.emplace_back(norm_name, out);
  }
  void add_shortcut(int in, int out, int stride, bool norm) {
    has_shortcut = true;
    shortcut = nn::Conv2d<Scalar>(name + ".shortcut", in, out, 1, stride);
    if (norm) shortcut_norm = nn::BatchNorm2d<Scalar>(name + ".shortcut_bn", out);
  }
};

/// Full pretrained-style classifier f = head o pool o trunk.
template <typename Scalar>
class Classifier {
 public:
  struct Context {
    std::vector<typename TrunkUnit<Scalar>::Context> units;
    int n = 0, h = 0, w = 0;
    typename nn::Linear<Scalar>::Context head;
  };

  Classifier() = default;
  explicit Classifier(const BackboneArch& a, std::uint64_t seed = 0) : arch(a), seed(seed) {
    a.validate();
    units.push_back(TrunkUnit<Scalar>::stem("stem", a.in_channels, a.stem_width, a.batch_norm));
    int in = a.stem_width;
    for (std::size_t s = 0; s < a.widths.size(); ++s) {
      for (int b = 0; b < a.blocks[s]; ++b) {
        const int stride = (s > 0 && b == 0) ? 2 : 1;
        const std::string name = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
        if (a.block == BlockKind::basic)
          units.push_back(TrunkUnit<Scalar>::basic(name, in, a.widths[s], stride, a.batch_norm));
        else
          units.push_back(TrunkUnit<Scalar>::bottleneck(name, in, a.widths[s], stride, a.batch_norm));
        in = units.back().out_channels();
      }
    }
    head = nn::Linear<Scalar>("head", in, a.num_classes);
    Rng rng(derive_seed(seed, {0xB0}));
    for (auto& u : units) u.init(rng);
    head.init(rng, 1.0);
  }

  BackboneArch arch;
  std::uint64_t seed = 0;
  std::vector<TrunkUnit<Scalar>> units;
  nn::Linear<Scalar> head;

  int feature_dim() const { return head.in_features; }

  Tensor<Scalar> trunk(const Tensor<Scalar>& x) const {
    Tensor<Scalar> a = x;
    for (const auto& u : units) a = u.forward(a);
    return a;
  }

  Matrix<Scalar> features(const Tensor<Scalar>& x) const { return nn::global_avg_pool(trunk(x)); }

  Matrix<Scalar> logits(const Tensor<Scalar>& x) const { return head.forward(features(x)); }

  /// Training forward pass (batch statistics) that records what backward()
  /// needs. backward() also advances the running statistics.
  Matrix<Scalar> forward(const Tensor<Scalar>& x, Context& ctx) const {
    ctx.units.assign(units.size(), {});
    Tensor<Scalar> a = x;
    for (std::size_t i = 0; i < units.size(); ++i) a = units[i].forward(a, &ctx.units[i], true);
    ctx.n = a.n;
    ctx.h = a.h;
    ctx.w = a.w;
    return head.forward(nn::global_avg_pool(a), &ctx.head);
  }

  void backward(const Matrix<Scalar>& dlogits, Context& ctx) {
    const Matrix<Scalar> dfeat = head.backward(dlogits, ctx.head, true);
    Tensor<Scalar> g = nn::global_avg_pool_backward(dfeat, ctx.n, ctx.h, ctx.w);
    for (std::size_t i = units.size(); i-- > 0;) g = units[i].backward(g, ctx.units[i], i > 0);
  }

  nn::ParamList<Scalar> params() {
    nn::ParamList<Scalar> p;
    for (auto& u : units) u.collect(p);
    head.collect(p);
    return p;
  }
  nn::ConstParamList<Scalar> params() const {
    nn::ConstParamList<Scalar> p;
    for (const auto& u : units) u.collect(p);
    head.collect(p);
    return p;
  }

  std::vector<nn::LayerDesc> describe() const {
    std::vector<nn::LayerDesc> d;
    for (const auto& u : units) u.describe(d);
    d.push_back({nn::LayerDesc::Kind::global_pool, "pool"});
    d.push_back(head.desc());
    return d;
  }

  /// Residual-stage ends: the last block of every stage.
  std::vector<std::string> default_boundaries() const {
    std::vector<std::string> b;
    for (std::size_t s = 0; s < arch.widths.size(); ++s)
      b.push_back("stage" + std::to_string(s + 1) + ".block" + std::to_string(arch.blocks[s] - 1));
    return b;
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.meta = {{"kind", "classifier"}, {"arch", arch.to_json()}, {"seed", seed}};
    ck.dtype = dtype_name<Scalar>();
    ck.add_params(params());
    return ck;
  }

  static Classifier from_checkpoint(const Checkpoint& ck) {
    if (ck.meta.value("kind", "") != "classifier") throw IoError("checkpoint is not a classifier");
    Classifier c(BackboneArch::from_json(ck.meta.at("arch")), ck.meta.value("seed", std::uint64_t(0)));
    ck.load_params(c.params());
    return c;
  }

  template <typename Other>
  Classifier<Other> cast() const {
    Classifier<Other> out(arch, seed);
    auto src = params();
    auto dst = out.params();
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i]->value = src[i]->value.template cast<Other>();
      dst[i]->frozen = src[i]->frozen;
    }
    return out;
  }
};

struct StageShape {
  int h = 0;
  int w = 0;
  int c = 0;
};

/// Pretrained classifier partitioned into feature-extractor stages, global
/// pool and head.
template <typename Scalar>
class ClassifierSplit {
 public:
  using StageContext = std::vector<typename TrunkUnit<Scalar>::Context>;

  ClassifierSplit() = default;
  ClassifierSplit(Classifier<Scalar> m, std::vector<int> ends) : model(std::move(m)), stage_end(std::move(ends)) {}

  Classifier<Scalar> model;
  /// Exclusive end unit index of every stage; the last equals units.size().
  std::vector<int> stage_end;

  int num_stages() const { return static_cast<int>(stage_end.size()); }
  int stage_begin(int s) const { return s == 0 ? 0 : stage_end[s - 1]; }
  int feature_dim() const { return model.feature_dim(); }
  int num_classes() const { return model.head.out_features; }

  /// Stages always run in inference mode: a split wraps a pretrained network.
  Tensor<Scalar> run_stage(int s, const Tensor<Scalar>& x, StageContext* ctx = nullptr) const {
    check_stage(s);
    if (ctx) ctx->assign(std::size_t(stage_end[s] - stage_begin(s)), {});
    Tensor<Scalar> a = x;
    for (int u = stage_begin(s); u < stage_end[s]; ++u)
      a = model.units[u].forward(a, ctx ? &(*ctx)[std::size_t(u - stage_begin(s))] : nullptr);
    return a;
  }

  Tensor<Scalar> backward_stage(int s, const Tensor<Scalar>& dy, StageContext& ctx, bool input_grad) {
    Tensor<Scalar> g = dy;
    for (int u = stage_end[s]; u-- > stage_begin(s);)
      g = model.units[u].backward(g, ctx[std::size_t(u - stage_begin(s))], input_grad || u > stage_begin(s));
    return g;
  }

  /// phi: all stages followed by global average pooling.
  Matrix<Scalar> extract(const Tensor<Scalar>& x) const {
    Tensor<Scalar> a = x;
    for (int s = 0; s < num_stages(); ++s) a = run_stage(s, a);
    return nn::global_avg_pool(a);
  }

  /// psi: head applied to pooled features.
  Matrix<Scalar> classify(const Matrix<Scalar>& features) const { return model.head.forward(features); }

  Matrix<Scalar> logits(const Tensor<Scalar>& x) const { return classify(extract(x)); }

  std::vector<StageShape> stage_shapes(int h, int w) const {
    std::vector<StageShape> out;
    for (int s = 0; s < num_stages(); ++s) {
      for (int u = stage_begin(s); u < stage_end[s]; ++u)
        for (const auto& c : model.units[u].convs) {
          h = c.out_size(h);
          w = c.out_size(w);
        }
      out.push_back({h, w, model.units[stage_end[s] - 1].out_channels()});
    }
    return out;
  }

  bool frozen() const {
    for (const auto* p : model.params())
      if (!p->frozen) return false;
    return true;
  }

  nn::ParamList<Scalar> params() { return model.params(); }
  nn::ConstParamList<Scalar> params() const { return model.params(); }

 private:
  void check_stage(int s) const {
    if (s < 0 || s >= num_stages())
      throw InputError("stage index " + std::to_string(s) + " out of range [0, " + std::to_string(num_stages()) + ")");
  }
};

/// Partitions `model` after each named unit. The final stage always ends at
/// the last trunk unit. Unknown names or names of layers inside a residual
/// block raise ConfigError.
template <typename Scalar>
ClassifierSplit<Scalar> split_classifier(const Classifier<Scalar>& model, const std::vector<std::string>& boundaries) {
  std::vector<int> ends;
  for (const auto& b : boundaries) {
    int found = -1;
    for (std::size_t u = 0; u < model.units.size(); ++u) {
      const auto& unit = model.units[u];
      if (unit.name == b) found = static_cast<int>(u);
      for (const auto& sub : unit.sublayer_names()) {
        if (sub != b) continue;
        if (unit.kind != TrunkUnit<Scalar>::Kind::stem)
          throw ConfigError("boundary '" + b + "' lies inside residual block '" + unit.name + "'");
        found = static_cast<int>(u);
      }
    }
    if (found < 0) throw ConfigError("unknown stage boundary '" + b + "'");
    if (!ends.empty() && found + 1 <= ends.back()) throw ConfigError("stage boundaries must be strictly increasing");
    ends.push_back(found + 1);
  }
  const int n_units = static_cast<int>(model.units.size());
  if (ends.empty() || ends.back() != n_units) ends.push_back(n_units);
  return ClassifierSplit<Scalar>(model, std::move(ends));
}

template <typename Scalar>
ClassifierSplit<Scalar> split_classifier(const Classifier<Scalar>& model) {
  return split_classifier(model, model.default_boundaries());
}

/// Activation after stage `upto` for a single image.
template <typename Scalar>
Tensor<Scalar> extract_stage_features(const ClassifierSplit<Scalar>& split, const Image<Scalar>& image, int upto) {
  if (upto < 0 || upto >= split.num_stages())
    throw InputError("extract_stage_features: stage " + std::to_string(upto) + " out of range");
  Tensor<Scalar> a(1, image.h, image.w, image.c());
  a.data = image.data;
  for (int s = 0; s <= upto; ++s) a = split.run_stage(s, a);
  return a;
}

template <typename Scalar>
ClassifierSplit<Scalar> freeze(ClassifierSplit<Scalar> split) {
  nn::set_frozen(split.params(), true);
  return split;
}

}  // namespace fgnic
