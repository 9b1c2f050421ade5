#pragma once

// Finite-difference check of every trainable FG-NIC block type in double.

#include "gradcheck.hpp"
#include "toy_models.hpp"

#include <map>
#include <string>

namespace fgnic::testing {

/// Maximum relative error per block type ("spatial", "channel", "concat",
/// "gate", and "estimator" in end_to_end mode) for the cross-entropy loss of
/// a 16x16 toy model.
inline std::map<std::string, GradReport> fusion_gradient_errors(FidelitySource source, std::uint64_t seed = 3) {
  FusionConfig cfg;
  cfg.use_ensemble = true;
  cfg.fidelity_source = source;
  auto model = toy_fgnic<double>(cfg, seed);
  // Move the gate off its symmetric start so its gradient is generic.
  model.ensemble->w.value = probe(model.ensemble->w.value.rows(), 1, seed + 10) * 0.5;

  const Tensor<double> clean = random_images<double>(3, 16, 16, seed + 20);
  const Tensor<double> restored = model.denoiser.restore(add_noise(clean, 0.2, seed + 30));
  const std::vector<int> labels = {0, 3, 1};

  auto loss = [&]() {
    const Tensor<double> fid = model.fidelity(restored, &clean);
    return nn::cross_entropy(model.forward(restored, fid), labels);
  };

  nn::ParamList<double> params = model.block_params();
  if (source == FidelitySource::end_to_end)
    for (auto* p : model.estimator->params()) params.push_back(p);
  nn::zero_grad(params);
  typename FGNICModel<double>::Context ctx;
  const Tensor<double> fid = model.fidelity(restored, &clean, &ctx);
  Matrix<double> dlogits;
  nn::cross_entropy(model.forward(restored, fid, &ctx), labels, &dlogits);
  model.backward(dlogits, ctx);

  std::map<std::string, GradReport> out;
  for (auto* p : params) {
    std::string kind = p->name.rfind("fusion.spatial", 0) == 0  ? "spatial"
                       : p->name.rfind("fusion.channel", 0) == 0 ? "channel"
                       : p->name.rfind("fusion.concat", 0) == 0  ? "concat"
                       : p->name.rfind("fusion.gate", 0) == 0    ? "gate"
                                                                 : "estimator";
    check_param(*p, loss, out[kind], 1e-5);
  }
  return out;
}

}  // namespace fgnic::testing
