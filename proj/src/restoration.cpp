#include "fgnic/restoration.hpp"

#include <numeric>

namespace fgnic {

std::vector<Image<float>> restore_all(const Denoiser<float>& model, const std::vector<Image<float>>& images,
                                      int batch) {
  std::vector<Image<float>> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); i += std::size_t(batch)) {
    std::vector<std::size_t> idx;
    for (std::size_t k = i; k < std::min(images.size(), i + std::size_t(batch)); ++k) idx.push_back(k);
    const Tensor<float> r = model.restore(stack<float>(images, idx));
    for (int k = 0; k < r.n; ++k) out.push_back(unstack(r, k));
  }
  return out;
}

namespace {

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t(0));
  return v;
}

}  // namespace

Denoiser<float> train_denoiser(const Dataset& data, NoiseRange range, const TrainConfig& cfg,
                               const RestorationArch& arch, MetricLog* log) {
  if (data.empty()) throw InputError("train_denoiser: empty dataset");
  if (range.lo < 0.0 || range.lo > range.hi) throw ConfigError("train_denoiser: invalid noise range");
  TrainConfig noise_cfg = cfg;
  noise_cfg.noise_sampling = NoiseSampling::continuous_range;
  noise_cfg.noise_values = {range.lo, range.hi};
  noise_cfg.validate();

  Denoiser<float> model(arch, cfg.seed);
  nn::Optimizer<float> opt(cfg.optimizer, cfg.learning_rate, model.params());
  const auto indices = all_indices(data.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    std::size_t seen = 0;
    const auto batches = epoch_batches(indices, cfg.batch_size, cfg.seed, std::uint64_t(epoch));
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const NoisyBatch nb = sample_noisy_batch(data, batches[b], noise_cfg, std::uint64_t(epoch));
      Denoiser<float>::Context ctx;
      opt.zero_grad();
      const Tensor<float> pred = model.predict_residual(nb.noisy, &ctx);
      Tensor<float> grad(pred.n, pred.h, pred.w, pred.c());
      const Matrix<float> target = nb.noisy.data - nb.clean.data;
      const double loss = nn::mse(pred.data, target, &grad.data);
      check_finite_loss(loss, "train_denoiser", epoch, b);
      model.net.backward(grad, ctx, false);
      opt.step();
      total += loss * double(batches[b].size());
      seen += batches[b].size();
    }
    if (log) log->append({epoch, total / double(seen)});
  }
  return model;
}

Tensor<float> estimator_targets(const NoisyBatch& batch, const Denoiser<float>& denoiser, Tensor<float>* restored) {
  Tensor<float> r = denoiser.restore(batch.noisy);
  Tensor<float> f = oracle_fidelity(batch.clean, r, FidelityMetric::l1);
  if (restored) *restored = std::move(r);
  return f;
}

FidelityEstimator<float> train_fidelity_estimator(const Dataset& data, const Denoiser<float>& denoiser,
                                                  const TrainConfig& cfg, const RestorationArch& arch,
                                                  MetricLog* log) {
  if (data.empty()) throw InputError("train_fidelity_estimator: empty dataset");
  cfg.validate();
  FidelityEstimator<float> model(arch, cfg.seed);
  nn::Optimizer<float> opt(cfg.optimizer, cfg.learning_rate, model.params());
  const auto indices = all_indices(data.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    std::size_t seen = 0;
    const auto batches = epoch_batches(indices, cfg.batch_size, cfg.seed, std::uint64_t(epoch));
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const NoisyBatch nb = sample_noisy_batch(data, batches[b], cfg, std::uint64_t(epoch));
      Tensor<float> restored;
      const Tensor<float> target = estimator_targets(nb, denoiser, &restored);
      FidelityEstimator<float>::Context ctx;
      opt.zero_grad();
      const Tensor<float> pred = model.estimate(restored, &ctx);
      Tensor<float> grad(pred.n, pred.h, pred.w, 1);
      const double loss = nn::mse(pred.data, target.data, &grad.data);
      check_finite_loss(loss, "train_fidelity_estimator", epoch, b);
      model.backward(grad, ctx);
      opt.step();
      total += loss * double(batches[b].size());
      seen += batches[b].size();
    }
    if (log) log->append({epoch, total / double(seen)});
  }
  return model;
}

}  // namespace fgnic
