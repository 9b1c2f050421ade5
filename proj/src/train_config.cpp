#include "fgnic/train_config.hpp"

#include <algorithm>
#include <cmath>

namespace fgnic {

std::string to_string(NoiseSampling s) {
  return s == NoiseSampling::discrete_set ? "discrete_set" : "continuous_range";
}

NoiseSampling noise_sampling_from_string(const std::string& s) {
  if (s == "discrete_set") return NoiseSampling::discrete_set;
  if (s == "continuous_range") return NoiseSampling::continuous_range;
  throw ConfigError("unknown noise sampling '" + s + "'");
}

namespace nn {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adaptive ? "adaptive" : "sgd_momentum"; }

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "adaptive") return OptimizerKind::adaptive;
  if (s == "sgd_momentum") return OptimizerKind::sgd_momentum;
  throw ConfigError("unknown optimizer '" + s + "'");
}

}  // namespace nn

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (noise_values.empty()) throw ConfigError("noise_values must not be empty");
  for (double s : noise_values)
    if (!std::isfinite(s) || s < 0.0) throw ConfigError("noise values must be finite and >= 0");
  if (noise_sampling == NoiseSampling::continuous_range &&
      (noise_values.size() != 2 || noise_values[0] > noise_values[1]))
    throw ConfigError("continuous noise range must be [sigma_min, sigma_max]");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) throw ConfigError("validation_fraction must be in [0,1)");
}

double TrainConfig::sample_sigma(Rng& rng) const {
  if (noise_sampling == NoiseSampling::discrete_set) {
    std::uniform_int_distribution<std::size_t> pick(0, noise_values.size() - 1);
    return noise_values[pick(rng)];
  }
  if (noise_values[0] == noise_values[1]) return noise_values[0];
  std::uniform_real_distribution<double> u(noise_values[0], noise_values[1]);
  return u(rng);
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"optimizer", nn::to_string(optimizer)},
          {"seed", seed},
          {"noise_sampling", to_string(noise_sampling)},
          {"noise_values", noise_values},
          {"validation_fraction", validation_fraction}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) { return from_json(j, TrainConfig()); }

TrainConfig TrainConfig::from_json(const nlohmann::json& j, const TrainConfig& defaults) {
  TrainConfig c = defaults;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  if (j.contains("optimizer")) c.optimizer = nn::optimizer_kind_from_string(j.at("optimizer").get<std::string>());
  c.seed = j.value("seed", c.seed);
  if (j.contains("noise_sampling")) c.noise_sampling = noise_sampling_from_string(j.at("noise_sampling").get<std::string>());
  if (j.contains("noise_values")) c.noise_values = j.at("noise_values").get<std::vector<double>>();
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.validate();
  return c;
}

nlohmann::json EpochRecord::to_json() const {
  nlohmann::json j = {{"epoch", epoch}, {"loss", loss}};
  if (!std::isnan(accuracy)) j["accuracy"] = accuracy;
  if (!std::isnan(val_accuracy)) j["val_accuracy"] = val_accuracy;
  return j;
}

NoisyBatch sample_noisy_batch(const Dataset& data, std::span<const std::size_t> indices, const TrainConfig& cfg,
                              std::uint64_t epoch) {
  NoisyBatch b;
  b.clean = stack<float>(data.images, indices);
  b.noisy = b.clean;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto idx = indices[k];
    Rng rng(derive_seed(cfg.seed, {epoch, idx, 1}));
    const double sigma = cfg.sample_sigma(rng);
    const auto& im = data.images[idx];
    const auto field = make_noise_field(DegradationSpec::uniform(sigma), im.h, im.w);
    b.noisy.sample(static_cast<int>(k)) = degrade(im, field, derive_seed(cfg.seed, {epoch, idx, 2})).data;
    b.labels.push_back(data.labels[idx]);
    b.sigmas.push_back(sigma);
  }
  return b;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::vector<std::size_t> indices, int batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch) {
  Rng rng(derive_seed(seed, {epoch, 0x5348u}));
  std::shuffle(indices.begin(), indices.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < indices.size(); i += std::size_t(batch_size))
    out.emplace_back(indices.begin() + std::ptrdiff_t(i),
                     indices.begin() + std::ptrdiff_t(std::min(indices.size(), i + std::size_t(batch_size))));
  return out;
}

void check_finite_loss(double loss, const std::string& what, int epoch, std::size_t batch) {
  if (!std::isfinite(loss))
    throw TrainingError(what + ": non-finite loss (" + std::to_string(loss) + ") at epoch " + std::to_string(epoch) +
                        ", batch " + std::to_string(batch) + "; lower the learning rate or check the inputs");
}

}  // namespace fgnic
