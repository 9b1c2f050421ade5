#pragma once

#include "fgnic/dataset.hpp"
#include "fgnic/nn/optim.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace fgnic {

enum class NoiseSampling { discrete_set, continuous_range };

std::string to_string(NoiseSampling s);
NoiseSampling noise_sampling_from_string(const std::string& s);

/// Optimisation and noise-sampling settings shared by every training routine.
struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 1e-3;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adaptive;
  std::uint64_t seed = 0;
  NoiseSampling noise_sampling = NoiseSampling::continuous_range;
  /// Discrete sigma set, or {sigma_min, sigma_max} for a continuous range.
  std::vector<double> noise_values = {0.0, 0.5};
  /// Stratified hold-out used for best-checkpoint selection.
  double validation_fraction = 0.1;

  void validate() const;
  double sample_sigma(Rng& rng) const;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig from_json(const nlohmann::json& j, const TrainConfig& defaults);
};

/// Retraining mixture used by the retrain-on-noisy / retrain-on-restored baselines.
inline std::vector<double> retraining_sigmas() { return {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}; }

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();

  nlohmann::json to_json() const;
};

/// Append-only per-run metric log with an optional line sink.
struct MetricLog {
  std::vector<EpochRecord> epochs;
  std::function<void(const EpochRecord&)> sink;

  void append(const EpochRecord& r) {
    epochs.push_back(r);
    if (sink) sink(r);
  }
};

/// Clean and degraded versions of a batch of dataset images.
struct NoisyBatch {
  Tensor<float> clean;
  Tensor<float> noisy;
  std::vector<int> labels;
  std::vector<double> sigmas;
};

/// Degrades each selected image with uniform noise whose sigma comes from
/// `cfg`. Draws are keyed by (cfg.seed, epoch, image index) so any batch
/// order reproduces the same pixels.
NoisyBatch sample_noisy_batch(const Dataset& data, std::span<const std::size_t> indices, const TrainConfig& cfg,
                              std::uint64_t epoch);

/// Shuffled minibatch partition of `indices` for one epoch.
std::vector<std::vector<std::size_t>> epoch_batches(std::vector<std::size_t> indices, int batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch);

/// Throws TrainingError when `loss` is not finite.
void check_finite_loss(double loss, const std::string& what, int epoch, std::size_t batch);

}  // namespace fgnic
