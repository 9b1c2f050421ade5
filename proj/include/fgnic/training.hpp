#pragma once

#include "fgnic/backbone.hpp"
#include "fgnic/checkpoint.hpp"
#include "fgnic/dataset.hpp"
#include "fgnic/fusion.hpp"
#include "fgnic/restoration.hpp"
#include "fgnic/train_config.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>

namespace fgnic {

/// On-disk run layout: config.json (snapshot incl. seed), metrics.jsonl
/// (one EpochRecord per line, append-only) and named checkpoints.
class RunDirectory {
 public:
  RunDirectory(std::filesystem::path root, std::string run_id, const nlohmann::json& config, std::uint64_t seed);

  const std::filesystem::path& dir() const { return dir_; }
  const std::string& run_id() const { return run_id_; }

  /// Routes every appended record of `log` to metrics.jsonl.
  void attach(MetricLog& log) const;
  std::filesystem::path save_checkpoint(const std::string& name, const Checkpoint& ck) const;

 private:
  std::filesystem::path dir_;
  std::string run_id_;
};

/// Result of one training routine.
struct ExperimentRun {
  std::string run_id;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::map<std::string, std::filesystem::path> checkpoints;
  MetricLog log;
  /// Epoch whose parameters were kept (best validation accuracy).
  int best_epoch = -1;
  double best_val_accuracy = std::numeric_limits<double>::quiet_NaN();
};

enum class BaselineKind { clean, retrain_noisy, retrain_restored };

std::string to_string(BaselineKind k);
BaselineKind baseline_kind_from_string(const std::string& s);

/// Trains only the fusion blocks, gate and (end_to_end) estimator of `model`
/// with cross-entropy on freshly degraded images each epoch. Keeps the
/// parameters of the best validation epoch. Refuses to start when the
/// backbone or denoiser has trainable parameters, and verifies their hashes
/// after the run.
ExperimentRun train_fgnic(FGNICModel<float>& model, const Dataset& data, const TrainConfig& cfg,
                          const RunDirectory* run = nullptr);

/// Full-network classifier training. clean: clean images; retrain_noisy:
/// degraded with sigma from cfg; retrain_restored: restore(degraded).
/// `init` (when given) is the starting point, otherwise a fresh network
/// seeded by cfg.seed.
struct BaselineResult {
  Classifier<float> model;
  ExperimentRun run;
};

BaselineResult train_baseline(BaselineKind kind, const Dataset& data, const TrainConfig& cfg,
                              const BackboneArch& arch, const Denoiser<float>* denoiser = nullptr,
                              const Classifier<float>* init = nullptr, const RunDirectory* run = nullptr);

}  // namespace fgnic
