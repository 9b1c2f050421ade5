#pragma once

#include "fgnic/evaluation.hpp"
#include "fgnic/training.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fgnic {

/// Where images come from and how they are split into train/test.
struct DataConfig {
  /// "synthetic" or "directory".
  std::string source = "synthetic";
  SyntheticSpec synthetic;
  /// Root of a directory-per-class tree (source == "directory"); a
  /// "train"/"test" pair of subdirectories is used when present.
  std::string path;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 11;

  nlohmann::json to_json() const;
  static DataConfig from_json(const nlohmann::json& j);
};

/// One FG-NIC model trained per seed; `fusion` overrides the shared settings.
struct VariantConfig {
  std::string method = "FG-NIC (Oracle)";
  std::string setup = "Single";
  FusionConfig fusion;

  std::string slug() const;
};

/// Declarative experiment description; also the CLI config file format.
struct ExperimentConfig {
  DataConfig data;
  RestorationArch restoration;
  BackboneArch backbone = BackboneArch::desk();
  TrainConfig train_denoiser;
  TrainConfig train_fidelity;
  TrainConfig train_backbone;
  TrainConfig train_baseline;
  TrainConfig train_fgnic;
  FusionConfig fusion;
  std::vector<VariantConfig> variants;
  std::vector<BaselineKind> baselines;
  std::vector<DegradationSpec> eval_grid = default_eval_grid();
  std::uint64_t eval_seed = 1234;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  /// Optional pre-trained checkpoints; empty = train.
  std::string denoiser_checkpoint;
  std::string estimator_checkpoint;
  std::string backbone_checkpoint;

  /// Desk-scale defaults (every field above as documented in README).
  static ExperimentConfig defaults();
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Overrides the base seed of every training config and the seed list.
  void set_seed(std::uint64_t seed);
};

struct DataSplits {
  Dataset train;
  Dataset test;
};

DataSplits load_data(const DataConfig& cfg);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

/// Per-seed accuracy tables averaged cell by cell (mean accuracy, summed
/// samples); the aggregated cell seed is `seed`.
AccuracyTable average_tables(const std::vector<AccuracyTable>& tables, std::uint64_t seed);

/// Method row order used in reports.
std::vector<std::string> report_method_order();

// Pipeline steps. Each trains (or loads, when a checkpoint path is
// configured) one network and stores it in a run directory under `out`.
Denoiser<float> obtain_denoiser(const ExperimentConfig& cfg, const Dataset& train, const std::filesystem::path& out,
                                std::ostream* progress);
FidelityEstimator<float> obtain_estimator(const ExperimentConfig& cfg, const Dataset& train,
                                          const Denoiser<float>& denoiser, const std::filesystem::path& out,
                                          std::ostream* progress);
Classifier<float> obtain_backbone(const ExperimentConfig& cfg, const Dataset& train, std::uint64_t seed,
                                  const std::filesystem::path& out, std::ostream* progress);

struct ExperimentResult {
  std::vector<AccuracyTable> per_seed;
  AccuracyTable summary;
  CostReport cost;
};

/// Full grid: restoration networks (shared across seeds), then per seed a
/// clean backbone, the configured baselines and FG-NIC variants, and their
/// evaluation. Writes results.{json,csv,md}, cost.{json,md} and one table
/// per seed under `out`.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream* progress);

}  // namespace fgnic
