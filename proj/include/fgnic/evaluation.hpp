#pragma once

#include "fgnic/accounting.hpp"
#include "fgnic/backbone.hpp"
#include "fgnic/dataset.hpp"
#include "fgnic/fusion.hpp"
#include "fgnic/imaging.hpp"
#include "fgnic/restoration.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fgnic {

enum class TestCondition { noisy, restored };

std::string to_string(TestCondition c);
TestCondition test_condition_from_string(const std::string& s);

/// Accuracy (%) of one method under one degradation setting.
struct AccuracyCell {
  std::string column;
  double accuracy = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  /// Binomial standard error in percentage points (0 without samples).
  double standard_error() const;
  bool operator==(const AccuracyCell&) const = default;
};

struct AccuracyRow {
  std::string method;
  std::string condition;
  std::vector<AccuracyCell> cells;

  const AccuracyCell* find(const std::string& column) const;
  bool operator==(const AccuracyRow&) const = default;
};

/// Methods x test conditions by degradation columns. Rows and columns are
/// kept in canonical order, so insertion order never shows in the output.
struct AccuracyTable {
  std::string title;
  /// Preferred method order; methods not listed follow alphabetically.
  std::vector<std::string> method_order;
  std::vector<AccuracyRow> rows;

  /// Inserts or replaces the (method, condition, cell.column) entry.
  void add(const std::string& method, const std::string& condition, AccuracyCell cell);
  void add(const AccuracyRow& row);
  const AccuracyRow* find(const std::string& method, const std::string& condition) const;
  std::optional<double> accuracy(const std::string& method, const std::string& condition,
                                 const std::string& column) const;

  /// All column labels in display order: uniform by ascending sigma, then the rest by label.
  std::vector<std::string> columns() const;
  /// Macro average over the uniform-noise columns of a row (each level weighted equally).
  std::optional<double> uniform_macro_average(const std::string& method, const std::string& condition) const;

  /// Rows sorted into canonical order.
  void canonicalize();

  nlohmann::json to_json() const;
  static AccuracyTable from_json(const nlohmann::json& j);
  bool operator==(const AccuracyTable&) const = default;
};

/// Column label of a degradation setting, e.g. "uniform:0.3".
std::string column_label(const DegradationSpec& spec);

/// Display ordering key of a column label: (kind rank, sigma, label).
bool column_less(const std::string& a, const std::string& b);

enum class ReportFormat { json, csv, markdown };

std::string to_string(ReportFormat f);
ReportFormat report_format_from_string(const std::string& s);

/// Deterministic serialization of a table.
std::string emit_report(const AccuracyTable& table, ReportFormat format);
std::string emit_report(const CostReport& report, ReportFormat format);

/// Reads a JSON table of published cells ("replay mode"); values are
/// passed through unchanged for schema checks.
AccuracyTable load_replay_table(const std::filesystem::path& path);

/// Degraded copies of a test set for one setting; every method evaluated on
/// a cell sees identical pixels.
struct EvalCell {
  DegradationSpec spec;
  std::string column;
  std::uint64_t seed = 0;
  Tensor<float> clean;
  Tensor<float> noisy;
  /// Present when a denoiser was supplied.
  std::optional<Tensor<float>> restored;
  std::vector<int> labels;
};

/// Noise for image i under `spec` is seeded by (seed, column label, i);
/// radial specs with a random center also draw the center per image.
Image<float> degrade_for_eval(const Image<float>& clean, const DegradationSpec& spec, std::uint64_t seed,
                              std::size_t index);

std::vector<EvalCell> prepare_cells(const Dataset& test, const std::vector<DegradationSpec>& specs,
                                    std::uint64_t seed, const Denoiser<float>* denoiser);

/// Logits for a chunk of inputs. `clean` is the matching clean chunk.
using Predictor = std::function<Matrix<float>(const Tensor<float>& input, const Tensor<float>& clean)>;

/// Index of the largest logit per column (first index on ties).
std::vector<int> argmax_columns(const Matrix<float>& logits);

/// Top-1 accuracy (%) of `predict` on one cell under `condition`.
AccuracyCell evaluate_cell(const EvalCell& cell, const Predictor& predict, TestCondition condition, int batch = 100);

AccuracyRow evaluate(const std::string& method, const std::vector<EvalCell>& cells, const Predictor& predict,
                     TestCondition condition, int batch = 100);

/// Classifier on degraded (noisy) or restored inputs.
AccuracyRow evaluate(const Classifier<float>& model, const Dataset& test, const std::vector<DegradationSpec>& specs,
                     TestCondition condition, std::uint64_t seed, const Denoiser<float>* denoiser = nullptr);

/// FG-NIC models always consume the restored path.
AccuracyRow evaluate(const FGNICModel<float>& model, const Dataset& test, const std::vector<DegradationSpec>& specs,
                     std::uint64_t seed);

Predictor classifier_predictor(const Classifier<float>& model);
Predictor fgnic_predictor(const FGNICModel<float>& model);

/// Default grid: uniform sigma 0.1..0.5 plus linear1d and radial2d over (0, 0.5).
std::vector<DegradationSpec> default_eval_grid();

/// MACs at (h, w) and parameter counts for each network of an assembled model.
CostReport cost_report(const FGNICModel<float>& model, int h, int w);

}  // namespace fgnic
