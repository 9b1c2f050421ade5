#include "fgnic/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

namespace fgnic {

std::string to_string(TestCondition c) { return c == TestCondition::noisy ? "noisy" : "restored"; }

TestCondition test_condition_from_string(const std::string& s) {
  if (s == "noisy") return TestCondition::noisy;
  if (s == "restored") return TestCondition::restored;
  throw ConfigError("unknown test condition '" + s + "'");
}

std::string to_string(ReportFormat f) {
  switch (f) {
    case ReportFormat::json: return "json";
    case ReportFormat::csv: return "csv";
    case ReportFormat::markdown: return "markdown";
  }
  return "?";
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  throw ConfigError("unknown report format '" + s + "'");
}

double AccuracyCell::standard_error() const {
  if (samples == 0) return 0.0;
  const double p = accuracy / 100.0;
  return 100.0 * std::sqrt(std::max(p * (1.0 - p), 0.0) / double(samples));
}

const AccuracyCell* AccuracyRow::find(const std::string& column) const {
  for (const auto& c : cells)
    if (c.column == column) return &c;
  return nullptr;
}

// ---- column ordering ------------------------------------------------------

namespace {

struct ColumnKey {
  int rank = 3;
  double sigma = 0.0;
};

ColumnKey column_key(const std::string& label) {
  try {
    const auto spec = DegradationSpec::parse(label);
    switch (spec.kind) {
      case DegradationKind::uniform: return {0, spec.sigma};
      case DegradationKind::linear1d: return {1, spec.sigma_hi};
      case DegradationKind::radial2d: return {2, spec.sigma_hi};
    }
  } catch (const ConfigError&) {
  }
  return {};
}

std::string fmt_double(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string column_label(const DegradationSpec& spec) { return spec.label(); }

bool column_less(const std::string& a, const std::string& b) {
  const ColumnKey ka = column_key(a), kb = column_key(b);
  return std::tie(ka.rank, ka.sigma, a) < std::tie(kb.rank, kb.sigma, b);
}

// ---- table ------------------------------------------------------------------

void AccuracyTable::add(const std::string& method, const std::string& condition, AccuracyCell cell) {
  if (!(cell.accuracy >= 0.0 && cell.accuracy <= 100.0))
    throw InputError("accuracy " + std::to_string(cell.accuracy) + " outside [0, 100]");
  AccuracyRow* row = nullptr;
  for (auto& r : rows)
    if (r.method == method && r.condition == condition) row = &r;
  if (!row) {
    rows.push_back({method, condition, {}});
    row = &rows.back();
  }
  auto it = std::find_if(row->cells.begin(), row->cells.end(), [&](const auto& c) { return c.column == cell.column; });
  if (it != row->cells.end())
    *it = std::move(cell);
  else
    row->cells.push_back(std::move(cell));
  canonicalize();
}

void AccuracyTable::add(const AccuracyRow& row) {
  for (const auto& c : row.cells) add(row.method, row.condition, c);
}

const AccuracyRow* AccuracyTable::find(const std::string& method, const std::string& condition) const {
  for (const auto& r : rows)
    if (r.method == method && r.condition == condition) return &r;
  return nullptr;
}

std::optional<double> AccuracyTable::accuracy(const std::string& method, const std::string& condition,
                                              const std::string& column) const {
  const auto* r = find(method, condition);
  if (!r) return std::nullopt;
  const auto* c = r->find(column);
  if (!c) return std::nullopt;
  return c->accuracy;
}

std::vector<std::string> AccuracyTable::columns() const {
  std::vector<std::string> cols;
  for (const auto& r : rows)
    for (const auto& c : r.cells)
      if (std::find(cols.begin(), cols.end(), c.column) == cols.end()) cols.push_back(c.column);
  std::sort(cols.begin(), cols.end(), column_less);
  return cols;
}

std::optional<double> AccuracyTable::uniform_macro_average(const std::string& method,
                                                           const std::string& condition) const {
  const auto* r = find(method, condition);
  if (!r) return std::nullopt;
  double sum = 0.0;
  int count = 0;
  for (const auto& c : r->cells) {
    const auto k = column_key(c.column);
    if (k.rank == 0 && k.sigma > 0.0) {
      sum += c.accuracy;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

void AccuracyTable::canonicalize() {
  auto rank = [&](const std::string& m) {
    const auto it = std::find(method_order.begin(), method_order.end(), m);
    return it == method_order.end() ? method_order.size() : std::size_t(it - method_order.begin());
  };
  std::sort(rows.begin(), rows.end(), [&](const AccuracyRow& a, const AccuracyRow& b) {
    return std::make_tuple(rank(a.method), a.method, a.condition) <
           std::make_tuple(rank(b.method), b.method, b.condition);
  });
  for (auto& r : rows)
    std::sort(r.cells.begin(), r.cells.end(),
              [](const AccuracyCell& a, const AccuracyCell& b) { return column_less(a.column, b.column); });
}

nlohmann::json AccuracyTable::to_json() const {
  AccuracyTable t = *this;
  t.canonicalize();
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : r.cells)
      cells.push_back({{"column", c.column}, {"accuracy", c.accuracy}, {"samples", c.samples}, {"seed", c.seed}});
    jrows.push_back({{"method", r.method}, {"condition", r.condition}, {"cells", cells}});
  }
  return {{"kind", "accuracy_table"}, {"title", t.title}, {"method_order", t.method_order}, {"rows", jrows}};
}

AccuracyTable AccuracyTable::from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "accuracy_table") throw IoError("document is not an accuracy table");
  AccuracyTable t;
  t.title = j.value("title", "");
  t.method_order = j.value("method_order", std::vector<std::string>{});
  for (const auto& r : j.at("rows"))
    for (const auto& c : r.at("cells"))
      t.add(r.at("method").get<std::string>(), r.at("condition").get<std::string>(),
            {c.at("column").get<std::string>(), c.at("accuracy").get<double>(), c.value("samples", std::size_t(0)),
             c.value("seed", std::uint64_t(0))});
  t.canonicalize();
  return t;
}

AccuracyTable load_replay_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return AccuracyTable::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed table " + path.string() + ": " + e.what());
  }
}

// ---- reports ----------------------------------------------------------------

namespace {

std::string column_header(const std::string& label) {
  const auto k = column_key(label);
  if (k.rank == 0) return "σ=" + fmt_double("%g", k.sigma);
  return label;
}

}  // namespace

std::string emit_report(const AccuracyTable& table, ReportFormat format) {
  AccuracyTable t = table;
  t.canonicalize();
  const auto cols = t.columns();
  std::ostringstream out;
  switch (format) {
    case ReportFormat::json:
      out << t.to_json().dump(2) << "\n";
      break;
    case ReportFormat::csv:
      out << "method,condition,column,accuracy,std_error,samples,seed\n";
      for (const auto& r : t.rows)
        for (const auto& c : r.cells)
          out << csv_escape(r.method) << ',' << csv_escape(r.condition) << ',' << csv_escape(c.column) << ','
              << fmt_double("%.4f", c.accuracy) << ',' << fmt_double("%.4f", c.standard_error()) << ',' << c.samples
              << ',' << c.seed << "\n";
      break;
    case ReportFormat::markdown: {
      bool any_uniform = false;
      for (const auto& c : cols) any_uniform |= column_key(c).rank == 0 && column_key(c).sigma > 0.0;
      if (!t.title.empty()) out << "## " << t.title << "\n\n";
      out << "| Method | Setup |";
      for (const auto& c : cols) out << ' ' << column_header(c) << " |";
      if (any_uniform) out << " Uniform mean (macro) |";
      out << "\n|---|---|";
      for (std::size_t i = 0; i < cols.size() + (any_uniform ? 1 : 0); ++i) out << "---:|";
      out << "\n";
      for (const auto& r : t.rows) {
        out << "| " << r.method << " | " << r.condition << " |";
        for (const auto& c : cols) {
          const auto* cell = r.find(c);
          out << ' ' << (cell ? fmt_double("%.2f", cell->accuracy) : std::string("n/a")) << " |";
        }
        if (any_uniform) {
          const auto m = t.uniform_macro_average(r.method, r.condition);
          out << ' ' << (m ? fmt_double("%.2f", *m) : std::string("n/a")) << " |";
        }
        out << "\n";
      }
      break;
    }
  }
  return out.str();
}

std::string emit_report(const CostReport& report, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::json:
      out << report.to_json().dump(2) << "\n";
      break;
    case ReportFormat::csv:
      out << "network,input_h,input_w,input_c,macs,trainable_params,total_params\n";
      for (const auto& e : report.entries)
        out << csv_escape(e.network) << ',' << e.input.h << ',' << e.input.w << ',' << e.input.c << ',' << e.macs << ','
            << e.trainable_params << ',' << e.total_params << "\n";
      break;
    case ReportFormat::markdown:
      out << "| Network | Input (HxWxC) | MACs | Trainable params | Total params |\n|---|---|---:|---:|---:|\n";
      for (const auto& e : report.entries)
        out << "| " << e.network << " | " << e.input.h << 'x' << e.input.w << 'x' << e.input.c << " | " << e.macs
            << " | " << e.trainable_params << " | " << e.total_params << " |\n";
      break;
  }
  return out.str();
}

// ---- evaluation -------------------------------------------------------------

Image<float> degrade_for_eval(const Image<float>& clean, const DegradationSpec& spec, std::uint64_t seed,
                              std::size_t index) {
  DegradationSpec s = spec;
  const std::uint64_t col = string_key(spec.label());
  if (s.kind == DegradationKind::radial2d && !s.center) s.seed = derive_seed(seed, {col, index, 1});
  const NoiseField field = make_noise_field(s, clean.h, clean.w);
  return degrade(clean, field, derive_seed(seed, {col, index, 2}));
}

namespace {

Tensor<float> slice(const Tensor<float>& t, int begin, int count) {
  Tensor<float> out(count, t.h, t.w, t.c());
  out.data = t.data.middleCols(Index(begin) * t.pixels(), Index(count) * t.pixels());
  return out;
}

}  // namespace

std::vector<EvalCell> prepare_cells(const Dataset& test, const std::vector<DegradationSpec>& specs,
                                    std::uint64_t seed, const Denoiser<float>* denoiser) {
  if (test.empty()) throw InputError("evaluation requires a non-empty test set");
  std::vector<EvalCell> cells;
  for (const auto& spec : specs) {
    spec.validate();
    EvalCell cell;
    cell.spec = spec;
    cell.column = column_label(spec);
    cell.seed = seed;
    cell.labels = test.labels;
    std::vector<Image<float>> noisy;
    noisy.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) noisy.push_back(degrade_for_eval(test.images[i], spec, seed, i));
    cell.clean = stack<float>(test.images);
    cell.noisy = stack<float>(noisy);
    if (denoiser) {
      Tensor<float> r(cell.noisy.n, cell.noisy.h, cell.noisy.w, cell.noisy.c());
      for (int b = 0; b < cell.noisy.n; b += 100) {
        const int count = std::min(100, cell.noisy.n - b);
        r.data.middleCols(Index(b) * r.pixels(), Index(count) * r.pixels()) =
            denoiser->restore(slice(cell.noisy, b, count)).data;
      }
      cell.restored = std::move(r);
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::vector<int> argmax_columns(const Matrix<float>& logits) {
  std::vector<int> out(std::size_t(logits.cols()));
  for (Index n = 0; n < logits.cols(); ++n) {
    Index best = 0;
    logits.col(n).maxCoeff(&best);
    out[std::size_t(n)] = static_cast<int>(best);
  }
  return out;
}

AccuracyCell evaluate_cell(const EvalCell& cell, const Predictor& predict, TestCondition condition, int batch) {
  if (cell.labels.empty()) throw InputError("evaluation requires a non-empty test set");
  if (condition == TestCondition::restored && !cell.restored)
    throw InputError("restored condition requires cells prepared with a denoiser");
  const Tensor<float>& input = condition == TestCondition::noisy ? cell.noisy : *cell.restored;
  std::size_t correct = 0;
  for (int b = 0; b < input.n; b += batch) {
    const int count = std::min(batch, input.n - b);
    const auto pred = argmax_columns(predict(slice(input, b, count), slice(cell.clean, b, count)));
    for (int k = 0; k < count; ++k) correct += pred[std::size_t(k)] == cell.labels[std::size_t(b + k)];
  }
  return {cell.column, 100.0 * double(correct) / double(input.n), std::size_t(input.n), cell.seed};
}

AccuracyRow evaluate(const std::string& method, const std::vector<EvalCell>& cells, const Predictor& predict,
                     TestCondition condition, int batch) {
  AccuracyRow row{method, "Test on " + to_string(condition), {}};
  for (const auto& c : cells) row.cells.push_back(evaluate_cell(c, predict, condition, batch));
  return row;
}

Predictor classifier_predictor(const Classifier<float>& model) {
  return [&model](const Tensor<float>& in, const Tensor<float>&) { return model.logits(in); };
}

Predictor fgnic_predictor(const FGNICModel<float>& model) {
  return [&model](const Tensor<float>& in, const Tensor<float>& clean) { return model.predict_restored(in, &clean); };
}

AccuracyRow evaluate(const Classifier<float>& model, const Dataset& test, const std::vector<DegradationSpec>& specs,
                     TestCondition condition, std::uint64_t seed, const Denoiser<float>* denoiser) {
  if (condition == TestCondition::restored && !denoiser)
    throw ConfigError("restored condition requires a denoiser");
  const auto cells = prepare_cells(test, specs, seed, condition == TestCondition::restored ? denoiser : nullptr);
  return evaluate(model.arch.name, cells, classifier_predictor(model), condition);
}

AccuracyRow evaluate(const FGNICModel<float>& model, const Dataset& test, const std::vector<DegradationSpec>& specs,
                     std::uint64_t seed) {
  const auto cells = prepare_cells(test, specs, seed, &model.denoiser);
  AccuracyRow row = evaluate("FG-NIC", cells, fgnic_predictor(model), TestCondition::restored);
  row.condition = model.ensemble ? "Ensemble" : "Single";
  return row;
}

std::vector<DegradationSpec> default_eval_grid() {
  std::vector<DegradationSpec> g;
  for (double s : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}) g.push_back(DegradationSpec::uniform(s));
  g.push_back(DegradationSpec::linear(0.0, 0.5, Axis::rows));
  g.push_back(DegradationSpec::radial(0.0, 0.5));
  return g;
}

CostReport cost_report(const FGNICModel<float>& model, int h, int w) {
  CostReport r;
  const InputShape rgb{h, w, model.denoiser.arch.channels};
  auto entry = [&](const std::string& name, const std::vector<nn::LayerDesc>& layers,
                   const nn::ConstParamList<float>& params) {
    r.add({name, rgb, count_macs(layers, rgb), nn::count_params<float>(params, true),
           nn::count_params<float>(params, false)});
  };
  entry("denoiser", model.denoiser.describe(), model.denoiser.params());
  if (model.estimator) entry("fidelity_estimator", model.estimator->describe(), model.estimator->params());
  entry("classifier", model.split.model.describe(), model.split.params());
  if (!model.config.pass_through) {
    std::int64_t macs = 0;
    const auto shapes = model.split.stage_shapes(h, w);
    for (const auto& b : model.spatial_blocks) {
      const auto& s = shapes[std::size_t(b.stage_index)];
      const std::vector<nn::LayerDesc> d = {b.conv.desc()};
      macs += count_macs(d, {s.h, s.w, s.c});
    }
    const int dim = model.split.feature_dim();
    const std::vector<nn::LayerDesc> ch = {model.channel_block.fc.desc()};
    const std::vector<nn::LayerDesc> cat = {model.concat_block.fc.desc()};
    macs += count_macs(ch, {1, 1, dim}) + count_macs(cat, {1, 1, 2 * dim});
    const auto p = model.block_params();
    r.add({"fgnic_blocks", rgb, macs, nn::count_params<float>(p, true), nn::count_params<float>(p, false)});
  }
  return r;
}

}  // namespace fgnic
