#include "fgnic/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <fstream>
#include <map>
#include <ostream>
#include <tuple>

namespace fgnic {

// ---- config -------------------------------------------------------------------

nlohmann::json DataConfig::to_json() const {
  return {{"source", source},
          {"classes", synthetic.classes},
          {"per_class", synthetic.per_class},
          {"size", synthetic.size},
          {"synthetic_seed", synthetic.seed},
          {"path", path},
          {"test_fraction", test_fraction},
          {"split_seed", split_seed}};
}

DataConfig DataConfig::from_json(const nlohmann::json& j) {
  DataConfig d;
  d.source = j.value("source", d.source);
  d.synthetic.classes = j.value("classes", d.synthetic.classes);
  d.synthetic.per_class = j.value("per_class", d.synthetic.per_class);
  d.synthetic.size = j.value("size", d.synthetic.size);
  d.synthetic.seed = j.value("synthetic_seed", d.synthetic.seed);
  d.path = j.value("path", d.path);
  d.test_fraction = j.value("test_fraction", d.test_fraction);
  d.split_seed = j.value("split_seed", d.split_seed);
  if (d.source != "synthetic" && d.source != "directory") throw ConfigError("data.source must be synthetic or directory");
  if (d.source == "directory" && d.path.empty()) throw ConfigError("data.path is required for directory datasets");
  if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0)) throw ConfigError("data.test_fraction must be in (0,1)");
  return d;
}

std::string VariantConfig::slug() const {
  std::string s;
  for (char c : method + "_" + setup) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      s += char(std::tolower(static_cast<unsigned char>(c)));
    else if (!s.empty() && s.back() != '_')
      s += '_';
  }
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s;
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.train_denoiser.epochs = 12;
  c.train_fidelity.epochs = 12;
  c.train_backbone.epochs = 30;
  c.train_baseline = c.train_backbone;
  c.train_baseline.noise_sampling = NoiseSampling::discrete_set;
  c.train_baseline.noise_values = retraining_sigmas();
  c.train_fgnic.epochs = 15;

  VariantConfig oracle_single;
  VariantConfig oracle_ensemble;
  oracle_ensemble.setup = "Ensemble";
  oracle_ensemble.fusion.use_ensemble = true;
  VariantConfig est_single;
  est_single.method = "FG-NIC (Estimator)";
  est_single.fusion.fidelity_source = FidelitySource::estimator;
  c.variants = {oracle_single, oracle_ensemble, est_single};
  return c;
}

namespace {

nlohmann::json variant_json(const VariantConfig& v) {
  return {{"method", v.method}, {"setup", v.setup}, {"fusion", v.fusion.to_json()}};
}

std::vector<std::string> grid_labels(const std::vector<DegradationSpec>& g) {
  std::vector<std::string> out;
  for (const auto& s : g) out.push_back(s.label());
  return out;
}

}  // namespace

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json variants_j = nlohmann::json::array();
  for (const auto& v : variants) variants_j.push_back(variant_json(v));
  std::vector<std::string> base;
  for (auto k : baselines) base.push_back(to_string(k));
  return {{"data", data.to_json()},
          {"restoration", restoration.to_json()},
          {"backbone", backbone.to_json()},
          {"train",
           {{"denoiser", train_denoiser.to_json()},
            {"fidelity", train_fidelity.to_json()},
            {"backbone", train_backbone.to_json()},
            {"baseline", train_baseline.to_json()},
            {"fgnic", train_fgnic.to_json()}}},
          {"fusion", fusion.to_json()},
          {"variants", variants_j},
          {"baselines", base},
          {"eval", {{"grid", grid_labels(eval_grid)}, {"seed", eval_seed}}},
          {"seeds", seeds},
          {"checkpoints",
           {{"denoiser", denoiser_checkpoint}, {"estimator", estimator_checkpoint}, {"backbone", backbone_checkpoint}}}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c = defaults();
  try {
    if (j.contains("data")) c.data = DataConfig::from_json(j.at("data"));
    if (j.contains("restoration")) c.restoration = RestorationArch::from_json(j.at("restoration"));
    if (j.contains("backbone")) c.backbone = BackboneArch::from_json(j.at("backbone"));
    if (j.contains("train")) {
      const auto& t = j.at("train");
      if (t.contains("denoiser")) c.train_denoiser = TrainConfig::from_json(t.at("denoiser"), c.train_denoiser);
      if (t.contains("fidelity")) c.train_fidelity = TrainConfig::from_json(t.at("fidelity"), c.train_fidelity);
      if (t.contains("backbone")) c.train_backbone = TrainConfig::from_json(t.at("backbone"), c.train_backbone);
      if (t.contains("baseline")) c.train_baseline = TrainConfig::from_json(t.at("baseline"), c.train_baseline);
      if (t.contains("fgnic")) c.train_fgnic = TrainConfig::from_json(t.at("fgnic"), c.train_fgnic);
    }
    if (j.contains("fusion")) c.fusion = FusionConfig::from_json(j.at("fusion"));
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& v : j.at("variants")) {
        VariantConfig vc;
        vc.method = v.value("method", vc.method);
        vc.setup = v.value("setup", vc.setup);
        vc.fusion = FusionConfig::from_json(v.value("fusion", nlohmann::json::object()), c.fusion);
        c.variants.push_back(vc);
      }
    } else {
      // Shared fusion settings flow into the default variants.
      for (auto& v : c.variants) {
        const FusionConfig own = v.fusion;
        v.fusion = c.fusion;
        v.fusion.use_ensemble = own.use_ensemble;
        v.fusion.fidelity_source = own.fidelity_source;
      }
    }
    if (j.contains("baselines")) {
      c.baselines.clear();
      for (const auto& b : j.at("baselines")) c.baselines.push_back(baseline_kind_from_string(b.get<std::string>()));
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      if (e.contains("grid")) {
        c.eval_grid.clear();
        for (const auto& s : e.at("grid")) c.eval_grid.push_back(DegradationSpec::parse(s.get<std::string>()));
      }
      c.eval_seed = e.value("seed", c.eval_seed);
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
    if (j.contains("checkpoints")) {
      const auto& k = j.at("checkpoints");
      c.denoiser_checkpoint = k.value("denoiser", c.denoiser_checkpoint);
      c.estimator_checkpoint = k.value("estimator", c.estimator_checkpoint);
      c.backbone_checkpoint = k.value("backbone", c.backbone_checkpoint);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void ExperimentConfig::set_seed(std::uint64_t seed) {
  for (auto* t : {&train_denoiser, &train_fidelity, &train_backbone, &train_baseline, &train_fgnic}) t->seed = seed;
  seeds = {seed};
}

// ---- data -------------------------------------------------------------------------

DataSplits load_data(const DataConfig& cfg) {
  if (cfg.source == "directory") {
    const std::filesystem::path root(cfg.path);
    if (std::filesystem::is_directory(root / "train") && std::filesystem::is_directory(root / "test"))
      return {load_image_tree(root / "train"), load_image_tree(root / "test")};
    Dataset all = load_image_tree(root);
    const auto s = stratified_split(all.labels, cfg.test_fraction, cfg.split_seed);
    return {all.subset(s.train), all.subset(s.held_out)};
  }
  Dataset all = make_synthetic_dataset(cfg.synthetic);
  const auto s = stratified_split(all.labels, cfg.test_fraction, cfg.split_seed);
  return {all.subset(s.train), all.subset(s.held_out)};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

// ---- aggregation ------------------------------------------------------------------

AccuracyTable average_tables(const std::vector<AccuracyTable>& tables, std::uint64_t seed) {
  if (tables.empty()) throw InputError("average_tables: no tables");
  struct Acc {
    double sum = 0.0;
    std::size_t samples = 0;
    int count = 0;
  };
  std::map<std::tuple<std::string, std::string, std::string>, Acc> acc;
  for (const auto& t : tables)
    for (const auto& r : t.rows)
      for (const auto& c : r.cells) {
        auto& a = acc[{r.method, r.condition, c.column}];
        a.sum += c.accuracy;
        a.samples += c.samples;
        ++a.count;
      }
  AccuracyTable out;
  out.title = tables.front().title;
  out.method_order = tables.front().method_order;
  for (const auto& [key, a] : acc)
    out.add(std::get<0>(key), std::get<1>(key), {std::get<2>(key), a.sum / a.count, a.samples, seed});
  return out;
}

std::vector<std::string> report_method_order() {
  return {"Pretrained", "Retrain on noisy", "Retrain on restored", "FG-NIC (Estimator)", "FG-NIC (End-to-end)",
          "FG-NIC (Oracle)"};
}

// ---- pipeline -----------------------------------------------------------------------

namespace {

void say(std::ostream* p, const std::string& msg) {
  if (p) *p << msg << std::endl;
}

void report_log(std::ostream* p, const std::string& what, const ExperimentRun& run) {
  if (!p || run.log.epochs.empty()) return;
  const auto& last = run.log.epochs.back();
  *p << "  " << what << ": " << run.log.epochs.size() << " epochs, final loss " << last.loss;
  if (run.best_epoch >= 0 && !std::isnan(run.best_val_accuracy))
    *p << ", best val acc " << run.best_val_accuracy << "% (epoch " << run.best_epoch << ")";
  *p << std::endl;
}

MetricLog progress_log(std::ostream* p, const std::string& what) {
  MetricLog log;
  if (p) log.sink = [p, what](const EpochRecord& r) { *p << "  " << what << " epoch " << r.epoch << " loss " << r.loss << std::endl; };
  return log;
}

}  // namespace

Denoiser<float> obtain_denoiser(const ExperimentConfig& cfg, const Dataset& train, const std::filesystem::path& out,
                                std::ostream* progress) {
  if (!cfg.denoiser_checkpoint.empty()) {
    say(progress, "loading denoiser " + cfg.denoiser_checkpoint);
    return Denoiser<float>::from_checkpoint(Checkpoint::load(cfg.denoiser_checkpoint));
  }
  say(progress, "training denoiser");
  RunDirectory run(out, "denoiser", {{"train", cfg.train_denoiser.to_json()}, {"arch", cfg.restoration.to_json()}},
                   cfg.train_denoiser.seed);
  MetricLog log = progress_log(progress, "denoiser");
  auto chained = log.sink;
  MetricLog file_log;
  run.attach(file_log);
  log.sink = [chained, file_sink = file_log.sink](const EpochRecord& r) {
    file_sink(r);
    if (chained) chained(r);
  };
  Denoiser<float> d = train_denoiser(train, {0.0, 0.5}, cfg.train_denoiser, cfg.restoration, &log);
  run.save_checkpoint("denoiser", d.to_checkpoint());
  return d;
}

FidelityEstimator<float> obtain_estimator(const ExperimentConfig& cfg, const Dataset& train,
                                          const Denoiser<float>& denoiser, const std::filesystem::path& out,
                                          std::ostream* progress) {
  if (!cfg.estimator_checkpoint.empty()) {
    say(progress, "loading fidelity estimator " + cfg.estimator_checkpoint);
    return FidelityEstimator<float>::from_checkpoint(Checkpoint::load(cfg.estimator_checkpoint));
  }
  say(progress, "training fidelity estimator");
  RunDirectory run(out, "fidelity_estimator",
                   {{"train", cfg.train_fidelity.to_json()}, {"arch", cfg.restoration.to_json()}},
                   cfg.train_fidelity.seed);
  MetricLog log = progress_log(progress, "estimator");
  auto chained = log.sink;
  MetricLog file_log;
  run.attach(file_log);
  log.sink = [chained, file_sink = file_log.sink](const EpochRecord& r) {
    file_sink(r);
    if (chained) chained(r);
  };
  FidelityEstimator<float> e = train_fidelity_estimator(train, denoiser, cfg.train_fidelity, cfg.restoration, &log);
  run.save_checkpoint("fidelity_estimator", e.to_checkpoint());
  return e;
}

Classifier<float> obtain_backbone(const ExperimentConfig& cfg, const Dataset& train, std::uint64_t seed,
                                  const std::filesystem::path& out, std::ostream* progress) {
  if (!cfg.backbone_checkpoint.empty()) {
    say(progress, "loading backbone " + cfg.backbone_checkpoint);
    return Classifier<float>::from_checkpoint(Checkpoint::load(cfg.backbone_checkpoint));
  }
  say(progress, "training clean backbone (seed " + std::to_string(seed) + ")");
  TrainConfig tc = cfg.train_backbone;
  tc.seed = seed;
  RunDirectory run(out, "backbone", {{"train", tc.to_json()}, {"arch", cfg.backbone.to_json()}}, seed);
  auto res = train_baseline(BaselineKind::clean, train, tc, cfg.backbone, nullptr, nullptr, &run);
  report_log(progress, "backbone", res.run);
  return std::move(res.model);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream* progress) {
  write_text(out / "config.json", cfg.to_json().dump(2) + "\n");
  const DataSplits data = load_data(cfg.data);
  say(progress, "data: " + std::to_string(data.train.size()) + " train / " + std::to_string(data.test.size()) +
                    " test images, " + std::to_string(data.train.num_classes()) + " classes");
  BackboneArch arch = cfg.backbone;
  arch.num_classes = data.train.num_classes();

  const Denoiser<float> denoiser = obtain_denoiser(cfg, data.train, out, progress);
  bool need_estimator = false;
  for (const auto& v : cfg.variants) need_estimator |= v.fusion.fidelity_source != FidelitySource::oracle;
  std::optional<FidelityEstimator<float>> estimator;
  if (need_estimator) estimator = obtain_estimator(cfg, data.train, denoiser, out, progress);

  ExperimentConfig seeded = cfg;
  seeded.backbone = arch;
  ExperimentResult result;
  for (const std::uint64_t seed : cfg.seeds) {
    const auto seed_dir = out / ("seed" + std::to_string(seed));
    AccuracyTable table;
    table.title = "Top-1 accuracy (%), seed " + std::to_string(seed);
    table.method_order = report_method_order();

    const Classifier<float> backbone = obtain_backbone(seeded, data.train, seed, seed_dir, progress);
    const std::uint64_t eval_seed = derive_seed(cfg.eval_seed, {seed});
    say(progress, "preparing evaluation cells (seed " + std::to_string(seed) + ")");
    const auto cells = prepare_cells(data.test, cfg.eval_grid, eval_seed, &denoiser);

    auto add_classifier_rows = [&](const std::string& method, const Classifier<float>& m) {
      for (auto cond : {TestCondition::noisy, TestCondition::restored}) {
        AccuracyRow row = evaluate(method, cells, classifier_predictor(m), cond);
        table.add(row);
      }
    };
    add_classifier_rows("Pretrained", backbone);

    for (const auto kind : cfg.baselines) {
      if (kind == BaselineKind::clean) continue;
      const std::string name = kind == BaselineKind::retrain_noisy ? "Retrain on noisy" : "Retrain on restored";
      say(progress, "training baseline " + to_string(kind) + " (seed " + std::to_string(seed) + ")");
      TrainConfig tc = cfg.train_baseline;
      tc.seed = seed;
      RunDirectory run(seed_dir, "baseline_" + to_string(kind), {{"train", tc.to_json()}}, seed);
      auto res = train_baseline(kind, data.train, tc, arch, &denoiser, &backbone, &run);
      report_log(progress, name, res.run);
      add_classifier_rows(name, res.model);
    }

    for (const auto& v : cfg.variants) {
      say(progress, "training " + v.method + " / " + v.setup + " (seed " + std::to_string(seed) + ")");
      std::optional<FidelityEstimator<float>> est;
      if (v.fusion.fidelity_source != FidelitySource::oracle) est = estimator;
      FGNICModel<float> model(split_classifier(backbone), denoiser, est, v.fusion, seed);
      TrainConfig tc = cfg.train_fgnic;
      tc.seed = seed;
      RunDirectory run(seed_dir, v.slug(), {{"train", tc.to_json()}, {"fusion", v.fusion.to_json()}}, seed);
      const auto res = train_fgnic(model, data.train, tc, &run);
      report_log(progress, v.method + " " + v.setup, res);
      AccuracyRow row = evaluate(v.method, cells, fgnic_predictor(model), TestCondition::restored);
      row.condition = v.setup;
      table.add(row);
      if (result.cost.entries.empty()) result.cost = cost_report(model, data.train.images[0].h, data.train.images[0].w);
    }

    write_text(seed_dir / "table.json", emit_report(table, ReportFormat::json));
    write_text(seed_dir / "table.md", emit_report(table, ReportFormat::markdown));
    result.per_seed.push_back(std::move(table));
  }

  result.summary = average_tables(result.per_seed, cfg.eval_seed);
  result.summary.title = "Top-1 accuracy (%), mean over " + std::to_string(cfg.seeds.size()) + " seed(s)";
  write_text(out / "results.json", emit_report(result.summary, ReportFormat::json));
  write_text(out / "results.csv", emit_report(result.summary, ReportFormat::csv));
  write_text(out / "results.md", emit_report(result.summary, ReportFormat::markdown));
  if (!result.cost.entries.empty()) {
    write_text(out / "cost.json", emit_report(result.cost, ReportFormat::json));
    write_text(out / "cost.md", emit_report(result.cost, ReportFormat::markdown));
  }
  return result;
}

}  // namespace fgnic
