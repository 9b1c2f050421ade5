// Command-line entry point: dataset generation, degradation, training of
// every network, evaluation sweeps, reports and visualisations.

#include "fgnic/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace fgnic;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out = "out";
};

ExperimentConfig resolve_config(const Globals& g) {
  ExperimentConfig c = g.config.empty() ? ExperimentConfig::defaults() : ExperimentConfig::load(g.config);
  if (g.seed_given) c.set_seed(g.seed);
  return c;
}

std::uint64_t run_seed(const Globals& g, const ExperimentConfig& c) { return g.seed_given ? g.seed : c.seeds.front(); }

void write_checkpoint_hash(const fs::path& ckpt) {
  std::cout << file_sha256(ckpt) << "  " << ckpt.string() << "\n";
}

Checkpoint load_ckpt(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " checkpoint required (option or config 'checkpoints')");
  return Checkpoint::load(path);
}

bool is_image_file(const fs::path& p) {
  const auto e = p.extension().string();
  return e == ".png" || e == ".ppm" || e == ".pgm" || e == ".pnm";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fidelity-guided noisy image classification toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--seed", g.seed, "Base seed (overrides the config)")->each([&](const std::string&) { g.seed_given = true; });
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  // make-dataset
  auto* make_ds = app.add_subcommand("make-dataset", "Write the configured synthetic dataset as image trees");

  // degrade
  auto* degrade_cmd = app.add_subcommand("degrade", "Apply degradations to an image or an image tree");
  std::string degrade_input;
  std::vector<std::string> degrade_specs;
  degrade_cmd->add_option("--input", degrade_input, "Image file or directory")->required();
  degrade_cmd->add_option("--spec", degrade_specs, "Degradation label, e.g. uniform:0.3, linear1d:rows:0-0.5");

  // training
  auto* tden = app.add_subcommand("train-denoiser", "Train the residual denoiser");
  auto* tfid = app.add_subcommand("train-fidelity", "Train the fidelity-map estimator");
  std::string opt_denoiser, opt_estimator, opt_backbone, opt_init;
  tfid->add_option("--denoiser", opt_denoiser, "Denoiser checkpoint");
  auto* tbb = app.add_subcommand("train-backbone", "Train the classifier on clean images");
  auto* tbase = app.add_subcommand("train-baseline", "Train a baseline classifier");
  std::string baseline_kind = "retrain_noisy";
  tbase->add_option("--kind", baseline_kind, "clean | retrain_noisy | retrain_restored")->capture_default_str();
  tbase->add_option("--denoiser", opt_denoiser, "Denoiser checkpoint (retrain_restored)");
  tbase->add_option("--init", opt_init, "Start from this classifier checkpoint");
  auto* tfg = app.add_subcommand("train-fgnic", "Train fusion blocks on a frozen backbone and denoiser");
  std::string fg_source;
  bool fg_ensemble = false, fg_pass = false;
  tfg->add_option("--backbone", opt_backbone, "Classifier checkpoint");
  tfg->add_option("--denoiser", opt_denoiser, "Denoiser checkpoint");
  tfg->add_option("--estimator", opt_estimator, "Fidelity estimator checkpoint");
  tfg->add_option("--source", fg_source, "oracle | estimator | end_to_end (overrides config)");
  tfg->add_flag("--ensemble", fg_ensemble, "Enable the ensemble gate");
  tfg->add_flag("--pass-through", fg_pass, "Bypass all fusion (no training)");

  // eval
  auto* ev = app.add_subcommand("eval", "Accuracy sweep over the configured degradation grid");
  std::vector<std::string> eval_models, eval_names;
  ev->add_option("--model", eval_models, "Classifier or FG-NIC checkpoint (repeatable)")->required();
  ev->add_option("--name", eval_names, "Row names, one per model");
  ev->add_option("--denoiser", opt_denoiser, "Denoiser for the restored condition of classifiers");

  // report
  auto* rep = app.add_subcommand("report", "Render a table or cost report");
  std::string rep_table, rep_cost, rep_format = "markdown";
  rep->add_option("--table", rep_table, "Accuracy table JSON");
  rep->add_option("--cost", rep_cost, "FG-NIC checkpoint to cost");
  rep->add_option("--format", rep_format, "json | csv | markdown")->capture_default_str();
  int cost_h = 32, cost_w = 32;
  rep->add_option("--height", cost_h, "Input height for MACs")->capture_default_str();
  rep->add_option("--width", cost_w, "Input width for MACs")->capture_default_str();

  // viz
  auto* viz = app.add_subcommand("viz", "Export degraded images and gamma-corrected fidelity maps");
  int viz_count = 4;
  double viz_gamma = 2.0;
  viz->add_option("--count", viz_count, "Number of test images")->capture_default_str();
  viz->add_option("--gamma", viz_gamma, "Gamma applied to fidelity maps")->capture_default_str();
  viz->add_option("--denoiser", opt_denoiser, "Denoiser checkpoint");
  viz->add_option("--estimator", opt_estimator, "Fidelity estimator checkpoint");
  viz->add_option("--spec", degrade_specs, "Degradation labels (default: configured grid)");

  // run-grid
  auto* grid = app.add_subcommand("run-grid", "Train and evaluate the full method grid over all seeds");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = resolve_config(g);
    const fs::path out(g.out);
    fs::create_directories(out);
    const std::uint64_t seed = run_seed(g, cfg);

    if (make_ds->parsed()) {
      const auto d = load_data(cfg.data);
      write_image_tree(out / "train", d.train);
      write_image_tree(out / "test", d.test);
      std::cout << "wrote " << d.train.size() << " train / " << d.test.size() << " test images to " << out << "\n";
      write_text(out / "manifest.json", nlohmann::json({{"train_sha256", d.train.content_hash()},
                                                        {"test_sha256", d.test.content_hash()},
                                                        {"data", cfg.data.to_json()}})
                                            .dump(2) +
                                            "\n");
    } else if (degrade_cmd->parsed()) {
      std::vector<DegradationSpec> specs;
      for (const auto& s : degrade_specs) specs.push_back(DegradationSpec::parse(s));
      if (specs.empty()) specs = cfg.eval_grid;
      std::vector<fs::path> files;
      if (fs::is_directory(degrade_input)) {
        for (const auto& e : fs::recursive_directory_iterator(degrade_input))
          if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
        std::sort(files.begin(), files.end());
      } else {
        files.push_back(degrade_input);
      }
      for (const auto& spec : specs)
        for (std::size_t i = 0; i < files.size(); ++i) {
          const Image<float> im = read_image(files[i]);
          const fs::path rel = fs::is_directory(degrade_input) ? fs::relative(files[i], degrade_input)
                                                                : files[i].filename();
          fs::path dst = out / spec.label() / rel;
          dst.replace_extension(".png");
          fs::create_directories(dst.parent_path());
          write_image(dst, degrade_for_eval(im, spec, seed, i));
        }
      std::cout << "degraded " << files.size() << " image(s) x " << specs.size() << " setting(s) into " << out << "\n";
    } else if (tden->parsed()) {
      ExperimentConfig c = cfg;
      c.denoiser_checkpoint.clear();
      const auto d = load_data(c.data);
      obtain_denoiser(c, d.train, out, &std::cerr);
      write_checkpoint_hash(out / "denoiser" / "denoiser.ckpt");
    } else if (tfid->parsed()) {
      ExperimentConfig c = cfg;
      c.estimator_checkpoint.clear();
      const auto den = Denoiser<float>::from_checkpoint(
          load_ckpt(opt_denoiser.empty() ? cfg.denoiser_checkpoint : opt_denoiser, "denoiser"));
      const auto d = load_data(c.data);
      obtain_estimator(c, d.train, den, out, &std::cerr);
      write_checkpoint_hash(out / "fidelity_estimator" / "fidelity_estimator.ckpt");
    } else if (tbb->parsed()) {
      ExperimentConfig c = cfg;
      c.backbone_checkpoint.clear();
      const auto d = load_data(c.data);
      c.backbone.num_classes = d.train.num_classes();
      obtain_backbone(c, d.train, seed, out, &std::cerr);
      write_checkpoint_hash(out / "backbone" / "classifier.ckpt");
    } else if (tbase->parsed()) {
      const BaselineKind kind = baseline_kind_from_string(baseline_kind);
      const auto d = load_data(cfg.data);
      std::optional<Denoiser<float>> den;
      if (kind == BaselineKind::retrain_restored)
        den = Denoiser<float>::from_checkpoint(
            load_ckpt(opt_denoiser.empty() ? cfg.denoiser_checkpoint : opt_denoiser, "denoiser"));
      std::optional<Classifier<float>> init;
      if (!opt_init.empty()) init = Classifier<float>::from_checkpoint(Checkpoint::load(opt_init));
      TrainConfig tc = kind == BaselineKind::clean ? cfg.train_backbone : cfg.train_baseline;
      tc.seed = seed;
      BackboneArch arch = cfg.backbone;
      arch.num_classes = d.train.num_classes();
      RunDirectory run(out, "baseline_" + baseline_kind, {{"train", tc.to_json()}, {"arch", arch.to_json()}}, seed);
      train_baseline(kind, d.train, tc, arch, den ? &*den : nullptr, init ? &*init : nullptr, &run);
      write_checkpoint_hash(run.dir() / "classifier.ckpt");
    } else if (tfg->parsed()) {
      FusionConfig fc = cfg.fusion;
      if (!fg_source.empty()) fc.fidelity_source = fidelity_source_from_string(fg_source);
      fc.use_ensemble |= fg_ensemble;
      fc.pass_through |= fg_pass;
      const auto backbone = Classifier<float>::from_checkpoint(
          load_ckpt(opt_backbone.empty() ? cfg.backbone_checkpoint : opt_backbone, "backbone"));
      const auto den = Denoiser<float>::from_checkpoint(
          load_ckpt(opt_denoiser.empty() ? cfg.denoiser_checkpoint : opt_denoiser, "denoiser"));
      std::optional<FidelityEstimator<float>> est;
      const std::string est_path = opt_estimator.empty() ? cfg.estimator_checkpoint : opt_estimator;
      if (fc.fidelity_source != FidelitySource::oracle)
        est = FidelityEstimator<float>::from_checkpoint(load_ckpt(est_path, "fidelity estimator"));
      FGNICModel<float> model(split_classifier(backbone), den, est, fc, seed);
      TrainConfig tc = cfg.train_fgnic;
      tc.seed = seed;
      RunDirectory run(out, "fgnic", {{"train", tc.to_json()}, {"fusion", fc.to_json()}}, seed);
      if (fc.pass_through) {
        run.save_checkpoint("fgnic", model.to_checkpoint());
      } else {
        const auto d = load_data(cfg.data);
        train_fgnic(model, d.train, tc, &run);
      }
      write_checkpoint_hash(run.dir() / "fgnic.ckpt");
    } else if (ev->parsed()) {
      const auto d = load_data(cfg.data);
      std::optional<Denoiser<float>> den;
      const std::string den_path = opt_denoiser.empty() ? cfg.denoiser_checkpoint : opt_denoiser;
      if (!den_path.empty()) den = Denoiser<float>::from_checkpoint(Checkpoint::load(den_path));
      const std::uint64_t eval_seed = derive_seed(cfg.eval_seed, {seed});
      const auto cells = prepare_cells(d.test, cfg.eval_grid, eval_seed, den ? &*den : nullptr);
      AccuracyTable table;
      table.title = "Top-1 accuracy (%), seed " + std::to_string(seed);
      table.method_order = report_method_order();
      for (std::size_t i = 0; i < eval_models.size(); ++i) {
        const Checkpoint ck = Checkpoint::load(eval_models[i]);
        const std::string kind = ck.meta.value("kind", "");
        const std::string name = i < eval_names.size() ? eval_names[i] : fs::path(eval_models[i]).stem().string();
        if (kind == "classifier") {
          const auto m = Classifier<float>::from_checkpoint(ck);
          table.add(evaluate(name, cells, classifier_predictor(m), TestCondition::noisy));
          if (den) table.add(evaluate(name, cells, classifier_predictor(m), TestCondition::restored));
        } else if (kind == "fgnic") {
          const auto m = FGNICModel<float>::from_checkpoint(ck);
          std::vector<EvalCell> own = prepare_cells(d.test, cfg.eval_grid, eval_seed, &m.denoiser);
          AccuracyRow row = evaluate(name, own, fgnic_predictor(m), TestCondition::restored);
          row.condition = m.ensemble ? "Ensemble" : "Single";
          table.add(row);
        } else {
          throw InputError(eval_models[i] + ": cannot evaluate a '" + kind + "' checkpoint");
        }
      }
      write_text(out / "eval.json", emit_report(table, ReportFormat::json));
      write_text(out / "eval.md", emit_report(table, ReportFormat::markdown));
      std::cout << emit_report(table, ReportFormat::markdown);
    } else if (rep->parsed()) {
      const ReportFormat fmt = report_format_from_string(rep_format);
      if (rep_table.empty() == rep_cost.empty()) throw ConfigError("report needs exactly one of --table or --cost");
      std::string doc;
      if (!rep_table.empty()) {
        doc = emit_report(load_replay_table(rep_table), fmt);
      } else {
        const auto m = FGNICModel<float>::from_checkpoint(Checkpoint::load(rep_cost));
        doc = emit_report(cost_report(m, cost_h, cost_w), fmt);
      }
      const std::string ext = fmt == ReportFormat::markdown ? "md" : to_string(fmt);
      write_text(out / ("report." + ext), doc);
      std::cout << doc;
    } else if (viz->parsed()) {
      const auto d = load_data(cfg.data);
      std::optional<Denoiser<float>> den;
      const std::string den_path = opt_denoiser.empty() ? cfg.denoiser_checkpoint : opt_denoiser;
      if (!den_path.empty()) den = Denoiser<float>::from_checkpoint(Checkpoint::load(den_path));
      std::optional<FidelityEstimator<float>> est;
      const std::string est_path = opt_estimator.empty() ? cfg.estimator_checkpoint : opt_estimator;
      if (!est_path.empty()) est = FidelityEstimator<float>::from_checkpoint(Checkpoint::load(est_path));
      std::vector<DegradationSpec> specs;
      for (const auto& s : degrade_specs) specs.push_back(DegradationSpec::parse(s));
      if (specs.empty()) specs = cfg.eval_grid;
      const int n = std::min<int>(viz_count, static_cast<int>(d.test.size()));
      for (int i = 0; i < n; ++i) {
        const auto& clean = d.test.images[std::size_t(i)];
        const fs::path base = out / "viz" / ("img" + std::to_string(i));
        write_image(base / "clean.png", clean);
        for (const auto& spec : specs) {
          const fs::path dir = base / spec.label();
          const Image<float> noisy = degrade_for_eval(clean, spec, seed, std::size_t(i));
          write_image(dir / "noisy.png", noisy);
          const auto field = make_noise_field(spec, clean.h, clean.w);
          write_gray(dir / "sigma.png", clean.h, clean.w,
                     (field.sigma / std::max(spec.max_sigma(), 1e-12)).cast<float>().cwiseMin(1.0f));
          if (!den) continue;
          const Image<float> restored = den->restore(noisy);
          write_image(dir / "restored.png", restored);
          const auto oracle = oracle_fidelity(clean, restored, FidelityMetric::l1);
          write_gray(dir / "fidelity_oracle.png", clean.h, clean.w, gamma_correct(oracle.values, viz_gamma));
          if (est)
            write_gray(dir / "fidelity_estimated.png", clean.h, clean.w,
                       gamma_correct(est->estimate(restored).values, viz_gamma));
        }
      }
      std::cout << "wrote visualisations for " << n << " image(s) to " << (out / "viz") << "\n";
    } else if (grid->parsed()) {
      const auto result = run_experiment(cfg, out, &std::cerr);
      std::cout << emit_report(result.summary, ReportFormat::markdown);
      if (!result.cost.entries.empty()) std::cout << "\n" << emit_report(result.cost, ReportFormat::markdown);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
