#include "fgnic/training.hpp"

#include <numeric>
#include <utility>

namespace fgnic {

namespace {

// Validation noise is fixed across epochs so epoch scores are comparable.
constexpr std::uint64_t kValidationEpoch = 0xFFFFFFFFull;

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t(0));
  return v;
}

std::size_t count_correct(const Matrix<float>& logits, const std::vector<int>& labels) {
  std::size_t c = 0;
  for (Index n = 0; n < logits.cols(); ++n) {
    Index best = 0;
    logits.col(n).maxCoeff(&best);
    c += static_cast<int>(best) == labels[std::size_t(n)];
  }
  return c;
}

std::vector<Matrix<float>> snapshot(const nn::ParamList<float>& params) {
  std::vector<Matrix<float>> s;
  for (const auto* p : params) s.push_back(p->value);
  return s;
}

void restore_snapshot(const nn::ParamList<float>& params, const std::vector<Matrix<float>>& s) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = s[i];
}

bool all_frozen(const nn::ConstParamList<float>& params) {
  for (const auto* p : params)
    if (!p->frozen) return false;
  return true;
}

/// Train/validation partition per cfg.validation_fraction.
SplitIndices partition(const Dataset& data, const TrainConfig& cfg) {
  if (cfg.validation_fraction <= 0.0) return {iota_indices(data.size()), {}};
  auto s = stratified_split(data.labels, cfg.validation_fraction, derive_seed(cfg.seed, {0x7A11}));
  if (s.train.empty()) throw InputError("validation split leaves no training images");
  return s;
}

/// Accuracy (%) of `logits_fn` over the validation batch, in chunks.
template <typename Fn>
double batch_accuracy(const NoisyBatch& b, int chunk, Fn&& logits_fn) {
  std::size_t correct = 0;
  const int n = b.clean.n;
  for (int s = 0; s < n; s += chunk) {
    const int count = std::min(chunk, n - s);
    NoisyBatch part;
    part.clean = Tensor<float>(count, b.clean.h, b.clean.w, b.clean.c());
    part.noisy = part.clean;
    part.clean.data = b.clean.data.middleCols(Index(s) * b.clean.pixels(), Index(count) * b.clean.pixels());
    part.noisy.data = b.noisy.data.middleCols(Index(s) * b.noisy.pixels(), Index(count) * b.noisy.pixels());
    part.labels.assign(b.labels.begin() + s, b.labels.begin() + s + count);
    correct += count_correct(logits_fn(part), part.labels);
  }
  return 100.0 * double(correct) / double(n);
}

std::string params_hash(const nn::ConstParamList<float>& p) { return hash_params<float>(p); }

}  // namespace

// ---- run directory ------------------------------------------------------------

RunDirectory::RunDirectory(std::filesystem::path root, std::string run_id, const nlohmann::json& config,
                           std::uint64_t seed)
    : dir_(std::move(root) / run_id), run_id_(std::move(run_id)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create run directory " + dir_.string() + ": " + ec.message());
  nlohmann::json snap = {{"run_id", run_id_}, {"seed", seed}, {"config", config}};
  std::ofstream out(dir_ / "config.json");
  out << snap.dump(2) << "\n";
  if (!out) throw IoError("cannot write " + (dir_ / "config.json").string());
  std::ofstream(dir_ / "metrics.jsonl", std::ios::trunc).flush();
}

void RunDirectory::attach(MetricLog& log) const {
  const auto path = dir_ / "metrics.jsonl";
  log.sink = [path](const EpochRecord& r) {
    std::ofstream out(path, std::ios::app);
    out << r.to_json().dump() << "\n";
    if (!out) throw IoError("cannot append to " + path.string());
  };
}

std::filesystem::path RunDirectory::save_checkpoint(const std::string& name, const Checkpoint& ck) const {
  const auto path = dir_ / (name + ".ckpt");
  ck.save(path);
  return path;
}

// ---- FG-NIC -------------------------------------------------------------------

ExperimentRun train_fgnic(FGNICModel<float>& model, const Dataset& data, const TrainConfig& cfg,
                          const RunDirectory* run) {
  cfg.validate();
  if (data.empty()) throw InputError("train_fgnic: empty dataset");
  const auto& cmodel = std::as_const(model);
  if (!cmodel.split.frozen()) throw TrainingError("refusing to train: backbone parameters are not frozen");
  if (!all_frozen(cmodel.denoiser.params())) throw TrainingError("refusing to train: denoiser parameters are not frozen");
  if (model.config.pass_through) throw TrainingError("refusing to train: pass-through model has no trainable blocks");
  const bool e2e = model.config.fidelity_source == FidelitySource::end_to_end;
  if (cmodel.estimator && !e2e && !all_frozen(cmodel.estimator->params()))
    throw TrainingError("refusing to train: estimator must be frozen outside end_to_end mode");

  const std::string backbone_hash = params_hash(cmodel.split.params());
  const std::string denoiser_hash = params_hash(cmodel.denoiser.params());

  nn::ParamList<float> trainable = model.block_params();
  if (e2e)
    for (auto* p : model.estimator->params()) trainable.push_back(p);
  for (auto* p : trainable) p->frozen = false;
  nn::Optimizer<float> opt(cfg.optimizer, cfg.learning_rate, trainable);

  ExperimentRun result;
  result.run_id = run ? run->run_id() : "fgnic";
  result.config = {{"train", cfg.to_json()}, {"fusion", model.config.to_json()}};
  result.seed = cfg.seed;
  if (run) run->attach(result.log);

  const SplitIndices parts = partition(data, cfg);
  std::optional<NoisyBatch> val;
  if (!parts.held_out.empty()) val = sample_noisy_batch(data, parts.held_out, cfg, kValidationEpoch);
  auto val_logits = [&](const NoisyBatch& b) {
    const Tensor<float> restored = cmodel.denoiser.restore(b.noisy);
    return cmodel.predict_restored(restored, &b.clean);
  };

  std::vector<Matrix<float>> best = snapshot(trainable);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    std::size_t seen = 0, correct = 0;
    const auto batches = epoch_batches(parts.train, cfg.batch_size, cfg.seed, std::uint64_t(epoch));
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const NoisyBatch nb = sample_noisy_batch(data, batches[bi], cfg, std::uint64_t(epoch));
      const Tensor<float> restored = cmodel.denoiser.restore(nb.noisy);
      FGNICModel<float>::Context ctx;
      opt.zero_grad();
      const Tensor<float> fid = cmodel.fidelity(restored, &nb.clean, &ctx);
      const Matrix<float> logits = cmodel.forward(restored, fid, &ctx);
      Matrix<float> grad;
      const double loss = nn::cross_entropy(logits, nb.labels, &grad);
      check_finite_loss(loss, "train_fgnic", epoch, bi);
      model.backward(grad, ctx);
      opt.step();
      total += loss * double(nb.labels.size());
      seen += nb.labels.size();
      correct += count_correct(logits, nb.labels);
    }
    EpochRecord rec{epoch, total / double(seen), 100.0 * double(correct) / double(seen)};
    if (val) {
      rec.val_accuracy = batch_accuracy(*val, 100, val_logits);
      if (result.best_epoch < 0 || rec.val_accuracy > result.best_val_accuracy) {
        result.best_epoch = epoch;
        result.best_val_accuracy = rec.val_accuracy;
        best = snapshot(trainable);
      }
    } else {
      result.best_epoch = epoch;
      best = snapshot(trainable);
    }
    result.log.append(rec);
  }
  restore_snapshot(trainable, best);

  if (params_hash(cmodel.split.params()) != backbone_hash)
    throw TrainingError("freeze violation: backbone parameters changed during training");
  if (params_hash(cmodel.denoiser.params()) != denoiser_hash)
    throw TrainingError("freeze violation: denoiser parameters changed during training");

  if (run) result.checkpoints["best"] = run->save_checkpoint("fgnic", model.to_checkpoint());
  return result;
}

// ---- baselines ------------------------------------------------------------------

std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::clean: return "clean";
    case BaselineKind::retrain_noisy: return "retrain_noisy";
    case BaselineKind::retrain_restored: return "retrain_restored";
  }
  return "?";
}

BaselineKind baseline_kind_from_string(const std::string& s) {
  if (s == "clean") return BaselineKind::clean;
  if (s == "retrain_noisy") return BaselineKind::retrain_noisy;
  if (s == "retrain_restored") return BaselineKind::retrain_restored;
  throw ConfigError("unknown baseline kind '" + s + "'");
}

BaselineResult train_baseline(BaselineKind kind, const Dataset& data, const TrainConfig& cfg_in,
                              const BackboneArch& arch, const Denoiser<float>* denoiser, const Classifier<float>* init,
                              const RunDirectory* run) {
  cfg_in.validate();
  if (data.empty()) throw InputError("train_baseline: empty dataset");
  if (kind == BaselineKind::retrain_restored && !denoiser)
    throw ConfigError("retrain_restored baseline requires a trained denoiser");
  TrainConfig cfg = cfg_in;
  if (kind == BaselineKind::clean) {
    cfg.noise_sampling = NoiseSampling::discrete_set;
    cfg.noise_values = {0.0};
  }

  BaselineResult out{init ? *init : Classifier<float>(arch, cfg.seed), {}};
  Classifier<float>& model = out.model;
  nn::set_frozen(model.params(), false);
  nn::Optimizer<float> opt(cfg.optimizer, cfg.learning_rate, model.params());
  ExperimentRun& result = out.run;
  result.run_id = run ? run->run_id() : "baseline_" + to_string(kind);
  result.config = {{"train", cfg.to_json()}, {"kind", to_string(kind)}, {"arch", model.arch.to_json()}};
  result.seed = cfg.seed;
  if (run) run->attach(result.log);

  auto input_of = [&](const NoisyBatch& b) -> Tensor<float> {
    switch (kind) {
      case BaselineKind::clean: return b.clean;
      case BaselineKind::retrain_noisy: return b.noisy;
      case BaselineKind::retrain_restored: return denoiser->restore(b.noisy);
    }
    return b.clean;
  };

  const SplitIndices parts = partition(data, cfg);
  std::optional<NoisyBatch> val;
  if (!parts.held_out.empty()) val = sample_noisy_batch(data, parts.held_out, cfg, kValidationEpoch);
  const Classifier<float>& cmodel = model;
  auto val_logits = [&](const NoisyBatch& b) { return cmodel.logits(input_of(b)); };

  std::vector<Matrix<float>> best = snapshot(model.params());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    std::size_t seen = 0, correct = 0;
    const auto batches = epoch_batches(parts.train, cfg.batch_size, cfg.seed, std::uint64_t(epoch));
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const NoisyBatch nb = sample_noisy_batch(data, batches[bi], cfg, std::uint64_t(epoch));
      Classifier<float>::Context ctx;
      opt.zero_grad();
      const Matrix<float> logits = model.forward(input_of(nb), ctx);
      Matrix<float> grad;
      const double loss = nn::cross_entropy(logits, nb.labels, &grad);
      check_finite_loss(loss, "train_baseline", epoch, bi);
      model.backward(grad, ctx);
      opt.step();
      total += loss * double(nb.labels.size());
      seen += nb.labels.size();
      correct += count_correct(logits, nb.labels);
    }
    EpochRecord rec{epoch, total / double(seen), 100.0 * double(correct) / double(seen)};
    if (val) {
      rec.val_accuracy = batch_accuracy(*val, 100, val_logits);
      if (result.best_epoch < 0 || rec.val_accuracy > result.best_val_accuracy) {
        result.best_epoch = epoch;
        result.best_val_accuracy = rec.val_accuracy;
        best = snapshot(model.params());
      }
    } else {
      result.best_epoch = epoch;
      best = snapshot(model.params());
    }
    result.log.append(rec);
  }
  restore_snapshot(model.params(), best);
  if (run) result.checkpoints["best"] = run->save_checkpoint("classifier", model.to_checkpoint());
  return out;
}

}  // namespace fgnic
