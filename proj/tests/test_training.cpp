#include <doctest.h>

#include "fgnic/training.hpp"
#include "toy_models.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

using namespace fgnic;
using namespace fgnic::testing;

namespace {

TrainConfig quick(int epochs, std::uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 16;
  cfg.learning_rate = 3e-3;
  cfg.seed = seed;
  return cfg;
}

const Dataset& small_set() {
  static const Dataset d = make_synthetic_dataset({10, 20, 16, 21});
  return d;
}

/// Desk backbone briefly trained on clean 16x16 images.
const Classifier<float>& pretrained() {
  static const Classifier<float> c = [] {
    TrainConfig cfg = quick(8, 2);
    cfg.validation_fraction = 0.0;
    return train_baseline(BaselineKind::clean, small_set(), cfg, BackboneArch::desk()).model;
  }();
  return c;
}

Denoiser<float> small_denoiser() {
  Denoiser<float> d(toy_restoration(), 3);
  d.zero_head();
  return d;
}

FGNICModel<float> assemble(FusionConfig cfg, std::optional<FidelityEstimator<float>> est = std::nullopt) {
  if (cfg.fidelity_source != FidelitySource::oracle && !est) est.emplace(toy_restoration(), 4);
  return FGNICModel<float>(split_classifier(pretrained()), small_denoiser(), std::move(est), cfg, 5);
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fgnic_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("train_fgnic overfits 32 images") {
  std::vector<std::size_t> idx(32);
  for (std::size_t i = 0; i < 32; ++i) idx[i] = i * small_set().size() / 32;
  const Dataset tiny = small_set().subset(idx);
  auto model = assemble(FusionConfig{});
  TrainConfig cfg = quick(50, 6);
  cfg.validation_fraction = 0.0;
  // Mild noise: this checks capacity, and heavy noise caps what any model can fit.
  cfg.noise_values = {0.0, 0.1};
  auto run = train_fgnic(model, tiny, cfg);
  REQUIRE(run.log.epochs.size() == 50);
  INFO("final train accuracy " << run.log.epochs.back().accuracy);
  CHECK(run.log.epochs.back().accuracy >= 95.0);
}

TEST_CASE("train_fgnic leaves the backbone and denoiser untouched") {
  FusionConfig fc;
  fc.use_ensemble = true;
  auto model = assemble(fc);
  const auto before_backbone = hash_params<float>(std::as_const(model).split.params());
  const auto before_denoiser = hash_params<float>(std::as_const(model).denoiser.params());
  const auto before_blocks = hash_params<float>(std::as_const(model).block_params());
  train_fgnic(model, small_set(), quick(2));
  CHECK(hash_params<float>(std::as_const(model).split.params()) == before_backbone);
  CHECK(hash_params<float>(std::as_const(model).denoiser.params()) == before_denoiser);
  CHECK(hash_params<float>(std::as_const(model).block_params()) != before_blocks);
  CHECK(count_trainable_params(model) == analytic_block_params(model.split, fc));
}

TEST_CASE("train_fgnic refuses unfrozen networks and pass-through models") {
  auto model = assemble(FusionConfig{});
  model.split.params().front()->frozen = false;
  CHECK_THROWS_AS(train_fgnic(model, small_set(), quick(1)), TrainingError);

  auto m2 = assemble(FusionConfig{});
  m2.denoiser.params().back()->frozen = false;
  CHECK_THROWS_AS(train_fgnic(m2, small_set(), quick(1)), TrainingError);

  FusionConfig est_cfg;
  est_cfg.fidelity_source = FidelitySource::estimator;
  auto m3 = assemble(est_cfg);
  m3.estimator->params().front()->frozen = false;
  CHECK_THROWS_AS(train_fgnic(m3, small_set(), quick(1)), TrainingError);

  FusionConfig pass;
  pass.pass_through = true;
  auto m4 = assemble(pass);
  CHECK_THROWS_AS(train_fgnic(m4, small_set(), quick(1)), TrainingError);
  CHECK_THROWS_AS(train_fgnic(m4, Dataset{}, quick(1)), InputError);
}

TEST_CASE("estimator updates only in end_to_end mode") {
  for (auto source : {FidelitySource::estimator, FidelitySource::end_to_end}) {
    FusionConfig fc;
    fc.fidelity_source = source;
    auto model = assemble(fc);
    const auto est_before = hash_params<float>(std::as_const(*model.estimator).params());
    const auto den_before = hash_params<float>(std::as_const(model).denoiser.params());
    train_fgnic(model, small_set(), quick(1));
    const bool changed = hash_params<float>(std::as_const(*model.estimator).params()) != est_before;
    CHECK(changed == (source == FidelitySource::end_to_end));
    CHECK(hash_params<float>(std::as_const(model).denoiser.params()) == den_before);
  }
}

TEST_CASE("oracle maps give at least the confidence of an all-zero map") {
  auto model = assemble(FusionConfig{});
  train_fgnic(model, small_set(), quick(6, 4));
  TrainConfig noise = quick(1);
  noise.noise_sampling = NoiseSampling::discrete_set;
  noise.noise_values = {0.1};
  std::vector<std::size_t> idx(64);
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  const NoisyBatch b = sample_noisy_batch(small_set(), idx, noise, 0);
  const Tensor<float> restored = model.denoiser.restore(b.noisy);
  const Tensor<float> oracle = model.fidelity(restored, &b.clean);
  const Tensor<float> zeros = Tensor<float>::zeros(oracle.n, oracle.h, oracle.w, 1);
  auto mean_confidence = [](const Matrix<float>& logits) {
    double total = 0.0;
    for (Index j = 0; j < logits.cols(); ++j) {
      const Vector<double> z = logits.col(j).cast<double>();
      const double m = z.maxCoeff();
      total += 1.0 / (z.array() - m).exp().sum();
    }
    return total / double(logits.cols());
  };
  const double with_oracle = mean_confidence(model.forward(restored, oracle));
  const double with_zeros = mean_confidence(model.forward(restored, zeros));
  INFO("oracle " << with_oracle << " zeros " << with_zeros);
  CHECK(with_oracle >= with_zeros);
}

TEST_CASE("train_fgnic is deterministic") {
  auto a = assemble(FusionConfig{});
  auto b = assemble(FusionConfig{});
  auto ra = train_fgnic(a, small_set(), quick(3));
  auto rb = train_fgnic(b, small_set(), quick(3));
  REQUIRE(ra.log.epochs.size() == rb.log.epochs.size());
  for (std::size_t i = 0; i < ra.log.epochs.size(); ++i) {
    CHECK(ra.log.epochs[i].loss == rb.log.epochs[i].loss);
    CHECK(ra.log.epochs[i].val_accuracy == rb.log.epochs[i].val_accuracy);
  }
  CHECK(a.to_checkpoint().serialize() == b.to_checkpoint().serialize());
  CHECK(ra.best_epoch >= 0);
}

TEST_CASE("run directory records config, metrics and checkpoint") {
  const auto root = scratch("rundir");
  RunDirectory dir(root, "fgnic_run", {{"note", "x"}}, 9);
  auto model = assemble(FusionConfig{});
  auto run = train_fgnic(model, small_set(), quick(2), &dir);
  CHECK(std::filesystem::exists(root / "fgnic_run" / "config.json"));
  CHECK(std::filesystem::exists(run.checkpoints.at("best")));
  std::ifstream in(root / "fgnic_run" / "metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j.at("epoch").get<int>() == lines);
    ++lines;
  }
  CHECK(lines == 2);
  auto back = FGNICModel<float>::from_checkpoint(Checkpoint::load(run.checkpoints.at("best")));
  CHECK(back.to_checkpoint().serialize() == model.to_checkpoint().serialize());
  std::filesystem::remove_all(root);
}

TEST_CASE("retraining mixture is the six-level sigma set") {
  CHECK(retraining_sigmas() == std::vector<double>{0.0, 0.1, 0.2, 0.3, 0.4, 0.5});
  TrainConfig cfg = quick(1);
  cfg.noise_sampling = NoiseSampling::discrete_set;
  cfg.noise_values = retraining_sigmas();
  std::vector<std::size_t> idx(small_set().size());
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  std::set<double> seen;
  for (std::uint64_t e = 0; e < 3; ++e)
    for (double s : sample_noisy_batch(small_set(), idx, cfg, e).sigmas) seen.insert(s);
  CHECK(seen == std::set<double>{0.0, 0.1, 0.2, 0.3, 0.4, 0.5});
}

TEST_CASE("baseline training lowers the loss on the desk set") {
  const Dataset desk = make_synthetic_dataset({10, 50, 32, 8});
  TrainConfig cfg = quick(5, 3);
  cfg.batch_size = 64;
  cfg.noise_sampling = NoiseSampling::discrete_set;
  cfg.noise_values = retraining_sigmas();
  auto res = train_baseline(BaselineKind::retrain_noisy, desk, cfg, BackboneArch::desk());
  REQUIRE(res.run.log.epochs.size() == 5);
  CHECK(res.run.log.epochs.back().loss < res.run.log.epochs.front().loss);
}

TEST_CASE("baseline preconditions and determinism") {
  CHECK_THROWS_AS(train_baseline(BaselineKind::retrain_restored, small_set(), quick(1), toy_arch(10)), ConfigError);
  CHECK_THROWS_AS(train_baseline(BaselineKind::clean, Dataset{}, quick(1), toy_arch(10)), InputError);
  CHECK_THROWS_AS(baseline_kind_from_string("retrain_blurry"), ConfigError);
  auto den = small_denoiser();
  auto a = train_baseline(BaselineKind::retrain_restored, small_set(), quick(2), toy_arch(10), &den);
  auto b = train_baseline(BaselineKind::retrain_restored, small_set(), quick(2), toy_arch(10), &den);
  CHECK(a.model.to_checkpoint().serialize() == b.model.to_checkpoint().serialize());
  // Initialising from a pretrained network starts from its weights.
  auto ft = train_baseline(BaselineKind::clean, small_set(), quick(1), BackboneArch::desk(), nullptr, &pretrained());
  CHECK(ft.model.feature_dim() == pretrained().feature_dim());
}

TEST_CASE("stratified split is balanced and seeded") {
  std::vector<int> labels;
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 10; ++i) labels.push_back(c);
  auto s = stratified_split(labels, 0.2, 3);
  CHECK(s.held_out.size() == 8);
  CHECK(s.train.size() == 32);
  std::vector<int> per(4, 0);
  for (auto i : s.held_out) ++per[labels[i]];
  CHECK(per == std::vector<int>{2, 2, 2, 2});
  auto t = stratified_split(labels, 0.2, 3);
  CHECK(t.held_out == s.held_out);
}

TEST_CASE("train config validation and json") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.noise_values = {-0.1, 0.5};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = quick(7, 11);
  CHECK(TrainConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
  CHECK_THROWS_AS(check_finite_loss(std::nan(""), "x", 0, 0), TrainingError);
}
