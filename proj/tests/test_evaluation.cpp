#include <doctest.h>

#include "fgnic/evaluation.hpp"
#include "toy_models.hpp"

#include <cmath>
#include <map>

using namespace fgnic;
using namespace fgnic::testing;

namespace {

const std::filesystem::path kData = FGNIC_TEST_DATA;

AccuracyTable replay() { return load_replay_table(kData / "reference_cifar100_resnet18.json"); }

Dataset balanced_set(int classes, int per_class, int size) { return make_synthetic_dataset({classes, per_class, size, 31}); }

}  // namespace

TEST_CASE("replay mode reproduces published cells") {
  auto t = replay();
  CHECK(t.accuracy("Pretrained", "Test on noisy", "uniform:0.1") == 45.03);
  CHECK(t.accuracy("Pretrained", "Test on noisy", "uniform:0.5") == 3.37);
  CHECK(t.accuracy("FG-NIC (Oracle)", "Ensemble", "uniform:0.3") == 70.63);
  CHECK(!t.accuracy("Pretrained", "Single", "uniform:0.1"));
  REQUIRE(t.rows.size() == 10);
  CHECK(t.rows.front().method == "Pretrained");
  CHECK(t.rows.back().method == "FG-NIC (Oracle)");
  CHECK(t.columns() == std::vector<std::string>{"uniform:0.1", "uniform:0.2", "uniform:0.3", "uniform:0.4",
                                                "uniform:0.5"});
  CHECK(*t.uniform_macro_average("Pretrained", "Test on restored") ==
        doctest::Approx((76.38 + 71.78 + 66.53 + 60.86 + 54.41) / 5.0));
}

TEST_CASE("markdown mirrors the methods by ascending sigma layout") {
  const std::string md = emit_report(replay(), ReportFormat::markdown);
  CHECK(md.find("| Method | Setup | σ=0.1 | σ=0.2 | σ=0.3 | σ=0.4 | σ=0.5 | Uniform mean (macro) |") !=
        std::string::npos);
  CHECK(md.find("| Pretrained | Test on noisy | 45.03 | 17.47 | 8.85 | 5.05 | 3.37 | 15.95 |") != std::string::npos);
  CHECK(md.find("Pretrained | Test on noisy") < md.find("Retrain on noisy"));
  CHECK(md.find("FG-NIC (Pretrained) | Single") < md.find("FG-NIC (Oracle) | Ensemble"));
}

TEST_CASE("reports are deterministic and json round-trips") {
  auto t = replay();
  for (auto f : {ReportFormat::json, ReportFormat::csv, ReportFormat::markdown})
    CHECK(emit_report(t, f) == emit_report(replay(), f));
  CHECK(AccuracyTable::from_json(nlohmann::json::parse(emit_report(t, ReportFormat::json))) == t);
  const std::string csv = emit_report(t, ReportFormat::csv);
  CHECK(csv.rfind("method,condition,column,accuracy,std_error,samples,seed\n", 0) == 0);
  CHECK(csv.find("Pretrained,Test on noisy,uniform:0.1,45.0300,") != std::string::npos);
}

TEST_CASE("table output does not depend on insertion order") {
  AccuracyTable a, b;
  a.method_order = b.method_order = {"B", "A"};
  const std::vector<std::tuple<std::string, std::string, AccuracyCell>> entries = {
      {"A", "x", {"uniform:0.2", 50.0, 10, 1}},
      {"B", "y", {"radial2d:random:0-0.5", 20.0, 10, 1}},
      {"A", "x", {"uniform:0.1", 60.0, 10, 1}},
      {"B", "y", {"linear1d:rows:0-0.5", 30.0, 10, 1}},
      {"A", "w", {"uniform:0.5", 10.0, 10, 1}}};
  for (const auto& [m, c, cell] : entries) a.add(m, c, cell);
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) b.add(std::get<0>(*it), std::get<1>(*it), std::get<2>(*it));
  CHECK(emit_report(a, ReportFormat::json) == emit_report(b, ReportFormat::json));
  CHECK(emit_report(a, ReportFormat::markdown) == emit_report(b, ReportFormat::markdown));
  CHECK(a.rows.front().method == "B");
  CHECK(a.columns() == std::vector<std::string>{"uniform:0.1", "uniform:0.2", "uniform:0.5", "linear1d:rows:0-0.5",
                                                "radial2d:random:0-0.5"});
  const std::string md = emit_report(a, ReportFormat::markdown);
  CHECK(md.find("n/a") != std::string::npos);
  CHECK_THROWS_AS(a.add("A", "x", {"uniform:0.1", 101.0, 1, 1}), InputError);
  CHECK_THROWS_AS(a.add("A", "x", {"uniform:0.1", std::nan(""), 1, 1}), InputError);
}

TEST_CASE("standard error of a cell") {
  AccuracyCell c{"uniform:0.1", 50.0, 100, 0};
  CHECK(c.standard_error() == doctest::Approx(5.0));
  CHECK(AccuracyCell{"x", 50.0, 0, 0}.standard_error() == 0.0);
}

TEST_CASE("a memorising classifier scores 100 percent at sigma 0") {
  const Dataset d = balanced_set(4, 10, 8);
  std::map<double, int> memory;
  for (std::size_t i = 0; i < d.size(); ++i) memory[d.images[i].data.cast<double>().sum()] = d.labels[i];
  Predictor perfect = [&](const Tensor<float>& in, const Tensor<float>&) {
    Matrix<float> logits = Matrix<float>::Zero(4, in.n);
    for (int n = 0; n < in.n; ++n) {
      auto it = memory.find(in.sample(n).cast<double>().sum());
      if (it != memory.end()) logits(it->second, n) = 1.0f;
    }
    return logits;
  };
  const auto cells = prepare_cells(d, {DegradationSpec::uniform(0.0)}, 5, nullptr);
  auto cell = evaluate_cell(cells[0], perfect, TestCondition::noisy, 7);
  CHECK(cell.accuracy == 100.0);
  CHECK(cell.samples == d.size());
  CHECK(cell.seed == 5);
}

TEST_CASE("random logits score near chance") {
  const int k = 10;
  const Dataset d = balanced_set(k, 100, 8);
  Rng rng(12);
  std::normal_distribution<float> n01(0.0f, 1.0f);
  Predictor random_logits = [&](const Tensor<float>& in, const Tensor<float>&) {
    Matrix<float> l(k, in.n);
    for (Index i = 0; i < l.size(); ++i) l.data()[i] = n01(rng);
    return l;
  };
  const auto cells = prepare_cells(d, {DegradationSpec::uniform(0.1)}, 1, nullptr);
  auto cell = evaluate_cell(cells[0], random_logits, TestCondition::noisy);
  // Binomial oracle: p = 1/K over N = 1000 draws.
  const double se = 100.0 * std::sqrt(0.1 * 0.9 / 1000.0);
  CHECK(std::abs(cell.accuracy - 100.0 / k) <= 3.0 * se);
}

TEST_CASE("sigma 0 noisy evaluation equals clean accuracy") {
  const Dataset d = balanced_set(5, 8, 16);
  Classifier<float> model(toy_arch(5), 3);
  auto row = evaluate(model, d, {DegradationSpec::uniform(0.0), DegradationSpec::uniform(0.3)}, TestCondition::noisy, 9);
  const auto pred = argmax_columns(model.logits(stack<float>(d.images)));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) correct += pred[i] == d.labels[i];
  CHECK(row.find("uniform:0")->accuracy == 100.0 * double(correct) / double(d.size()));
  CHECK(row.condition == "Test on noisy");
  CHECK_THROWS_AS(evaluate(model, d, {DegradationSpec::uniform(0.1)}, TestCondition::restored, 9), ConfigError);
  CHECK_THROWS_AS(evaluate(model, Dataset{}, {DegradationSpec::uniform(0.1)}, TestCondition::noisy, 9), InputError);
}

TEST_CASE("evaluation noise is paired across methods and keyed per image") {
  const Dataset d = balanced_set(2, 3, 8);
  for (const auto& spec : default_eval_grid()) {
    auto a = degrade_for_eval(d.images[0], spec, 4, 0);
    auto b = degrade_for_eval(d.images[0], spec, 4, 0);
    CHECK(a.data == b.data);
    if (spec.max_sigma() > 0.0) {
      CHECK(degrade_for_eval(d.images[0], spec, 4, 1).data != a.data);
      CHECK(degrade_for_eval(d.images[0], spec, 5, 0).data != a.data);
    }
  }
  Denoiser<float> den(toy_restoration(), 1);
  auto c1 = prepare_cells(d, default_eval_grid(), 3, &den);
  auto c2 = prepare_cells(d, default_eval_grid(), 3, nullptr);
  REQUIRE(c1.size() == 8);
  for (std::size_t i = 0; i < c1.size(); ++i) {
    CHECK(c1[i].noisy.data == c2[i].noisy.data);
    CHECK(c1[i].restored);
    CHECK(!c2[i].restored);
  }
  const Classifier<float> cls(toy_arch(2), 1);
  CHECK_THROWS_AS(evaluate_cell(c2[1], classifier_predictor(cls), TestCondition::restored), InputError);
}

TEST_CASE("fgnic evaluation rows are labelled by setup") {
  const Dataset d = balanced_set(5, 4, 16);
  for (bool ens : {false, true}) {
    FusionConfig cfg;
    cfg.use_ensemble = ens;
    auto model = toy_fgnic<float>(cfg);
    auto row = evaluate(model, d, {DegradationSpec::uniform(0.2)}, 1);
    CHECK(row.condition == (ens ? "Ensemble" : "Single"));
    CHECK(row.cells.size() == 1);
  }
}

TEST_CASE("MAC counting reference values") {
  nn::Linear<float> fc("fc", 128, 10);
  const std::vector<nn::LayerDesc> fc_only = {fc.desc()};
  CHECK(count_macs(fc_only, {1, 1, 128}) == 1280);

  nn::Conv2d<float> conv("conv", 3, 16, 3);
  const std::vector<nn::LayerDesc> conv_only = {conv.desc()};
  CHECK(count_macs(conv_only, {32, 32, 3}) == 442368);
  CHECK(count_macs(std::vector<nn::LayerDesc>{}, {32, 32, 3}) == 0);

  // conv 3->8 (3x3) on 8x8, 2x2 pool, FC 128->10: 9*3*8*64 + 128*10.
  nn::Conv2d<float> c8("c", 3, 8, 3);
  nn::AvgPool2d<float> pool("pool", 2, 2);
  nn::Linear<float> head("head", 128, 10);
  const std::vector<nn::LayerDesc> ref = {c8.desc(), pool.desc(), head.desc()};
  CHECK(count_macs(ref, {8, 8, 3}) == 15104);
  CHECK(propagate_shape(ref, {8, 8, 3}) == InputShape{1, 1, 10});

  std::vector<nn::LayerDesc> bad = {{nn::LayerDesc::Kind::other, "mystery"}};
  CHECK_THROWS_WITH_AS(count_macs(bad, {8, 8, 3}), doctest::Contains("mystery"), AccountingError);
  const std::vector<nn::LayerDesc> mismatch = {head.desc()};
  CHECK_THROWS_AS(count_macs(mismatch, {8, 8, 3}), AccountingError);
}

TEST_CASE("residual shortcuts are counted from the block input") {
  Classifier<float> model(toy_arch(5), 0);
  // stem 3->4 @16x16, stage1 (4->4, 3x3 twice) @16x16, stage2 conv1 4->8 s2 @8x8,
  // conv2 8->8 @8x8, shortcut 1x1 4->8 @8x8, head 8->5.
  const std::int64_t expected = 9LL * 3 * 4 * 256 + 2 * 9LL * 4 * 4 * 256 + 9LL * 4 * 8 * 64 + 9LL * 8 * 8 * 64 +
                                4LL * 8 * 64 + 8 * 5;
  CHECK(count_macs(model.describe(), {16, 16, 3}) == expected);
}

TEST_CASE("cost report depends on input size only through MACs") {
  FusionConfig cfg;
  cfg.use_ensemble = true;
  cfg.fidelity_source = FidelitySource::estimator;
  auto model = toy_fgnic<float>(cfg);
  auto small = cost_report(model, 16, 16);
  auto large = cost_report(model, 32, 32);
  REQUIRE(small.entries.size() == 4);
  for (std::size_t i = 0; i < small.entries.size(); ++i) {
    CHECK(small.entries[i].total_params == large.entries[i].total_params);
    CHECK(small.entries[i].trainable_params == large.entries[i].trainable_params);
    CHECK(small.entries[i].macs >= 0);
  }
  CHECK(large.entries[0].macs == 4 * small.entries[0].macs);
  CHECK(small.entries.back().network == "fgnic_blocks");
  CHECK(small.entries.back().trainable_params == analytic_block_params(model.split, cfg));
  CHECK(small.entries[2].trainable_params == 0);
  CHECK(CostReport::from_json(small.to_json()) == small);
  CHECK(emit_report(small, ReportFormat::markdown) == emit_report(small, ReportFormat::markdown));
}
