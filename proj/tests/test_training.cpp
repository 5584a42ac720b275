#include <doctest.h>

#include <cmath>
#include <sstream>

#include "grain/training.hpp"
#include "oracles.hpp"

using namespace grain;

namespace {

const std::vector<std::string> kBinary = {"bad", "OK"};

NetworkConfig small_config(const std::vector<std::string>& classes = kBinary) {
  return builtin_config(Architecture::kPaper2Conv, {1, 16, 16}, classes);
}

// Dense-only net with one scalar weight, for exact update arithmetic.
Network scalar_net(double w) {
  const NetworkConfig c{{1, 1, 1}, {LayerSpec::flatten(), LayerSpec::dense(1), LayerSpec::softmax()}, {"only"}};
  return Network(c, {std::monostate{}, DenseParams<double>{from_data<double>({1, 1}, {w}), zeros({1})},
                     std::monostate{}},
                 0);
}

GradientSet scalar_grad(double g) { return {from_data<double>({1, 1}, {g}), zeros({1})}; }

double weight(const Network& n) { return (*n.parameters()[0])[0]; }

struct Recorder : MetricsSink {
  std::vector<MetricsRecord> rows;
  std::vector<std::int64_t> checkpoints;
  void record(const MetricsRecord& r) override { rows.push_back(r); }
  void checkpoint(const Network&, std::int64_t step) override { checkpoints.push_back(step); }
};

}  // namespace

TEST_CASE("sgd_step arithmetic") {
  Network n = scalar_net(1.0);
  sgd_step(n, scalar_grad(2.0), 0.1);
  CHECK(weight(n) == doctest::Approx(0.8).epsilon(1e-15));

  Network z = scalar_net(0.25);
  sgd_step(z, scalar_grad(0.0), 0.1);
  CHECK(weight(z) == 0.25);

  Network two = scalar_net(0.0);
  sgd_step(two, scalar_grad(0.5), 0.25);
  sgd_step(two, scalar_grad(0.5), 0.25);
  CHECK(weight(two) == -2 * 0.25 * 0.5);

  CHECK_THROWS_AS(sgd_step(n, {zeros({1, 1})}, 0.1), ShapeError);
  CHECK_THROWS_AS(sgd_step(n, {zeros({2, 1}), zeros({1})}, 0.1), ShapeError);
  GradientSet nan_grad = scalar_grad(0.0);
  nan_grad[0][0] = std::nan("");
  CHECK_THROWS_AS(sgd_step(n, nan_grad, 0.1), NumericError);
  CHECK_THROWS_AS(sgd_step(n, scalar_grad(1.0), 0.0), ConfigError);
}

TEST_CASE("a small step along the gradient never raises the loss") {
  Rng rng(50);
  const NetworkConfig c = small_config();
  for (int t = 0; t < 100; ++t) {
    Network net = init(c, rng.next_u64(), InitScheme::kHeUniform);
    const TensorXd img = rand_uniform(rng, {1, 16, 16}, 0.0, 1.0);
    const auto label = static_cast<Index>(rng.below(2));
    const ForwardTrace trace = forward(net, img);
    const double before = cross_entropy(trace.probabilities, label);
    sgd_step(net, backward(net, trace, label), 1e-4);
    CHECK(cross_entropy(forward(net, img).probabilities, label) <= before + 1e-9);
  }
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.count = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.val_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.eval_every = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("evaluate on a uniform-output net") {
  const Dataset d = synth_dataset(5, 16, 16, 2, SynthMode::kBinary);
  const EvalResult r = evaluate(init(small_config(), 1), d);
  CHECK(r.accuracy == 0.5);
  CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(r.per_class_accuracy == std::vector<double>{1.0, 0.0});
  CHECK(r.confusion(0, 0) == 5);
  CHECK(r.confusion(1, 0) == 5);
  CHECK(r.confusion.sum() == 10);
  CHECK_THROWS_AS(evaluate(init(small_config(), 1), Dataset{{}, kBinary}), DatasetError);
  CHECK_THROWS_AS(evaluate(init(small_config({"a", "b"}), 1), d), ConfigError);
}

TEST_CASE("evaluate on a perfect net") {
  // Bias-only logits tied to the mean intensity separate dark and bright images.
  const NetworkConfig c{{1, 2, 2}, {LayerSpec::flatten(), LayerSpec::dense(2), LayerSpec::softmax()}, kBinary};
  const Network net(c,
                    {std::monostate{},
                     DenseParams<double>{from_data<double>({2, 4}, {-5, -5, -5, -5, 5, 5, 5, 5}), zeros({2})},
                     std::monostate{}},
                    0);
  Dataset d{{}, kBinary};
  for (int i = 0; i < 4; ++i) {
    TensorXd dark({1, 2, 2}), bright({1, 2, 2});
    bright.vec().setConstant(0.9);
    d.samples.push_back({dark, 0, "d"});
    d.samples.push_back({bright, 1, "b"});
  }
  const EvalResult r = evaluate(net, d);
  CHECK(r.accuracy == 1.0);
  CHECK(r.confusion(0, 1) == 0);
  CHECK(r.confusion(1, 0) == 0);
  CHECK(r.confusion.row(0).sum() == 4);
  CHECK(r.confusion.row(1).sum() == 4);
}

TEST_CASE("initial loss sits at ln |classes|") {
  const Dataset d2 = synth_dataset(5, 16, 16, 3, SynthMode::kBinary);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double loss = initial_loss_check(init(small_config(), seed), d2);
    CHECK(loss >= 0.60);
    CHECK(loss <= 0.78);
  }

  const std::vector<std::string> four = {"none", "patch", "pit", "scratch"};
  const DefectKind kinds[] = {DefectKind::kNone, DefectKind::kPatch, DefectKind::kPit, DefectKind::kScratch};
  Dataset d4{{}, four};
  for (Index c = 0; c < 4; ++c)
    for (std::uint64_t i = 0; i < 4; ++i) {
      SynthSpec s;
      s.width = s.height = 16;
      s.defect_kind = kinds[c];
      s.seed = i;
      d4.samples.push_back({synth_image(s).image, c, "x"});
    }
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    CHECK(std::abs(initial_loss_check(init(small_config(four), seed), d4) - std::log(4.0)) <= 0.15);
}

TEST_CASE("training history layout and determinism") {
  const Dataset d = synth_dataset(5, 16, 16, 4, SynthMode::kBinary);
  TrainConfig cfg;
  cfg.count = 95;
  cfg.eval_every = 20;
  cfg.checkpoint_every = 40;
  cfg.val_fraction = 0.2;
  Recorder rec;
  const TrainResult a = train(init(small_config(), 4), d, cfg, &rec);
  const TrainResult b = train(init(small_config(), 4), d, cfg);
  CHECK(a.history == b.history);
  CHECK(a.network == b.network);
  CHECK(rec.rows == a.history);
  CHECK(rec.checkpoints == std::vector<std::int64_t>{40, 80});
  CHECK(a.network.steps_trained() == 95);

  std::vector<std::int64_t> steps;
  for (const auto& r : a.history) {
    if (r.split == Split::kTrain) steps.push_back(r.step);
    CHECK(r.loss >= 0.0);
    CHECK(r.loss <= -std::log(kProbabilityFloor));
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
    CHECK(r.epoch == static_cast<double>(r.step) / 8.0);
  }
  CHECK(steps == std::vector<std::int64_t>{20, 40, 60, 80, 95});
  CHECK(a.history[0].split == Split::kTrain);
  CHECK(a.history[1].split == Split::kVal);
}

TEST_CASE("epoch schedule runs epochs x train size steps") {
  const Dataset d = synth_dataset(5, 16, 16, 5, SynthMode::kBinary);
  TrainConfig cfg;
  cfg.schedule = Schedule::kEpochs;
  cfg.count = 3;
  cfg.val_fraction = 0.2;
  cfg.eval_every = 1000;
  const TrainResult r = train(init(small_config(), 5), d, cfg);
  CHECK(r.network.steps_trained() == 3 * 8);
  CHECK(r.history.back().step == 24);
  CHECK(r.history.back().epoch == 3.0);
}

TEST_CASE("training rejects bad inputs") {
  TrainConfig cfg;
  cfg.count = 5;
  CHECK_THROWS_AS(train(init(small_config(), 1), Dataset{{}, kBinary}, cfg), DatasetError);
  Dataset one_class = synth_dataset(3, 16, 16, 1, SynthMode::kBinary);
  std::erase_if(one_class.samples, [](const Sample& s) { return s.label == 1; });
  CHECK_THROWS_AS(train(init(small_config(), 1), one_class, cfg), DatasetError);
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(train(init(small_config(), 1), synth_dataset(3, 16, 16, 1, SynthMode::kBinary), cfg), ConfigError);
}

TEST_CASE("divergence aborts with the step number") {
  const Dataset d = synth_dataset(3, 16, 16, 6, SynthMode::kBinary);
  TrainConfig cfg;
  cfg.count = 50;
  cfg.learning_rate = 1e300;
  try {
    train(init(small_config(), 6, InitScheme::kHeUniform), d, cfg);
    FAIL("expected divergence");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step ") != std::string::npos);
  }
}

TEST_CASE("metrics csv format") {
  std::ostringstream os;
  CsvMetricsSink sink(os);
  sink.record({100, 12.5, Split::kVal, 0.6931471805, 0.5});
  CHECK(os.str() == "step,epoch,split,loss,accuracy\n100,12.500000,val,0.693147,0.500000\n");
}
