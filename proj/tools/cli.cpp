#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>

#include <CLI11.hpp>

#include "grain/dataset.hpp"
#include "grain/gradcheck.hpp"
#include "grain/model_io.hpp"
#include "grain/network.hpp"
#include "grain/training.hpp"

namespace grain::cli {

namespace fs = std::filesystem;

Verdict make_verdict(const std::string& class_name, double probability) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5f", probability);
  return {class_name, probability, "this is a " + class_name + " with possibility " + buf};
}

std::pair<Index, Index> parse_input_size(const std::string& text) {
  std::string s = text;
  const std::string times = "\xC3\x97";  // U+00D7
  if (const auto at = s.find(times); at != std::string::npos) s.replace(at, times.size(), "x");
  const auto x = s.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument("no separator");
    std::size_t used_h = 0, used_w = 0;
    const long h = std::stol(s.substr(0, x), &used_h);
    const long w = std::stol(s.substr(x + 1), &used_w);
    if (used_h != x || used_w != s.size() - x - 1 || h < 1 || w < 1) throw std::invalid_argument("bad extent");
    return {h, w};
  } catch (const std::logic_error&) {
    throw ConfigError("invalid --input-size '" + text + "' (expected HxW, e.g. 64x64)");
  }
}

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  Index per_class = 15;
  Index width = 64;
  Index height = 64;
  std::uint64_t seed = 1;
  std::string mode = "binary";
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const Dataset data = synth_dataset(a.per_class, a.width, a.height, a.seed, parse_synth_mode(a.mode));
  const auto written = write_dataset(data, a.out);
  for (std::size_t c = 0; c < written.size(); ++c)
    out << "class=" << data.class_names[c] << " files=" << written[c]
        << " dir=" << (fs::path(a.out) / data.class_names[c]).string() << '\n';
  return kExitOk;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string arch = "paper2conv";
  std::string input_size = "64x64";
  std::optional<std::int64_t> steps;
  std::optional<std::int64_t> epochs;
  double lr = 0.01;
  std::uint64_t seed = 1;
  double val_frac = 0.2;
  std::string model_out;
  std::string metrics;
  std::int64_t eval_every = 100;
  std::int64_t checkpoint_every = 0;
};

class CheckpointWriter : public MetricsSink {
 public:
  CheckpointWriter(std::ostream* csv, fs::path model_path) : model_path_(std::move(model_path)) {
    if (csv) csv_.emplace(*csv);
  }
  void record(const MetricsRecord& r) override {
    if (csv_) csv_->record(r);
  }
  void checkpoint(const Network& net, std::int64_t step) override {
    save(net, model_path_.string() + ".step" + std::to_string(step));
  }

 private:
  std::optional<CsvMetricsSink> csv_;
  fs::path model_path_;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg;
  cfg.schedule = a.epochs ? Schedule::kEpochs : Schedule::kSteps;
  cfg.count = a.epochs ? *a.epochs : a.steps.value_or(5000);
  cfg.learning_rate = a.lr;
  cfg.seed = a.seed;
  cfg.val_fraction = a.val_frac;
  cfg.eval_every = a.eval_every;
  cfg.checkpoint_every = a.checkpoint_every;
  cfg.validate();

  const Architecture arch = parse_architecture(a.arch);
  const auto [h, w] = parse_input_size(a.input_size);
  // Shape feasibility does not depend on the class names; check it before touching the data.
  builtin_config(arch, {1, h, w}, {"bad", "OK"});

  const Dataset data = load_dataset_dir(a.data, h, w);
  const NetworkConfig config = builtin_config(arch, {1, h, w}, data.class_names);
  Network net = init(config, a.seed);

  std::ofstream csv;
  if (!a.metrics.empty()) {
    csv.open(a.metrics, std::ios::binary | std::ios::trunc);
    if (!csv) throw IoError("cannot write metrics file '" + a.metrics + "'");
  }
  CheckpointWriter sink(a.metrics.empty() ? nullptr : &csv, a.model_out);
  const TrainResult result = train(std::move(net), data, cfg, &sink);
  csv.close();
  save(result.network, a.model_out);

  out << "steps=" << result.network.steps_trained() << '\n';
  for (auto it = result.history.rbegin(); it != result.history.rend() && it->step == result.history.back().step; ++it) {
    const std::string split = to_string(it->split);
    out << split << "_loss=" << fixed6(it->loss) << '\n' << split << "_accuracy=" << fixed6(it->accuracy) << '\n';
  }
  out << "model=" << a.model_out << '\n';
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string data;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Network net = load(a.model);
  const Shape& in = net.config().input_shape;
  const Dataset data = load_dataset_dir(a.data, in[1], in[2]);
  if (data.class_names != net.config().class_names)
    throw ConfigError("dataset classes do not match the model's classes");
  const EvalResult r = evaluate(net, data);
  const auto& names = data.class_names;

  out << "samples=" << data.size() << '\n';
  out << "loss=" << fixed6(r.loss) << '\n';
  out << "accuracy=" << fixed6(r.accuracy) << '\n';
  for (std::size_t c = 0; c < names.size(); ++c) out << "accuracy." << names[c] << '=' << fixed6(r.per_class_accuracy[c]) << '\n';
  for (std::size_t t = 0; t < names.size(); ++t)
    for (std::size_t p = 0; p < names.size(); ++p)
      out << "confusion." << names[t] << '.' << names[p] << '='
          << r.confusion(static_cast<Index>(t), static_cast<Index>(p)) << '\n';

  std::size_t width = 9;
  for (const auto& n : names) width = std::max(width, n.size() + 2);
  out << "\nconfusion matrix (rows: true class, columns: predicted)\n" << std::setw(static_cast<int>(width)) << "";
  for (const auto& n : names) out << std::setw(static_cast<int>(width)) << n;
  out << std::setw(static_cast<int>(width)) << "accuracy" << '\n';
  for (std::size_t t = 0; t < names.size(); ++t) {
    out << std::setw(static_cast<int>(width)) << names[t];
    for (std::size_t p = 0; p < names.size(); ++p)
      out << std::setw(static_cast<int>(width)) << r.confusion(static_cast<Index>(t), static_cast<Index>(p));
    out << std::setw(static_cast<int>(width)) << fixed6(r.per_class_accuracy[t]) << '\n';
  }
  return kExitOk;
}

// ---- predict ----------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string image;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const Network net = load(a.model);
  TensorXd image = load_pgm(a.image);
  const Shape& in = net.config().input_shape;
  if (image.extent(1) != in[1] || image.extent(2) != in[2]) image = resize_bilinear(image, in[1], in[2]);
  const Prediction p = predict(net, image);
  out << make_verdict(net.config().class_names[static_cast<std::size_t>(p.label)], p.probability).formatted << '\n';
  return kExitOk;
}

// ---- gradcheck --------------------------------------------------------------

struct GradcheckArgs {
  std::string arch = "paper2conv";
  std::string input_size = "64x64";
  std::uint64_t seed = 1;
  double tolerance = 1e-4;
  std::optional<std::size_t> inject_fault;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const auto [h, w] = parse_input_size(a.input_size);
  const NetworkConfig config = builtin_config(parse_architecture(a.arch), {1, h, w}, {"bad", "OK"});
  GradCheckOptions opt;
  opt.tolerance = a.tolerance;
  opt.corrupt_layer = a.inject_fault;
  const GradCheckReport report = gradcheck(config, a.seed, opt);

  char buf[256];
  for (const LayerCheck& lc : report.layers) {
    std::snprintf(buf, sizeof buf, "layer=%zu kind=%s local_error=%.3e network_error=%.3e checked=%zu skipped=%zu",
                  lc.layer, lc.name.c_str(), lc.local_error, lc.network_error, lc.checked, lc.skipped);
    out << buf << '\n';
  }
  std::snprintf(buf, sizeof buf, "worst_error=%.3e tolerance=%.1e", report.worst, a.tolerance);
  out << buf << '\n' << "result=" << (report.passed ? "pass" : "fail") << '\n';
  return report.passed ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"grain: train and apply small CNNs for surface defect inspection"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic PGM corpus with uneven illumination");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--per-class", synth.per_class, "Images per class")->check(CLI::PositiveNumber);
  s->add_option("--width", synth.width, "Image width")->check(CLI::PositiveNumber);
  s->add_option("--height", synth.height, "Image height")->check(CLI::PositiveNumber);
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--mode", synth.mode, "binary (OK/bad) or defects (patches/scratches)")
      ->check(CLI::IsMember({"binary", "defects"}));

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a built-in architecture on a class-per-directory dataset");
  t->add_option("--data", tr.data, "Dataset root (<root>/<class>/*.pgm)")->required();
  t->add_option("--arch", tr.arch, "paper2conv or paper3conv");
  t->add_option("--input-size", tr.input_size, "Network input HxW");
  auto* steps = t->add_option("--steps", tr.steps, "Training steps (one image per step)");
  t->add_option("--epochs", tr.epochs, "Passes over the training split")->excludes(steps);
  t->add_option("--lr", tr.lr, "SGD learning rate");
  t->add_option("--seed", tr.seed, "Seed for initialization, split and sample order");
  t->add_option("--val-frac", tr.val_frac, "Fraction of each class held out for validation");
  t->add_option("--out", tr.model_out, "Model file to write")->required();
  t->add_option("--metrics", tr.metrics, "Metrics CSV to write");
  t->add_option("--eval-every", tr.eval_every, "Steps between metric rows");
  t->add_option("--checkpoint-every", tr.checkpoint_every, "Steps between model snapshots (0 = off)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a model on a class-per-directory dataset");
  e->add_option("--model", ev.model, "Model file")->required();
  e->add_option("--data", ev.data, "Dataset root")->required();

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Classify a single PGM image");
  p->add_option("--model", pr.model, "Model file")->required();
  p->add_option("--image", pr.image, "PGM image")->required();

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  g->add_option("--arch", gc.arch, "paper2conv or paper3conv");
  g->add_option("--input-size", gc.input_size, "Network input HxW");
  g->add_option("--seed", gc.seed, "Seed for weights, image and label");
  g->add_option("--tolerance", gc.tolerance, "Maximum relative error");
  g->add_option("--inject-fault", gc.inject_fault, "Corrupt the analytic gradients of this layer")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*s) return cmd_synth(synth, out);
    if (*t) return cmd_train(tr, out);
    if (*e) return cmd_eval(ev, out);
    if (*p) return cmd_predict(pr, out);
    if (*g) return cmd_gradcheck(gc, out);
  } catch (const NumericError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitDiverged;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace grain::cli
