#include "grain/training.hpp"

#include <cmath>
#include <cstdio>

namespace grain {

namespace {

constexpr std::uint64_t kSplitStream = 0x5350'4c49;  // "SPLI"
constexpr std::uint64_t kOrderStream = 0x4f52'4445;  // "ORDE"

void check_classes(const Network& net, const Dataset& data) {
  if (net.config().class_names != data.class_names)
    throw ConfigError("network classes do not match dataset classes");
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be > 0");
  if (count < 1) throw ConfigError(std::string(schedule == Schedule::kSteps ? "steps" : "epochs") + " must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in [0, 1)");
}

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "val"; }

std::string format_metrics_row(const MetricsRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld,%.6f,%s,%.6f,%.6f", static_cast<long long>(r.step), r.epoch,
                to_string(r.split).c_str(), r.loss, r.accuracy);
  return buf;
}

CsvMetricsSink::CsvMetricsSink(std::ostream& out) : out_(out) { out_ << kMetricsCsvHeader << '\n'; }

void CsvMetricsSink::record(const MetricsRecord& record) { out_ << format_metrics_row(record) << '\n'; }

void sgd_step(Network& net, const GradientSet& grads, double learning_rate) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  auto params = net.parameters();
  if (params.size() != grads.size())
    throw ShapeError("gradient set has " + std::to_string(grads.size()) + " tensors for " +
                     std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape())
      throw ShapeError("gradient " + std::to_string(i) + " has shape " + shape_string(grads[i].shape()) +
                       ", parameter is " + shape_string(params[i]->shape()));
    if (!grads[i].all_finite()) throw NumericError("non-finite gradient in parameter tensor " + std::to_string(i));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->vec() -= learning_rate * grads[i].vec();
    if (!params[i]->all_finite()) throw NumericError("parameter tensor " + std::to_string(i) + " overflowed");
  }
}

EvalResult evaluate(const Network& net, const Dataset& data) {
  if (data.empty()) throw DatasetError("cannot evaluate on an empty dataset");
  check_classes(net, data);
  const Index k = data.num_classes();
  EvalResult r;
  r.confusion = decltype(r.confusion)::Zero(k, k);
  double loss_sum = 0.0;
  for (const Sample& s : data.samples) {
    const ForwardTrace trace = forward(net, s.image);
    loss_sum += cross_entropy(trace.probabilities, s.label);
    ++r.confusion(s.label, argmax_prediction(trace.probabilities).label);
  }
  const auto n = static_cast<double>(data.size());
  r.loss = loss_sum / n;
  r.accuracy = static_cast<double>(r.confusion.trace()) / n;
  for (Index c = 0; c < k; ++c) {
    const auto row = r.confusion.row(c).sum();
    r.per_class_accuracy.push_back(row ? static_cast<double>(r.confusion(c, c)) / static_cast<double>(row) : 0.0);
  }
  return r;
}

double initial_loss_check(const Network& net, const Dataset& data) { return evaluate(net, data).loss; }

TrainResult train(Network net, const Dataset& data, const TrainConfig& cfg, MetricsSink* sink) {
  cfg.validate();
  if (data.empty()) throw DatasetError("cannot train on an empty dataset");
  check_classes(net, data);
  for (std::size_t c = 0; const std::size_t n : data.class_counts()) {
    if (n == 0) throw DatasetError("class '" + data.class_names[c] + "' has no samples");
    ++c;
  }

  const auto [train_set, val_set] = split(data, cfg.val_fraction, derive_seed(cfg.seed, kSplitStream));
  if (train_set.empty()) throw DatasetError("validation fraction leaves no training samples");
  const std::size_t n_train = train_set.size();
  const std::int64_t total =
      cfg.schedule == Schedule::kSteps ? cfg.count : cfg.count * static_cast<std::int64_t>(n_train);

  Rng order_rng(derive_seed(cfg.seed, kOrderStream));
  std::vector<std::size_t> order(n_train);
  std::size_t cursor = n_train;  // forces a shuffle before the first step

  TrainResult result{std::move(net), {}};
  Network& model = result.network;

  auto emit = [&](std::int64_t step) {
    const double epoch = static_cast<double>(step) / static_cast<double>(n_train);
    const EvalResult tr = evaluate(model, train_set);
    result.history.push_back({step, epoch, Split::kTrain, tr.loss, tr.accuracy});
    if (!val_set.empty()) {
      const EvalResult va = evaluate(model, val_set);
      result.history.push_back({step, epoch, Split::kVal, va.loss, va.accuracy});
    }
    if (sink)
      for (std::size_t i = result.history.size() - (val_set.empty() ? 1 : 2); i < result.history.size(); ++i)
        sink->record(result.history[i]);
  };

  for (std::int64_t step = 1; step <= total; ++step) {
    if (cursor == n_train) {
      for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
      for (std::size_t i = n_train; i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
      cursor = 0;
    }
    const Sample& sample = train_set.samples[order[cursor++]];
    const ForwardTrace trace = forward(model, sample.image);
    if (!trace.logits.all_finite())
      throw NumericError("training diverged at step " + std::to_string(step) + ": non-finite logits");
    const GradientSet grads = backward(model, trace, sample.label);
    try {
      sgd_step(model, grads, cfg.learning_rate);
    } catch (const NumericError& e) {
      throw NumericError("training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    model.set_steps_trained(model.steps_trained() + 1);
    if (step % cfg.eval_every == 0 || step == total) emit(step);
    if (sink && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) sink->checkpoint(model, step);
  }
  return result;
}

}  // namespace grain
