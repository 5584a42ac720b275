#ifndef GRAIN_TRAINING_HPP
#define GRAIN_TRAINING_HPP

#include <Eigen/Core>

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "grain/dataset.hpp"
#include "grain/network.hpp"

namespace grain {

enum class Schedule { kSteps, kEpochs };

struct TrainConfig {
  Schedule schedule = Schedule::kSteps;
  std::int64_t count = 5000;  // steps or epochs, per schedule
  double learning_rate = 0.01;
  std::uint64_t seed = 1;
  std::int64_t eval_every = 100;
  std::int64_t checkpoint_every = 0;  // 0 disables checkpoints
  double val_fraction = 0.2;

  /// Throws ConfigError on a non-positive rate or count, or a bad fraction.
  void validate() const;
};

enum class Split { kTrain, kVal };

std::string to_string(Split split);

struct MetricsRecord {
  std::int64_t step = 0;
  double epoch = 0.0;  // step / training-split size
  Split split = Split::kTrain;
  double loss = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

inline constexpr const char* kMetricsCsvHeader = "step,epoch,split,loss,accuracy";

/// One CSV row without the trailing newline; loss and accuracy carry six decimals.
std::string format_metrics_row(const MetricsRecord& record);

/// Receives metric rows and periodic snapshots while training runs.
class MetricsSink {
 public:
  virtual ~MetricsSink() = default;
  virtual void record(const MetricsRecord& record) = 0;
  virtual void checkpoint(const Network& /*net*/, std::int64_t /*step*/) {}
};

/// Writes the header on construction, then one LF-terminated row per record.
class CsvMetricsSink : public MetricsSink {
 public:
  explicit CsvMetricsSink(std::ostream& out);
  void record(const MetricsRecord& record) override;

 private:
  std::ostream& out_;
};

/// p <- p - lr * g for every parameter tensor. Throws ShapeError on a
/// mismatched gradient set and NumericError on a non-finite gradient.
void sgd_step(Network& net, const GradientSet& grads, double learning_rate);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // 0 for classes with no samples
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> confusion;  // rows: truth, cols: predicted
};

EvalResult evaluate(const Network& net, const Dataset& data);

/// Mean loss of a (typically fresh) network; about ln(|classes|) near a
/// symmetric start.
double initial_loss_check(const Network& net, const Dataset& data);

struct TrainResult {
  Network network;
  std::vector<MetricsRecord> history;
};

/// Batch-size-1 SGD. The data is split with cfg.val_fraction, the training
/// split is visited in a fresh seeded permutation on every pass, and a
/// (train, val) metric pair is emitted every cfg.eval_every steps and after
/// the last step. Throws NumericError naming the step if the network diverges.
TrainResult train(Network net, const Dataset& data, const TrainConfig& cfg, MetricsSink* sink = nullptr);

}  // namespace grain

#endif  // GRAIN_TRAINING_HPP
