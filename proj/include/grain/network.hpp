#ifndef GRAIN_NETWORK_HPP
#define GRAIN_NETWORK_HPP

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "grain/layers.hpp"
#include "grain/tensor.hpp"

namespace grain {

enum class LayerKind { kConv, kPool, kRelu, kFlatten, kDense, kSoftmax };

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& name);

/// One entry of a network description. Only the fields belonging to `kind`
/// are meaningful; the rest stay 0.
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  Index kernel_size = 0;
  Index out_maps = 0;
  Index pool_factor = 0;
  Index out_units = 0;

  static LayerSpec conv(Index kernel_size, Index out_maps) { return {LayerKind::kConv, kernel_size, out_maps, 0, 0}; }
  static LayerSpec pool(Index factor) { return {LayerKind::kPool, 0, 0, factor, 0}; }
  static LayerSpec relu() { return {LayerKind::kRelu, 0, 0, 0, 0}; }
  static LayerSpec flatten() { return {LayerKind::kFlatten, 0, 0, 0, 0}; }
  static LayerSpec dense(Index units) { return {LayerKind::kDense, 0, 0, 0, units}; }
  static LayerSpec softmax() { return {LayerKind::kSoftmax, 0, 0, 0, 0}; }

  void validate() const;
  bool has_params() const { return kind == LayerKind::kConv || kind == LayerKind::kDense; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkConfig {
  Shape input_shape;  // [channels, height, width]
  std::vector<LayerSpec> layers;
  std::vector<std::string> class_names;  // index = class id

  Index num_classes() const { return static_cast<Index>(class_names.size()); }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Output shape of every layer in order. Throws ShapeError naming the first
/// layer whose input is too small or of the wrong rank.
std::vector<Shape> infer_shapes(const NetworkConfig& config);

/// Checks layer fields, the dense(|classes|) -> softmax tail, and runs shape
/// inference. Throws ConfigError or ShapeError.
void validate(const NetworkConfig& config);

enum class Architecture { kPaper2Conv, kPaper3Conv };

Architecture parse_architecture(const std::string& name);
std::string to_string(Architecture arch);

/// paper2conv: (conv3x3 -> relu -> pool2) with 6 then 12 maps, flatten,
/// dense(|classes|), softmax. paper3conv appends a third 24-map stage.
NetworkConfig builtin_config(Architecture arch, const Shape& input_shape,
                             const std::vector<std::string>& class_names);

using LayerParams = std::variant<std::monostate, ConvParams<double>, DenseParams<double>>;

/// One gradient tensor per parameter tensor, in Network::parameters() order.
using GradientSet = std::vector<TensorXd>;

class Network {
 public:
  Network(NetworkConfig config, std::vector<LayerParams> params, std::uint64_t seed,
          std::int64_t steps_trained = 0);

  const NetworkConfig& config() const { return config_; }
  const LayerParams& layer_params(std::size_t layer) const { return params_[layer]; }
  const std::vector<Shape>& shapes() const { return shapes_; }

  std::uint64_t seed() const { return seed_; }
  std::int64_t steps_trained() const { return steps_trained_; }
  void set_steps_trained(std::int64_t steps) { steps_trained_ = steps; }

  /// Flat view over the parameter tensors: for each conv/dense layer in
  /// order, its kernels/weights followed by its biases.
  std::vector<TensorXd*> parameters();
  std::vector<const TensorXd*> parameters() const;

  friend bool operator==(const Network& a, const Network& b);

 private:
  NetworkConfig config_;
  std::vector<LayerParams> params_;
  std::vector<Shape> shapes_;
  std::uint64_t seed_;
  std::int64_t steps_trained_;
};

enum class InitScheme {
  /// He-uniform U(-sqrt(6/fan_in), +sqrt(6/fan_in)) on hidden layers; the
  /// logit layer starts at zero.
  kZeroHead,
  /// He-uniform on every weight tensor, logit layer included.
  kHeUniform,
};

/// Deterministic in (config, seed). Biases start at zero.
Network init(const NetworkConfig& config, std::uint64_t seed, InitScheme scheme = InitScheme::kZeroHead);

struct ForwardTrace {
  std::vector<TensorXd> inputs;     // input seen by each layer
  std::vector<PoolTrace> pools;     // filled only at pool layers
  TensorXd logits;
  TensorXd probabilities;
};

ForwardTrace forward(const Network& net, const TensorXd& image);

/// Gradient of cross_entropy(softmax(logits), label) for every parameter.
GradientSet backward(const Network& net, const ForwardTrace& trace, Index label);

/// Same as backward but also returns the gradient with respect to the image.
GradientSet backward(const Network& net, const ForwardTrace& trace, Index label, TensorXd* grad_image);

struct Prediction {
  Index label = 0;
  double probability = 0.0;
};

/// Argmax with ties resolved toward the lower class index.
Prediction argmax_prediction(const TensorXd& probabilities);

Prediction predict(const Network& net, const TensorXd& image);

}  // namespace grain

#endif  // GRAIN_NETWORK_HPP
