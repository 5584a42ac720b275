#include "grain/network.hpp"

#include <cmath>

namespace grain {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kPool: return "pool";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kDense: return "dense";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& name) {
  for (LayerKind k : {LayerKind::kConv, LayerKind::kPool, LayerKind::kRelu, LayerKind::kFlatten,
                      LayerKind::kDense, LayerKind::kSoftmax})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown layer kind '" + name + "'");
}

void LayerSpec::validate() const {
  const bool conv = kind == LayerKind::kConv;
  const bool pool = kind == LayerKind::kPool;
  const bool dense = kind == LayerKind::kDense;
  auto field = [&](Index v, bool required, const char* name) {
    if (required && v < 1)
      throw ConfigError(to_string(kind) + " layer needs a positive " + name);
    if (!required && v != 0)
      throw ConfigError(to_string(kind) + " layer must not set " + name);
  };
  field(kernel_size, conv, "kernel_size");
  field(out_maps, conv, "out_maps");
  field(pool_factor, pool, "pool_factor");
  field(out_units, dense, "out_units");
}

namespace {

std::string layer_label(std::size_t i, const LayerSpec& spec) {
  return "layer " + std::to_string(i) + " (" + to_string(spec.kind) + ")";
}

}  // namespace

std::vector<Shape> infer_shapes(const NetworkConfig& config) {
  if (config.input_shape.size() != 3)
    throw ShapeError("input shape must be [channels, height, width], got " + shape_string(config.input_shape));
  checked_volume(config.input_shape);
  std::vector<Shape> shapes;
  Shape cur = config.input_shape;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& spec = config.layers[i];
    try {
      switch (spec.kind) {
        case LayerKind::kConv: cur = conv2d_output_shape(cur, spec.out_maps, spec.kernel_size); break;
        case LayerKind::kPool: cur = maxpool_output_shape(cur, spec.pool_factor); break;
        case LayerKind::kRelu: break;
        case LayerKind::kFlatten: cur = {checked_volume(cur)}; break;
        case LayerKind::kDense:
          if (spec.out_units < 1) throw ShapeError("dense needs out_units >= 1");
          cur = {spec.out_units};
          break;
        case LayerKind::kSoftmax:
          if (cur.size() != 1) throw ShapeError("softmax needs a flat input, got " + shape_string(cur));
          break;
      }
    } catch (const ShapeError& e) {
      throw ShapeError(layer_label(i, spec) + ": " + e.what());
    }
    shapes.push_back(cur);
  }
  return shapes;
}

void validate(const NetworkConfig& config) {
  if (config.class_names.empty()) throw ConfigError("network needs at least one class");
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    try {
      config.layers[i].validate();
    } catch (const ConfigError& e) {
      throw ConfigError(layer_label(i, config.layers[i]) + ": " + e.what());
    }
  }
  const auto& L = config.layers;
  if (L.size() < 2 || L[L.size() - 2].kind != LayerKind::kDense || L.back().kind != LayerKind::kSoftmax)
    throw ConfigError("network must end with dense(|classes|) followed by softmax");
  if (L[L.size() - 2].out_units != config.num_classes())
    throw ConfigError("final dense layer has " + std::to_string(L[L.size() - 2].out_units) + " units for " +
                      std::to_string(config.num_classes()) + " classes");
  for (std::size_t i = 0; i + 1 < L.size(); ++i)
    if (L[i].kind == LayerKind::kSoftmax) throw ConfigError("softmax is only allowed as the last layer");
  infer_shapes(config);
}

Architecture parse_architecture(const std::string& name) {
  if (name == "paper2conv") return Architecture::kPaper2Conv;
  if (name == "paper3conv") return Architecture::kPaper3Conv;
  throw ConfigError("unknown architecture '" + name + "' (expected paper2conv or paper3conv)");
}

std::string to_string(Architecture arch) {
  return arch == Architecture::kPaper2Conv ? "paper2conv" : "paper3conv";
}

NetworkConfig builtin_config(Architecture arch, const Shape& input_shape,
                             const std::vector<std::string>& class_names) {
  NetworkConfig config{input_shape, {}, class_names};
  std::vector<Index> stage_maps = {6, 12};
  if (arch == Architecture::kPaper3Conv) stage_maps.push_back(24);
  for (Index maps : stage_maps) {
    config.layers.push_back(LayerSpec::conv(3, maps));
    config.layers.push_back(LayerSpec::relu());
    config.layers.push_back(LayerSpec::pool(2));
  }
  config.layers.push_back(LayerSpec::flatten());
  config.layers.push_back(LayerSpec::dense(static_cast<Index>(class_names.size())));
  config.layers.push_back(LayerSpec::softmax());
  validate(config);
  return config;
}

Network::Network(NetworkConfig config, std::vector<LayerParams> params, std::uint64_t seed,
                 std::int64_t steps_trained)
    : config_(std::move(config)), params_(std::move(params)), seed_(seed), steps_trained_(steps_trained) {
  validate(config_);
  shapes_ = infer_shapes(config_);
  if (params_.size() != config_.layers.size())
    throw ConfigError("parameter list has " + std::to_string(params_.size()) + " entries for " +
                      std::to_string(config_.layers.size()) + " layers");
  Shape in = config_.input_shape;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const LayerSpec& spec = config_.layers[i];
    const std::string where = layer_label(i, spec);
    if (spec.kind == LayerKind::kConv) {
      const auto* p = std::get_if<ConvParams<double>>(&params_[i]);
      if (!p) throw ConfigError(where + ": missing conv parameters");
      if (p->kernels.shape() != Shape{spec.out_maps, in[0], spec.kernel_size, spec.kernel_size} ||
          p->biases.shape() != Shape{spec.out_maps})
        throw ShapeError(where + ": parameter shapes do not match the config");
      if (!p->kernels.all_finite() || !p->biases.all_finite()) throw ValueError(where + ": non-finite parameter");
    } else if (spec.kind == LayerKind::kDense) {
      const auto* p = std::get_if<DenseParams<double>>(&params_[i]);
      if (!p) throw ConfigError(where + ": missing dense parameters");
      if (p->weights.shape() != Shape{spec.out_units, checked_volume(in)} || p->biases.shape() != Shape{spec.out_units})
        throw ShapeError(where + ": parameter shapes do not match the config");
      if (!p->weights.all_finite() || !p->biases.all_finite()) throw ValueError(where + ": non-finite parameter");
    } else if (!std::holds_alternative<std::monostate>(params_[i])) {
      throw ConfigError(where + ": layer takes no parameters");
    }
    in = shapes_[i];
  }
}

std::vector<TensorXd*> Network::parameters() {
  std::vector<TensorXd*> out;
  for (auto& lp : params_) {
    if (auto* c = std::get_if<ConvParams<double>>(&lp)) {
      out.push_back(&c->kernels);
      out.push_back(&c->biases);
    } else if (auto* d = std::get_if<DenseParams<double>>(&lp)) {
      out.push_back(&d->weights);
      out.push_back(&d->biases);
    }
  }
  return out;
}

std::vector<const TensorXd*> Network::parameters() const {
  std::vector<const TensorXd*> out;
  for (TensorXd* p : const_cast<Network*>(this)->parameters()) out.push_back(p);
  return out;
}

bool operator==(const Network& a, const Network& b) {
  if (a.config_ != b.config_ || a.seed_ != b.seed_ || a.steps_trained_ != b.steps_trained_) return false;
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!(*pa[i] == *pb[i])) return false;
  return true;
}

Network init(const NetworkConfig& config, std::uint64_t seed, InitScheme scheme) {
  validate(config);
  const std::vector<Shape> shapes = infer_shapes(config);
  Rng rng(seed);
  std::vector<LayerParams> params(config.layers.size());
  const std::size_t head = config.layers.size() - 2;
  Shape in = config.input_shape;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& spec = config.layers[i];
    if (spec.kind == LayerKind::kConv) {
      const Index fan_in = in[0] * spec.kernel_size * spec.kernel_size;
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      params[i] = ConvParams<double>{
          rand_uniform(rng, {spec.out_maps, in[0], spec.kernel_size, spec.kernel_size}, -bound, bound),
          zeros({spec.out_maps})};
    } else if (spec.kind == LayerKind::kDense) {
      const Index fan_in = checked_volume(in);
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      TensorXd w = (i == head && scheme == InitScheme::kZeroHead)
                       ? zeros({spec.out_units, fan_in})
                       : rand_uniform(rng, {spec.out_units, fan_in}, -bound, bound);
      params[i] = DenseParams<double>{std::move(w), zeros({spec.out_units})};
    }
    in = shapes[i];
  }
  return Network(config, std::move(params), seed);
}

ForwardTrace forward(const Network& net, const TensorXd& image) {
  const NetworkConfig& cfg = net.config();
  if (image.shape() != cfg.input_shape)
    throw ShapeError("image shape " + shape_string(image.shape()) + " does not match network input " +
                     shape_string(cfg.input_shape));
  ForwardTrace trace;
  trace.inputs.reserve(cfg.layers.size());
  trace.pools.resize(cfg.layers.size());
  TensorXd cur = image;
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    trace.inputs.push_back(cur);
    switch (cfg.layers[i].kind) {
      case LayerKind::kConv: cur = conv2d_forward(cur, std::get<ConvParams<double>>(net.layer_params(i))); break;
      case LayerKind::kPool: {
        auto [out, pool] = maxpool_forward(cur, cfg.layers[i].pool_factor);
        cur = std::move(out);
        trace.pools[i] = std::move(pool);
        break;
      }
      case LayerKind::kRelu: cur = relu_forward(cur); break;
      case LayerKind::kFlatten: cur = cur.reshaped({cur.size()}); break;
      case LayerKind::kDense: cur = dense_forward(cur, std::get<DenseParams<double>>(net.layer_params(i))); break;
      case LayerKind::kSoftmax:
        trace.logits = cur;
        cur = softmax(cur);
        break;
    }
  }
  trace.probabilities = std::move(cur);
  return trace;
}

GradientSet backward(const Network& net, const ForwardTrace& trace, Index label) {
  return backward(net, trace, label, nullptr);
}

GradientSet backward(const Network& net, const ForwardTrace& trace, Index label, TensorXd* grad_image) {
  const NetworkConfig& cfg = net.config();
  if (trace.inputs.size() != cfg.layers.size()) throw ShapeError("forward trace does not belong to this network");
  if (label < 0 || label >= cfg.num_classes())
    throw IndexError("label " + std::to_string(label) + " outside [0, " + std::to_string(cfg.num_classes()) + ")");

  // Parameter gradients are collected back to front, then reversed per pair.
  std::vector<std::pair<TensorXd, TensorXd>> layer_grads;
  TensorXd grad;
  for (std::size_t r = cfg.layers.size(); r-- > 0;) {
    const TensorXd& input = trace.inputs[r];
    switch (cfg.layers[r].kind) {
      case LayerKind::kSoftmax: grad = softmax_ce_backward(input, label); break;
      case LayerKind::kDense: {
        auto g = dense_backward(input, std::get<DenseParams<double>>(net.layer_params(r)), grad);
        layer_grads.emplace_back(std::move(g.weights), std::move(g.biases));
        grad = std::move(g.input);
        break;
      }
      case LayerKind::kFlatten: grad = grad.reshaped(input.shape()); break;
      case LayerKind::kRelu: grad = relu_backward(input, grad); break;
      case LayerKind::kPool: grad = maxpool_backward(trace.pools[r], grad); break;
      case LayerKind::kConv: {
        auto g = conv2d_backward(input, std::get<ConvParams<double>>(net.layer_params(r)), grad);
        layer_grads.emplace_back(std::move(g.kernels), std::move(g.biases));
        grad = std::move(g.input);
        break;
      }
    }
  }
  GradientSet out;
  out.reserve(layer_grads.size() * 2);
  for (auto it = layer_grads.rbegin(); it != layer_grads.rend(); ++it) {
    out.push_back(std::move(it->first));
    out.push_back(std::move(it->second));
  }
  if (grad_image) *grad_image = std::move(grad);
  return out;
}

Prediction argmax_prediction(const TensorXd& probabilities) {
  Index best = 0;
  for (Index i = 1; i < probabilities.size(); ++i)
    if (probabilities[i] > probabilities[best]) best = i;
  return {best, probabilities[best]};
}

Prediction predict(const Network& net, const TensorXd& image) {
  return argmax_prediction(forward(net, image).probabilities);
}

}  // namespace grain
