#include "grain/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace grain {

namespace {

constexpr double kErrorFloor = 1e-5;
constexpr double kCorruptionScale = 1.1;

using Eval = std::function<std::optional<TensorXd>()>;

struct Probe {
  double h;
  LayerCheck* check;
  double* error;

  // Perturbs each coordinate of `target` by +-h. `eval` returns the layer
  // output, or nullopt when the perturbation changed a ReLU sign or a pooling
  // winner. The directional derivative is taken as weights . (out+ - out-),
  // differencing element by element before the reduction.
  void run(TensorXd& target, const TensorXd& analytic, const TensorXd& weights, const Eval& eval) const {
    for (Index j = 0; j < target.size(); ++j) {
      const double saved = target[j];
      target[j] = saved + h;
      const auto plus = eval();
      target[j] = saved - h;
      const auto minus = eval();
      target[j] = saved;
      if (!plus || !minus) {
        ++check->skipped;
        continue;
      }
      const double numeric = weights.vec().dot(plus->vec() - minus->vec()) / (2.0 * h);
      *error = std::max(*error, relative_error(analytic[j], numeric));
      ++check->checked;
    }
  }
};

TensorXd scaled(TensorXd t, bool corrupt) {
  if (corrupt) t.vec() *= kCorruptionScale;
  return t;
}

std::vector<Index> activation_pattern(const NetworkConfig& config, const ForwardTrace& trace) {
  std::vector<Index> pattern;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    if (config.layers[i].kind == LayerKind::kRelu) {
      for (double v : trace.inputs[i].data()) pattern.push_back(v > 0.0);
    } else if (config.layers[i].kind == LayerKind::kPool) {
      pattern.insert(pattern.end(), trace.pools[i].argmax.begin(), trace.pools[i].argmax.end());
    }
  }
  return pattern;
}

Network random_network(const NetworkConfig& config, Rng& rng) {
  Network net = init(config, rng.next_u64(), InitScheme::kHeUniform);
  // Non-zero biases so bias gradients and ReLU offsets are exercised.
  std::vector<LayerParams> params;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    LayerParams lp = net.layer_params(i);
    if (auto* c = std::get_if<ConvParams<double>>(&lp)) c->biases = rand_uniform(rng, c->biases.shape(), -0.1, 0.1);
    if (auto* d = std::get_if<DenseParams<double>>(&lp)) d->biases = rand_uniform(rng, d->biases.shape(), -0.1, 0.1);
    params.push_back(std::move(lp));
  }
  return Network(config, std::move(params), net.seed());
}

void check_layer_locally(const Network& net, std::size_t i, const ForwardTrace& trace, Index label, Rng& rng,
                         const GradCheckOptions& opt, LayerCheck& lc) {
  const LayerSpec& spec = net.config().layers[i];
  const bool corrupt = opt.corrupt_layer == i;
  TensorXd x = trace.inputs[i];
  const Shape out_shape = net.shapes()[i];
  const TensorXd r = spec.kind == LayerKind::kSoftmax ? TensorXd(Shape{1}) : rand_uniform(rng, out_shape, -1.0, 1.0);
  Probe probe{opt.step, &lc, &lc.local_error};

  switch (spec.kind) {
    case LayerKind::kConv: {
      ConvParams<double> p = std::get<ConvParams<double>>(net.layer_params(i));
      const auto g = conv2d_backward(x, p, r);
      const Eval eval = [&] { return std::optional<TensorXd>(conv2d_forward(x, p)); };
      probe.run(x, scaled(g.input, corrupt), r, eval);
      probe.run(p.kernels, scaled(g.kernels, corrupt), r, eval);
      probe.run(p.biases, scaled(g.biases, corrupt), r, eval);
      break;
    }
    case LayerKind::kDense: {
      DenseParams<double> p = std::get<DenseParams<double>>(net.layer_params(i));
      const auto g = dense_backward(x, p, r);
      const Eval eval = [&] { return std::optional<TensorXd>(dense_forward(x, p)); };
      probe.run(x, scaled(g.input, corrupt), r, eval);
      probe.run(p.weights, scaled(g.weights, corrupt), r, eval);
      probe.run(p.biases, scaled(g.biases, corrupt), r, eval);
      break;
    }
    case LayerKind::kPool: {
      const PoolTrace& base = trace.pools[i];
      const TensorXd g = maxpool_backward(base, r);
      const Eval eval = [&]() -> std::optional<TensorXd> {
        auto [out, t] = maxpool_forward(x, spec.pool_factor);
        if (t.argmax != base.argmax) return std::nullopt;
        return out;
      };
      probe.run(x, scaled(g, corrupt), r, eval);
      break;
    }
    case LayerKind::kRelu: {
      const TensorXd base = x;
      const TensorXd g = relu_backward(x, r);
      const Eval eval = [&]() -> std::optional<TensorXd> {
        for (Index j = 0; j < x.size(); ++j)
          if ((x[j] > 0.0) != (base[j] > 0.0)) return std::nullopt;
        return relu_forward(x);
      };
      probe.run(x, scaled(g, corrupt), r, eval);
      break;
    }
    case LayerKind::kFlatten: {
      const TensorXd g = r.reshaped(x.shape());
      const Eval eval = [&] { return std::optional<TensorXd>(x.reshaped({x.size()})); };
      probe.run(x, scaled(g, corrupt), r, eval);
      break;
    }
    case LayerKind::kSoftmax: {
      const TensorXd g = softmax_ce_backward(x, label);
      const TensorXd one = from_data<double>({1}, {1.0});
      const Eval eval = [&] {
        return std::optional<TensorXd>(from_data<double>({1}, {cross_entropy(softmax(x), label)}));
      };
      probe.run(x, scaled(g, corrupt), one, eval);
      break;
    }
  }
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradcheck(const NetworkConfig& config, std::uint64_t seed, const GradCheckOptions& opt) {
  validate(config);
  Rng rng(seed);
  Network net = random_network(config, rng);
  const TensorXd image = rand_uniform(rng, config.input_shape, 0.0, 1.0);
  const auto label = static_cast<Index>(rng.below(static_cast<std::uint64_t>(config.num_classes())));

  const ForwardTrace trace = forward(net, image);
  const std::vector<Index> base_pattern = activation_pattern(config, trace);
  const GradientSet grads = backward(net, trace, label);

  GradCheckReport report;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    LayerCheck lc;
    lc.layer = i;
    lc.name = to_string(config.layers[i].kind);
    check_layer_locally(net, i, trace, label, rng, opt, lc);
    report.layers.push_back(lc);
  }

  // End to end: every parameter coordinate through the whole network.
  const TensorXd one = from_data<double>({1}, {1.0});
  const Eval loss_eval = [&]() -> std::optional<TensorXd> {
    const ForwardTrace t = forward(net, image);
    if (activation_pattern(config, t) != base_pattern) return std::nullopt;
    return from_data<double>({1}, {cross_entropy(t.probabilities, label)});
  };
  auto params = net.parameters();
  std::size_t p = 0;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    if (!config.layers[i].has_params()) continue;
    LayerCheck& lc = report.layers[i];
    Probe probe{opt.step, &lc, &lc.network_error};
    const bool corrupt = opt.corrupt_layer == i;
    for (int k = 0; k < 2; ++k, ++p) probe.run(*params[p], scaled(grads[p], corrupt), one, loss_eval);
  }

  for (const LayerCheck& lc : report.layers) report.worst = std::max({report.worst, lc.local_error, lc.network_error});
  report.passed = report.worst <= opt.tolerance;
  return report;
}

}  // namespace grain
