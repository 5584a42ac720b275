#ifndef GRAIN_GRADCHECK_HPP
#define GRAIN_GRADCHECK_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "grain/network.hpp"

namespace grain {

struct GradCheckOptions {
  double step = 1e-6;        // central-difference half width
  double tolerance = 1e-4;   // pass threshold on relative error
  // Test hook: scales every analytic gradient produced for this layer index
  // by 1.1, so a harness that cannot see the error is itself caught.
  std::optional<std::size_t> corrupt_layer;
};

/// |a - n| / max(|a|, |n|, 1e-5). The floor keeps round-off on gradients that
/// are themselves near zero from reading as a large relative error.
double relative_error(double analytic, double numeric);

struct LayerCheck {
  std::size_t layer = 0;
  std::string name;
  double local_error = 0.0;    // layer in isolation: input and parameter gradients
  double network_error = 0.0;  // this layer's parameters through the full loss
  std::size_t checked = 0;
  std::size_t skipped = 0;     // coordinates where a perturbation crossed a ReLU or pooling kink
};

struct GradCheckReport {
  std::vector<LayerCheck> layers;
  double worst = 0.0;
  bool passed = false;
};

/// Builds `config` with He-uniform weights and small random biases drawn from
/// `seed`, feeds a random image and label, and compares every analytic
/// gradient against central differences, layer by layer and end to end.
GradCheckReport gradcheck(const NetworkConfig& config, std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace grain

#endif  // GRAIN_GRADCHECK_HPP
