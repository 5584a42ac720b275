#include <algorithm>
#include <cmath>

#include "grain/dataset.hpp"
#include "grain/rng.hpp"

namespace grain {

std::string to_string(DefectKind kind) {
  switch (kind) {
    case DefectKind::kNone: return "none";
    case DefectKind::kScratch: return "scratch";
    case DefectKind::kPit: return "pit";
    case DefectKind::kPatch: return "patch";
  }
  return "?";
}

void SynthSpec::validate() const {
  if (width < 1 || height < 1) throw ShapeError("synth: width and height must be >= 1");
  if (!(base_level >= 0.0 && base_level <= 1.0)) throw RangeError("synth: base_level must be in [0, 1]");
  if (!std::isfinite(illum_slope)) throw ValueError("synth: illum_slope must be finite");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw RangeError("synth: noise_sigma must be >= 0");
}

double illumination(const SynthSpec& spec, Index x) {
  return spec.base_level * (1.0 - spec.illum_slope * static_cast<double>(x) / static_cast<double>(spec.width));
}

namespace {

// Stream ids under the spec seed; keeping geometry and noise apart means a
// defect-free image and a defective one with the same seed share their noise.
constexpr std::uint64_t kGeometryStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = ax + t * dx - px, ey = ay + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

void draw_scratch(Rng& rng, const SynthSpec& s, Eigen::ArrayXXd& mask) {
  const double W = static_cast<double>(s.width), H = static_cast<double>(s.height);
  const double ax = rng.uniform() * (W - 1), ay = rng.uniform() * (H - 1);
  const double bx = rng.uniform() * (W - 1), by = rng.uniform() * (H - 1);
  const double half_width = rng.uniform(1.0, 3.0) / 2.0;
  for (Index y = 0; y < s.height; ++y)
    for (Index x = 0; x < s.width; ++x) {
      const double d = segment_distance(static_cast<double>(x), static_cast<double>(y), ax, ay, bx, by);
      const double coverage = std::clamp(half_width + 0.5 - d, 0.0, 1.0);
      mask(y, x) += kScratchIntensity * coverage;
    }
}

void draw_pit(Rng& rng, const SynthSpec& s, Eigen::ArrayXXd& mask) {
  const double rx = rng.uniform(2.0, 6.0), ry = rng.uniform(2.0, 6.0);
  const Index cx = static_cast<Index>(rng.below(static_cast<std::uint64_t>(s.width)));
  const Index cy = static_cast<Index>(rng.below(static_cast<std::uint64_t>(s.height)));
  for (Index y = 0; y < s.height; ++y)
    for (Index x = 0; x < s.width; ++x) {
      const double u = static_cast<double>(x - cx) / rx, v = static_cast<double>(y - cy) / ry;
      if (u * u + v * v <= 1.0) mask(y, x) += kPitIntensity;
    }
}

void draw_patch(Rng& rng, const SynthSpec& s, Eigen::ArrayXXd& mask) {
  auto side = [&](Index extent) {
    const double frac = rng.uniform(0.08, 0.25);
    return std::clamp<Index>(static_cast<Index>(std::lround(frac * static_cast<double>(s.width))), 1, extent);
  };
  const Index pw = side(s.width), ph = side(s.height);
  const Index x0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(s.width - pw + 1)));
  const Index y0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(s.height - ph + 1)));
  mask.block(y0, x0, ph, pw) += kPatchIntensity;
}

}  // namespace

Sample synth_image(const SynthSpec& spec) {
  spec.validate();
  Eigen::ArrayXXd mask = Eigen::ArrayXXd::Zero(spec.height, spec.width);
  Rng geometry(derive_seed(spec.seed, kGeometryStream));
  switch (spec.defect_kind) {
    case DefectKind::kNone: break;
    case DefectKind::kScratch: draw_scratch(geometry, spec, mask); break;
    case DefectKind::kPit: draw_pit(geometry, spec, mask); break;
    case DefectKind::kPatch: draw_patch(geometry, spec, mask); break;
  }
  Rng noise(derive_seed(spec.seed, kNoiseStream));
  TensorXd img({1, spec.height, spec.width});
  for (Index y = 0; y < spec.height; ++y)
    for (Index x = 0; x < spec.width; ++x) {
      double v = illumination(spec, x) + mask(y, x);
      if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise.normal();
      img(0, y, x) = std::clamp(v, 0.0, 1.0);
    }
  char source[160];
  std::snprintf(source, sizeof source, "synth:%s:seed=%llu", to_string(spec.defect_kind).c_str(),
                static_cast<unsigned long long>(spec.seed));
  return {std::move(img), spec.defect_kind == DefectKind::kNone ? 1 : 0, source};
}

SynthMode parse_synth_mode(const std::string& name) {
  if (name == "binary") return SynthMode::kBinary;
  if (name == "defects" || name == "patches_vs_scratches") return SynthMode::kPatchesVsScratches;
  throw ConfigError("unknown synth mode '" + name + "' (expected binary or defects)");
}

std::vector<std::string> synth_class_names(SynthMode mode) {
  if (mode == SynthMode::kBinary) return {"bad", "OK"};
  return {"patches", "scratches"};
}

Dataset synth_dataset(Index n_per_class, Index width, Index height, std::uint64_t seed, SynthMode mode) {
  if (n_per_class < 1) throw RangeError("synth_dataset: n_per_class must be >= 1");
  Dataset data{{}, synth_class_names(mode)};
  constexpr DefectKind kBadCycle[] = {DefectKind::kScratch, DefectKind::kPit, DefectKind::kPatch};
  for (Index c = 0; c < data.num_classes(); ++c) {
    for (Index i = 0; i < n_per_class; ++i) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)));
      SynthSpec spec;
      spec.width = width;
      spec.height = height;
      spec.illum_slope = rng.uniform(0.2, 0.5);
      spec.noise_sigma = 0.02;
      spec.seed = rng.next_u64();
      if (mode == SynthMode::kBinary)
        spec.defect_kind = c == 1 ? DefectKind::kNone : kBadCycle[i % 3];
      else
        spec.defect_kind = c == 0 ? DefectKind::kPatch : DefectKind::kScratch;
      Sample s = synth_image(spec);
      s.label = c;
      s.source = data.class_names[static_cast<std::size_t>(c)] + "/" + std::to_string(i) + ":" + s.source;
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

}  // namespace grain
