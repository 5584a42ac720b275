#ifndef GRAIN_DATASET_HPP
#define GRAIN_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "grain/tensor.hpp"

namespace grain {

struct Sample {
  TensorXd image;  // [1, H, W], values in [0, 1]
  Index label = 0;
  std::string source;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  Index num_classes() const { return static_cast<Index>(class_names.size()); }
  std::vector<std::size_t> class_counts() const;
};

// ---- PGM ------------------------------------------------------------------

/// Reads a P5 (binary) or P2 (ASCII) PGM into [1, H, W] scaled by 1/maxval.
/// Throws ParseError with the byte offset of the problem.
TensorXd load_pgm(const std::filesystem::path& path);
TensorXd parse_pgm(const std::string& bytes);

/// Writes a binary P5 file with maxval 255; pixels are clamped to [0, 1] and
/// rounded to the nearest level.
void write_pgm(const std::filesystem::path& path, const TensorXd& image);
std::string encode_pgm(const TensorXd& image);

// ---- resampling -----------------------------------------------------------

/// Corner-aligned bilinear resampling: output row i samples source row
/// i*(H-1)/(out_h-1), or the center row when out_h == 1.
TensorXd resize_bilinear(const TensorXd& image, Index out_h, Index out_w);

// ---- directory datasets ---------------------------------------------------

/// Loads `<root>/<class>/*.pgm`. Classes are the subdirectory names in byte
/// order, except that the exact pair {bad, OK} is ordered bad=0, OK=1.
/// Samples are ordered by (class, filename).
Dataset load_dataset_dir(const std::filesystem::path& root, Index target_h, Index target_w);

/// Applies the binary bad=0 / OK=1 convention to a sorted class list.
std::vector<std::string> canonical_class_order(std::vector<std::string> names);

/// Stratified split: ceil(val_fraction * n_c) samples of each class go to
/// validation. Both halves keep the original sample order.
std::pair<Dataset, Dataset> split(const Dataset& data, double val_fraction, std::uint64_t seed);

// ---- synthetic surfaces ---------------------------------------------------

enum class DefectKind { kNone, kScratch, kPit, kPatch };

std::string to_string(DefectKind kind);

struct SynthSpec {
  Index width = 64;
  Index height = 64;
  double base_level = 0.8;
  double illum_slope = 0.3;  // fractional drop from left edge to right edge
  double noise_sigma = 0.02;
  DefectKind defect_kind = DefectKind::kNone;
  std::uint64_t seed = 0;

  void validate() const;
};

// Defect contrasts and geometry ranges.
inline constexpr double kScratchIntensity = -0.3;
inline constexpr double kPitIntensity = -0.4;
inline constexpr double kPatchIntensity = -0.2;

/// Illumination-only background before defects and noise:
/// base_level * (1 - illum_slope * x / width).
double illumination(const SynthSpec& spec, Index x);

/// Binary label: 1 ("OK") iff the surface is defect free.
Sample synth_image(const SynthSpec& spec);

enum class SynthMode { kBinary, kPatchesVsScratches };

SynthMode parse_synth_mode(const std::string& name);
std::vector<std::string> synth_class_names(SynthMode mode);

/// n_per_class samples for each class of `mode`. Sample i of class c is drawn
/// from derive_seed(seed, c, i) with its illumination slope in [0.2, 0.5].
Dataset synth_dataset(Index n_per_class, Index width, Index height, std::uint64_t seed, SynthMode mode);

/// Writes `<out>/<class>/<index>.pgm`; returns the written file count per class.
std::vector<std::size_t> write_dataset(const Dataset& data, const std::filesystem::path& out);

}  // namespace grain

#endif  // GRAIN_DATASET_HPP
