#include <algorithm>
#include <cmath>

#include "grain/dataset.hpp"
#include "grain/rng.hpp"

namespace grain {

namespace fs = std::filesystem;

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (const Sample& s : samples) ++counts[static_cast<std::size_t>(s.label)];
  return counts;
}

TensorXd resize_bilinear(const TensorXd& image, Index out_h, Index out_w) {
  if (image.rank() != 3 || image.extent(0) != 1)
    throw ShapeError("resize: expected [1, H, W], got " + shape_string(image.shape()));
  if (out_h < 1 || out_w < 1) throw ShapeError("resize: target extents must be >= 1");
  const Index H = image.extent(1), W = image.extent(2);

  auto coord = [](Index i, Index n_out, Index n_in) {
    if (n_out == 1) return static_cast<double>(n_in - 1) / 2.0;
    return static_cast<double>(i * (n_in - 1)) / static_cast<double>(n_out - 1);
  };

  TensorXd out({1, out_h, out_w});
  for (Index i = 0; i < out_h; ++i) {
    const double sy = coord(i, out_h, H);
    const Index y0 = std::min(static_cast<Index>(sy), H - 1);
    const Index y1 = std::min(y0 + 1, H - 1);
    const double fy = sy - static_cast<double>(y0);
    for (Index j = 0; j < out_w; ++j) {
      const double sx = coord(j, out_w, W);
      const Index x0 = std::min(static_cast<Index>(sx), W - 1);
      const Index x1 = std::min(x0 + 1, W - 1);
      const double fx = sx - static_cast<double>(x0);
      const double a = image(0, y0, x0), b = image(0, y0, x1);
      const double c = image(0, y1, x0), d = image(0, y1, x1);
      const double top = (1.0 - fx) * a + fx * b;
      const double bottom = (1.0 - fx) * c + fx * d;
      const double v = (1.0 - fy) * top + fy * bottom;
      out(0, i, j) = std::clamp(v, std::min({a, b, c, d}), std::max({a, b, c, d}));
    }
  }
  return out;
}

std::vector<std::string> canonical_class_order(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  if (names == std::vector<std::string>{"OK", "bad"}) return {"bad", "OK"};
  return names;
}

namespace {

bool is_pgm(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm";
}

}  // namespace

Dataset load_dataset_dir(const fs::path& root, Index target_h, Index target_w) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw DatasetError("dataset root '" + root.string() + "' is not a directory");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  if (names.empty()) throw DatasetError("dataset root '" + root.string() + "' has no class subdirectories");

  Dataset data;
  data.class_names = canonical_class_order(std::move(names));
  for (std::size_t c = 0; c < data.class_names.size(); ++c) {
    const fs::path dir = root / data.class_names[c];
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && is_pgm(entry.path())) files.push_back(entry.path());
    if (files.empty()) throw DatasetError("class directory '" + dir.string() + "' holds no .pgm files");
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    for (const fs::path& f : files) {
      TensorXd img = load_pgm(f);
      if (img.extent(1) != target_h || img.extent(2) != target_w) img = resize_bilinear(img, target_h, target_w);
      data.samples.push_back({std::move(img), static_cast<Index>(c), f.string()});
    }
  }
  return data;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw RangeError("split: val_fraction must be in [0, 1), got " + std::to_string(val_fraction));
  Rng rng(seed);
  std::vector<bool> to_val(data.samples.size(), false);
  for (Index c = 0; c < data.num_classes(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.samples.size(); ++i)
      if (data.samples[i].label == c) members.push_back(i);
    // Fisher-Yates with the project generator so the split is platform independent.
    for (std::size_t i = members.size(); i > 1; --i)
      std::swap(members[i - 1], members[rng.below(i)]);
    // The epsilon absorbs products such as 0.2 * 250 landing a hair above 50.
    const auto n_val = static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(members.size()) - 1e-9));
    for (std::size_t i = 0; i < n_val; ++i) to_val[members[i]] = true;
  }
  Dataset train{{}, data.class_names};
  Dataset val{{}, data.class_names};
  for (std::size_t i = 0; i < data.samples.size(); ++i)
    (to_val[i] ? val : train).samples.push_back(data.samples[i]);
  return {std::move(train), std::move(val)};
}

std::vector<std::size_t> write_dataset(const Dataset& data, const fs::path& out) {
  std::vector<std::size_t> written(data.class_names.size(), 0);
  std::error_code ec;
  for (const std::string& name : data.class_names) {
    fs::create_directories(out / name, ec);
    if (ec) throw IoError("cannot create '" + (out / name).string() + "': " + ec.message());
  }
  for (const Sample& s : data.samples) {
    const auto c = static_cast<std::size_t>(s.label);
    char file[32];
    std::snprintf(file, sizeof file, "%04zu.pgm", written[c]);
    write_pgm(out / data.class_names[c] / file, s.image);
    ++written[c];
  }
  return written;
}

}  // namespace grain
