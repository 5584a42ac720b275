#include "grain/model_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

namespace grain {

namespace {

using json = nlohmann::json;

constexpr std::size_t kMagicSize = 8;
constexpr std::size_t kCrcSize = 4;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const std::string& in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)]);
  return v;
}

std::uint32_t crc32_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n));
  return static_cast<std::uint32_t>(crc);
}

json layer_to_json(const LayerSpec& spec) {
  json j = {{"kind", to_string(spec.kind)}};
  switch (spec.kind) {
    case LayerKind::kConv:
      j["kernel_size"] = spec.kernel_size;
      j["out_maps"] = spec.out_maps;
      break;
    case LayerKind::kPool: j["pool_factor"] = spec.pool_factor; break;
    case LayerKind::kDense: j["out_units"] = spec.out_units; break;
    default: break;
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  LayerSpec spec;
  spec.kind = parse_layer_kind(j.at("kind").get<std::string>());
  spec.kernel_size = j.value("kernel_size", Index{0});
  spec.out_maps = j.value("out_maps", Index{0});
  spec.pool_factor = j.value("pool_factor", Index{0});
  spec.out_units = j.value("out_units", Index{0});
  return spec;
}

std::vector<std::string> tensor_names(const NetworkConfig& config) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const std::string base = "layer" + std::to_string(i) + "." + to_string(config.layers[i].kind);
    if (config.layers[i].kind == LayerKind::kConv) {
      names.push_back(base + ".kernels");
      names.push_back(base + ".biases");
    } else if (config.layers[i].kind == LayerKind::kDense) {
      names.push_back(base + ".weights");
      names.push_back(base + ".biases");
    }
  }
  return names;
}

// Parameter shapes implied by the config, in Network::parameters() order.
std::vector<Shape> expected_shapes(const NetworkConfig& config) {
  const auto shapes = infer_shapes(config);
  std::vector<Shape> out;
  Shape in = config.input_shape;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& s = config.layers[i];
    if (s.kind == LayerKind::kConv) {
      out.push_back({s.out_maps, in[0], s.kernel_size, s.kernel_size});
      out.push_back({s.out_maps});
    } else if (s.kind == LayerKind::kDense) {
      out.push_back({s.out_units, checked_volume(in)});
      out.push_back({s.out_units});
    }
    in = shapes[i];
  }
  return out;
}

}  // namespace

std::string config_header(const Network& net) {
  const NetworkConfig& c = net.config();
  json layers = json::array();
  for (const LayerSpec& s : c.layers) layers.push_back(layer_to_json(s));
  json h = {{"format", 1},
            {"input_shape", c.input_shape},
            {"layers", layers},
            {"class_names", c.class_names},
            {"init_seed", net.seed()},
            {"steps_trained", net.steps_trained()}};
  return h.dump();
}

std::string serialize(const Network& net) {
  const std::string header = config_header(net);
  std::string out(kModelMagic, kMagicSize);
  put_u64(out, header.size());
  out += header;
  for (const TensorXd* t : net.parameters()) {
    put_u64(out, static_cast<std::uint64_t>(t->rank()));
    for (Index e : t->shape()) put_u64(out, static_cast<std::uint64_t>(e));
    for (double v : t->data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  put_u32(out, crc32_of(out.data() + kMagicSize, out.size() - kMagicSize));
  return out;
}

Network deserialize(const std::string& bytes) {
  const std::size_t prefix = std::min(bytes.size(), kMagicSize);
  if (std::memcmp(bytes.data(), kModelMagic, prefix) != 0)
    throw FormatError("not a model file: bad magic (expected GRAINFG1)");
  if (bytes.size() < kMagicSize + 8 + kCrcSize) throw CorruptionError("model file truncated");

  const std::size_t body_end = bytes.size() - kCrcSize;
  const auto stored_crc = static_cast<std::uint32_t>(get_le(bytes, body_end, 4));
  if (crc32_of(bytes.data() + kMagicSize, body_end - kMagicSize) != stored_crc)
    throw CorruptionError("model file checksum mismatch (truncated or corrupted)");

  std::size_t pos = kMagicSize;
  const std::uint64_t header_len = get_le(bytes, pos, 8);
  pos += 8;
  if (header_len > body_end - pos) throw FormatError("header length exceeds file size");

  NetworkConfig config;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  try {
    const json h = json::parse(bytes.substr(pos, header_len));
    if (h.at("format").get<int>() != 1) throw FormatError("unsupported header format");
    config.input_shape = h.at("input_shape").get<Shape>();
    for (const json& l : h.at("layers")) config.layers.push_back(layer_from_json(l));
    config.class_names = h.at("class_names").get<std::vector<std::string>>();
    seed = h.at("init_seed").get<std::uint64_t>();
    steps = h.at("steps_trained").get<std::int64_t>();
    validate(config);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model header: ") + e.what());
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("invalid network in model header: ") + e.what());
  }
  pos += header_len;

  const auto names = tensor_names(config);
  const auto shapes = expected_shapes(config);
  std::vector<TensorXd> tensors;
  for (std::size_t t = 0; t < shapes.size(); ++t) {
    auto need = [&](std::size_t n) {
      if (n > body_end - pos) throw FormatError("payload ends inside tensor " + names[t]);
    };
    need(8);
    const std::uint64_t rank = get_le(bytes, pos, 8);
    pos += 8;
    if (rank != shapes[t].size()) throw FormatError("tensor " + names[t] + " has the wrong rank");
    need(8 * rank);
    Shape shape;
    for (std::uint64_t r = 0; r < rank; ++r, pos += 8) shape.push_back(static_cast<Index>(get_le(bytes, pos, 8)));
    if (shape != shapes[t])
      throw FormatError("tensor " + names[t] + " has shape " + shape_string(shape) + ", config implies " +
                        shape_string(shapes[t]));
    const auto n = static_cast<std::size_t>(checked_volume(shape));
    need(8 * n);
    TensorXd tensor(shape);
    for (std::size_t i = 0; i < n; ++i, pos += 8)
      tensor[static_cast<Index>(i)] = std::bit_cast<double>(get_le(bytes, pos, 8));
    if (!tensor.all_finite()) throw FormatError("tensor " + names[t] + " holds non-finite values");
    tensors.push_back(std::move(tensor));
  }
  if (pos != body_end) throw FormatError("unexpected bytes after the last tensor");

  std::vector<LayerParams> params(config.layers.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    if (config.layers[i].kind == LayerKind::kConv) {
      params[i] = ConvParams<double>{std::move(tensors[next]), std::move(tensors[next + 1])};
      next += 2;
    } else if (config.layers[i].kind == LayerKind::kDense) {
      params[i] = DenseParams<double>{std::move(tensors[next]), std::move(tensors[next + 1])};
      next += 2;
    }
  }
  return Network(std::move(config), std::move(params), seed, steps);
}

void save(const Network& net, const std::filesystem::path& path) {
  const std::string bytes = serialize(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Network load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace grain
