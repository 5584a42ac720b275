#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "grain/dataset.hpp"

namespace grain {

namespace {

class PgmReader {
 public:
  explicit PgmReader(const std::string& bytes) : b_(bytes) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("pgm: " + msg + " at byte offset " + std::to_string(pos_));
  }

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      const unsigned char c = static_cast<unsigned char>(b_[pos_]);
      if (c == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n' && b_[pos_] != '\r') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint(const char* what) {
    skip_space_and_comments();
    if (pos_ >= b_.size()) fail(std::string("truncated before ") + what);
    if (!std::isdigit(static_cast<unsigned char>(b_[pos_]))) fail(std::string("expected ") + what);
    long v = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > 1'000'000'000L) fail(std::string(what) + " too large");
      ++pos_;
    }
    return v;
  }

  std::string magic() {
    if (b_.size() < 2) fail("truncated magic");
    std::string m = b_.substr(0, 2);
    pos_ = 2;
    return m;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  std::size_t remaining() const { return b_.size() - pos_; }
  unsigned char byte_at(std::size_t i) const { return static_cast<unsigned char>(b_[i]); }
  bool at_space() const { return pos_ < b_.size() && std::isspace(static_cast<unsigned char>(b_[pos_])); }

 private:
  const std::string& b_;
  std::size_t pos_ = 0;
};

}  // namespace

TensorXd parse_pgm(const std::string& bytes) {
  PgmReader r(bytes);
  const std::string magic = r.magic();
  if (magic != "P5" && magic != "P2")
    throw ParseError("pgm: unsupported magic '" + magic + "' at byte offset 0 (expected P5 or P2)");
  const long width = r.read_uint("width");
  const long height = r.read_uint("height");
  const long maxval = r.read_uint("maxval");
  if (width < 1 || height < 1) r.fail("image dimensions must be positive");
  if (maxval < 1 || maxval > 65535) r.fail("maxval must be in [1, 65535]");

  const Index n = static_cast<Index>(width) * height;
  TensorXd img({1, height, width});
  const double max = static_cast<double>(maxval);

  if (magic == "P5") {
    if (!r.at_space()) r.fail("expected a single whitespace byte after maxval");
    r.advance(1);
    const std::size_t bps = maxval < 256 ? 1 : 2;
    if (r.remaining() < static_cast<std::size_t>(n) * bps) r.fail("truncated pixel data");
    const std::size_t base = r.pos();
    for (Index i = 0; i < n; ++i) {
      const std::size_t at = base + static_cast<std::size_t>(i) * bps;
      long v = r.byte_at(at);
      if (bps == 2) v = (v << 8) | r.byte_at(at + 1);
      if (v > maxval) {
        r.advance(static_cast<std::size_t>(i) * bps);
        r.fail("sample exceeds maxval");
      }
      img[i] = static_cast<double>(v) / max;
    }
  } else {
    for (Index i = 0; i < n; ++i) {
      const long v = r.read_uint("sample");
      if (v > maxval) r.fail("sample exceeds maxval");
      img[i] = static_cast<double>(v) / max;
    }
  }
  return img;
}

TensorXd load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_pgm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string encode_pgm(const TensorXd& image) {
  if (image.rank() != 3 || image.extent(0) != 1)
    throw ShapeError("write_pgm: expected [1, H, W], got " + shape_string(image.shape()));
  std::ostringstream os;
  os << "P5\n" << image.extent(2) << ' ' << image.extent(1) << "\n255\n";
  std::string out = os.str();
  out.reserve(out.size() + static_cast<std::size_t>(image.size()));
  for (Index i = 0; i < image.size(); ++i) {
    const double v = std::clamp(image[i], 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const TensorXd& image) {
  const std::string bytes = encode_pgm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace grain
