#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "jif/data.hpp"

namespace jif {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("netpbm: " + what + " at byte " + std::to_string(pos_));
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) fail("expected a decimal number");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1'000'000) fail("header value too large");
    }
    return v;
  }

  // Exactly one whitespace byte separates the header from the raster.
  void single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("expected whitespace before raster");
    ++pos_;
  }

  void magic(char& kind) {
    if (bytes_.size() < 2 || bytes_[0] != 'P') fail("missing 'P' magic");
    kind = static_cast<char>(bytes_[1]);
    if (kind != '5' && kind != '6') fail("unsupported format P" + std::string(1, kind));
    pos_ = 2;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_netpbm(std::span<const std::uint8_t> bytes) {
  HeaderReader in(bytes);
  char kind = 0;
  in.magic(kind);
  const long width = in.number();
  const long height = in.number();
  const long maxval = in.number();
  if (width <= 0 || height <= 0) in.fail("non-positive image size");
  if (maxval <= 0 || maxval > 65535) in.fail("maxval outside 1..65535");
  in.single_space();

  const Index channels = kind == '6' ? 3 : 1;
  const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::size_t start = in.offset();
  const std::size_t needed = static_cast<std::size_t>(width * height * channels) * sample_bytes;
  if (bytes.size() - start < needed) {
    throw FormatError("netpbm: raster truncated at byte " + std::to_string(bytes.size()) +
                      ", expected " + std::to_string(start + needed));
  }

  Image img(channels, height, width);
  const double scale = 1.0 / static_cast<double>(maxval);
  std::size_t p = start;
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      for (Index c = 0; c < channels; ++c) {
        unsigned v = bytes[p++];
        if (sample_bytes == 2) v = (v << 8) | bytes[p++];
        if (v > static_cast<unsigned>(maxval)) {
          throw FormatError("netpbm: sample exceeds maxval at byte " + std::to_string(p - sample_bytes));
        }
        img.at(c, y, x) = v * scale;
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_netpbm(const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw DimensionError("netpbm: can only encode 1 or 3 channels, got " +
                         std::to_string(image.channels));
  }
  const std::string header = std::string(image.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(image.width) + " " + std::to_string(image.height) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + static_cast<std::size_t>(image.pixels.size()));
  for (Index y = 0; y < image.height; ++y)
    for (Index x = 0; x < image.width; ++x)
      for (Index c = 0; c < image.channels; ++c)
        out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(image.at(c, y, x), 0.0, 1.0) * 255.0)));
  return out;
}

Image resize_bilinear(const Image& image, Index height, Index width) {
  if (height <= 0 || width <= 0) throw DimensionError("resize: non-positive target size");
  if (height == image.height && width == image.width) return image;
  Image out(image.channels, height, width);
  const double sy = static_cast<double>(image.height) / static_cast<double>(height);
  const double sx = static_cast<double>(image.width) / static_cast<double>(width);
  for (Index y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const Index y0 = static_cast<Index>(std::floor(fy));
    const Index y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (Index x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
      const Index x0 = static_cast<Index>(std::floor(fx));
      const Index x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (Index c = 0; c < image.channels; ++c) {
        const double top = (1.0 - wx) * image.at(c, y0, x0) + wx * image.at(c, y0, x1);
        const double bottom = (1.0 - wx) * image.at(c, y1, x0) + wx * image.at(c, y1, x1);
        out.at(c, y, x) = (1.0 - wy) * top + wy * bottom;
      }
    }
  }
  return out;
}

Image to_rgb(const Image& image) {
  if (image.channels == 3) return image;
  if (image.channels != 1) {
    throw DimensionError("to_rgb: unsupported channel count " + std::to_string(image.channels));
  }
  Image out(3, image.height, image.width);
  const Index plane = image.height * image.width;
  for (Index c = 0; c < 3; ++c) out.pixels.segment(c * plane, plane) = image.pixels;
  return out;
}

Image load_image(const std::filesystem::path& path, Index height, Index width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  try {
    return resize_bilinear(to_rgb(decode_netpbm(bytes)), height, width);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_image(const Image& image, const std::filesystem::path& path) {
  const auto bytes = encode_netpbm(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace jif
