#include "rdrnet/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace rdrnet {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Netpbm header: magic, width, height, maxval separated by whitespace and '#' comments.
Image8 parse_netpbm(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  std::size_t pos = 2;
  const auto next_int = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
      throw FormatError(FormatError::Kind::Malformed, "bad netpbm header in " + source);
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    return v;
  };
  Image8 img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  img.width = next_int();
  img.height = next_int();
  const std::size_t maxval = next_int();
  if (maxval == 0 || maxval > 255) throw FormatError(FormatError::Kind::Malformed, "only 8-bit netpbm is supported: " + source);
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw FormatError(FormatError::Kind::Malformed, "bad netpbm header in " + source);
  ++pos;
  const std::size_t n = img.width * img.height * img.channels;
  if (bytes.size() - pos < n) throw FormatError(FormatError::Kind::Truncated, "truncated netpbm data in " + source);
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

Image8 decode_png(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
    throw FormatError(FormatError::Kind::Malformed, "cannot decode PNG " + source + ": " + png.message);
  png.format = PNG_FORMAT_RGB;
  Image8 img{png.height, png.width, 3, std::vector<std::uint8_t>(PNG_IMAGE_SIZE(png))};
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw FormatError(FormatError::Kind::Malformed, "cannot decode PNG " + source + ": " + msg);
  }
  return img;
}

void write_netpbm(const Image8& image, const std::filesystem::path& path, std::size_t channels) {
  if (image.channels != channels)
    throw ContractError(std::string(channels == 3 ? "PPM" : "PGM") + " output needs a " +
                        (channels == 3 ? "3" : "1") + "-channel image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << (channels == 3 ? "P6" : "P5") << "\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

Image8 read_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes, path.string());
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5')) return parse_netpbm(bytes, path.string());
  throw FormatError(FormatError::Kind::BadMagic, "unsupported image format (expected PNG, P6 or P5): " + path.string());
}

void write_ppm(const Image8& image, const std::filesystem::path& path) { write_netpbm(image, path, 3); }
void write_pgm(const Image8& image, const std::filesystem::path& path) { write_netpbm(image, path, 1); }

void write_png(const Image8& image, const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr))
    throw IoError("cannot write PNG " + path.string() + ": " + png.message);
}

void write_image(const Image8& image, const std::filesystem::path& path) {
  if (path.extension() == ".png") return write_png(image, path);
  if (image.channels == 3) return write_ppm(image, path);
  write_pgm(image, path);
}

Tensor4<float> image_to_tensor(const Image8& rgb, const Normalization& norm) {
  if (rgb.channels != 3) throw DimensionError("image.channels", 3, rgb.channels, "image_to_tensor");
  Tensor4<float> t({1, 3, rgb.height, rgb.width});
  for (std::size_t c = 0; c < 3; ++c) {
    float* dst = t.plane(0, c);
    for (std::size_t i = 0; i < rgb.height * rgb.width; ++i)
      dst[i] = (static_cast<float>(rgb.pixels[i * 3 + c]) / 255.0f - norm.mean[c]) / norm.stddev[c];
  }
  return t;
}

LabelMap image_to_labels(const Image8& gray) {
  if (gray.channels != 1) throw DimensionError("labels.channels", 1, gray.channels, "label image");
  LabelMap m(1, gray.height, gray.width);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) m.data[i] = gray.pixels[i];
  return m;
}

Image8 labels_to_image(const LabelMap& labels) {
  Image8 img{labels.h, labels.w, 1, std::vector<std::uint8_t>(labels.h * labels.w)};
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const std::int32_t v = labels.data[i];
    if (v < 0 || v > 255) throw ContractError("class index " + std::to_string(v) + " does not fit an 8-bit map");
    img.pixels[i] = static_cast<std::uint8_t>(v);
  }
  return img;
}

Palette default_palette(std::size_t num_classes) {
  static const Palette cityscapes = {
      {128, 64, 128}, {244, 35, 232}, {70, 70, 70},   {102, 102, 156}, {190, 153, 153}, {153, 153, 153}, {250, 170, 30},
      {220, 220, 0},  {107, 142, 35}, {152, 251, 152}, {70, 130, 180}, {220, 20, 60},   {255, 0, 0},     {0, 0, 142},
      {0, 0, 70},     {0, 60, 100},   {0, 80, 100},   {0, 0, 230},     {119, 11, 32}};
  if (num_classes == cityscapes.size()) return cityscapes;
  Palette p(num_classes);
  for (std::size_t i = 0; i < num_classes; ++i) {
    // Bit-interleaved label colormap.
    std::size_t id = i;
    std::uint8_t r = 0, g = 0, b = 0;
    for (int shift = 7; id; --shift, id >>= 3) {
      r |= static_cast<std::uint8_t>((id & 1) << shift);
      g |= static_cast<std::uint8_t>(((id >> 1) & 1) << shift);
      b |= static_cast<std::uint8_t>(((id >> 2) & 1) << shift);
    }
    p[i] = {r, g, b};
  }
  return p;
}

Image8 colorize(const LabelMap& labels, const Palette& palette) {
  Image8 img{labels.h, labels.w, 3, std::vector<std::uint8_t>(labels.h * labels.w * 3, 0)};
  for (std::size_t i = 0; i < labels.h * labels.w; ++i) {
    const std::int32_t v = labels.data[i];
    if (v < 0 || static_cast<std::size_t>(v) >= palette.size()) continue;
    for (std::size_t c = 0; c < 3; ++c) img.pixels[i * 3 + c] = palette[static_cast<std::size_t>(v)][c];
  }
  return img;
}

}  // namespace rdrnet
