#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "rdrnet/metrics.hpp"
#include "rdrnet/tensor.hpp"

namespace rdrnet {

// 8-bit interleaved image, 1 (gray) or 3 (RGB) channels.
struct Image8 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const Image8&, const Image8&) = default;
};

// Format chosen from the file's magic bytes: PNG, binary PPM (P6) or binary PGM (P5).
// PNG input is converted to 8-bit RGB. Throws IoError / FormatError.
Image8 read_image(const std::filesystem::path& path);

void write_ppm(const Image8& image, const std::filesystem::path& path);
void write_pgm(const Image8& image, const std::filesystem::path& path);
void write_png(const Image8& image, const std::filesystem::path& path);
// Picks PNG for a ".png" extension, otherwise PPM (RGB) or PGM (gray).
void write_image(const Image8& image, const std::filesystem::path& path);

// Per-channel normalization applied after scaling to [0, 1]. Defaults are the
// ImageNet statistics the networks are conventionally trained with.
struct Normalization {
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> stddev{0.229f, 0.224f, 0.225f};
};

// RGB image -> (1, 3, h, w) tensor.
Tensor4<float> image_to_tensor(const Image8& rgb, const Normalization& norm = {});

// Gray image values become class indices (255 stays the ignore index).
LabelMap image_to_labels(const Image8& gray);
// First map of the batch as a gray image of class indices.
Image8 labels_to_image(const LabelMap& labels);

using Palette = std::vector<std::array<std::uint8_t, 3>>;
// Cityscapes colours for 19 classes, otherwise a fixed generated palette.
Palette default_palette(std::size_t num_classes);
// Ignored pixels are drawn black.
Image8 colorize(const LabelMap& labels, const Palette& palette);

}  // namespace rdrnet
