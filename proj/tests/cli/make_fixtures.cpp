// Writes the small images and dataset the CLI tests read.
#include <cstdio>
#include <filesystem>

#include "rdrnet/image_io.hpp"

using namespace rdrnet;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: make_fixtures OUT_DIR\n");
    return 2;
  }
  const fs::path out = argv[1];
  fs::create_directories(out / "dataset" / "images");
  fs::create_directories(out / "dataset" / "labels");

  write_ppm(Image8{64, 128, 3, std::vector<std::uint8_t>(64 * 128 * 3, 120)}, out / "const.ppm");
  write_ppm(Image8{63, 128, 3, std::vector<std::uint8_t>(63 * 128 * 3, 120)}, out / "odd.ppm");

  for (int k = 0; k < 2; ++k) {
    Image8 img{64, 64, 3, std::vector<std::uint8_t>(64 * 64 * 3)};
    Image8 lab{64, 64, 1, std::vector<std::uint8_t>(64 * 64)};
    for (std::size_t y = 0; y < 64; ++y)
      for (std::size_t x = 0; x < 64; ++x) {
        const std::size_t i = y * 64 + x;
        for (std::size_t c = 0; c < 3; ++c) img.pixels[3 * i + c] = static_cast<std::uint8_t>((x * 4 + y * (c + 1) + 40 * k) % 256);
        lab.pixels[i] = y < 4 ? 255 : static_cast<std::uint8_t>((x / 16 + k) % 4);
      }
    const std::string stem = k == 0 ? "frame_a" : "frame_b";
    if (k == 0)
      write_ppm(img, out / "dataset" / "images" / (stem + ".ppm"));
    else
      write_png(img, out / "dataset" / "images" / (stem + ".png"));
    write_pgm(lab, out / "dataset" / "labels" / (stem + ".pgm"));
  }
  return 0;
}
