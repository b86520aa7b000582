#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "rdrnet/error.hpp"
#include "rdrnet/image_io.hpp"

using namespace rdrnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "rdrnet_test_images";
  fs::create_directories(dir);
  return dir / name;
}

Image8 random_image(oracle::Gen& g, std::size_t h, std::size_t w, std::size_t c) {
  Image8 im{h, w, c, std::vector<std::uint8_t>(h * w * c)};
  for (auto& p : im.pixels) p = static_cast<std::uint8_t>(g.pick(0, 255));
  return im;
}

}  // namespace

TEST_CASE("PPM, PGM and PNG round-trip exactly") {
  oracle::Gen g(90);
  const Image8 rgb = random_image(g, 7, 11, 3);
  const Image8 gray = random_image(g, 5, 3, 1);
  write_ppm(rgb, scratch("a.ppm"));
  write_pgm(gray, scratch("a.pgm"));
  write_png(rgb, scratch("a.png"));
  CHECK(read_image(scratch("a.ppm")) == rgb);
  CHECK(read_image(scratch("a.pgm")) == gray);
  CHECK(read_image(scratch("a.png")) == rgb);
  write_image(gray, scratch("b.png"));
  const Image8 gray_png = read_image(scratch("b.png"));
  CHECK(gray_png.channels == 3);
  CHECK(gray_png.pixels[3 * 4 + 1] == gray.pixels[4]);
}

TEST_CASE("netpbm headers with comments are accepted") {
  const fs::path p = scratch("comment.pgm");
  {
    std::ofstream f(p, std::ios::binary);
    f << "P5\n# made by hand\n2 1\n255\n";
    f.put(static_cast<char>(7));
    f.put(static_cast<char>(255));
  }
  const Image8 im = read_image(p);
  CHECK(im.width == 2);
  CHECK(im.pixels == std::vector<std::uint8_t>{7, 255});
}

TEST_CASE("unreadable or malformed images raise") {
  CHECK_THROWS_AS(read_image(scratch("missing.ppm")), IoError);
  const fs::path p = scratch("junk.ppm");
  {
    std::ofstream f(p, std::ios::binary);
    f << "GIF89a....";
  }
  CHECK_THROWS_AS(read_image(p), FormatError);
  {
    std::ofstream f(p, std::ios::binary);
    f << "P6\n4 4\n255\nabc";
  }
  CHECK_THROWS_AS(read_image(p), FormatError);
}

TEST_CASE("image_to_tensor normalizes each channel") {
  const Image8 im{1, 2, 3, {255, 0, 128, 0, 255, 64}};
  const Tensor4<float> t = image_to_tensor(im);
  CHECK(t.dims() == Dims{1, 3, 1, 2});
  const Normalization n;
  CHECK(t.at(0, 0, 0, 0) == doctest::Approx((1.0f - n.mean[0]) / n.stddev[0]));
  CHECK(t.at(0, 1, 0, 0) == doctest::Approx(-n.mean[1] / n.stddev[1]));
  CHECK(t.at(0, 2, 0, 1) == doctest::Approx((64.0f / 255.0f - n.mean[2]) / n.stddev[2]));
  CHECK_THROWS(image_to_tensor(Image8{1, 1, 1, {0}}));
}

TEST_CASE("labels and colour maps") {
  const Image8 gray{1, 3, 1, {0, 18, 255}};
  const LabelMap l = image_to_labels(gray);
  CHECK(l.data == std::vector<int>{0, 18, kIgnoreIndex});
  CHECK(labels_to_image(l) == gray);
  const Palette pal = default_palette(19);
  CHECK(pal.size() == 19);
  CHECK(pal[0] == std::array<std::uint8_t, 3>{128, 64, 128});
  const Image8 c = colorize(l, pal);
  CHECK(c.channels == 3);
  CHECK(c.pixels[6] == 0);
  CHECK(c.pixels[7] == 0);
  CHECK(c.pixels[8] == 0);
  const Palette big = default_palette(40);
  CHECK(big.size() == 40);
  for (std::size_t i = 1; i < big.size(); ++i) CHECK(big[i] != big[0]);
}
