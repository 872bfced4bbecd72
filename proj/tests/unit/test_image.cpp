#include <doctest.h>

#include <random>

#include "../support/oracles.hpp"
#include "../support/temp_dir.hpp"
#include "meshvote/bitmap.hpp"
#include "meshvote/error.hpp"
#include "meshvote/image_io.hpp"

using namespace meshvote;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("base64 matches the published test vectors") {
  const std::pair<const char*, const char*> vectors[] = {
      {"", ""},         {"f", "Zg=="},         {"fo", "Zm8="},         {"foo", "Zm9v"},
      {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"},
  };
  for (const auto& [plain, encoded] : vectors) {
    CHECK(base64_encode(bytes_of(plain)) == encoded);
    CHECK(base64_decode(encoded) == bytes_of(plain));
  }
}

TEST_CASE("base64 round-trips random bytes and rejects junk") {
  std::mt19937 rng(3);
  for (int n = 0; n < 64; ++n) {
    std::vector<std::uint8_t> data(static_cast<std::size_t>(n));
    for (auto& b : data) b = static_cast<std::uint8_t>(rng());
    CHECK(base64_decode(base64_encode(data)) == data);
  }
  CHECK_THROWS_AS(base64_decode("Zm9v!"), ParseError);
}

TEST_CASE("PNG round-trips RGB and masks") {
  Bitmap rgb(7, 5, 3);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 7; ++x) {
      for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = static_cast<std::uint8_t>(x * 30 + y * 7 + c);
    }
  }
  CHECK(decode_png(encode_png(rgb), 3) == rgb);
  CHECK(encode_png(rgb) == encode_png(rgb));

  MaskImage mask(6, 4, 1);
  mask.at(1, 2) = 1;
  mask.at(5, 0) = 1;
  const auto png = encode_mask_png(mask);
  CHECK(decode_mask_png(png) == mask);
  // Stored as 0/255.
  const Bitmap gray = decode_png(png, 1);
  CHECK(gray.at(1, 2) == 255);
  CHECK(gray.at(0, 0) == 0);

  testutil::TempDir dir;
  write_png(rgb, dir / "a.png");
  CHECK(read_png(dir / "a.png", 3) == rgb);
  CHECK_THROWS_AS(read_png(dir / "missing.png", 3), IoError);
  write_text_file(dir / "junk.png", "not a png");
  CHECK_THROWS_AS(read_png(dir / "junk.png", 3), ParseError);
}

TEST_CASE("box IoU agrees with pixel counting on integer boxes") {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> coord(0, 30);
  for (int i = 0; i < 500; ++i) {
    auto random_box = [&] {
      int x0 = coord(rng), x1 = coord(rng), y0 = coord(rng), y1 = coord(rng);
      if (x0 > x1) std::swap(x0, x1);
      if (y0 > y1) std::swap(y0, y1);
      return PixelBox{double(x0), double(y0), double(x1 + 1), double(y1 + 1)};
    };
    const PixelBox a = random_box(), b = random_box();
    CHECK(box_iou(a, b) == doctest::Approx(oracle::pixel_count_iou(a, b, 32, 32)).epsilon(1e-12));
    CHECK(box_iou(a, b) == doctest::Approx(box_iou(b, a)));
  }
  CHECK(box_iou(PixelBox{0, 0, 2, 2}, PixelBox{2, 2, 4, 4}) == 0.0);
}

TEST_CASE("mask bounding box is tight and half-open") {
  MaskImage mask(10, 8, 1);
  CHECK_FALSE(mask_bounding_box(mask).has_value());
  mask.at(2, 3) = 1;
  mask.at(6, 5) = 1;
  const auto box = mask_bounding_box(mask);
  REQUIRE(box);
  CHECK(box->x0 == 2);
  CHECK(box->y0 == 3);
  CHECK(box->x1 == 7);
  CHECK(box->y1 == 6);
  CHECK(box->area() == 15);
}
