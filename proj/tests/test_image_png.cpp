#include "pstudio/error.hpp"
#include "pstudio/image.hpp"
#include "pstudio/png_io.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <filesystem>

using namespace pstudio;

TEST_CASE("image construction validates sizes") {
  CHECK_THROWS_AS(Image(0, 4), Error);
  CHECK_THROWS_AS(Image(2, 2, std::vector<RgbColor>(3)), Error);
  Image img(3, 2, RgbColor{1, 2, 3});
  CHECK(img.size() == 6);
  img.at(2, 1) = {9, 9, 9};
  CHECK(img.pixels()[5] == RgbColor{9, 9, 9});
  CHECK(img.index(2, 1) == 5);
}

TEST_CASE("PNG round trip is lossless") {
  const Image img = oracle::random_scene(3, 37, 23);
  const auto bytes = encode_png(img);
  CHECK(decode_png(bytes) == img);
  CHECK(encode_png(img) == bytes);
}

TEST_CASE("PNG file round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "pstudio-png-test";
  std::filesystem::create_directories(dir);
  const Image img = oracle::random_scene(4, 16, 16);
  write_png(dir / "a.png", img);
  CHECK(read_png(dir / "a.png") == img);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed PNG input") {
  const auto bytes = encode_png(oracle::random_scene(5, 20, 20));
  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + static_cast<long>(bytes.size() / 2));
  try {
    decode_png(truncated);
    FAIL("expected a decode error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DecodeError);
  }
  const std::vector<std::uint8_t> junk = {1, 2, 3, 4};
  CHECK_THROWS_AS(decode_png(junk), Error);
  CHECK_THROWS_AS(read_png("/nonexistent/file.png"), Error);
}
