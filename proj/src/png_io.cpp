#include "pstudio/png_io.hpp"
#include "pstudio/error.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace pstudio {

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    throw Error(ErrorCode::DecodeError, img.message);
  img.format = PNG_FORMAT_RGB;
  if (img.width == 0 || img.height == 0) {
    png_image_free(&img);
    throw Error(ErrorCode::DecodeError, "empty image");
  }
  std::vector<RgbColor> pixels(static_cast<std::size_t>(img.width) * img.height);
  static_assert(sizeof(RgbColor) == 3);
  if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorCode::DecodeError, msg);
  }
  return Image(static_cast<int>(img.width), static_cast<int>(img.height), std::move(pixels));
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  const void* data = image.pixels().data();
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, data, 0, nullptr))
    throw Error(ErrorCode::IoError, img.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, data, 0, nullptr))
    throw Error(ErrorCode::IoError, img.message);
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

Image read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

void write_png(const std::filesystem::path& path, const Image& image) { write_file(path, encode_png(image)); }

}  // namespace pstudio
