#pragma once

#include "pstudio/image.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pstudio {

/// Decodes any PNG colour type to 8-bit RGB (alpha is composited onto black).
/// Throws Error(DecodeError) on malformed input.
Image decode_png(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const Image& image);

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace pstudio
