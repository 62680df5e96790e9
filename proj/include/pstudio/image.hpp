#pragma once

#include "pstudio/color.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace pstudio {

/// Row-major 8-bit sRGB raster.
class Image {
 public:
  Image() = default;
  /// Throws Error(InvalidArgument) unless width, height >= 1.
  Image(int width, int height, RgbColor fill = {});
  /// Throws Error(InvalidArgument) unless pixels.size() == width * height.
  Image(int width, int height, std::vector<RgbColor> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  RgbColor at(int x, int y) const noexcept { return pixels_[index(x, y)]; }
  RgbColor& at(int x, int y) noexcept { return pixels_[index(x, y)]; }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  std::span<const RgbColor> pixels() const noexcept { return pixels_; }
  std::span<RgbColor> pixels() noexcept { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<RgbColor> pixels_;
};

}  // namespace pstudio
