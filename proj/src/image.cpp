#include "pstudio/image.hpp"
#include "pstudio/error.hpp"

#include <string>

namespace pstudio {

Image::Image(int width, int height, RgbColor fill) : width_(width), height_(height) {
  if (width < 1 || height < 1)
    throw Error(ErrorCode::InvalidArgument,
                "image dimensions must be positive, got " + std::to_string(width) + "x" + std::to_string(height));
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

Image::Image(int width, int height, std::vector<RgbColor> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1)
    throw Error(ErrorCode::InvalidArgument,
                "image dimensions must be positive, got " + std::to_string(width) + "x" + std::to_string(height));
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw Error(ErrorCode::InvalidArgument, "pixel count does not match dimensions");
}

}  // namespace pstudio
