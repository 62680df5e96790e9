#pragma once

#include "pstudio/color.hpp"
#include "pstudio/image.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

namespace pstudio {

enum class PaletteFormat { Uniform1D, Proportional1D, Spatial2D };

/// "1d", "1d+" or "2d".
std::string_view format_name(PaletteFormat format) noexcept;
/// Also accepts the URL-safe spelling "1dplus".
std::optional<PaletteFormat> parse_format(std::string_view text) noexcept;

inline constexpr int kMinPaletteColors = 4;
inline constexpr int kMaxPaletteColors = 12;

struct ExtractionParams {
  /// Colour count behind the global slider; [4, 12] unless allow_any_k.
  int k = 5;
  std::uint64_t seed = 0;
  int n_superpixels = 200;
  int grid = 5;
  double compactness = 10.0;
  int slic_iters = 10;
  bool allow_any_k = false;
  std::size_t max_kmeans_samples = 100000;

  /// Throws Error(InvalidK) / Error(InvalidCount) / Error(InvalidArgument).
  void validate(PaletteFormat format) const;
};

/// Equal-sized blocks.
struct Palette1D {
  std::vector<RgbColor> colors;
  int k = 0;

  friend bool operator==(const Palette1D&, const Palette1D&) = default;
};

/// Blocks sized by pixel share.
struct Palette1DPlus {
  std::vector<RgbColor> colors;
  std::vector<double> proportions;
  int k = 0;

  friend bool operator==(const Palette1DPlus&, const Palette1DPlus&) = default;
};

/// G x G grid of placed colours, row-major.
struct Palette2D {
  int grid_size = 0;
  std::vector<RgbColor> cells;
  int k = 0;

  RgbColor at(int row, int col) const { return cells[static_cast<std::size_t>(row * grid_size + col)]; }
  RgbColor& at(int row, int col) { return cells[static_cast<std::size_t>(row * grid_size + col)]; }

  /// Distinct grid colours, most cells first (ties by colour).
  std::vector<RgbColor> distinct_colors() const;

  friend bool operator==(const Palette2D&, const Palette2D&) = default;
};

using AnyPalette = std::variant<Palette1D, Palette1DPlus, Palette2D>;

PaletteFormat format_of(const AnyPalette& palette) noexcept;

/// Checks the structural invariants of a palette received from outside
/// (distinct colours, positive proportions summing to one, square grid).
/// Throws Error(InvalidArgument).
void validate_palette(const AnyPalette& palette);

/// Exact-colour histogram, sorted by packed colour value.
struct ColorHistogram {
  std::vector<RgbColor> colors;
  std::vector<std::uint64_t> counts;

  /// Index of `c` in `colors`, or colors.size() if absent.
  std::size_t find(RgbColor c) const noexcept;
};

ColorHistogram color_histogram(const Image& image);

/// The k-means colour model behind the 1D formats. Clusters are ordered by
/// descending pixel count, ties by dominant colour.
struct ColorClusters {
  std::vector<RgbColor> colors;    // modal colour of each cluster
  std::vector<LabColor> centers;   // Lab centroid of each cluster
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  std::size_t size() const noexcept { return colors.size(); }
  std::vector<double> proportions() const;
};

/// Clusters the image's colours in Lab (k capped at the number of distinct
/// colours) and reports every pixel's share by nearest-center assignment.
ColorClusters cluster_colors(const Image& image, const ExtractionParams& params);

Palette1D extract_1d(const Image& image, const ExtractionParams& params);
Palette1DPlus extract_1d_plus(const Image& image, const ExtractionParams& params);

/// SLIC superpixels, modal colour per superpixel, k-means quantisation of
/// those colours, then area-majority downsampling to a G x G grid.
Palette2D extract_2d(const Image& image, const ExtractionParams& params);

/// Nearest-neighbour upsample: pixel (x, y) takes cell (y*G/h, x*G/w).
Image upsample_preview(const Palette2D& palette, int width, int height);

/// Each cell takes the colour covering most pixels of its rectangle
/// (ties by colour); the inverse of upsample_preview. Throws
/// Error(InvalidCount) if the image is smaller than the grid.
Palette2D downsample_majority(const Image& image, int grid_size, int k);

/// Cell index along one axis for pixel coordinate `i` of `extent` pixels.
constexpr int cell_of(int i, int grid_size, int extent) noexcept {
  return static_cast<int>(static_cast<long long>(i) * grid_size / extent);
}

}  // namespace pstudio
