#include "pstudio/palette.hpp"
#include "pstudio/error.hpp"
#include "pstudio/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace pstudio {

std::string_view format_name(PaletteFormat format) noexcept {
  switch (format) {
    case PaletteFormat::Uniform1D: return "1d";
    case PaletteFormat::Proportional1D: return "1d+";
    case PaletteFormat::Spatial2D: return "2d";
  }
  return "?";
}

std::optional<PaletteFormat> parse_format(std::string_view text) noexcept {
  if (text == "1d") return PaletteFormat::Uniform1D;
  if (text == "1d+" || text == "1dplus") return PaletteFormat::Proportional1D;
  if (text == "2d") return PaletteFormat::Spatial2D;
  return std::nullopt;
}

PaletteFormat format_of(const AnyPalette& palette) noexcept {
  return static_cast<PaletteFormat>(palette.index());
}

void ExtractionParams::validate(PaletteFormat format) const {
  if (k < 1) throw Error(ErrorCode::InvalidK, "k must be at least 1");
  if (!allow_any_k && (k < kMinPaletteColors || k > kMaxPaletteColors))
    throw Error(ErrorCode::InvalidK, "k=" + std::to_string(k) + " outside the supported range 4-12");
  if (max_kmeans_samples < 1) throw Error(ErrorCode::InvalidArgument, "max_kmeans_samples must be positive");
  if (format != PaletteFormat::Spatial2D) return;
  if (grid < 2) throw Error(ErrorCode::InvalidCount, "grid size must be at least 2");
  if (n_superpixels < grid * grid)
    throw Error(ErrorCode::InvalidCount, "n_superpixels=" + std::to_string(n_superpixels) +
                                             " must be at least grid^2=" + std::to_string(grid * grid));
  if (!(compactness > 0.0)) throw Error(ErrorCode::InvalidArgument, "compactness must be positive");
  if (slic_iters < 1) throw Error(ErrorCode::InvalidArgument, "slic_iters must be positive");
}

std::vector<RgbColor> Palette2D::distinct_colors() const {
  std::vector<std::pair<RgbColor, std::size_t>> freq;
  for (RgbColor c : cells) {
    auto it = std::find_if(freq.begin(), freq.end(), [&](const auto& f) { return f.first == c; });
    if (it == freq.end()) freq.emplace_back(c, 1);
    else ++it->second;
  }
  std::sort(freq.begin(), freq.end(),
            [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  std::vector<RgbColor> out;
  for (const auto& f : freq) out.push_back(f.first);
  return out;
}

void validate_palette(const AnyPalette& palette) {
  auto check_distinct = [](std::vector<RgbColor> colors) {
    if (colors.empty()) throw Error(ErrorCode::InvalidArgument, "palette has no colours");
    std::sort(colors.begin(), colors.end());
    if (std::adjacent_find(colors.begin(), colors.end()) != colors.end())
      throw Error(ErrorCode::InvalidArgument, "palette colours must be pairwise distinct");
  };
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Palette1D>) {
          check_distinct(p.colors);
        } else if constexpr (std::is_same_v<T, Palette1DPlus>) {
          check_distinct(p.colors);
          if (p.proportions.size() != p.colors.size())
            throw Error(ErrorCode::InvalidArgument, "one proportion per colour required");
          double sum = 0.0;
          for (double v : p.proportions) {
            if (!(v > 0.0)) throw Error(ErrorCode::InvalidArgument, "proportions must be positive");
            sum += v;
          }
          if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::InvalidArgument, "proportions must sum to 1");
        } else {
          if (p.grid_size < 2) throw Error(ErrorCode::InvalidArgument, "grid size must be at least 2");
          if (p.cells.size() != static_cast<std::size_t>(p.grid_size * p.grid_size))
            throw Error(ErrorCode::InvalidArgument, "grid must be grid_size x grid_size");
        }
      },
      palette);
}

// ---------------------------------------------------------------------------

std::size_t ColorHistogram::find(RgbColor c) const noexcept {
  auto it = std::lower_bound(colors.begin(), colors.end(), c);
  if (it == colors.end() || *it != c) return colors.size();
  return static_cast<std::size_t>(it - colors.begin());
}

namespace {

ColorHistogram histogram_of(std::vector<std::uint32_t> packed) {
  std::sort(packed.begin(), packed.end());
  ColorHistogram h;
  for (std::size_t i = 0; i < packed.size();) {
    std::size_t j = i;
    while (j < packed.size() && packed[j] == packed[i]) ++j;
    h.colors.push_back(RgbColor::from_packed(packed[i]));
    h.counts.push_back(j - i);
    i = j;
  }
  return h;
}

seg::FeatureMatrix lab_features(std::span<const RgbColor> colors) {
  std::vector<double> data;
  data.reserve(colors.size() * 3);
  for (RgbColor c : colors) {
    const LabColor lab = srgb_to_lab(c);
    data.insert(data.end(), {lab.l, lab.a, lab.b});
  }
  return seg::FeatureMatrix(3, std::move(data));
}

LabColor to_lab(std::span<const double> v) { return {v[0], v[1], v[2]}; }

}  // namespace

ColorHistogram color_histogram(const Image& image) {
  std::vector<std::uint32_t> packed;
  packed.reserve(image.size());
  for (RgbColor c : image.pixels()) packed.push_back(c.packed());
  return histogram_of(std::move(packed));
}

std::vector<double> ColorClusters::proportions() const {
  std::vector<double> p;
  p.reserve(counts.size());
  for (std::uint64_t c : counts) p.push_back(static_cast<double>(c) / static_cast<double>(total));
  return p;
}

ColorClusters cluster_colors(const Image& image, const ExtractionParams& params) {
  if (image.empty()) throw Error(ErrorCode::EmptyInput, "empty image");
  params.validate(PaletteFormat::Uniform1D);

  const ColorHistogram hist = color_histogram(image);

  // Cluster exact colours weighted by pixel count; this equals clustering
  // every pixel. Past max_kmeans_samples distinct colours, cluster a seeded
  // stride subsample of the pixels instead.
  ColorHistogram sample;
  if (hist.colors.size() <= params.max_kmeans_samples) {
    sample = hist;
  } else {
    const std::size_t n = image.size();
    const std::size_t stride = (n + params.max_kmeans_samples - 1) / params.max_kmeans_samples;
    std::vector<std::uint32_t> packed;
    for (std::size_t i = params.seed % stride; i < n; i += stride) packed.push_back(image.pixels()[i].packed());
    sample = histogram_of(std::move(packed));
  }

  const seg::FeatureMatrix points = lab_features(sample.colors);
  std::vector<double> weights(sample.counts.begin(), sample.counts.end());
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(params.k), sample.colors.size());
  const seg::Clustering clustering = seg::kmeans_weighted(points, weights, {k, params.seed, 300});

  // Every exact colour belongs to exactly one cluster, so modal colours of
  // different clusters can never coincide.
  const seg::FeatureMatrix all_points = sample.colors.size() == hist.colors.size() ? points : lab_features(hist.colors);
  std::vector<std::uint64_t> counts(k, 0);
  std::vector<std::size_t> modal(k, hist.colors.size());
  for (std::size_t i = 0; i < hist.colors.size(); ++i) {
    const std::size_t c = seg::nearest_center(all_points.row(i), clustering.centers);
    counts[c] += hist.counts[i];
    // hist is sorted by colour, so strict > keeps the smallest colour on ties
    if (modal[c] == hist.colors.size() || hist.counts[i] > hist.counts[modal[c]]) modal[c] = i;
  }

  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] > 0) order.push_back(c);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return hist.colors[modal[a]] < hist.colors[modal[b]];
  });

  ColorClusters out;
  out.total = image.size();
  for (std::size_t c : order) {
    out.colors.push_back(hist.colors[modal[c]]);
    out.centers.push_back(to_lab(clustering.centers.row(c)));
    out.counts.push_back(counts[c]);
  }
  return out;
}

Palette1D extract_1d(const Image& image, const ExtractionParams& params) {
  ColorClusters clusters = cluster_colors(image, params);
  return {std::move(clusters.colors), params.k};
}

Palette1DPlus extract_1d_plus(const Image& image, const ExtractionParams& params) {
  ColorClusters clusters = cluster_colors(image, params);
  auto proportions = clusters.proportions();
  return {std::move(clusters.colors), std::move(proportions), params.k};
}

// ---------------------------------------------------------------------------

Palette2D downsample_majority(const Image& image, int grid_size, int k) {
  const int w = image.width(), h = image.height();
  if (grid_size < 1 || w < grid_size || h < grid_size)
    throw Error(ErrorCode::InvalidCount, "image " + std::to_string(w) + "x" + std::to_string(h) +
                                             " is smaller than a " + std::to_string(grid_size) + " grid");
  const std::size_t cells = static_cast<std::size_t>(grid_size) * grid_size;
  std::vector<std::vector<std::uint32_t>> per_cell(cells);
  for (int y = 0; y < h; ++y) {
    const int gy = cell_of(y, grid_size, h);
    for (int x = 0; x < w; ++x)
      per_cell[static_cast<std::size_t>(gy * grid_size + cell_of(x, grid_size, w))].push_back(image.at(x, y).packed());
  }
  Palette2D out{grid_size, std::vector<RgbColor>(cells), k};
  for (std::size_t c = 0; c < cells; ++c) {
    auto& v = per_cell[c];
    std::sort(v.begin(), v.end());
    std::uint32_t best = v.front();
    std::size_t best_n = 0;
    for (std::size_t i = 0; i < v.size();) {
      std::size_t j = i;
      while (j < v.size() && v[j] == v[i]) ++j;
      if (j - i > best_n) {
        best_n = j - i;
        best = v[i];
      }
      i = j;
    }
    out.cells[c] = RgbColor::from_packed(best);
  }
  return out;
}

Image upsample_preview(const Palette2D& palette, int width, int height) {
  Image out(width, height);
  const int g = palette.grid_size;
  for (int y = 0; y < height; ++y) {
    const int gy = cell_of(y, g, height);
    for (int x = 0; x < width; ++x) out.at(x, y) = palette.at(gy, cell_of(x, g, width));
  }
  return out;
}

Palette2D extract_2d(const Image& image, const ExtractionParams& params) {
  if (image.empty()) throw Error(ErrorCode::EmptyInput, "empty image");
  params.validate(PaletteFormat::Spatial2D);
  if (image.width() < params.grid || image.height() < params.grid)
    throw Error(ErrorCode::InvalidCount, "image is smaller than the palette grid");

  const seg::SuperpixelMap sp =
      seg::slic(image, {params.n_superpixels, params.compactness, params.slic_iters});
  const auto regions = sp.regions();

  std::vector<RgbColor> sp_color(regions.size());
  for (std::size_t s = 0; s < regions.size(); ++s) sp_color[s] = seg::dominant_color(image, regions[s]);

  // One k-means point per superpixel colour, weighted by how many superpixels
  // carry it; `area` tracks pixels for picking each cluster's colour.
  std::vector<std::uint32_t> packed;
  for (RgbColor c : sp_color) packed.push_back(c.packed());
  const ColorHistogram sp_hist = histogram_of(packed);
  std::vector<std::uint64_t> area(sp_hist.colors.size(), 0);
  for (std::size_t s = 0; s < regions.size(); ++s) area[sp_hist.find(sp_color[s])] += regions[s].size();

  const seg::FeatureMatrix points = lab_features(sp_hist.colors);
  std::vector<double> weights(sp_hist.counts.begin(), sp_hist.counts.end());
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(params.k), sp_hist.colors.size());
  const seg::Clustering clustering = seg::kmeans_weighted(points, weights, {k, params.seed, 300});

  std::vector<std::size_t> rep(k, sp_hist.colors.size());
  for (std::size_t i = 0; i < sp_hist.colors.size(); ++i) {
    const std::size_t c = clustering.assignments[i];
    if (rep[c] == sp_hist.colors.size() || area[i] > area[rep[c]]) rep[c] = i;
  }

  Image quantized(image.width(), image.height());
  for (std::size_t p = 0; p < image.size(); ++p) {
    const std::size_t color_index = sp_hist.find(sp_color[static_cast<std::size_t>(sp.labels[p])]);
    quantized.pixels()[p] = sp_hist.colors[rep[clustering.assignments[color_index]]];
  }
  return downsample_majority(quantized, params.grid, params.k);
}

}  // namespace pstudio
