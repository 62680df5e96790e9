#pragma once

#include "pstudio/image.hpp"
#include "pstudio/palette.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pstudio::stimulus {

inline constexpr std::size_t kSurveyColors = 5;

struct CorpusEntry {
  std::string id;
  Palette1D palette_1d;  // exactly five colours, largest share first
  Palette2D palette_2d;
};

struct PaletteCorpus {
  std::vector<CorpusEntry> entries;
};

/// Minimum-cost perfect matching of the two colour sets under CIE76.
/// Throws Error(SizeMismatch) for palettes of different sizes.
double palette_distance(const Palette1D& a, const Palette1D& b);
double palette_distance(std::span<const LabColor> a, std::span<const LabColor> b);

/// Optimal assignment for a square cost matrix (row-major); returns the
/// column matched to each row.
std::vector<std::size_t> min_cost_matching(std::span<const double> cost, std::size_t n);

struct Candidate {
  std::size_t entry;  // index into corpus.entries
  double distance;    // palette_distance to the cluster centre
};

/// k-means over palettes embedded as concatenated Lab colours, sorted by
/// (L, a, b) within each palette; per cluster, up to `top` members nearest the
/// centre. Throws Error(EmptyCorpus); k-means errors propagate.
std::vector<std::vector<Candidate>> select_representatives(const PaletteCorpus& corpus, std::size_t k = 5,
                                                           std::size_t top = 30, std::uint64_t seed = 0);

/// Component-wise median of every 2D palette's sorted colour shares,
/// normalised to sum to one. Throws Error(EmptyCorpus).
std::vector<double> canonical_proportion(const PaletteCorpus& corpus);

/// A 2D palette with colour identity erased: each cell holds the area rank
/// of its colour (0 = most cells).
struct LayoutSignature {
  int grid_size = 0;
  std::vector<std::uint8_t> labels;

  /// Cells per rank.
  std::vector<std::size_t> rank_counts() const;
  friend bool operator==(const LayoutSignature&, const LayoutSignature&) = default;
};

/// Ranks colours by cell count, ties by first appearance in row-major order.
/// Throws Error(ColorCountMismatch) unless the grid has exactly five colours.
LayoutSignature standardize_layout(const Palette2D& palette);

struct LayoutChoice {
  LayoutSignature layout;
  std::size_t source_index;
  /// Whether every rank's cell count is within one cell of the proportion.
  bool matches_proportion;
};

/// k-means over one-hot label grids; per cluster, the member nearest the
/// centroid among those matching `proportion` (falling back to any member
/// when none match). Empty `proportion` disables the filter.
/// Throws Error(InsufficientLayouts) with fewer than k distinct signatures.
std::vector<LayoutChoice> cluster_layouts(std::span<const LayoutSignature> signatures, std::size_t k,
                                          std::span<const double> proportion, std::uint64_t seed = 0);

bool matches_proportion(const LayoutSignature& layout, std::span<const double> proportion);

struct SurveyCondition {
  std::string id;
  PaletteFormat format = PaletteFormat::Uniform1D;
  /// Display order; proportion-descending for 1d+ and 2d.
  std::vector<RgbColor> colors;
  std::vector<double> proportions;
  int rotation = -1;  // colour -> proportion-slot assignment, 1d+ and 2d
  int layout = -1;    // 2d only
  Palette2D grid;     // 2d only
  int presentation_index = 0;
};

/// The 31 rating conditions for one colour combination: one 1d, five 1d+
/// (cyclic rotations of which colour holds which proportion) and 5 x 5 2d
/// (rotation x layout). Returned in seeded presentation order.
/// Throws Error(ArityError) unless there are 5 colours, 5 proportions and
/// 5 layouts.
std::vector<SurveyCondition> generate_conditions(std::span<const RgbColor> colors, std::span<const double> proportion,
                                                 std::span<const LayoutSignature> layouts, std::uint64_t seed = 0);

/// Swatch image: equal blocks (1d), proportional blocks (1d+) or the
/// upsampled grid (2d).
Image render_swatch(const SurveyCondition& condition, int width, int height);

nlohmann::json condition_to_json(const SurveyCondition& condition);

/// Reads *.png designs (palettes extracted with k = 5) and *.json designs
/// ({"id":..., "palette_1d":{...}, "palette_2d":{...}}), in file-name order.
/// Designs that do not yield five distinct 1D colours are skipped.
PaletteCorpus load_corpus(const std::filesystem::path& dir, const ExtractionParams& params);

}  // namespace pstudio::stimulus
