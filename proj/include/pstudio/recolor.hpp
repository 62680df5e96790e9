#pragma once

#include "pstudio/image.hpp"
#include "pstudio/palette.hpp"
#include "pstudio/segmentation.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace pstudio {

struct RecolorOptions {
  /// Largest tolerated |achieved - target| per cluster.
  double balance_eps = 0.02;
  int balance_max_iter = 200;
  /// 1 = bilinear offset field, 0 = blocky nearest-cell offsets.
  double feather = 1.0;
  /// Seed the source palette was extracted with.
  std::uint64_t seed = 0;

  /// Throws Error(InvalidArgument).
  void validate() const;

  friend bool operator==(const RecolorOptions&, const RecolorOptions&) = default;
};

/// Convergence record shared by both balanced-assignment forms.
struct BalanceDiagnostics {
  std::vector<double> biases;
  std::vector<double> achieved;
  double residual = 0.0;
  /// Assignment sweeps performed by the bias iteration.
  int iterations = 0;
  /// True when the bias iteration stalled above eps and the final capacity
  /// fill had to move mass between clusters.
  bool repaired = false;
  /// Residual of the current iterate after every sweep (plus the final
  /// residual when repaired); never increases.
  std::vector<double> residual_history;
};

struct BalancedAssignment {
  std::vector<std::size_t> assignments;
  BalanceDiagnostics diagnostics;
};

/// Mass of one point placed in one cluster.
struct Share {
  std::size_t cluster;
  std::uint64_t count;
  friend bool operator==(const Share&, const Share&) = default;
};

struct WeightedBalancedAssignment {
  /// Per point, cluster shares in ascending cluster order; counts sum to the
  /// point's weight.
  std::vector<std::vector<Share>> shares;
  BalanceDiagnostics diagnostics;
};

/// Capacity-balanced assignment: points go to argmin_i (|p - c_i|^2 - bias_i);
/// biases move by (target_i - achieved_i) * scale, scale being the mean
/// squared inter-center distance, with the step halved whenever it would
/// raise the residual. If that stalls above eps, mass is moved greedily
/// (cheapest extra cost first) until every cluster holds its rounded share.
/// Throws Error(DegenerateCenters) when K > 1 and all centers coincide.
BalancedAssignment balanced_assign(const seg::FeatureMatrix& points, const seg::FeatureMatrix& centers,
                                   std::span<const double> targets, const RecolorOptions& options);

WeightedBalancedAssignment balanced_assign_weighted(const seg::FeatureMatrix& points,
                                                    std::span<const std::uint64_t> weights,
                                                    const seg::FeatureMatrix& centers,
                                                    std::span<const double> targets, const RecolorOptions& options);

struct RecolorResult {
  Image image;
  /// Present for 1d+ requests only.
  std::optional<BalanceDiagnostics> balance;
};

/// Pixel p in source cluster i becomes target_i + (p - source_i) in Lab,
/// where source_i is the source palette colour of cluster i.
Image recolor_1d(const Image& image, const ColorClusters& source, const Palette1D& target);

/// As recolor_1d, but pixels are first rebalanced across clusters so that
/// cluster shares follow target.proportions. A pixel moved from its natural
/// cluster j to cluster i becomes target_i + (p - source_j).
RecolorResult recolor_1d_plus(const Image& image, const ColorClusters& source, const Palette1DPlus& target,
                              const RecolorOptions& options);

/// Adds the per-cell Lab offset field (target - source), interpolated
/// between cell centres, to every pixel.
Image recolor_2d(const Image& image, const Palette2D& source, const Palette2D& target, const RecolorOptions& options);

/// Dispatches on format after checking that source and target agree on
/// format (FormatMismatch), colour count and k (KMismatch), and grid size
/// (GridMismatch). The 1D colour model is rebuilt from (image, params).
RecolorResult recolor(const Image& image, const AnyPalette& source, const AnyPalette& target,
                      const ExtractionParams& params, const RecolorOptions& options);

}  // namespace pstudio
