#pragma once

#include "pstudio/image.hpp"

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace pstudio::seg {

/// Dense row-major set of equal-length feature vectors.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t dim) : dim_(dim) {}
  FeatureMatrix(std::size_t dim, std::vector<double> data);
  FeatureMatrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * dim_, dim_}; }
  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * dim_, dim_}; }

  void push_back(std::span<const double> v);
  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;

struct Clustering {
  FeatureMatrix centers;
  std::vector<std::size_t> assignments;
  double inertia = 0.0;
  /// Inertia measured after every assignment step, in order.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
  bool converged = false;
};

struct KMeansOptions {
  std::size_t k = 1;
  std::uint64_t seed = 0;
  std::size_t max_iter = 300;
};

/// Lloyd iterations with k-means++ seeding. Deterministic for a fixed seed.
/// Throws Error(EmptyInput) for no points, Error(InvalidK) when k is zero or
/// exceeds the number of distinct points.
Clustering kmeans(const FeatureMatrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iter = 300);

/// Same as kmeans() with a positive multiplicity per point; equivalent to
/// repeating each point weights[i] times.
Clustering kmeans_weighted(const FeatureMatrix& points, std::span<const double> weights, const KMeansOptions& options);

std::size_t count_distinct_rows(const FeatureMatrix& points);

/// Index of the nearest row of `centers`; ties go to the lowest index.
std::size_t nearest_center(std::span<const double> point, const FeatureMatrix& centers) noexcept;

struct SuperpixelMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;  // row-major, each in [0, count)
  int count = 0;

  std::vector<std::size_t> sizes() const;
  /// Row-major pixel indices for each label.
  std::vector<std::vector<std::size_t>> regions() const;
};

struct SlicOptions {
  int n_superpixels = 200;
  double compactness = 10.0;
  int iterations = 10;
};

/// SLIC superpixels in joint (L,a,b,x,y) space. Seeds sit on a regular grid;
/// the distance is dLab + (compactness / S) * dxy with S = sqrt(W*H/n).
/// After clustering every label is made 4-connected by folding stray
/// components into their largest neighbouring superpixel.
/// Throws Error(InvalidCount) if n_superpixels is < 1 or exceeds the pixel count.
SuperpixelMap slic(const Image& image, const SlicOptions& options);

/// Most frequent exact colour over `region` (pixel indices); ties go to the
/// lexicographically smallest (r,g,b). Throws Error(EmptyRegion).
RgbColor dominant_color(const Image& image, std::span<const std::size_t> region);

/// Colour histogram of a region, most frequent first (ties by colour).
std::vector<std::pair<RgbColor, std::size_t>> color_frequencies(const Image& image,
                                                                std::span<const std::size_t> region);

}  // namespace pstudio::seg
