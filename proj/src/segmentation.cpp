#include "pstudio/segmentation.hpp"
#include "pstudio/error.hpp"
#include "pstudio/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace pstudio::seg {

FeatureMatrix::FeatureMatrix(std::size_t dim, std::vector<double> data) : dim_(dim), data_(std::move(data)) {
  if (dim_ == 0 || data_.size() % dim_ != 0)
    throw Error(ErrorCode::InvalidArgument, "feature data length is not a multiple of the dimension");
}

FeatureMatrix::FeatureMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  for (const auto& r : rows) {
    if (dim_ == 0) dim_ = r.size();
    push_back(std::span<const double>(r.begin(), r.size()));
  }
}

void FeatureMatrix::push_back(std::span<const double> v) {
  if (dim_ == 0) dim_ = v.size();
  if (v.size() != dim_ || dim_ == 0)
    throw Error(ErrorCode::InvalidArgument, "feature vector length " + std::to_string(v.size()) +
                                                " does not match dimension " + std::to_string(dim_));
  data_.insert(data_.end(), v.begin(), v.end());
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t nearest_center(std::span<const double> point, const FeatureMatrix& centers) noexcept {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const double d = squared_distance(point, centers.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::size_t count_distinct_rows(const FeatureMatrix& points) {
  const std::size_t n = points.rows();
  if (n == 0) return 0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    auto ra = points.row(a), rb = points.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  std::sort(order.begin(), order.end(), less);
  std::size_t distinct = 1;
  for (std::size_t i = 1; i < n; ++i) {
    auto a = points.row(order[i - 1]), b = points.row(order[i]);
    if (!std::equal(a.begin(), a.end(), b.begin())) ++distinct;
  }
  return distinct;
}

namespace {

std::size_t sample_index(std::span<const double> mass, double total, Rng& rng) {
  const double target = rng.uniform() * total;
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] <= 0.0) continue;
    cum += mass[i];
    last_positive = i;
    if (cum > target) return i;
  }
  return last_positive;
}

FeatureMatrix seed_plus_plus(const FeatureMatrix& points, std::span<const double> weights, std::size_t k,
                             Rng& rng) {
  const std::size_t n = points.rows();
  FeatureMatrix centers(points.dim());
  const double total_w = std::accumulate(weights.begin(), weights.end(), 0.0);
  centers.push_back(points.row(sample_index(weights, total_w, rng)));

  std::vector<double> nearest(n);
  std::vector<double> mass(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = squared_distance(points.row(i), centers.row(0));
  while (centers.rows() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mass[i] = weights[i] * nearest[i];
      total += mass[i];
    }
    const std::size_t pick = sample_index(mass, total, rng);
    centers.push_back(points.row(pick));
    const auto c = centers.row(centers.rows() - 1);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], squared_distance(points.row(i), c));
  }
  return centers;
}

}  // namespace

Clustering kmeans_weighted(const FeatureMatrix& points, std::span<const double> weights, const KMeansOptions& options) {
  const std::size_t n = points.rows();
  if (n == 0) throw Error(ErrorCode::EmptyInput, "k-means needs at least one point");
  if (weights.size() != n) throw Error(ErrorCode::InvalidArgument, "one weight per point required");
  for (double w : weights)
    if (!(w > 0.0)) throw Error(ErrorCode::InvalidArgument, "point weights must be positive");
  if (options.max_iter < 1) throw Error(ErrorCode::InvalidArgument, "max_iter must be positive");
  const std::size_t distinct = count_distinct_rows(points);
  if (options.k < 1 || options.k > distinct)
    throw Error(ErrorCode::InvalidK, "k=" + std::to_string(options.k) + " but only " + std::to_string(distinct) +
                                         " distinct points");

  Rng rng(options.seed);
  const std::size_t k = options.k;
  const std::size_t dim = points.dim();

  Clustering out;
  out.centers = seed_plus_plus(points, weights, k, rng);
  out.assignments.assign(n, 0);
  std::vector<double> dist(n, 0.0);

  auto assign = [&]() {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest_center(points.row(i), out.centers);
      if (c != out.assignments[i]) changed = true;
      out.assignments[i] = c;
      dist[i] = squared_distance(points.row(i), out.centers.row(c));
      inertia += weights[i] * dist[i];
    }
    out.inertia = inertia;
    out.inertia_history.push_back(inertia);
    return changed;
  };

  std::vector<double> sums(k * dim);
  std::vector<double> mass(k);
  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    const bool changed = assign();
    out.iterations = iter + 1;
    if (iter > 0 && !changed) {
      out.converged = true;
      break;
    }

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(mass.begin(), mass.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = out.assignments[i];
      const auto p = points.row(i);
      for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += weights[i] * p[d];
      mass[c] += weights[i];
    }
    for (std::size_t c = 0; c < k; ++c) {
      auto center = out.centers.row(c);
      if (mass[c] > 0.0) {
        for (std::size_t d = 0; d < dim; ++d) center[d] = sums[c * dim + d] / mass[c];
        continue;
      }
      // Empty cluster: move it onto the point currently worst served.
      std::size_t worst = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (dist[i] > dist[worst]) worst = i;
      const auto p = points.row(worst);
      std::copy(p.begin(), p.end(), center.begin());
      dist[worst] = 0.0;
    }
  }
  if (!out.converged) {
    // max_iter hit right after an update step; re-assign so assignments refer
    // to the returned centers.
    out.converged = !assign();
  }
  return out;
}

Clustering kmeans(const FeatureMatrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
  const std::vector<double> ones(points.rows(), 1.0);
  return kmeans_weighted(points, ones, {k, seed, max_iter});
}

// ---------------------------------------------------------------------------
// SLIC

std::vector<std::size_t> SuperpixelMap::sizes() const {
  std::vector<std::size_t> s(static_cast<std::size_t>(count), 0);
  for (int l : labels) ++s[static_cast<std::size_t>(l)];
  return s;
}

std::vector<std::vector<std::size_t>> SuperpixelMap::regions() const {
  std::vector<std::vector<std::size_t>> r(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < labels.size(); ++i) r[static_cast<std::size_t>(labels[i])].push_back(i);
  return r;
}

namespace {

struct SlicCenter {
  double l, a, b, x, y;
};

// Makes every label 4-connected. The largest component of each label keeps
// it; every other component (and any pixel no center reached, label -1) is
// merged into the adjacent superpixel with the most pixels. Labels are then
// compacted to [0, count) preserving their relative order.
int enforce_connectivity(int width, int height, std::vector<int>& labels) {
  const std::size_t n = labels.size();
  std::vector<int> comp(n, -1);
  std::vector<std::size_t> comp_size;
  std::vector<int> comp_label;
  std::vector<std::size_t> comp_first;

  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] != -1) continue;
    const int id = static_cast<int>(comp_size.size());
    const int lab = labels[start];
    std::size_t size = 0;
    stack.push_back(start);
    comp[start] = id;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++size;
      const int x = static_cast<int>(p % width), y = static_cast<int>(p / width);
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int d = 0; d < 4; ++d) {
        if (nx[d] < 0 || ny[d] < 0 || nx[d] >= width || ny[d] >= height) continue;
        const std::size_t q = static_cast<std::size_t>(ny[d]) * width + nx[d];
        if (comp[q] == -1 && labels[q] == lab) {
          comp[q] = id;
          stack.push_back(q);
        }
      }
    }
    comp_size.push_back(size);
    comp_label.push_back(lab);
    comp_first.push_back(start);
  }

  const std::size_t ncomp = comp_size.size();
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  std::vector<int> keeper(static_cast<std::size_t>(max_label + 1), -1);
  for (std::size_t c = 0; c < ncomp; ++c) {
    const int lab = comp_label[c];
    if (lab < 0) continue;
    int& k = keeper[static_cast<std::size_t>(lab)];
    if (k == -1 || comp_size[c] > comp_size[static_cast<std::size_t>(k)]) k = static_cast<int>(c);
  }

  // Resolved label per component; -1 while still an orphan.
  std::vector<int> resolved(ncomp, -1);
  std::vector<std::size_t> label_size(static_cast<std::size_t>(max_label + 1), 0);
  for (std::size_t c = 0; c < ncomp; ++c) {
    const int lab = comp_label[c];
    if (lab >= 0 && keeper[static_cast<std::size_t>(lab)] == static_cast<int>(c)) {
      resolved[c] = lab;
      label_size[static_cast<std::size_t>(lab)] = comp_size[c];
    }
  }

  // Pixel lists per orphan component, for neighbour scans.
  std::vector<std::vector<std::size_t>> members(ncomp);
  for (std::size_t p = 0; p < n; ++p)
    if (resolved[static_cast<std::size_t>(comp[p])] == -1) members[static_cast<std::size_t>(comp[p])].push_back(p);

  std::vector<std::size_t> orphans;
  for (std::size_t c = 0; c < ncomp; ++c)
    if (resolved[c] == -1) orphans.push_back(c);
  std::sort(orphans.begin(), orphans.end(), [&](std::size_t a, std::size_t b) { return comp_first[a] < comp_first[b]; });

  while (!orphans.empty()) {
    std::vector<std::size_t> deferred;
    for (std::size_t c : orphans) {
      int best = -1;
      for (std::size_t p : members[c]) {
        const int x = static_cast<int>(p % width), y = static_cast<int>(p / width);
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int d = 0; d < 4; ++d) {
          if (nx[d] < 0 || ny[d] < 0 || nx[d] >= width || ny[d] >= height) continue;
          const std::size_t q = static_cast<std::size_t>(ny[d]) * width + nx[d];
          const int lab = resolved[static_cast<std::size_t>(comp[q])];
          if (lab < 0) continue;
          if (best < 0 || label_size[static_cast<std::size_t>(lab)] > label_size[static_cast<std::size_t>(best)] ||
              (label_size[static_cast<std::size_t>(lab)] == label_size[static_cast<std::size_t>(best)] && lab < best))
            best = lab;
        }
      }
      if (best < 0) {
        deferred.push_back(c);
        continue;
      }
      resolved[c] = best;
      label_size[static_cast<std::size_t>(best)] += comp_size[c];
    }
    if (deferred.size() == orphans.size()) break;  // unreachable on a connected grid
    orphans = std::move(deferred);
  }

  std::vector<int> remap(static_cast<std::size_t>(max_label + 1), -1);
  int next = 0;
  for (std::size_t l = 0; l < remap.size(); ++l)
    if (label_size[l] > 0) remap[l] = next++;
  for (std::size_t p = 0; p < n; ++p) labels[p] = remap[static_cast<std::size_t>(resolved[static_cast<std::size_t>(comp[p])])];
  return next;
}

}  // namespace

SuperpixelMap slic(const Image& image, const SlicOptions& options) {
  const int w = image.width(), h = image.height();
  const std::size_t npix = image.size();
  if (options.n_superpixels < 1 || static_cast<std::size_t>(options.n_superpixels) > npix)
    throw Error(ErrorCode::InvalidCount, "n_superpixels=" + std::to_string(options.n_superpixels) +
                                             " must be in [1, " + std::to_string(npix) + "]");
  if (!(options.compactness > 0.0)) throw Error(ErrorCode::InvalidArgument, "compactness must be positive");
  if (options.iterations < 1) throw Error(ErrorCode::InvalidArgument, "iterations must be positive");

  const double n = options.n_superpixels;
  const double spacing = std::sqrt(static_cast<double>(npix) / n);
  int nx = std::max(1, static_cast<int>(std::lround(std::sqrt(n * w / h))));
  nx = std::min(nx, w);
  int ny = std::max(1, static_cast<int>(std::lround(n / nx)));
  ny = std::min(ny, h);

  std::vector<float> lab(npix * 3);
  for (std::size_t i = 0; i < npix; ++i) {
    const LabColor c = srgb_to_lab(image.pixels()[i]);
    lab[3 * i] = static_cast<float>(c.l);
    lab[3 * i + 1] = static_cast<float>(c.a);
    lab[3 * i + 2] = static_cast<float>(c.b);
  }

  std::vector<SlicCenter> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double cx = (i + 0.5) * w / nx;
      const double cy = (j + 0.5) * h / ny;
      const int px = std::min(w - 1, static_cast<int>(cx));
      const int py = std::min(h - 1, static_cast<int>(cy));
      const std::size_t p = image.index(px, py);
      centers.push_back({lab[3 * p], lab[3 * p + 1], lab[3 * p + 2], cx, cy});
    }
  }

  const double spatial_weight = options.compactness / spacing;
  std::vector<int> labels(npix, -1);
  std::vector<double> best(npix);
  std::vector<SlicCenter> acc(centers.size());
  std::vector<std::size_t> count(centers.size());

  for (int iter = 0; iter < options.iterations; ++iter) {
    std::fill(labels.begin(), labels.end(), -1);
    std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const SlicCenter& c = centers[k];
      // Pixel centres (x + 0.5) within `spacing` of the seed on each axis.
      const int x0 = std::max(0, static_cast<int>(std::ceil(c.x - spacing - 0.5)));
      const int x1 = std::min(w - 1, static_cast<int>(std::floor(c.x + spacing - 0.5)));
      const int y0 = std::max(0, static_cast<int>(std::ceil(c.y - spacing - 0.5)));
      const int y1 = std::min(h - 1, static_cast<int>(std::floor(c.y + spacing - 0.5)));
      for (int y = y0; y <= y1; ++y) {
        const double dy = y + 0.5 - c.y;
        for (int x = x0; x <= x1; ++x) {
          const std::size_t p = image.index(x, y);
          const double dl = lab[3 * p] - c.l, da = lab[3 * p + 1] - c.a, db = lab[3 * p + 2] - c.b;
          const double dx = x + 0.5 - c.x;
          const double d = std::sqrt(dl * dl + da * da + db * db) + spatial_weight * std::sqrt(dx * dx + dy * dy);
          if (d < best[p]) {
            best[p] = d;
            labels[p] = static_cast<int>(k);
          }
        }
      }
    }

    std::fill(acc.begin(), acc.end(), SlicCenter{0, 0, 0, 0, 0});
    std::fill(count.begin(), count.end(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = image.index(x, y);
        if (labels[p] < 0) continue;
        SlicCenter& a = acc[static_cast<std::size_t>(labels[p])];
        a.l += lab[3 * p];
        a.a += lab[3 * p + 1];
        a.b += lab[3 * p + 2];
        a.x += x + 0.5;
        a.y += y + 0.5;
        ++count[static_cast<std::size_t>(labels[p])];
      }
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (count[k] == 0) continue;
      const double inv = 1.0 / static_cast<double>(count[k]);
      centers[k] = {acc[k].l * inv, acc[k].a * inv, acc[k].b * inv, acc[k].x * inv, acc[k].y * inv};
    }
  }

  SuperpixelMap map;
  map.width = w;
  map.height = h;
  map.count = enforce_connectivity(w, h, labels);
  map.labels = std::move(labels);
  return map;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<RgbColor, std::size_t>> color_frequencies(const Image& image,
                                                                std::span<const std::size_t> region) {
  std::vector<std::uint32_t> values;
  values.reserve(region.size());
  for (std::size_t p : region) values.push_back(image.pixels()[p].packed());
  std::sort(values.begin(), values.end());
  std::vector<std::pair<RgbColor, std::size_t>> freq;
  for (std::size_t i = 0; i < values.size();) {
    std::size_t j = i;
    while (j < values.size() && values[j] == values[i]) ++j;
    freq.emplace_back(RgbColor::from_packed(values[i]), j - i);
    i = j;
  }
  std::stable_sort(freq.begin(), freq.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return freq;
}

RgbColor dominant_color(const Image& image, std::span<const std::size_t> region) {
  if (region.empty()) throw Error(ErrorCode::EmptyRegion, "dominant colour of an empty region");
  return color_frequencies(image, region).front().first;
}

}  // namespace pstudio::seg
