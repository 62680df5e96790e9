#include "pstudio/recolor.hpp"
#include "pstudio/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

namespace pstudio {

void RecolorOptions::validate() const {
  if (!(balance_eps > 0.0 && balance_eps < 1.0))
    throw Error(ErrorCode::InvalidArgument, "balance_eps must lie in (0, 1)");
  if (balance_max_iter < 1) throw Error(ErrorCode::InvalidArgument, "balance_max_iter must be at least 1");
  if (!(feather >= 0.0 && feather <= 1.0)) throw Error(ErrorCode::InvalidArgument, "feather must lie in [0, 1]");
}

namespace {

struct Sweep {
  std::vector<std::size_t> primary;
  std::vector<double> achieved;
  double residual = 0.0;
};

// Integer capacities summing to `total` by largest remainder (ties to the
// lower cluster index).
std::vector<std::uint64_t> capacities(std::span<const double> targets, std::uint64_t total) {
  const std::size_t k = targets.size();
  std::vector<std::uint64_t> cap(k);
  std::vector<double> rem(k);
  std::uint64_t used = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double exact = targets[i] * static_cast<double>(total);
    cap[i] = static_cast<std::uint64_t>(std::floor(exact));
    rem[i] = exact - static_cast<double>(cap[i]);
    used += cap[i];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; used < total; i = (i + 1) % k, ++used) ++cap[order[i]];
  while (used > total) {  // only through rounding of targets that sum past 1
    auto it = std::max_element(cap.begin(), cap.end());
    --*it;
    --used;
  }
  return cap;
}

}  // namespace

WeightedBalancedAssignment balanced_assign_weighted(const seg::FeatureMatrix& points,
                                                    std::span<const std::uint64_t> weights,
                                                    const seg::FeatureMatrix& centers,
                                                    std::span<const double> targets, const RecolorOptions& options) {
  options.validate();
  const std::size_t n = points.rows();
  const std::size_t k = centers.rows();
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "no centers");
  if (targets.size() != k) throw Error(ErrorCode::InvalidArgument, "one target proportion per center required");
  if (weights.size() != n) throw Error(ErrorCode::InvalidArgument, "one weight per point required");
  if (n > 0 && points.dim() != centers.dim())
    throw Error(ErrorCode::InvalidArgument, "points and centers differ in dimension");
  double target_sum = 0.0;
  for (double t : targets) {
    if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "target proportions must be positive");
    target_sum += t;
  }
  if (std::abs(target_sum - 1.0) > 1e-6) throw Error(ErrorCode::InvalidArgument, "target proportions must sum to 1");

  double scale = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b, ++pairs) scale += seg::squared_distance(centers.row(a), centers.row(b));
  if (pairs > 0) scale /= static_cast<double>(pairs);
  if (k > 1 && scale == 0.0) throw Error(ErrorCode::DegenerateCenters, "all centers coincide");

  const std::uint64_t total = std::accumulate(weights.begin(), weights.end(), std::uint64_t{0});
  if (total == 0) throw Error(ErrorCode::EmptyInput, "no point mass to assign");

  std::vector<double> dist(n * k);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < k; ++i) dist[j * k + i] = seg::squared_distance(points.row(j), centers.row(i));

  auto sweep = [&](const std::vector<double>& bias) {
    Sweep s;
    s.primary.resize(n);
    std::vector<std::uint64_t> load(k, 0);
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t best = 0;
      double best_cost = dist[j * k] - bias[0];
      for (std::size_t i = 1; i < k; ++i) {
        const double cost = dist[j * k + i] - bias[i];
        if (cost < best_cost) {
          best_cost = cost;
          best = i;
        }
      }
      s.primary[j] = best;
      load[best] += weights[j];
    }
    s.achieved.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      s.achieved[i] = static_cast<double>(load[i]) / static_cast<double>(total);
      s.residual = std::max(s.residual, std::abs(s.achieved[i] - targets[i]));
    }
    return s;
  };

  WeightedBalancedAssignment out;
  BalanceDiagnostics& diag = out.diagnostics;
  std::vector<double> bias(k, 0.0);
  Sweep current = sweep(bias);
  diag.iterations = 1;
  diag.residual_history.push_back(current.residual);

  double step = 1.0;
  while (current.residual > options.balance_eps && diag.iterations < options.balance_max_iter) {
    std::vector<double> trial_bias(k);
    for (std::size_t i = 0; i < k; ++i)
      trial_bias[i] = bias[i] + step * (targets[i] - current.achieved[i]) * scale;
    Sweep trial = sweep(trial_bias);
    ++diag.iterations;
    // Flat stretches (same assignment) are crossed freely; anything that makes
    // the residual worse is rejected and the step shrinks.
    if (trial.residual < current.residual ||
        (trial.residual == current.residual && trial.achieved == current.achieved)) {
      bias = std::move(trial_bias);
      current = std::move(trial);
    } else {
      step *= 0.5;
    }
    diag.residual_history.push_back(current.residual);
    if (step < 1e-12) break;
  }

  out.shares.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    if (weights[j] > 0) out.shares[j].push_back({current.primary[j], weights[j]});
  diag.biases = bias;
  diag.achieved = current.achieved;
  diag.residual = current.residual;
  if (current.residual <= options.balance_eps) return out;

  // Capacity fill. Over-full clusters only give, under-full ones only take, so
  // each point's mass leaves its primary cluster at most once per receiver.
  diag.repaired = true;
  const std::vector<std::uint64_t> cap = capacities(targets, total);
  std::vector<std::uint64_t> load(k, 0);
  for (std::size_t j = 0; j < n; ++j) load[current.primary[j]] += weights[j];
  std::vector<std::uint64_t> over(k, 0), under(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    if (load[i] > cap[i]) over[i] = load[i] - cap[i];
    else under[i] = cap[i] - load[i];
  }

  struct Candidate {
    double delta;
    std::size_t point;
    bool operator>(const Candidate& o) const { return delta != o.delta ? delta > o.delta : point > o.point; }
  };
  using Heap = std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>>;
  std::vector<Heap> heaps(k * k);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t a = current.primary[j];
    if (over[a] == 0 || weights[j] == 0) continue;
    for (std::size_t b = 0; b < k; ++b)
      if (under[b] > 0) heaps[a * k + b].push({dist[j * k + b] - dist[j * k + a], j});
  }
  std::vector<std::uint64_t> remaining(weights.begin(), weights.end());
  std::vector<std::vector<Share>> moved(n);

  for (;;) {
    std::size_t best_a = k, best_b = k;
    for (std::size_t a = 0; a < k; ++a) {
      if (over[a] == 0) continue;
      for (std::size_t b = 0; b < k; ++b) {
        if (under[b] == 0) continue;
        Heap& h = heaps[a * k + b];
        while (!h.empty() && remaining[h.top().point] == 0) h.pop();
        if (h.empty()) continue;
        if (best_a == k || heaps[best_a * k + best_b].top() > h.top()) {
          best_a = a;
          best_b = b;
        }
      }
    }
    if (best_a == k) break;
    const std::size_t j = heaps[best_a * k + best_b].top().point;
    const std::uint64_t m = std::min({remaining[j], over[best_a], under[best_b]});
    remaining[j] -= m;
    over[best_a] -= m;
    under[best_b] -= m;
    moved[j].push_back({best_b, m});
  }

  std::fill(load.begin(), load.end(), 0);
  for (std::size_t j = 0; j < n; ++j) {
    if (moved[j].empty()) {
      if (weights[j] > 0) load[current.primary[j]] += weights[j];
      continue;
    }
    std::vector<Share> shares;
    if (remaining[j] > 0) shares.push_back({current.primary[j], remaining[j]});
    for (const Share& s : moved[j]) {
      auto it = std::find_if(shares.begin(), shares.end(), [&](const Share& x) { return x.cluster == s.cluster; });
      if (it == shares.end()) shares.push_back(s);
      else it->count += s.count;
    }
    std::sort(shares.begin(), shares.end(), [](const Share& x, const Share& y) { return x.cluster < y.cluster; });
    for (const Share& s : shares) load[s.cluster] += s.count;
    out.shares[j] = std::move(shares);
  }
  diag.residual = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    diag.achieved[i] = static_cast<double>(load[i]) / static_cast<double>(total);
    diag.residual = std::max(diag.residual, std::abs(diag.achieved[i] - targets[i]));
  }
  diag.residual_history.push_back(std::min(diag.residual, diag.residual_history.back()));
  return out;
}

BalancedAssignment balanced_assign(const seg::FeatureMatrix& points, const seg::FeatureMatrix& centers,
                                   std::span<const double> targets, const RecolorOptions& options) {
  const std::vector<std::uint64_t> ones(points.rows(), 1);
  WeightedBalancedAssignment w = balanced_assign_weighted(points, ones, centers, targets, options);
  BalancedAssignment out;
  out.assignments.reserve(points.rows());
  for (const auto& s : w.shares) out.assignments.push_back(s.front().cluster);
  out.diagnostics = std::move(w.diagnostics);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

seg::FeatureMatrix lab_matrix(std::span<const RgbColor> colors) {
  std::vector<double> data;
  data.reserve(colors.size() * 3);
  for (RgbColor c : colors) {
    const LabColor lab = srgb_to_lab(c);
    data.insert(data.end(), {lab.l, lab.a, lab.b});
  }
  return seg::FeatureMatrix(3, std::move(data));
}

seg::FeatureMatrix center_matrix(const ColorClusters& source) {
  std::vector<double> data;
  for (const LabColor& c : source.centers) data.insert(data.end(), {c.l, c.a, c.b});
  return seg::FeatureMatrix(3, std::move(data));
}

std::vector<LabColor> lab_of(std::span<const RgbColor> colors) {
  std::vector<LabColor> out;
  out.reserve(colors.size());
  for (RgbColor c : colors) out.push_back(srgb_to_lab(c));
  return out;
}

void require_same_k(std::size_t source, std::size_t target) {
  if (source != target)
    throw Error(ErrorCode::KMismatch, "source has " + std::to_string(source) + " colours, target has " +
                                          std::to_string(target));
}

}  // namespace

Image recolor_1d(const Image& image, const ColorClusters& source, const Palette1D& target) {
  require_same_k(source.size(), target.colors.size());
  const ColorHistogram hist = color_histogram(image);
  const seg::FeatureMatrix points = lab_matrix(hist.colors);
  const seg::FeatureMatrix centers = center_matrix(source);
  const auto src = lab_of(source.colors);
  const auto dst = lab_of(target.colors);

  std::vector<RgbColor> mapped(hist.colors.size());
  for (std::size_t j = 0; j < hist.colors.size(); ++j) {
    const std::size_t i = seg::nearest_center(points.row(j), centers);
    const auto p = points.row(j);
    mapped[j] = lab_to_srgb(LabColor{p[0], p[1], p[2]} + (dst[i] - src[i]));
  }
  Image out = image;
  for (RgbColor& px : out.pixels()) px = mapped[hist.find(px)];
  return out;
}

RecolorResult recolor_1d_plus(const Image& image, const ColorClusters& source, const Palette1DPlus& target,
                              const RecolorOptions& options) {
  require_same_k(source.size(), target.colors.size());
  const ColorHistogram hist = color_histogram(image);
  const seg::FeatureMatrix points = lab_matrix(hist.colors);
  const seg::FeatureMatrix centers = center_matrix(source);
  const auto src = lab_of(source.colors);
  const auto dst = lab_of(target.colors);

  WeightedBalancedAssignment balanced =
      balanced_assign_weighted(points, hist.counts, centers, target.proportions, options);

  // Per exact colour: the output colour for each share, consumed in pixel
  // scan order.
  struct Slot {
    RgbColor color;
    std::uint64_t left;
  };
  std::vector<std::vector<Slot>> slots(hist.colors.size());
  for (std::size_t j = 0; j < hist.colors.size(); ++j) {
    const auto p = points.row(j);
    const LabColor lab{p[0], p[1], p[2]};
    const std::size_t natural = seg::nearest_center(p, centers);
    for (const Share& s : balanced.shares[j])
      slots[j].push_back({lab_to_srgb(lab + (dst[s.cluster] - src[natural])), s.count});
  }
  std::vector<std::size_t> cursor(hist.colors.size(), 0);
  Image out = image;
  for (RgbColor& px : out.pixels()) {
    const std::size_t j = hist.find(px);
    auto& list = slots[j];
    std::size_t& c = cursor[j];
    while (list[c].left == 0) ++c;
    --list[c].left;
    px = list[c].color;
  }
  return {std::move(out), std::move(balanced.diagnostics)};
}

Image recolor_2d(const Image& image, const Palette2D& source, const Palette2D& target, const RecolorOptions& options) {
  options.validate();
  if (source.grid_size != target.grid_size)
    throw Error(ErrorCode::GridMismatch, "source grid " + std::to_string(source.grid_size) + " vs target grid " +
                                             std::to_string(target.grid_size));
  const int g = source.grid_size;
  if (g < 1 || source.cells.size() != static_cast<std::size_t>(g * g) || target.cells.size() != source.cells.size())
    throw Error(ErrorCode::GridMismatch, "malformed grid");

  std::vector<LabColor> field(source.cells.size());
  for (std::size_t c = 0; c < field.size(); ++c) field[c] = srgb_to_lab(target.cells[c]) - srgb_to_lab(source.cells[c]);
  auto at = [&](int row, int col) -> const LabColor& { return field[static_cast<std::size_t>(row * g + col)]; };

  const int w = image.width(), h = image.height();
  const double feather = options.feather;
  // Interpolation coordinates: cell centres sit at integer positions.
  auto axis = [g](int i, int extent, int& lo, int& hi, double& frac) {
    const double u = (i + 0.5) * g / extent - 0.5;
    lo = std::clamp(static_cast<int>(std::floor(u)), 0, g - 1);
    hi = std::min(lo + 1, g - 1);
    frac = std::clamp(u - lo, 0.0, 1.0);
  };
  std::vector<int> x0(static_cast<std::size_t>(w)), x1(static_cast<std::size_t>(w)), xn(static_cast<std::size_t>(w));
  std::vector<double> fx(static_cast<std::size_t>(w));
  for (int x = 0; x < w; ++x) {
    axis(x, w, x0[x], x1[x], fx[x]);
    xn[x] = cell_of(x, g, w);
  }

  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    int y0, y1;
    double fy;
    axis(y, h, y0, y1, fy);
    const int yn = cell_of(y, g, h);
    for (int x = 0; x < w; ++x) {
      const LabColor top = at(y0, x0[x]) * (1.0 - fx[x]) + at(y0, x1[x]) * fx[x];
      const LabColor bottom = at(y1, x0[x]) * (1.0 - fx[x]) + at(y1, x1[x]) * fx[x];
      const LabColor smooth = top * (1.0 - fy) + bottom * fy;
      const LabColor offset = smooth * feather + at(yn, xn[x]) * (1.0 - feather);
      out.at(x, y) = lab_to_srgb(srgb_to_lab(image.at(x, y)) + offset);
    }
  }
  return out;
}

RecolorResult recolor(const Image& image, const AnyPalette& source, const AnyPalette& target,
                      const ExtractionParams& params, const RecolorOptions& options) {
  options.validate();
  if (source.index() != target.index())
    throw Error(ErrorCode::FormatMismatch, "source palette is " + std::string(format_name(format_of(source))) +
                                               ", target is " + std::string(format_name(format_of(target))));

  if (const auto* t2 = std::get_if<Palette2D>(&target)) {
    const auto& s2 = std::get<Palette2D>(source);
    if (s2.grid_size != t2->grid_size) throw Error(ErrorCode::GridMismatch, "grid sizes differ");
    if (s2.k != t2->k) throw Error(ErrorCode::KMismatch, "k differs between source and target");
    return {recolor_2d(image, s2, *t2, options), std::nullopt};
  }

  const auto source_colors = std::visit(
      [](const auto& p) -> std::vector<RgbColor> {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, Palette2D>) return p.cells;
        else return p.colors;
      },
      source);
  const int source_k = std::visit([](const auto& p) { return p.k; }, source);
  const int target_k = std::visit([](const auto& p) { return p.k; }, target);
  if (source_k != target_k) throw Error(ErrorCode::KMismatch, "k differs between source and target");
  const std::size_t target_size = std::visit(
      [](const auto& p) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, Palette2D>) return p.cells.size();
        else return p.colors.size();
      },
      target);
  require_same_k(source_colors.size(), target_size);

  const ColorClusters clusters = cluster_colors(image, params);
  if (clusters.colors != source_colors)
    throw Error(ErrorCode::InvalidArgument, "source palette was not extracted from this image with these parameters");

  if (const auto* t1 = std::get_if<Palette1D>(&target)) return {recolor_1d(image, clusters, *t1), std::nullopt};
  return recolor_1d_plus(image, clusters, std::get<Palette1DPlus>(target), options);
}

}  // namespace pstudio
