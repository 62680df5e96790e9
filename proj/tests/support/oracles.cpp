#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace oracle {

LabColor lab_reference(RgbColor c) {
  auto lin = [](int v) {
    const double s = v / 255.0;
    return s <= 0.04045 ? s / 12.92 : std::pow((s + 0.055) / 1.055, 2.4);
  };
  const double r = lin(c.r), g = lin(c.g), b = lin(c.b);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  auto f = [](double t) {
    const double d = 6.0 / 29.0;
    return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0 / 29.0;
  };
  const double fx = f(x / 0.95047), fy = f(y / 1.0), fz = f(z / 1.08883);
  return {116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)};
}

Image banded(int w, int h, std::span<const RgbColor> colors, std::span<const double> shares,
             std::vector<std::uint64_t>* counts) {
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<RgbColor> px;
  std::vector<std::uint64_t> c(colors.size());
  for (std::size_t i = 0; i < colors.size(); ++i) {
    std::size_t m = i + 1 == colors.size() ? n - px.size() : static_cast<std::size_t>(std::llround(shares[i] * n));
    c[i] = m;
    px.insert(px.end(), m, colors[i]);
  }
  if (counts) *counts = c;
  return Image(w, h, std::move(px));
}

std::vector<std::uint64_t> count_exact(const Image& image, std::span<const RgbColor> colors) {
  std::vector<std::uint64_t> out(colors.size(), 0);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (std::size_t i = 0; i < colors.size(); ++i)
        if (image.at(x, y) == colors[i]) ++out[i];
  return out;
}

std::vector<std::uint64_t> count_nearest(const Image& image, std::span<const RgbColor> colors) {
  std::vector<LabColor> labs;
  for (RgbColor c : colors) labs.push_back(lab_reference(c));
  std::vector<std::uint64_t> out(colors.size(), 0);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const LabColor p = lab_reference(image.at(x, y));
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < labs.size(); ++i) {
        const double d = std::hypot(p.l - labs[i].l, p.a - labs[i].a, p.b - labs[i].b);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      ++out[best];
    }
  return out;
}

std::vector<RgbColor> majority_cells(const Image& image, int grid) {
  auto start = [&](int c, int extent) {
    return static_cast<int>((static_cast<long long>(c) * extent + grid - 1) / grid);
  };
  std::vector<RgbColor> out;
  for (int r = 0; r < grid; ++r)
    for (int c = 0; c < grid; ++c) {
      std::map<std::tuple<int, int, int>, int> votes;
      for (int y = start(r, image.height()); y < start(r + 1, image.height()); ++y)
        for (int x = start(c, image.width()); x < start(c + 1, image.width()); ++x) {
          const RgbColor p = image.at(x, y);
          ++votes[{p.r, p.g, p.b}];
        }
      auto best = votes.begin();
      for (auto it = votes.begin(); it != votes.end(); ++it)
        if (it->second > best->second) best = it;
      const auto [rr, gg, bb] = best->first;
      out.push_back(RgbColor{static_cast<std::uint8_t>(rr), static_cast<std::uint8_t>(gg), static_cast<std::uint8_t>(bb)});
    }
  return out;
}

Image random_scene(std::uint64_t seed, int w, int h, int jitter) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> channel(0, 255);
  auto color = [&] {
    return RgbColor{static_cast<std::uint8_t>(channel(gen)), static_cast<std::uint8_t>(channel(gen)),
                    static_cast<std::uint8_t>(channel(gen))};
  };
  Image img(w, h, color());
  const int rects = 3 + static_cast<int>(gen() % 4);
  for (int i = 0; i < rects; ++i) {
    const RgbColor c = color();
    const int x0 = static_cast<int>(gen() % w), y0 = static_cast<int>(gen() % h);
    const int x1 = std::min(w, x0 + 1 + static_cast<int>(gen() % (w / 2 + 1)));
    const int y1 = std::min(h, y0 + 1 + static_cast<int>(gen() % (h / 2 + 1)));
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) img.at(x, y) = c;
  }
  if (jitter > 0) {
    std::uniform_int_distribution<int> j(-jitter, jitter);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        RgbColor& p = img.at(x, y);
        p.r = static_cast<std::uint8_t>(std::clamp(p.r + j(gen), 0, 255));
        p.g = static_cast<std::uint8_t>(std::clamp(p.g + j(gen), 0, 255));
        p.b = static_cast<std::uint8_t>(std::clamp(p.b + j(gen), 0, 255));
      }
  }
  return img;
}

double mean_abs_channel_diff(const Image& a, const Image& b) {
  double sum = 0.0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      const RgbColor p = a.at(x, y), q = b.at(x, y);
      sum += std::abs(p.r - q.r) + std::abs(p.g - q.g) + std::abs(p.b - q.b);
    }
  return sum / (3.0 * a.width() * a.height());
}

int max_abs_channel_diff(const Image& a, const Image& b) {
  int m = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      const RgbColor p = a.at(x, y), q = b.at(x, y);
      m = std::max({m, std::abs(p.r - q.r), std::abs(p.g - q.g), std::abs(p.b - q.b)});
    }
  return m;
}

double kruskal_h(const std::vector<std::vector<double>>& groups) {
  std::vector<double> all;
  for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
  auto rank = [&](double v) {
    double below = 0, equal = 0;
    for (double u : all) {
      if (u < v) ++below;
      if (u == v) ++equal;
    }
    return below + (equal + 1) / 2;
  };
  const double n = static_cast<double>(all.size());
  const double rbar = (n + 1) / 2;
  double between = 0, total = 0;
  for (const auto& g : groups) {
    double s = 0;
    for (double v : g) {
      const double r = rank(v);
      s += r;
      total += (r - rbar) * (r - rbar);
    }
    const double m = s / static_cast<double>(g.size());
    between += static_cast<double>(g.size()) * (m - rbar) * (m - rbar);
  }
  return (n - 1) * between / total;
}

namespace {

template <class F>
double simpson(F f, double a, double b, int intervals) {
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

double phi(double z) { return std::exp(-z * z / 2) / std::sqrt(2 * M_PI); }
double Phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double range_cdf(double w, int k) {
  if (w <= 0) return 0;
  return k * simpson([&](double z) { return phi(z) * std::pow(Phi(z) - Phi(z - w), k - 1); }, -9.0, 9.0 + w, 600);
}

}  // namespace

double studentized_range_sf(double q, int k, double df) {
  if (q <= 0) return 1;
  const double lognorm = df / 2 * std::log(df / 2) - std::lgamma(df / 2) + std::log(2.0);
  auto density = [&](double s) { return s <= 0 ? 0.0 : std::exp(lognorm + (df - 1) * std::log(s) - df * s * s / 2); };
  const double width = 12.0 / std::sqrt(2 * df);
  const double lo = std::max(0.0, 1 - width), hi = 1 + width + 2;
  return simpson([&](double s) { return density(s) * (1 - range_cdf(q * s, k)); }, lo, hi, 600);
}

std::vector<std::vector<double>> tukey_pvalues(const std::vector<std::vector<double>>& groups) {
  const std::size_t k = groups.size();
  std::vector<double> mean(k);
  double sse = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < k; ++i) {
    mean[i] = std::accumulate(groups[i].begin(), groups[i].end(), 0.0) / groups[i].size();
    for (double v : groups[i]) sse += (v - mean[i]) * (v - mean[i]);
    n += groups[i].size();
  }
  const double df = static_cast<double>(n - k);
  const double mse = sse / df;
  std::vector<std::vector<double>> p(k, std::vector<double>(k, 1.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if (i != j) {
        const double q = std::abs(mean[i] - mean[j]) / std::sqrt(mse / 2 * (1.0 / groups[i].size() + 1.0 / groups[j].size()));
        p[i][j] = studentized_range_sf(q, static_cast<int>(k), df);
      }
  return p;
}

double brute_force_assignment(std::span<const double> cost, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += cost[i * n + perm[i]];
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace oracle
