#include "pstudio/error.hpp"
#include "pstudio/segmentation.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <queue>
#include <random>
#include <set>

using namespace pstudio;
using namespace pstudio::seg;

namespace {

FeatureMatrix blobs(std::uint64_t seed, const std::vector<std::vector<double>>& centres, int per, double spread) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, spread);
  FeatureMatrix m(centres.front().size());
  for (const auto& c : centres)
    for (int i = 0; i < per; ++i) {
      std::vector<double> p = c;
      for (double& v : p) v += noise(gen);
      m.push_back(p);
    }
  return m;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

// Every label forms exactly one 4-connected component.
bool labels_connected(const SuperpixelMap& m) {
  std::vector<char> seen(m.labels.size(), 0);
  std::vector<int> components(static_cast<std::size_t>(m.count), 0);
  for (std::size_t s = 0; s < m.labels.size(); ++s) {
    if (seen[s]) continue;
    const int label = m.labels[s];
    ++components[static_cast<std::size_t>(label)];
    std::queue<std::size_t> q;
    q.push(s);
    seen[s] = 1;
    while (!q.empty()) {
      const std::size_t i = q.front();
      q.pop();
      const int x = static_cast<int>(i % m.width), y = static_cast<int>(i / m.width);
      const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
      for (int d = 0; d < 4; ++d) {
        const int nx = x + dx[d], ny = y + dy[d];
        if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * m.width + nx;
        if (!seen[j] && m.labels[j] == label) {
          seen[j] = 1;
          q.push(j);
        }
      }
    }
  }
  return std::all_of(components.begin(), components.end(), [](int c) { return c == 1; });
}

}  // namespace

TEST_CASE("k-means separates well-separated blobs") {
  const FeatureMatrix pts = blobs(1, {{0, 0}, {20, 0}, {0, 20}}, 30, 1.0);
  const Clustering c = kmeans(pts, 3, 42);
  CHECK(c.converged);
  for (int b = 0; b < 3; ++b) {
    std::set<std::size_t> labels(c.assignments.begin() + b * 30, c.assignments.begin() + (b + 1) * 30);
    CHECK(labels.size() == 1);
  }
  CHECK(std::set<std::size_t>(c.assignments.begin(), c.assignments.end()).size() == 3);
}

TEST_CASE("k-means properties") {
  const FeatureMatrix pts = blobs(2, {{0, 0, 0}, {5, 5, 5}, {10, 0, 3}, {3, 9, 1}}, 25, 2.5);
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    const Clustering c = kmeans(pts, 4, seed);
    for (std::size_t i = 1; i < c.inertia_history.size(); ++i)
      CHECK(c.inertia_history[i] <= c.inertia_history[i - 1] + 1e-9);
    double inertia = 0;
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      CHECK(c.assignments[i] == nearest_center(pts.row(i), c.centers));
      inertia += squared_distance(pts.row(i), c.centers.row(c.assignments[i]));
    }
    CHECK(inertia == doctest::Approx(c.inertia));
    const Clustering again = kmeans(pts, 4, seed);
    CHECK(again.centers == c.centers);
    CHECK(again.assignments == c.assignments);
  }
}

TEST_CASE("k-means argument errors") {
  const FeatureMatrix pts{{0, 0}, {0, 0}, {1, 1}};
  CHECK(count_distinct_rows(pts) == 2);
  CHECK(code_of([&] { kmeans(pts, 3, 0); }) == ErrorCode::InvalidK);
  CHECK(code_of([&] { kmeans(pts, 0, 0); }) == ErrorCode::InvalidK);
  CHECK(code_of([&] { kmeans(FeatureMatrix(2), 1, 0); }) == ErrorCode::EmptyInput);
  const Clustering c = kmeans(pts, 2, 0);
  CHECK(c.inertia == doctest::Approx(0.0));
}

TEST_CASE("weighted k-means equals repeating points") {
  const FeatureMatrix base{{0, 0}, {1, 0}, {10, 10}, {11, 10}, {30, 0}};
  const std::vector<double> w = {3, 1, 2, 2, 4};
  FeatureMatrix repeated(2);
  for (std::size_t i = 0; i < base.rows(); ++i)
    for (int r = 0; r < static_cast<int>(w[i]); ++r) repeated.push_back(base.row(i));
  const Clustering a = kmeans_weighted(base, w, {3, 5, 300});
  const Clustering b = kmeans(repeated, 3, 5);
  auto sorted_centres = [](const FeatureMatrix& m) {
    std::vector<std::vector<double>> v;
    for (std::size_t i = 0; i < m.rows(); ++i) v.emplace_back(m.row(i).begin(), m.row(i).end());
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto ca = sorted_centres(a.centers), cb = sorted_centres(b.centers);
  REQUIRE(ca.size() == cb.size());
  for (std::size_t i = 0; i < ca.size(); ++i)
    for (std::size_t d = 0; d < 2; ++d) CHECK(ca[i][d] == doctest::Approx(cb[i][d]));
  CHECK(ca[0][0] == doctest::Approx(0.25));
  CHECK(a.inertia == doctest::Approx(b.inertia));
}

TEST_CASE("SLIC splits a two-colour image along the colour edge") {
  Image img(40, 20, RgbColor{200, 30, 30});
  for (int y = 0; y < 20; ++y)
    for (int x = 20; x < 40; ++x) img.at(x, y) = {30, 30, 200};
  const SuperpixelMap m = slic(img, {2, 10.0, 10});
  CHECK(m.count == 2);
  for (const auto& region : m.regions()) {
    std::set<std::uint32_t> colours;
    for (std::size_t i : region) colours.insert(img.pixels()[i].packed());
    CHECK(colours.size() == 1);
  }
}

TEST_CASE("SLIC labels are complete, compact and connected") {
  const Image img = oracle::random_scene(11, 64, 48);
  for (int n : {1, 7, 40, 200}) {
    const SuperpixelMap m = slic(img, {n, 10.0, 10});
    CHECK(m.labels.size() == img.size());
    CHECK(m.count >= 1);
    const auto sizes = m.sizes();
    CHECK(sizes.size() == static_cast<std::size_t>(m.count));
    for (std::size_t s : sizes) CHECK(s > 0);
    for (int l : m.labels) CHECK((l >= 0 && l < m.count));
    CHECK(labels_connected(m));
    CHECK(slic(img, {n, 10.0, 10}).labels == m.labels);
  }
}

TEST_CASE("SLIC argument errors") {
  const Image img(4, 4);
  CHECK(code_of([&] { slic(img, {0, 10.0, 10}); }) == ErrorCode::InvalidCount);
  CHECK(code_of([&] { slic(img, {17, 10.0, 10}); }) == ErrorCode::InvalidCount);
  CHECK(slic(img, {16, 10.0, 10}).count >= 1);
}

TEST_CASE("dominant colour and frequencies") {
  Image img(4, 1);
  img.at(0, 0) = {5, 5, 5};
  img.at(1, 0) = {9, 9, 9};
  img.at(2, 0) = {9, 9, 9};
  img.at(3, 0) = {5, 5, 5};
  const std::vector<std::size_t> all = {0, 1, 2, 3};
  CHECK(dominant_color(img, all) == RgbColor{5, 5, 5});
  const std::vector<std::size_t> some = {1, 2, 3};
  CHECK(dominant_color(img, some) == RgbColor{9, 9, 9});
  const auto f = color_frequencies(img, some);
  REQUIRE(f.size() == 2);
  CHECK(f[0].second == 2);
  CHECK(code_of([&] { dominant_color(img, std::span<const std::size_t>{}); }) == ErrorCode::EmptyRegion);
}
