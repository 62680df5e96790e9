#include "pstudio/error.hpp"
#include "pstudio/recolor.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace pstudio;
using seg::FeatureMatrix;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

FeatureMatrix lab_points(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> l(20, 90), ab(-60, 60);
  FeatureMatrix m(3);
  for (std::size_t i = 0; i < n; ++i) m.push_back(std::vector<double>{l(gen), ab(gen), ab(gen)});
  return m;
}

std::vector<double> achieved_of(const std::vector<std::size_t>& a, std::size_t k) {
  std::vector<std::size_t> n(k, 0);
  for (std::size_t c : a) ++n[c];
  std::vector<double> out;
  for (std::size_t c : n) out.push_back(static_cast<double>(c) / static_cast<double>(a.size()));
  return out;
}

const RgbColor kRed{210, 40, 40}, kBlue{40, 60, 210};

Image two_colour(int w, int h, double share_red) {
  return oracle::banded(w, h, std::vector<RgbColor>{kRed, kBlue}, std::vector<double>{share_red, 1 - share_red});
}

ExtractionParams params_k(int k, int grid = 5) {
  ExtractionParams p;
  p.k = k;
  p.grid = grid;
  p.allow_any_k = true;
  return p;
}

}  // namespace

TEST_CASE("balanced assignment meets target shares") {
  const FeatureMatrix pts = lab_points(1, 2000);
  const FeatureMatrix centres{{40, 0, 0}, {70, 30, 30}, {60, -40, 20}, {50, 10, -50}};
  const std::vector<double> targets = {0.4, 0.3, 0.2, 0.1};
  RecolorOptions o;
  const BalancedAssignment r = balanced_assign(pts, centres, targets, o);
  const auto got = achieved_of(r.assignments, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(got[i] - targets[i]) <= o.balance_eps);
    CHECK(got[i] == doctest::Approx(r.diagnostics.achieved[i]));
  }
  CHECK(r.diagnostics.residual <= o.balance_eps);
  CHECK(r.diagnostics.iterations <= o.balance_max_iter);
  const auto& hist = r.diagnostics.residual_history;
  for (std::size_t i = 1; i < hist.size(); ++i) CHECK(hist[i] <= hist[i - 1]);
}

TEST_CASE("balanced assignment with natural targets moves nothing") {
  const FeatureMatrix pts = lab_points(2, 500);
  const FeatureMatrix centres{{40, 0, 0}, {70, 30, 30}, {60, -40, 20}};
  std::vector<std::size_t> natural;
  for (std::size_t i = 0; i < pts.rows(); ++i) natural.push_back(seg::nearest_center(pts.row(i), centres));
  const auto targets = achieved_of(natural, 3);
  const BalancedAssignment r = balanced_assign(pts, centres, targets, RecolorOptions{});
  CHECK(r.assignments == natural);
  CHECK(r.diagnostics.residual == doctest::Approx(0.0));
}

TEST_CASE("weighted balanced assignment splits identical points") {
  const FeatureMatrix pts{{50, 20, 0}, {50, -20, 0}};
  const std::vector<std::uint64_t> w = {500, 500};
  const FeatureMatrix centres{{50, 20, 0}, {50, -20, 0}};
  const std::vector<double> targets = {0.75, 0.25};
  const WeightedBalancedAssignment r = balanced_assign_weighted(pts, w, centres, targets, RecolorOptions{});
  std::vector<std::uint64_t> per(2, 0);
  for (std::size_t i = 0; i < 2; ++i) {
    std::uint64_t sum = 0;
    for (const Share& s : r.shares[i]) {
      sum += s.count;
      per[s.cluster] += s.count;
    }
    CHECK(sum == w[i]);
  }
  CHECK(per[0] == 750);
  CHECK(per[1] == 250);
  CHECK(r.diagnostics.residual <= 0.02);
}

TEST_CASE("degenerate centres are rejected") {
  const FeatureMatrix pts = lab_points(3, 10);
  const FeatureMatrix centres{{50, 0, 0}, {50, 0, 0}};
  const std::vector<double> targets = {0.5, 0.5};
  CHECK(code_of([&] { balanced_assign(pts, centres, targets, RecolorOptions{}); }) == ErrorCode::DegenerateCenters);
}

TEST_CASE("recolour options validation") {
  RecolorOptions o;
  o.balance_eps = 0;
  CHECK(code_of([&] { o.validate(); }) == ErrorCode::InvalidArgument);
  o = {};
  o.feather = 1.5;
  CHECK(code_of([&] { o.validate(); }) == ErrorCode::InvalidArgument);
  o = {};
  o.balance_max_iter = 0;
  CHECK(code_of([&] { o.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("identity law for every format") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Image img = oracle::random_scene(100 + seed, 60, 45);
    const ExtractionParams p = params_k(5);
    const AnyPalette sources[] = {extract_1d(img, p), extract_1d_plus(img, p), extract_2d(img, p)};
    for (const AnyPalette& src : sources) {
      const RecolorResult r = recolor(img, src, src, p, RecolorOptions{});
      CHECK(oracle::mean_abs_channel_diff(r.image, img) <= 1.0);
      CHECK(oracle::max_abs_channel_diff(r.image, img) <= 1);
    }
  }
}

TEST_CASE("swapping two palette colours swaps the regions") {
  const Image img = two_colour(30, 20, 0.4);
  const ExtractionParams p = params_k(2);
  Palette1D pal = extract_1d(img, p);
  Palette1D swapped = pal;
  std::swap(swapped.colors[0], swapped.colors[1]);
  const Image out = recolor(img, pal, swapped, p, RecolorOptions{}).image;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const RgbColor want = img.pixels()[i] == kRed ? kBlue : kRed;
    const RgbColor got = out.pixels()[i];
    CHECK(std::abs(got.r - want.r) <= 1);
    CHECK(std::abs(got.g - want.g) <= 1);
    CHECK(std::abs(got.b - want.b) <= 1);
  }
}

TEST_CASE("1d+ follows requested proportions") {
  const Image img = two_colour(64, 64, 0.5);
  const ExtractionParams p = params_k(2);
  const Palette1DPlus src = extract_1d_plus(img, p);
  Palette1DPlus tgt = src;
  tgt.proportions = {0.75, 0.25};
  const RecolorResult r = recolor(img, src, tgt, p, RecolorOptions{});
  REQUIRE(r.balance.has_value());
  CHECK(r.balance->residual <= 0.02);
  const auto counts = oracle::count_nearest(r.image, tgt.colors);
  CHECK(std::abs(static_cast<double>(counts[0]) / img.size() - 0.75) <= 0.05);
  const Palette1DPlus again = extract_1d_plus(r.image, p);
  CHECK(std::abs(again.proportions[0] - 0.75) <= 0.05);
}

TEST_CASE("editing one 2d cell moves only its neighbourhood") {
  const int grid = 5, side = grid * 21;
  const Image img = oracle::random_scene(7, side, side, 10);
  ExtractionParams p;
  p.k = 5;
  p.grid = grid;
  const Palette2D src = extract_2d(img, p);
  Palette2D tgt = src;
  const RgbColor old = src.at(2, 2);
  const RgbColor edited{static_cast<std::uint8_t>(std::min(255, old.r + 30)), old.g,
                        static_cast<std::uint8_t>(std::max(0, old.b - 20))};
  tgt.at(2, 2) = edited;
  const LabColor offset = srgb_to_lab(edited) - srgb_to_lab(old);
  for (double feather : {1.0, 0.0}) {
    RecolorOptions o;
    o.feather = feather;
    const Image out = recolor(img, src, tgt, p, o).image;
    const int cx = 2 * 21 + 10, cy = 2 * 21 + 10;
    const RgbColor want = lab_to_srgb(srgb_to_lab(img.at(cx, cy)) + offset);
    const RgbColor got = out.at(cx, cy);
    CHECK(std::abs(got.r - want.r) <= 1);
    CHECK(std::abs(got.g - want.g) <= 1);
    CHECK(std::abs(got.b - want.b) <= 1);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        if (std::max(std::abs(cell_of(x, grid, side) - 2), std::abs(cell_of(y, grid, side) - 2)) < 2) continue;
        const RgbColor a = img.at(x, y), b = out.at(x, y);
        REQUIRE(std::max({std::abs(a.r - b.r), std::abs(a.g - b.g), std::abs(a.b - b.b)}) <= 1);
      }
  }
}

TEST_CASE("recolour rejects mismatched targets") {
  const Image img = oracle::random_scene(8, 40, 40);
  ExtractionParams p;
  p.k = 5;
  const Palette1D one = extract_1d(img, p);
  const Palette1DPlus plus = extract_1d_plus(img, p);
  const Palette2D two = extract_2d(img, p);
  CHECK(code_of([&] { recolor(img, one, plus, p, {}); }) == ErrorCode::FormatMismatch);
  Palette1D fewer = one;
  fewer.colors.pop_back();
  CHECK(code_of([&] { recolor(img, one, fewer, p, {}); }) == ErrorCode::KMismatch);
  Palette1D other_k = one;
  other_k.k = 6;
  CHECK(code_of([&] { recolor(img, one, other_k, p, {}); }) == ErrorCode::KMismatch);
  Palette2D bigger{6, std::vector<RgbColor>(36, RgbColor{1, 2, 3}), 5};
  CHECK(code_of([&] { recolor(img, two, bigger, p, {}); }) == ErrorCode::GridMismatch);
  Palette1D foreign = one;
  foreign.colors[0] = {1, 1, 1};
  CHECK(code_of([&] { recolor(img, foreign, one, p, {}); }) == ErrorCode::InvalidArgument);
}
