#include "pstudio/stimulus.hpp"
#include "pstudio/error.hpp"
#include "pstudio/palette_json.hpp"
#include "pstudio/png_io.hpp"
#include "pstudio/random.hpp"
#include "pstudio/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <tuple>

namespace pstudio::stimulus {

std::vector<std::size_t> min_cost_matching(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw Error(ErrorCode::InvalidArgument, "cost matrix must be n x n");
  // Hungarian method with row/column potentials, 1-based internally.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> match(n);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) match[p[j] - 1] = j - 1;
  return match;
}

double palette_distance(std::span<const LabColor> a, std::span<const LabColor> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::SizeMismatch, "palettes have " + std::to_string(a.size()) + " and " +
                                             std::to_string(b.size()) + " colours");
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = delta_e(a[i], b[j]);
  const auto match = min_cost_matching(cost, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost[i * n + match[i]];
  return total;
}

namespace {

std::vector<LabColor> lab_colors(const std::vector<RgbColor>& colors) {
  std::vector<LabColor> out;
  for (RgbColor c : colors) out.push_back(srgb_to_lab(c));
  return out;
}

constexpr int kRestarts = 10;

// Lowest-inertia run over several k-means++ seedings.
seg::Clustering best_kmeans(const seg::FeatureMatrix& points, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  seg::Clustering best = seg::kmeans(points, k, rng.next_u64());
  for (int r = 1; r < kRestarts; ++r) {
    seg::Clustering c = seg::kmeans(points, k, rng.next_u64());
    if (c.inertia < best.inertia) best = std::move(c);
  }
  return best;
}

}  // namespace

double palette_distance(const Palette1D& a, const Palette1D& b) {
  return palette_distance(lab_colors(a.colors), lab_colors(b.colors));
}

std::vector<std::vector<Candidate>> select_representatives(const PaletteCorpus& corpus, std::size_t k,
                                                           std::size_t top, std::uint64_t seed) {
  if (corpus.entries.empty()) throw Error(ErrorCode::EmptyCorpus, "no palettes to cluster");
  const std::size_t width = corpus.entries.front().palette_1d.colors.size();
  seg::FeatureMatrix embedding(3 * width);
  std::vector<std::vector<LabColor>> labs;
  for (const auto& e : corpus.entries) {
    if (e.palette_1d.colors.size() != width)
      throw Error(ErrorCode::SizeMismatch, "corpus palettes differ in colour count");
    labs.push_back(lab_colors(e.palette_1d.colors));
    // Sorted by (L, a, b) so colour order within a palette does not matter.
    std::vector<LabColor> sorted = labs.back();
    std::sort(sorted.begin(), sorted.end(),
              [](const LabColor& x, const LabColor& y) { return std::tie(x.l, x.a, x.b) < std::tie(y.l, y.a, y.b); });
    std::vector<double> row;
    for (const LabColor& c : sorted) row.insert(row.end(), {c.l, c.a, c.b});
    embedding.push_back(row);
  }
  const seg::Clustering clustering = best_kmeans(embedding, k, seed);

  std::vector<std::vector<Candidate>> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto center = clustering.centers.row(c);
    std::vector<LabColor> center_colors;
    for (std::size_t i = 0; i < width; ++i) center_colors.push_back({center[3 * i], center[3 * i + 1], center[3 * i + 2]});
    for (std::size_t e = 0; e < corpus.entries.size(); ++e)
      if (clustering.assignments[e] == c) out[c].push_back({e, palette_distance(center_colors, labs[e])});
    std::stable_sort(out[c].begin(), out[c].end(),
                     [](const Candidate& a, const Candidate& b) { return a.distance < b.distance; });
    if (out[c].size() > top) out[c].resize(top);
  }
  return out;
}

namespace {

std::vector<double> sorted_shares(const Palette2D& p) {
  std::vector<std::size_t> counts;
  for (RgbColor c : p.distinct_colors()) counts.push_back(static_cast<std::size_t>(std::count(p.cells.begin(), p.cells.end(), c)));
  std::sort(counts.rbegin(), counts.rend());
  std::vector<double> shares(kSurveyColors, 0.0);
  for (std::size_t i = 0; i < std::min(counts.size(), kSurveyColors); ++i)
    shares[i] = static_cast<double>(counts[i]) / static_cast<double>(p.cells.size());
  return shares;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<double> canonical_proportion(const PaletteCorpus& corpus) {
  if (corpus.entries.empty()) throw Error(ErrorCode::EmptyCorpus, "no 2D palettes");
  std::vector<std::vector<double>> columns(kSurveyColors);
  for (const auto& e : corpus.entries) {
    const auto shares = sorted_shares(e.palette_2d);
    for (std::size_t i = 0; i < kSurveyColors; ++i) columns[i].push_back(shares[i]);
  }
  std::vector<double> out;
  for (auto& col : columns) out.push_back(median(std::move(col)));
  const double sum = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& v : out) v /= sum;
  return out;
}

std::vector<std::size_t> LayoutSignature::rank_counts() const {
  std::vector<std::size_t> counts(kSurveyColors, 0);
  for (std::uint8_t l : labels) ++counts[l];
  return counts;
}

LayoutSignature standardize_layout(const Palette2D& palette) {
  struct Entry {
    RgbColor color;
    std::size_t count;
    std::size_t first;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < palette.cells.size(); ++i) {
    auto it = std::find_if(entries.begin(), entries.end(), [&](const Entry& e) { return e.color == palette.cells[i]; });
    if (it == entries.end()) entries.push_back({palette.cells[i], 1, i});
    else ++it->count;
  }
  if (entries.size() != kSurveyColors)
    throw Error(ErrorCode::ColorCountMismatch, "layout needs exactly 5 colours, grid has " + std::to_string(entries.size()));
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.count != b.count ? a.count > b.count : a.first < b.first; });
  LayoutSignature sig{palette.grid_size, std::vector<std::uint8_t>(palette.cells.size())};
  for (std::size_t i = 0; i < palette.cells.size(); ++i) {
    for (std::size_t r = 0; r < entries.size(); ++r)
      if (entries[r].color == palette.cells[i]) sig.labels[i] = static_cast<std::uint8_t>(r);
  }
  return sig;
}

bool matches_proportion(const LayoutSignature& layout, std::span<const double> proportion) {
  const auto counts = layout.rank_counts();
  const double cells = static_cast<double>(layout.labels.size());
  for (std::size_t r = 0; r < std::min(proportion.size(), counts.size()); ++r)
    if (std::abs(static_cast<double>(counts[r]) - proportion[r] * cells) > 1.0) return false;
  return true;
}

std::vector<LayoutChoice> cluster_layouts(std::span<const LayoutSignature> signatures, std::size_t k,
                                          std::span<const double> proportion, std::uint64_t seed) {
  if (signatures.empty()) throw Error(ErrorCode::InsufficientLayouts, "no layouts");
  const std::size_t cells = signatures.front().labels.size();
  seg::FeatureMatrix onehot(cells * kSurveyColors);
  for (const auto& s : signatures) {
    if (s.labels.size() != cells) throw Error(ErrorCode::SizeMismatch, "layouts differ in grid size");
    std::vector<double> row(cells * kSurveyColors, 0.0);
    for (std::size_t i = 0; i < cells; ++i) row[i * kSurveyColors + s.labels[i]] = 1.0;
    onehot.push_back(row);
  }
  const std::size_t distinct = seg::count_distinct_rows(onehot);
  if (distinct < k)
    throw Error(ErrorCode::InsufficientLayouts, "need " + std::to_string(k) + " distinct layouts, have " +
                                                    std::to_string(distinct));
  const seg::Clustering clustering = best_kmeans(onehot, k, seed);

  std::vector<LayoutChoice> out;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t best = signatures.size(), best_any = signatures.size();
    double best_d = 0.0, best_any_d = 0.0;
    for (std::size_t i = 0; i < signatures.size(); ++i) {
      if (clustering.assignments[i] != c) continue;
      const double d = seg::squared_distance(onehot.row(i), clustering.centers.row(c));
      if (best_any == signatures.size() || d < best_any_d) {
        best_any = i;
        best_any_d = d;
      }
      if (!matches_proportion(signatures[i], proportion)) continue;
      if (best == signatures.size() || d < best_d) {
        best = i;
        best_d = d;
      }
    }
    if (best_any == signatures.size()) continue;  // empty cluster after max_iter
    const bool matched = best != signatures.size();
    const std::size_t pick = matched ? best : best_any;
    out.push_back({signatures[pick], pick, matched});
  }
  if (out.size() < k) throw Error(ErrorCode::InsufficientLayouts, "k-means left a cluster empty");
  return out;
}

std::vector<SurveyCondition> generate_conditions(std::span<const RgbColor> colors, std::span<const double> proportion,
                                                 std::span<const LayoutSignature> layouts, std::uint64_t seed) {
  const std::size_t n = kSurveyColors;
  if (colors.size() != n || proportion.size() != n || layouts.size() != n)
    throw Error(ErrorCode::ArityError, "conditions need 5 colours, 5 proportions and 5 layouts");
  for (const auto& l : layouts) {
    if (l.grid_size < 1 || l.labels.size() != static_cast<std::size_t>(l.grid_size * l.grid_size))
      throw Error(ErrorCode::ArityError, "malformed layout");
    for (std::uint8_t v : l.labels)
      if (v >= n) throw Error(ErrorCode::ArityError, "layout label out of range");
  }
  std::vector<double> slots(proportion.begin(), proportion.end());
  std::sort(slots.rbegin(), slots.rend());

  // Under rotation r, proportion slot s is held by colour (s + r) mod 5.
  auto holder = [&](std::size_t slot, std::size_t r) { return colors[(slot + r) % n]; };

  std::vector<SurveyCondition> out;
  SurveyCondition uniform;
  uniform.id = "1d";
  uniform.format = PaletteFormat::Uniform1D;
  uniform.colors.assign(colors.begin(), colors.end());
  out.push_back(std::move(uniform));

  for (std::size_t r = 0; r < n; ++r) {
    SurveyCondition c;
    c.id = "1dplus-r" + std::to_string(r);
    c.format = PaletteFormat::Proportional1D;
    for (std::size_t s = 0; s < n; ++s) c.colors.push_back(holder(s, r));
    c.proportions = slots;
    c.rotation = static_cast<int>(r);
    out.push_back(std::move(c));
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t l = 0; l < n; ++l) {
      SurveyCondition c;
      c.id = "2d-r" + std::to_string(r) + "-l" + std::to_string(l);
      c.format = PaletteFormat::Spatial2D;
      for (std::size_t s = 0; s < n; ++s) c.colors.push_back(holder(s, r));
      c.proportions = slots;
      c.rotation = static_cast<int>(r);
      c.layout = static_cast<int>(l);
      c.grid.grid_size = layouts[l].grid_size;
      c.grid.k = static_cast<int>(n);
      for (std::uint8_t rank : layouts[l].labels) c.grid.cells.push_back(holder(rank, r));
      out.push_back(std::move(c));
    }
  }

  std::vector<std::size_t> order(out.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  std::vector<SurveyCondition> presented;
  presented.reserve(out.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    presented.push_back(std::move(out[order[i]]));
    presented.back().presentation_index = static_cast<int>(i);
  }
  return presented;
}

Image render_swatch(const SurveyCondition& condition, int width, int height) {
  if (condition.format == PaletteFormat::Spatial2D) return upsample_preview(condition.grid, width, height);
  Image out(width, height);
  const std::size_t n = condition.colors.size();
  std::vector<double> bounds;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += condition.format == PaletteFormat::Proportional1D ? condition.proportions[i] : 1.0 / static_cast<double>(n);
    bounds.push_back(acc);
  }
  for (int x = 0; x < width; ++x) {
    const double t = (x + 0.5) / width;
    std::size_t block = 0;
    while (block + 1 < n && t >= bounds[block]) ++block;
    for (int y = 0; y < height; ++y) out.at(x, y) = condition.colors[block];
  }
  return out;
}

nlohmann::json condition_to_json(const SurveyCondition& c) {
  nlohmann::json j;
  j["id"] = c.id;
  j["format"] = std::string(format_name(c.format));
  nlohmann::json colors = nlohmann::json::array();
  for (RgbColor col : c.colors) colors.push_back(to_hex(col));
  j["colors"] = std::move(colors);
  if (!c.proportions.empty()) j["proportions"] = c.proportions;
  if (c.rotation >= 0) j["rotation"] = c.rotation;
  if (c.layout >= 0) {
    j["layout"] = c.layout;
    const auto grid = palette_to_json(c.grid);
    j["grid"] = grid["grid"];
    j["grid_size"] = c.grid.grid_size;
  }
  j["presentation_index"] = c.presentation_index;
  return j;
}

PaletteCorpus load_corpus(const std::filesystem::path& dir, const ExtractionParams& params) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());

  ExtractionParams p = params;
  p.k = static_cast<int>(kSurveyColors);
  PaletteCorpus corpus;
  for (const auto& f : files) {
    CorpusEntry entry;
    entry.id = f.stem().string();
    const auto ext = f.extension().string();
    try {
      if (ext == ".png") {
        const Image img = read_png(f);
        entry.palette_1d = extract_1d(img, p);
        entry.palette_2d = extract_2d(img, p);
      } else if (ext == ".json") {
        std::ifstream in(f);
        const auto j = nlohmann::json::parse(in);
        entry.id = j.value("id", entry.id);
        auto p1 = palette_from_json(j.at("palette_1d"));
        auto p2 = palette_from_json(j.at("palette_2d"));
        if (!std::holds_alternative<Palette1D>(p1) && !std::holds_alternative<Palette1DPlus>(p1)) continue;
        if (!std::holds_alternative<Palette2D>(p2)) continue;
        entry.palette_1d = std::visit(
            [](const auto& x) -> Palette1D {
              if constexpr (std::is_same_v<std::decay_t<decltype(x)>, Palette2D>) return {};
              else return {x.colors, x.k};
            },
            p1);
        entry.palette_2d = std::get<Palette2D>(p2);
      } else {
        continue;
      }
    } catch (const Error&) {
      continue;
    } catch (const nlohmann::json::exception&) {
      continue;
    }
    if (entry.palette_1d.colors.size() != kSurveyColors) continue;
    corpus.entries.push_back(std::move(entry));
  }
  return corpus;
}

}  // namespace pstudio::stimulus
