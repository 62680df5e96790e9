#include "support/fixtures.hpp"

#include "pstudio/palette_json.hpp"

#include <algorithm>
#include <fstream>
#include <random>

namespace fixture {

using namespace pstudio;
using namespace pstudio::stimulus;

PaletteCorpus synthetic_corpus(std::size_t designs, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const RgbColor families[5][5] = {
      {{200, 40, 40}, {240, 150, 120}, {120, 20, 30}, {250, 220, 200}, {60, 10, 10}},
      {{30, 120, 60}, {140, 200, 120}, {10, 60, 30}, {220, 240, 200}, {90, 110, 40}},
      {{40, 70, 200}, {130, 170, 240}, {20, 30, 100}, {210, 225, 250}, {80, 40, 160}},
      {{240, 200, 40}, {250, 240, 160}, {180, 120, 20}, {120, 90, 10}, {250, 170, 90}},
      {{90, 90, 90}, {180, 180, 180}, {30, 30, 30}, {235, 235, 235}, {130, 110, 100}},
  };
  const int counts[5] = {9, 6, 4, 3, 3};
  std::vector<std::vector<std::uint8_t>> templates;
  for (int t = 0; t < 8; ++t) {
    std::vector<std::uint8_t> labels;
    for (std::uint8_t r = 0; r < 5; ++r) labels.insert(labels.end(), static_cast<std::size_t>(counts[r]), r);
    std::shuffle(labels.begin(), labels.end(), gen);
    templates.push_back(labels);
  }
  std::uniform_int_distribution<int> jitter(-12, 12);
  PaletteCorpus corpus;
  for (std::size_t d = 0; d < designs; ++d) {
    CorpusEntry e;
    e.id = "design-" + std::to_string(1000 + d);
    for (const RgbColor& base : families[d % 5]) {
      auto ch = [&](int v) { return static_cast<std::uint8_t>(std::clamp(v + jitter(gen), 0, 255)); };
      e.palette_1d.colors.push_back({ch(base.r), ch(base.g), ch(base.b)});
    }
    e.palette_1d.k = 5;
    e.palette_2d.grid_size = 5;
    e.palette_2d.k = 5;
    for (std::uint8_t r : templates[(d / 5) % templates.size()]) e.palette_2d.cells.push_back(e.palette_1d.colors[r]);
    corpus.entries.push_back(std::move(e));
  }
  return corpus;
}

void write_corpus(const std::filesystem::path& dir, const PaletteCorpus& corpus) {
  std::filesystem::create_directories(dir);
  for (const CorpusEntry& e : corpus.entries) {
    nlohmann::json j{{"id", e.id}, {"palette_1d", palette_to_json(e.palette_1d)}, {"palette_2d", palette_to_json(e.palette_2d)}};
    std::ofstream(dir / (e.id + ".json")) << j.dump(2) << "\n";
  }
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("pstudio-" + name + "-" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture
