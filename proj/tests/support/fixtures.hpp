#pragma once

#include "pstudio/stimulus.hpp"

#include <filesystem>

namespace fixture {

// Designs in five colour families; each has five distinct colours and a 5x5
// layout drawn from eight templates with rank counts (9, 6, 4, 3, 3).
pstudio::stimulus::PaletteCorpus synthetic_corpus(std::size_t designs = 50, std::uint64_t seed = 1);

// One {"id", "palette_1d", "palette_2d"} JSON file per design.
void write_corpus(const std::filesystem::path& dir, const pstudio::stimulus::PaletteCorpus& corpus);

// Fresh, empty scratch directory under the system temp directory.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace fixture
