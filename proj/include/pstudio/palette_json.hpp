#pragma once

#include "pstudio/palette.hpp"

#include <json.hpp>

#include <string>

namespace pstudio {

// Wire schema shared by the CLI, the HTTP service and the web client:
//   {"format":"1d"|"1d+"|"2d", "colors":["#RRGGBB",...], "proportions":[...]?,
//    "grid":[["#RRGGBB",...],...]?, "k":int, "grid_size":int?}

nlohmann::json palette_to_json(const AnyPalette& palette);

/// Throws Error(InvalidArgument) on any schema violation.
AnyPalette palette_from_json(const nlohmann::json& j);

/// Canonical text form (two-space indent, trailing newline); byte-stable for
/// equal palettes.
std::string dump_palette(const AnyPalette& palette);

}  // namespace pstudio
