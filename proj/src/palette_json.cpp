#include "pstudio/palette_json.hpp"
#include "pstudio/error.hpp"

namespace pstudio {

using nlohmann::json;

namespace {

json hex_list(const std::vector<RgbColor>& colors) {
  json arr = json::array();
  for (RgbColor c : colors) arr.push_back(to_hex(c));
  return arr;
}

std::vector<RgbColor> parse_colors(const json& arr, const char* field) {
  if (!arr.is_array()) throw Error(ErrorCode::InvalidArgument, std::string(field) + " must be an array");
  std::vector<RgbColor> out;
  for (const auto& v : arr) {
    if (!v.is_string()) throw Error(ErrorCode::InvalidArgument, std::string(field) + " entries must be strings");
    auto c = parse_hex(v.get<std::string>());
    if (!c) throw Error(ErrorCode::InvalidArgument, "bad colour " + v.get<std::string>());
    out.push_back(*c);
  }
  return out;
}

int int_field(const json& j, const char* name) {
  if (!j.contains(name) || !j[name].is_number_integer())
    throw Error(ErrorCode::InvalidArgument, std::string("missing integer field '") + name + "'");
  return j[name].get<int>();
}

}  // namespace

json palette_to_json(const AnyPalette& palette) {
  json j;
  j["format"] = std::string(format_name(format_of(palette)));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Palette2D>) {
          j["colors"] = hex_list(p.distinct_colors());
          json grid = json::array();
          for (int r = 0; r < p.grid_size; ++r) {
            json row = json::array();
            for (int c = 0; c < p.grid_size; ++c) row.push_back(to_hex(p.at(r, c)));
            grid.push_back(std::move(row));
          }
          j["grid"] = std::move(grid);
          j["grid_size"] = p.grid_size;
        } else {
          j["colors"] = hex_list(p.colors);
          if constexpr (std::is_same_v<T, Palette1DPlus>) j["proportions"] = p.proportions;
        }
        j["k"] = p.k;
      },
      palette);
  return j;
}

AnyPalette palette_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "palette must be a JSON object");
  if (!j.contains("format") || !j["format"].is_string())
    throw Error(ErrorCode::InvalidArgument, "missing string field 'format'");
  const auto format = parse_format(j["format"].get<std::string>());
  if (!format) throw Error(ErrorCode::InvalidArgument, "unknown palette format " + j["format"].get<std::string>());
  const int k = int_field(j, "k");

  AnyPalette out;
  switch (*format) {
    case PaletteFormat::Uniform1D:
      out = Palette1D{parse_colors(j.value("colors", json()), "colors"), k};
      break;
    case PaletteFormat::Proportional1D: {
      Palette1DPlus p{parse_colors(j.value("colors", json()), "colors"), {}, k};
      const json& props = j.value("proportions", json());
      if (!props.is_array()) throw Error(ErrorCode::InvalidArgument, "1d+ palette needs 'proportions'");
      for (const auto& v : props) {
        if (!v.is_number()) throw Error(ErrorCode::InvalidArgument, "proportions must be numbers");
        p.proportions.push_back(v.get<double>());
      }
      out = std::move(p);
      break;
    }
    case PaletteFormat::Spatial2D: {
      const int g = int_field(j, "grid_size");
      const json& grid = j.value("grid", json());
      if (!grid.is_array() || grid.size() != static_cast<std::size_t>(std::max(g, 0)))
        throw Error(ErrorCode::InvalidArgument, "2d palette needs a grid_size x grid_size 'grid'");
      Palette2D p{g, {}, k};
      for (const auto& row : grid) {
        auto colors = parse_colors(row, "grid row");
        if (colors.size() != static_cast<std::size_t>(g))
          throw Error(ErrorCode::InvalidArgument, "grid rows must have grid_size entries");
        p.cells.insert(p.cells.end(), colors.begin(), colors.end());
      }
      out = std::move(p);
      break;
    }
  }
  validate_palette(out);
  return out;
}

std::string dump_palette(const AnyPalette& palette) { return palette_to_json(palette).dump(2) + "\n"; }

}  // namespace pstudio
