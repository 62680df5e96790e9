#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace pstudio {

/// 8-bit sRGB triple.
struct RgbColor {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend constexpr auto operator<=>(const RgbColor&, const RgbColor&) = default;

  constexpr std::uint32_t packed() const noexcept {
    return (std::uint32_t{r} << 16) | (std::uint32_t{g} << 8) | std::uint32_t{b};
  }
  static constexpr RgbColor from_packed(std::uint32_t v) noexcept {
    return {static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8),
            static_cast<std::uint8_t>(v)};
  }
};

/// CIE 1976 L*a*b* under D65.
struct LabColor {
  double l = 0.0;
  double a = 0.0;
  double b = 0.0;

  friend constexpr bool operator==(const LabColor&, const LabColor&) = default;

  constexpr LabColor operator+(const LabColor& o) const noexcept { return {l + o.l, a + o.a, b + o.b}; }
  constexpr LabColor operator-(const LabColor& o) const noexcept { return {l - o.l, a - o.a, b - o.b}; }
  constexpr LabColor operator*(double s) const noexcept { return {l * s, a * s, b * s}; }
};

LabColor srgb_to_lab(RgbColor c) noexcept;

/// Out-of-gamut results are clamped per channel after conversion.
RgbColor lab_to_srgb(const LabColor& c) noexcept;

/// CIE76 colour difference (Euclidean distance in Lab).
double delta_e(const LabColor& x, const LabColor& y) noexcept;

inline double delta_e_squared(const LabColor& x, const LabColor& y) noexcept {
  const double dl = x.l - y.l, da = x.a - y.a, db = x.b - y.b;
  return dl * dl + da * da + db * db;
}

/// "#RRGGBB", uppercase.
std::string to_hex(RgbColor c);

/// Accepts "#RRGGBB" in either case.
std::optional<RgbColor> parse_hex(std::string_view text);

}  // namespace pstudio
