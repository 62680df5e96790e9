#include "pstudio/color.hpp"
#include "pstudio/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace pstudio {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::InvalidCount: return "InvalidCount";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::FormatMismatch: return "FormatMismatch";
    case ErrorCode::KMismatch: return "KMismatch";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::DegenerateCenters: return "DegenerateCenters";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::ColorCountMismatch: return "ColorCountMismatch";
    case ErrorCode::InsufficientLayouts: return "InsufficientLayouts";
    case ErrorCode::ArityError: return "ArityError";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

// sRGB primaries, D65. The reference white is the image of (1,1,1) so that
// white lands on L=100, a=b=0 without residue.
constexpr double kRgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};

constexpr double kWhiteX = kRgbToXyz[0][0] + kRgbToXyz[0][1] + kRgbToXyz[0][2];
constexpr double kWhiteY = kRgbToXyz[1][0] + kRgbToXyz[1][1] + kRgbToXyz[1][2];
constexpr double kWhiteZ = kRgbToXyz[2][0] + kRgbToXyz[2][1] + kRgbToXyz[2][2];

constexpr double kEpsilon = 216.0 / 24389.0;  // (6/29)^3
constexpr double kKappa = 24389.0 / 27.0;

struct Matrix3 {
  double m[3][3];
};

Matrix3 invert(const double (&a)[3][3]) {
  Matrix3 r{};
  const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                     a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                     a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  r.m[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
  r.m[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
  r.m[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
  r.m[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
  r.m[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
  r.m[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
  r.m[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
  r.m[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
  r.m[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
  return r;
}

const Matrix3& xyz_to_rgb() {
  static const Matrix3 inv = invert(kRgbToXyz);
  return inv;
}

const std::array<double, 256>& linear_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) {
      const double c = i / 255.0;
      t[i] = c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
    }
    return t;
  }();
  return table;
}

double lab_f(double t) { return t > kEpsilon ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0; }

double lab_f_inv(double f) {
  const double f3 = f * f * f;
  return f3 > kEpsilon ? f3 : (116.0 * f - 16.0) / kKappa;
}

std::uint8_t encode_channel(double linear) {
  linear = std::clamp(linear, 0.0, 1.0);
  const double c = linear <= 0.0031308 ? 12.92 * linear : 1.055 * std::pow(linear, 1.0 / 2.4) - 0.055;
  return static_cast<std::uint8_t>(std::clamp(std::lround(c * 255.0), 0L, 255L));
}

}  // namespace

LabColor srgb_to_lab(RgbColor c) noexcept {
  const auto& lin = linear_table();
  const double r = lin[c.r], g = lin[c.g], b = lin[c.b];
  const double x = kRgbToXyz[0][0] * r + kRgbToXyz[0][1] * g + kRgbToXyz[0][2] * b;
  const double y = kRgbToXyz[1][0] * r + kRgbToXyz[1][1] * g + kRgbToXyz[1][2] * b;
  const double z = kRgbToXyz[2][0] * r + kRgbToXyz[2][1] * g + kRgbToXyz[2][2] * b;
  const double fx = lab_f(x / kWhiteX), fy = lab_f(y / kWhiteY), fz = lab_f(z / kWhiteZ);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

RgbColor lab_to_srgb(const LabColor& c) noexcept {
  const double fy = (c.l + 16.0) / 116.0;
  const double fx = fy + c.a / 500.0;
  const double fz = fy - c.b / 200.0;
  const double x = lab_f_inv(fx) * kWhiteX;
  const double y = lab_f_inv(fy) * kWhiteY;
  const double z = lab_f_inv(fz) * kWhiteZ;
  const auto& m = xyz_to_rgb().m;
  return {encode_channel(m[0][0] * x + m[0][1] * y + m[0][2] * z),
          encode_channel(m[1][0] * x + m[1][1] * y + m[1][2] * z),
          encode_channel(m[2][0] * x + m[2][1] * y + m[2][2] * z)};
}

double delta_e(const LabColor& x, const LabColor& y) noexcept { return std::sqrt(delta_e_squared(x, y)); }

std::string to_hex(RgbColor c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02X%02X%02X", c.r, c.g, c.b);
  return buf;
}

std::optional<RgbColor> parse_hex(std::string_view text) {
  if (text.size() != 7 || text[0] != '#') return std::nullopt;
  std::uint32_t v = 0;
  for (char ch : text.substr(1)) {
    int d;
    if (ch >= '0' && ch <= '9') d = ch - '0';
    else if (ch >= 'a' && ch <= 'f') d = ch - 'a' + 10;
    else if (ch >= 'A' && ch <= 'F') d = ch - 'A' + 10;
    else return std::nullopt;
    v = (v << 4) | static_cast<std::uint32_t>(d);
  }
  return RgbColor::from_packed(v);
}

}  // namespace pstudio
