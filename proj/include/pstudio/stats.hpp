#pragma once

#include "pstudio/palette.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pstudio::stats {

inline constexpr std::array<std::string_view, 6> kCsiFactors = {
    "enjoyment", "exploration", "expressiveness", "immersion", "collaboration", "results_worth_effort"};
inline constexpr int kCsiComparisons = 15;

struct CsiResponse {
  std::array<double, 6> ratings{};    // 0..10, in kCsiFactors order
  std::array<int, 6> pair_counts{};   // times each factor won a paired comparison
};

/// Weighted CSI score in [0, 100]: sum(2 * rating * count) / 3.
/// Throws Error(InvalidWeights) unless the counts are non-negative and sum
/// to 15, Error(InvalidArgument) for ratings outside [0, 10].
double csi_score(const CsiResponse& response);

using Matrix = std::vector<std::vector<double>>;

struct TestResult {
  double statistic = 0.0;
  double df = 0.0;
  /// Denominator degrees of freedom, where the test has two (Tukey: N - k).
  double df2 = 0.0;
  double p_value = 1.0;
  /// Adjusted pairwise p-values; symmetric with unit diagonal.
  std::optional<Matrix> pairwise;
  /// Pairwise studentized-range statistics (Tukey only).
  std::optional<Matrix> pairwise_statistic;
};

/// Two-sided paired t-test on a - b.
/// Throws Error(LengthMismatch) for unequal or < 2 lengths and
/// Error(ZeroVariance) when the differences are constant.
TestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Tie-corrected Kruskal-Wallis H with a chi-square(groups - 1) p-value.
/// Throws Error(InvalidArgument) for fewer than two groups, an empty group or
/// fewer than three observations; Error(DegenerateData) when all are tied.
TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

/// Tukey HSD (Tukey-Kramer for unequal sizes) on group means with the pooled
/// within-group variance. `statistic` is the largest pairwise q, `p_value`
/// its adjusted p. Throws Error(InvalidArgument) for fewer than two groups or
/// a group smaller than two; Error(DegenerateData) on zero pooled variance.
TestResult tukey_hsd(const std::vector<std::vector<double>>& groups);

/// P(Q > q) for the studentized range of k means with df degrees of freedom
/// (df = infinity allowed).
double studentized_range_sf(double q, int k, double df);

/// CDF of the range of k independent standard normals.
double normal_range_cdf(double w, int k);

enum class Metric { Harmony, Valence, Arousal };
inline constexpr std::array<Metric, 3> kMetrics = {Metric::Harmony, Metric::Valence, Metric::Arousal};
std::string_view metric_name(Metric m);
std::optional<Metric> parse_metric(std::string_view s);

struct Rating {
  std::string participant;
  std::string condition;
  PaletteFormat format = PaletteFormat::Uniform1D;
  int combination = 1;  // 1-based colour combination
  Metric metric = Metric::Harmony;
  int rating = 1;       // 1..9
};

using RatingsTable = std::vector<Rating>;

enum class Grouping {
  /// Groups are the three formats; one row for all trials plus one per
  /// combination.
  Format,
  /// Groups are the combinations; one row over all trials.
  Combination,
};

struct AnalysisRow {
  Metric metric;
  std::string label;  // "All", "C1", ...
  std::vector<std::string> groups;
  std::vector<std::size_t> group_sizes;
  std::optional<TestResult> omnibus;  // absent when the row had no usable data
  bool significant = false;
  /// Tukey comparison (i, j, adjusted p) for i < j, present only when the
  /// omnibus test is significant at 0.05.
  struct Pair {
    std::size_t a, b;
    double p_value;
    bool significant;
  };
  std::vector<Pair> pairs;
  std::string note;  // why omnibus is missing, if it is
};

struct Analysis {
  Grouping grouping;
  std::vector<AnalysisRow> rows;
};

inline constexpr double kAlpha = 0.05;

/// Throws Error(EmptyInput) for an empty table.
Analysis analyze_ratings(const RatingsTable& table, Grouping grouping);

}  // namespace pstudio::stats
