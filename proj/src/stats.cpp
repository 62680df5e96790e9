#include "pstudio/stats.hpp"
#include "pstudio/error.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace pstudio::stats {

double csi_score(const CsiResponse& r) {
  int total = 0;
  for (int c : r.pair_counts) {
    if (c < 0) throw Error(ErrorCode::InvalidWeights, "negative pair count");
    total += c;
  }
  if (total != kCsiComparisons)
    throw Error(ErrorCode::InvalidWeights, "pair counts sum to " + std::to_string(total) + ", expected 15");
  double score = 0.0;
  for (std::size_t f = 0; f < r.ratings.size(); ++f) {
    const double v = r.ratings[f];
    if (!(v >= 0.0 && v <= 10.0))
      throw Error(ErrorCode::InvalidArgument, "rating for " + std::string(kCsiFactors[f]) + " outside [0, 10]");
    score += 2.0 * v * r.pair_counts[f];
  }
  return score / 3.0;
}

TestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "samples differ in length");
  if (a.size() < 2) throw Error(ErrorCode::LengthMismatch, "need at least two pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) throw Error(ErrorCode::ZeroVariance, "differences are constant");
  TestResult r;
  r.statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.df = static_cast<double>(n - 1);
  const boost::math::students_t dist(r.df);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.statistic))));
  return r;
}

TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two groups");
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw Error(ErrorCode::InvalidArgument, "group " + std::to_string(g) + " is empty");
    for (double v : groups[g]) all.emplace_back(v, g);
  }
  const std::size_t n = all.size();
  if (n < 3) throw Error(ErrorCode::InvalidArgument, "need at least three observations");
  std::sort(all.begin(), all.end());

  std::vector<double> rank_sum(groups.size(), 0.0);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t m = i; m < j; ++m) rank_sum[all[m].second] += mid;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double N = static_cast<double>(n);
  const double correction = 1.0 - tie_term / (N * N * N - N);
  if (correction <= 0.0) throw Error(ErrorCode::DegenerateData, "all observations are identical");

  double acc = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) acc += rank_sum[g] * rank_sum[g] / static_cast<double>(groups[g].size());
  double h = (12.0 / (N * (N + 1.0)) * acc - 3.0 * (N + 1.0)) / correction;
  h = std::max(h, 0.0);

  TestResult r;
  r.statistic = h;
  r.df = static_cast<double>(groups.size() - 1);
  r.p_value = std::clamp(boost::math::gamma_q(r.df / 2.0, h / 2.0), 0.0, 1.0);
  return r;
}

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

using Quadrature = boost::math::quadrature::gauss_kronrod<double, 31>;

// 1 - W(w) as k * int phi(z) (Phi(z)^(k-1) - (Phi(z) - Phi(z-w))^(k-1)) dz,
// with the difference of powers taken through expm1/log1p so large ranges
// keep their relative accuracy.
double normal_range_sf(double w, int k) {
  if (w <= 0.0) return 1.0;
  const double m = k - 1;
  auto f = [&](double z) {
    const double a = normal_cdf(z);
    if (a <= 0.0) return 0.0;
    const double b = normal_cdf(z - w);
    return normal_pdf(z) * std::pow(a, m) * -std::expm1(m * std::log1p(-b / a));
  };
  const double v = k * Quadrature::integrate(f, -8.5, 8.5, 15, 1e-13);
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace

double normal_range_cdf(double w, int k) {
  if (w <= 0.0) return 0.0;
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "range needs k >= 2");
  auto f = [&](double z) {
    const double band = normal_cdf(z) - normal_cdf(z - w);
    return normal_pdf(z) * std::pow(band, k - 1);
  };
  const double v = k * Quadrature::integrate(f, -8.5, 8.5, 15, 1e-13);
  return std::clamp(v, 0.0, 1.0);
}

double studentized_range_sf(double q, int k, double df) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "studentized range needs k >= 2");
  if (!(df > 0.0)) throw Error(ErrorCode::InvalidArgument, "degrees of freedom must be positive");
  if (std::isnan(q)) throw Error(ErrorCode::InvalidArgument, "q is NaN");
  if (q <= 0.0) return 1.0;
  if (std::isinf(df)) return normal_range_sf(q, k);

  // s = chi_df / sqrt(df) has density concentrated around 1 with sd ~ 1/sqrt(2 df).
  const double log_norm = 0.5 * df * std::log(df) - std::lgamma(0.5 * df) - (0.5 * df - 1.0) * std::log(2.0);
  auto density = [&](double s) {
    if (s <= 0.0) return 0.0;
    return std::exp(log_norm + (df - 1.0) * std::log(s) - 0.5 * df * s * s);
  };
  const double sigma = 1.0 / std::sqrt(2.0 * df);
  const double lo = std::max(0.0, 1.0 - 15.0 * sigma);
  const double hi = 1.0 + 15.0 * sigma;
  auto g = [&](double s) { return density(s) * normal_range_sf(q * s, k); };
  const double v = Quadrature::integrate(g, lo, hi, 15, 1e-12);
  return std::clamp(v, 0.0, 1.0);
}

TestResult tukey_hsd(const std::vector<std::vector<double>>& groups) {
  const std::size_t k = groups.size();
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "need at least two groups");
  std::vector<double> means(k);
  double ss_within = 0.0;
  std::size_t n_total = 0;
  for (std::size_t g = 0; g < k; ++g) {
    if (groups[g].size() < 2) throw Error(ErrorCode::InvalidArgument, "group " + std::to_string(g) + " has fewer than two values");
    means[g] = std::accumulate(groups[g].begin(), groups[g].end(), 0.0) / static_cast<double>(groups[g].size());
    for (double v : groups[g]) ss_within += (v - means[g]) * (v - means[g]);
    n_total += groups[g].size();
  }
  const double df = static_cast<double>(n_total - k);
  const double mse = ss_within / df;
  if (!(mse > 0.0)) throw Error(ErrorCode::DegenerateData, "pooled within-group variance is zero");

  TestResult r;
  r.df = static_cast<double>(k);
  r.df2 = df;
  Matrix p(k, std::vector<double>(k, 1.0));
  Matrix q(k, std::vector<double>(k, 0.0));
  r.statistic = 0.0;
  r.p_value = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double se = std::sqrt(0.5 * mse * (1.0 / groups[i].size() + 1.0 / groups[j].size()));
      const double qij = std::abs(means[i] - means[j]) / se;
      const double pij = studentized_range_sf(qij, static_cast<int>(k), df);
      q[i][j] = q[j][i] = qij;
      p[i][j] = p[j][i] = pij;
      if (qij > r.statistic) {
        r.statistic = qij;
        r.p_value = pij;
      }
    }
  }
  r.pairwise = std::move(p);
  r.pairwise_statistic = std::move(q);
  return r;
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::Harmony: return "harmony";
    case Metric::Valence: return "valence";
    case Metric::Arousal: return "arousal";
  }
  return "?";
}

std::optional<Metric> parse_metric(std::string_view s) {
  for (Metric m : kMetrics)
    if (metric_name(m) == s) return m;
  return std::nullopt;
}

namespace {

AnalysisRow analyze_row(Metric metric, std::string label, std::vector<std::string> names,
                        std::vector<std::vector<double>> groups) {
  AnalysisRow row{metric, std::move(label), std::move(names), {}, std::nullopt, false, {}, {}};
  for (const auto& g : groups) row.group_sizes.push_back(g.size());
  try {
    row.omnibus = kruskal_wallis(groups);
  } catch (const Error& e) {
    row.note = e.what();
    return row;
  }
  row.significant = row.omnibus->p_value < kAlpha;
  if (!row.significant) return row;
  try {
    const TestResult hsd = tukey_hsd(groups);
    for (std::size_t i = 0; i < groups.size(); ++i)
      for (std::size_t j = i + 1; j < groups.size(); ++j) {
        const double p = (*hsd.pairwise)[i][j];
        row.pairs.push_back({i, j, p, p < kAlpha});
      }
  } catch (const Error& e) {
    row.note = e.what();
  }
  return row;
}

}  // namespace

Analysis analyze_ratings(const RatingsTable& table, Grouping grouping) {
  if (table.empty()) throw Error(ErrorCode::EmptyInput, "no ratings");
  std::set<int> combinations;
  for (const Rating& r : table) combinations.insert(r.combination);

  Analysis out{grouping, {}};
  constexpr std::array<PaletteFormat, 3> formats = {PaletteFormat::Uniform1D, PaletteFormat::Proportional1D,
                                                    PaletteFormat::Spatial2D};
  for (Metric metric : kMetrics) {
    if (grouping == Grouping::Format) {
      std::vector<std::string> names;
      for (PaletteFormat f : formats) names.emplace_back(format_name(f));
      auto collect = [&](std::optional<int> combo) {
        std::vector<std::vector<double>> groups(formats.size());
        for (const Rating& r : table) {
          if (r.metric != metric || (combo && r.combination != *combo)) continue;
          groups[static_cast<std::size_t>(r.format)].push_back(r.rating);
        }
        return groups;
      };
      out.rows.push_back(analyze_row(metric, "All", names, collect(std::nullopt)));
      for (int c : combinations) out.rows.push_back(analyze_row(metric, "C" + std::to_string(c), names, collect(c)));
    } else {
      std::vector<std::string> names;
      std::map<int, std::size_t> slot;
      for (int c : combinations) {
        slot[c] = names.size();
        names.push_back("C" + std::to_string(c));
      }
      std::vector<std::vector<double>> groups(names.size());
      for (const Rating& r : table)
        if (r.metric == metric) groups[slot[r.combination]].push_back(r.rating);
      out.rows.push_back(analyze_row(metric, "All", names, std::move(groups)));
    }
  }
  return out;
}

}  // namespace pstudio::stats
