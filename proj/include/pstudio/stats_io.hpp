#pragma once

#include "pstudio/stats.hpp"

#include <json.hpp>

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pstudio::stats {

/// Header `participant,condition,format,combination,metric,rating`.
/// Throws Error(InvalidArgument) naming the offending line.
RatingsTable read_ratings_csv(std::istream& in);

/// Per participant, per system.
using CsiTable = std::map<std::string, std::map<std::string, CsiResponse>>;

/// Header `participant,system,factor,rating,pair_count`; every
/// (participant, system) must list all six factors once. Rating and count
/// ranges are checked later by csi_score.
CsiTable read_csi_csv(std::istream& in);

struct SystemScores {
  std::string system;
  std::vector<std::pair<std::string, double>> scores;  // participant -> score
  double mean = 0.0;
  double sd = 0.0;  // sample sd; 0 with one participant
};

struct CsiSummary {
  std::vector<SystemScores> systems;
  /// Paired t-test between the first two systems over shared participants,
  /// when there are exactly two systems and the test is defined.
  std::optional<TestResult> comparison;
  std::string note;
};

/// Throws Error(InvalidWeights / InvalidArgument) from csi_score.
CsiSummary summarize_csi(const CsiTable& table);

nlohmann::json to_json(const TestResult& r);
nlohmann::json to_json(const Analysis& a);
nlohmann::json to_json(const CsiSummary& s);

std::string to_text(const Analysis& a);
std::string to_text(const CsiSummary& s);

/// "p < 0.001", "p = 0.205", ...
std::string format_p(double p);

}  // namespace pstudio::stats
