#include "pstudio/stats_io.hpp"
#include "pstudio/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace pstudio::stats {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line) + ": " + what);
}

template <class T>
T parse_number(const std::string& s, std::size_t line, const char* field) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(line, std::string("bad ") + field + " '" + s + "'");
  return v;
}

// Calls row(fields, line_no) for every non-blank data line after checking the header.
template <class F>
void read_csv(std::istream& in, const std::vector<std::string>& header, F row) {
  std::string line;
  std::size_t n = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      if (!fields.empty() && fields[0].starts_with("\xEF\xBB\xBF")) fields[0].erase(0, 3);
      if (fields != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        fail(n, "expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != header.size())
      fail(n, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    row(fields, n);
  }
  if (!have_header) throw Error(ErrorCode::InvalidArgument, "empty CSV");
}

}  // namespace

RatingsTable read_ratings_csv(std::istream& in) {
  RatingsTable table;
  read_csv(in, {"participant", "condition", "format", "combination", "metric", "rating"},
           [&](const std::vector<std::string>& f, std::size_t n) {
             Rating r;
             r.participant = f[0];
             r.condition = f[1];
             const auto format = parse_format(f[2]);
             if (!format) fail(n, "unknown format '" + f[2] + "'");
             r.format = *format;
             r.combination = parse_number<int>(f[3], n, "combination");
             if (r.combination < 1) fail(n, "combination must be >= 1");
             const auto metric = parse_metric(f[4]);
             if (!metric) fail(n, "unknown metric '" + f[4] + "'");
             r.metric = *metric;
             r.rating = parse_number<int>(f[5], n, "rating");
             if (r.rating < 1 || r.rating > 9) fail(n, "rating " + f[5] + " outside 1..9");
             table.push_back(std::move(r));
           });
  return table;
}

CsiTable read_csi_csv(std::istream& in) {
  CsiTable table;
  std::map<std::pair<std::string, std::string>, std::array<bool, 6>> seen;
  read_csv(in, {"participant", "system", "factor", "rating", "pair_count"},
           [&](const std::vector<std::string>& f, std::size_t n) {
             const auto it = std::find(kCsiFactors.begin(), kCsiFactors.end(), f[2]);
             if (it == kCsiFactors.end()) fail(n, "unknown factor '" + f[2] + "'");
             const auto idx = static_cast<std::size_t>(it - kCsiFactors.begin());
             auto& flags = seen[{f[0], f[1]}];
             if (flags[idx]) fail(n, "duplicate factor '" + f[2] + "'");
             flags[idx] = true;
             auto& resp = table[f[0]][f[1]];
             resp.ratings[idx] = parse_number<double>(f[3], n, "rating");
             resp.pair_counts[idx] = parse_number<int>(f[4], n, "pair_count");
           });
  for (const auto& [key, flags] : seen)
    if (std::count(flags.begin(), flags.end(), true) != 6)
      throw Error(ErrorCode::InvalidArgument, "participant " + key.first + " / " + key.second + " lacks some factors");
  if (table.empty()) throw Error(ErrorCode::EmptyInput, "no CSI responses");
  return table;
}

CsiSummary summarize_csi(const CsiTable& table) {
  std::map<std::string, SystemScores> by_system;
  std::vector<std::string> order;
  for (const auto& [participant, systems] : table)
    for (const auto& [system, resp] : systems) {
      if (!by_system.count(system)) order.push_back(system);
      auto& s = by_system[system];
      s.system = system;
      double score = 0.0;
      try {
        score = csi_score(resp);
      } catch (const Error& e) {
        throw Error(e.code(), participant + " / " + system + ": " + e.what());
      }
      s.scores.emplace_back(participant, score);
    }
  std::sort(order.begin(), order.end());

  CsiSummary out;
  for (const auto& name : order) {
    SystemScores s = by_system[name];
    const double n = static_cast<double>(s.scores.size());
    for (const auto& [p, v] : s.scores) s.mean += v / n;
    if (s.scores.size() > 1) {
      double ss = 0.0;
      for (const auto& [p, v] : s.scores) ss += (v - s.mean) * (v - s.mean);
      s.sd = std::sqrt(ss / (n - 1.0));
    }
    out.systems.push_back(std::move(s));
  }
  if (out.systems.size() == 2) {
    std::vector<double> a, b;
    for (const auto& [participant, systems] : table) {
      const auto ia = systems.find(out.systems[0].system);
      const auto ib = systems.find(out.systems[1].system);
      if (ia == systems.end() || ib == systems.end()) continue;
      a.push_back(csi_score(ia->second));
      b.push_back(csi_score(ib->second));
    }
    try {
      out.comparison = paired_t_test(a, b);
    } catch (const Error& e) {
      out.note = e.what();
    }
  }
  return out;
}

std::string format_p(double p) {
  std::ostringstream os;
  if (p < 0.001) return "p < 0.001";
  os << "p = " << std::fixed << std::setprecision(3) << p;
  return os.str();
}

nlohmann::json to_json(const TestResult& r) {
  nlohmann::json j{{"statistic", r.statistic}, {"df", r.df}, {"p_value", r.p_value}};
  if (r.df2 != 0.0) j["df2"] = r.df2;
  if (r.pairwise) j["pairwise"] = *r.pairwise;
  if (r.pairwise_statistic) j["pairwise_statistic"] = *r.pairwise_statistic;
  return j;
}

nlohmann::json to_json(const Analysis& a) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : a.rows) {
    nlohmann::json j{{"metric", std::string(metric_name(row.metric))},
                     {"row", row.label},
                     {"groups", row.groups},
                     {"group_sizes", row.group_sizes},
                     {"significant", row.significant}};
    j["omnibus"] = row.omnibus ? to_json(*row.omnibus) : nlohmann::json(nullptr);
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : row.pairs)
      pairs.push_back({{"a", row.groups[p.a]}, {"b", row.groups[p.b]}, {"p_value", p.p_value}, {"significant", p.significant}});
    j["pairs"] = std::move(pairs);
    if (!row.note.empty()) j["note"] = row.note;
    rows.push_back(std::move(j));
  }
  return {{"grouping", a.grouping == Grouping::Format ? "format" : "combination"}, {"alpha", kAlpha}, {"rows", rows}};
}

nlohmann::json to_json(const CsiSummary& s) {
  nlohmann::json systems = nlohmann::json::array();
  for (const auto& sys : s.systems) {
    nlohmann::json scores = nlohmann::json::object();
    for (const auto& [p, v] : sys.scores) scores[p] = v;
    systems.push_back({{"system", sys.system}, {"mean", sys.mean}, {"sd", sys.sd}, {"scores", scores}});
  }
  nlohmann::json j{{"systems", systems}};
  j["paired_t_test"] = s.comparison ? to_json(*s.comparison) : nlohmann::json(nullptr);
  if (!s.note.empty()) j["note"] = s.note;
  return j;
}

namespace {

std::string table(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  std::ostringstream os;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      std::string cell = cells[r][c];
      if (c + 1 < cells[r].size()) cell.resize(width[c], ' ');
      line += (c ? " | " : "") + cell;
    }
    os << line << "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w;
      os << std::string(total + 3 * (width.size() - 1), '-') << "\n";
    }
  }
  return os.str();
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

std::string to_text(const Analysis& a) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = {"metric", "row", "omnibus"};
  std::vector<std::pair<std::size_t, std::size_t>> pair_cols;
  if (!a.rows.empty()) {
    const auto& g = a.rows.front().groups;
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i + 1; j < g.size(); ++j) {
        header.push_back(g[i] + " vs " + g[j]);
        pair_cols.emplace_back(i, j);
      }
  }
  cells.push_back(header);
  for (const auto& row : a.rows) {
    std::vector<std::string> line = {std::string(metric_name(row.metric)), row.label};
    if (row.omnibus) {
      line.push_back("H(" + fixed(row.omnibus->df, 0) + ") = " + fixed(row.omnibus->statistic, 3) + ", " +
                     format_p(row.omnibus->p_value) + (row.significant ? " *" : ""));
    } else {
      line.push_back("n/a (" + row.note + ")");
    }
    for (const auto& [i, j] : pair_cols) {
      auto it = std::find_if(row.pairs.begin(), row.pairs.end(), [&](const auto& p) { return p.a == i && p.b == j; });
      line.push_back(it == row.pairs.end() ? "-" : format_p(it->p_value) + (it->significant ? " *" : ""));
    }
    cells.push_back(std::move(line));
  }
  return table(cells) + "* significant at alpha = 0.05\n";
}

std::string to_text(const CsiSummary& s) {
  std::vector<std::vector<std::string>> cells = {{"system", "n", "mean", "sd"}};
  for (const auto& sys : s.systems)
    cells.push_back({sys.system, std::to_string(sys.scores.size()), fixed(sys.mean, 2), fixed(sys.sd, 2)});
  std::string out = table(cells);
  if (s.comparison)
    out += "paired t(" + fixed(s.comparison->df, 0) + ") = " + fixed(s.comparison->statistic, 3) + ", " +
           format_p(s.comparison->p_value) + "\n";
  else if (!s.note.empty())
    out += "paired t-test not defined: " + s.note + "\n";
  return out;
}

}  // namespace pstudio::stats
