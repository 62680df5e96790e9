#include "pstudio/cli.hpp"
#include "pstudio/palette.hpp"
#include "pstudio/palette_json.hpp"
#include "pstudio/png_io.hpp"
#include "pstudio/recolor.hpp"
#include "pstudio/service.hpp"
#include "pstudio/stats_io.hpp"
#include "pstudio/stimulus.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <fstream>
#include <ostream>
#include <sstream>

namespace pstudio::cli {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidK:
    case ErrorCode::InvalidCount:
    case ErrorCode::InvalidWeights:
      return kUsage;
    case ErrorCode::FormatMismatch:
    case ErrorCode::KMismatch:
    case ErrorCode::GridMismatch:
      return kMismatch;
    default:
      return kRuntime;
  }
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

AnyPalette read_palette(const fs::path& path) {
  const auto bytes = read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  return palette_from_json(j);
}

struct ExtractFlags {
  std::string format = "1d";
  int k = 5;
  int grid = 5;
  std::uint64_t seed = 0;
  int superpixels = 200;
  double compactness = 10.0;
  bool force_k = false;

  ExtractionParams params() const {
    ExtractionParams p;
    p.k = k;
    p.grid = grid;
    p.seed = seed;
    p.n_superpixels = superpixels;
    p.compactness = compactness;
    p.allow_any_k = force_k;
    return p;
  }

  void add_to(CLI::App* app, bool with_format) {
    if (with_format) app->add_option("--format", format, "1d, 1dplus or 2d")->capture_default_str();
    app->add_option("--k", k, "colour count, 4-12")->capture_default_str();
    app->add_option("--grid", grid, "2D grid size")->capture_default_str();
    app->add_option("--seed", seed, "random seed")->capture_default_str();
    app->add_option("--superpixels", superpixels, "SLIC superpixel count (2D)")->capture_default_str();
    app->add_option("--compactness", compactness, "SLIC compactness (2D)")->capture_default_str();
    app->add_flag("--force-k", force_k, "allow k outside 4-12");
  }
};

AnyPalette extract_any(const Image& image, PaletteFormat format, const ExtractionParams& p) {
  switch (format) {
    case PaletteFormat::Uniform1D: return extract_1d(image, p);
    case PaletteFormat::Proportional1D: return extract_1d_plus(image, p);
    case PaletteFormat::Spatial2D: return extract_2d(image, p);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown format");
}

int cmd_extract(const ExtractFlags& f, const fs::path& image_path, const fs::path& out_path, std::ostream& out) {
  const auto format = parse_format(f.format);
  if (!format) throw Error(ErrorCode::InvalidArgument, "--format must be 1d, 1dplus or 2d");
  const ExtractionParams p = f.params();
  p.validate(*format);
  const Image image = read_png(image_path);
  const std::string text = dump_palette(extract_any(image, *format, p));
  if (out_path.empty()) out << text;
  else write_text(out_path, text);
  return kOk;
}

int cmd_recolor(ExtractFlags f, const fs::path& image_path, const fs::path& target_path, const fs::path& out_path,
                RecolorOptions options, bool grid_given, bool k_given, std::ostream& out) {
  const AnyPalette target = read_palette(target_path);
  const PaletteFormat format = format_of(target);
  // Source extraction follows the target unless flags say otherwise.
  if (!k_given) f.k = std::visit([](const auto& x) { return x.k; }, target);
  if (!grid_given)
    if (const auto* g = std::get_if<Palette2D>(&target)) f.grid = g->grid_size;
  const ExtractionParams p = f.params();
  p.validate(format);
  options.seed = p.seed;
  options.validate();
  const Image image = read_png(image_path);
  const AnyPalette source = extract_any(image, format, p);
  const RecolorResult result = recolor(image, source, target, p, options);
  write_png(out_path, result.image);
  if (result.balance) {
    out << "residual " << result.balance->residual << "\n";
    out << "iterations " << result.balance->iterations << (result.balance->repaired ? " (repaired)" : "") << "\n";
    out << "achieved";
    for (double a : result.balance->achieved) out << " " << a;
    out << "\n";
  }
  return kOk;
}

int cmd_stimuli(const fs::path& corpus_dir, const fs::path& out_dir, std::uint64_t seed, const fs::path& picks_path,
                int swatch, std::ostream& out) {
  using namespace stimulus;
  ExtractionParams params;
  params.seed = seed;
  const PaletteCorpus corpus = load_corpus(corpus_dir, params);
  if (corpus.entries.size() < kSurveyColors)
    throw Error(ErrorCode::EmptyCorpus, "corpus has " + std::to_string(corpus.entries.size()) +
                                            " usable designs, need at least 5");

  const auto reps = select_representatives(corpus, kSurveyColors, 30, seed);
  std::vector<std::size_t> picks(kSurveyColors, 0);
  if (!picks_path.empty()) {
    // Inline JSON or a file holding it.
    std::string text = picks_path.string();
    if (text.find('[') == std::string::npos) {
      const auto bytes = read_file(picks_path);
      text.assign(bytes.begin(), bytes.end());
    }
    try {
      picks = json::parse(text).get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, "--picks must be a JSON array of 5 indices: " + std::string(e.what()));
    }
    if (picks.size() != kSurveyColors) throw Error(ErrorCode::InvalidArgument, "--picks needs 5 indices");
  }
  for (std::size_t c = 0; c < kSurveyColors; ++c)
    if (picks[c] >= reps[c].size())
      throw Error(ErrorCode::InvalidArgument, "pick " + std::to_string(picks[c]) + " out of range for cluster " +
                                                  std::to_string(c) + " (" + std::to_string(reps[c].size()) + " candidates)");

  const std::vector<double> proportion = canonical_proportion(corpus);
  std::vector<LayoutSignature> signatures;
  for (const auto& e : corpus.entries) {
    try {
      signatures.push_back(standardize_layout(e.palette_2d));
    } catch (const Error& err) {
      if (err.code() != ErrorCode::ColorCountMismatch) throw;
    }
  }
  const auto choices = cluster_layouts(signatures, kSurveyColors, proportion, seed);
  std::vector<LayoutSignature> layouts;
  json manifest{{"seed", seed}, {"proportion", proportion}};
  json layouts_json = json::array();
  for (const auto& ch : choices) {
    layouts.push_back(ch.layout);
    layouts_json.push_back({{"grid_size", ch.layout.grid_size},
                            {"labels", ch.layout.labels},
                            {"source_index", ch.source_index},
                            {"matches_proportion", ch.matches_proportion}});
  }
  manifest["layouts"] = layouts_json;

  json combos = json::array();
  std::size_t written = 0;
  for (std::size_t c = 0; c < kSurveyColors; ++c) {
    const Candidate& cand = reps[c][picks[c]];
    const CorpusEntry& entry = corpus.entries[cand.entry];
    const auto conditions = generate_conditions(entry.palette_1d.colors, proportion, layouts, seed + c);
    const fs::path dir = out_dir / ("combination-" + std::to_string(c + 1));
    fs::create_directories(dir);
    json ids = json::array();
    for (const auto& cond : conditions) {
      json j = condition_to_json(cond);
      j["combination"] = c + 1;
      write_text(dir / (cond.id + ".json"), j.dump(2) + "\n");
      write_png(dir / (cond.id + ".png"), render_swatch(cond, swatch, swatch));
      ids.push_back(cond.id);
      ++written;
    }
    json colors = json::array();
    for (RgbColor col : entry.palette_1d.colors) colors.push_back(to_hex(col));
    combos.push_back({{"combination", c + 1},
                      {"design", entry.id},
                      {"distance", cand.distance},
                      {"candidates", reps[c].size()},
                      {"colors", colors},
                      {"presentation_order", ids}});
  }
  manifest["combinations"] = combos;
  manifest["condition_count"] = written;
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  out << kSurveyColors << " combinations x " << written / kSurveyColors << " conditions, " << written
      << " swatches written to " << out_dir.string() << "\n";
  return kOk;
}

fs::path text_path(const fs::path& json_path) {
  fs::path p = json_path;
  return p.replace_extension(".txt");
}

int cmd_stats(const fs::path& csv, const std::string& mode, const fs::path& out_path, std::ostream& out) {
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + csv.string());
  json report;
  std::string text;
  if (mode == "survey") {
    const auto table = stats::read_ratings_csv(in);
    const auto by_format = stats::analyze_ratings(table, stats::Grouping::Format);
    const auto by_combination = stats::analyze_ratings(table, stats::Grouping::Combination);
    report = {{"mode", "survey"}, {"ratings", table.size()}, {"by_format", stats::to_json(by_format)},
              {"by_combination", stats::to_json(by_combination)}};
    text = "Across formats\n" + stats::to_text(by_format) + "\nAcross combinations\n" + stats::to_text(by_combination);
  } else if (mode == "csi") {
    const auto summary = stats::summarize_csi(stats::read_csi_csv(in));
    report = stats::to_json(summary);
    report["mode"] = "csi";
    text = stats::to_text(summary);
  } else {
    throw Error(ErrorCode::InvalidArgument, "--mode must be survey or csi");
  }
  if (out_path.empty()) {
    out << report.dump(2) << "\n";
  } else {
    write_text(out_path, report.dump(2) + "\n");
    write_text(text_path(out_path), text);
  }
  out << text;
  return kOk;
}

service::Service* g_running = nullptr;

void on_signal(int) {
  if (g_running) g_running->stop();
}

int cmd_serve(service::Config config, std::ostream& out) {
  service::Service svc(std::move(config));
  const int port = svc.bind();
  out << "listening on " << svc.config().host << ":" << port << ", data in " << svc.config().data_dir.string()
      << std::endl;
  g_running = &svc;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  svc.listen();
  g_running = nullptr;
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Palette extraction, recolouring, survey stimuli and statistics", "pstudio"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pstudio 1.0.0");

  ExtractFlags ex;
  fs::path ex_image, ex_out;
  auto* extract = app.add_subcommand("extract", "extract a palette from a PNG");
  extract->add_option("--image", ex_image, "input PNG")->required();
  extract->add_option("--out", ex_out, "palette JSON (default stdout)");
  ex.add_to(extract, true);

  ExtractFlags rc;
  fs::path rc_image, rc_target, rc_out;
  RecolorOptions rc_opts;
  auto* rec = app.add_subcommand("recolor", "recolour a PNG to match an edited palette");
  rec->add_option("--image", rc_image, "input PNG")->required();
  rec->add_option("--target", rc_target, "edited palette JSON")->required();
  rec->add_option("--out", rc_out, "output PNG")->required();
  rec->add_option("--eps", rc_opts.balance_eps, "proportion tolerance (1d+)")->capture_default_str();
  rec->add_option("--max-iter", rc_opts.balance_max_iter, "balancing iterations (1d+)")->capture_default_str();
  rec->add_option("--feather", rc_opts.feather, "offset blending, 0 blocky to 1 smooth (2d)")->capture_default_str();
  rc.add_to(rec, false);

  fs::path st_corpus, st_out, st_picks;
  std::uint64_t st_seed = 0;
  int st_swatch = 240;
  auto* stim = app.add_subcommand("stimuli", "generate survey conditions and swatches from a design corpus");
  stim->add_option("--corpus", st_corpus, "directory of PNG or palette JSON designs")->required();
  stim->add_option("--out", st_out, "output directory")->required();
  stim->add_option("--seed", st_seed, "random seed")->capture_default_str();
  stim->add_option("--picks", st_picks, "JSON array (inline or a file) choosing one candidate per colour cluster");
  stim->add_option("--swatch-size", st_swatch, "swatch side in pixels")->capture_default_str()->check(CLI::Range(5, 4096));

  fs::path sa_csv, sa_out;
  std::string sa_mode = "survey";
  auto* stats_cmd = app.add_subcommand("stats", "Kruskal-Wallis / Tukey HSD survey report or CSI summary");
  stats_cmd->add_option("--ratings", sa_csv, "ratings CSV")->required();
  stats_cmd->add_option("--mode", sa_mode, "survey or csi")->capture_default_str()->check(CLI::IsMember({"survey", "csi"}));
  stats_cmd->add_option("--out", sa_out, "report JSON; the text table goes next to it as .txt");

  std::string sv_addr;
  fs::path sv_data;
  std::size_t sv_max = 0;
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  serve->add_option("--addr", sv_addr, "host:port (env PSTUDIO_ADDR, default 127.0.0.1:8080)");
  serve->add_option("--data-dir", sv_data, "data directory (env PSTUDIO_DATA_DIR)");
  serve->add_option("--max-upload-bytes", sv_max, "upload limit (env PSTUDIO_MAX_UPLOAD_BYTES)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    out << "pstudio 1.0.0\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*extract) return cmd_extract(ex, ex_image, ex_out, out);
    if (*rec)
      return cmd_recolor(rc, rc_image, rc_target, rc_out, rc_opts, rec->count("--grid") > 0, rec->count("--k") > 0, out);
    if (*stim) return cmd_stimuli(st_corpus, st_out, st_seed, st_picks, st_swatch, out);
    if (*stats_cmd) return cmd_stats(sa_csv, sa_mode, sa_out, out);
    if (*serve) {
      try {
        service::Config config;
        config.apply_env();
        if (!sv_addr.empty()) std::tie(config.host, config.port) = service::parse_addr(sv_addr);
        if (!sv_data.empty()) config.data_dir = sv_data;
        if (sv_max > 0) config.max_upload_bytes = sv_max;
        return cmd_serve(std::move(config), out);
      } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace pstudio::cli
