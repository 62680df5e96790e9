#include "pstudio/cli.hpp"
#include "pstudio/palette_json.hpp"
#include "pstudio/png_io.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace pstudio;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream o(p, std::ios::binary);
  o << text;
}

Image two_colour(int w, int h, double share) {
  return oracle::banded(w, h, std::vector<RgbColor>{{210, 40, 40}, {40, 60, 210}}, std::vector<double>{share, 1 - share});
}

}  // namespace

TEST_CASE("extract") {
  const auto dir = fixture::scratch_dir("cli-extract");
  write_png(dir / "two.png", two_colour(40, 30, 0.3));
  const Outcome r = run({"extract", "--image", (dir / "two.png").string(), "--format", "1dplus", "--k", "2", "--force-k"});
  REQUIRE(r.code == 0);
  const json p = json::parse(r.out);
  CHECK(p["format"] == "1d+");
  REQUIRE(p["colors"].size() == 2);
  CHECK(p["colors"][0] == "#283CD2");
  CHECK(std::abs(p["proportions"][0].get<double>() - 0.7) < 1e-9);

  const Outcome bad_k = run({"extract", "--image", (dir / "two.png").string(), "--k", "13"});
  CHECK(bad_k.code == 2);
  CHECK(bad_k.err.find("4-12") != std::string::npos);
  CHECK(run({"extract", "--image", (dir / "missing.png").string()}).code == 1);
  CHECK(run({"extract", "--image", (dir / "two.png").string(), "--format", "3d"}).code == 2);
  CHECK(run({"extract"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);

  write_png(dir / "scene.png", oracle::random_scene(3, 80, 60));
  for (const char* format : {"1d", "1dplus", "2d"}) {
    const std::vector<std::string> args = {"extract", "--image", (dir / "scene.png").string(), "--format", format,
                                           "--seed", "7", "--out", (dir / "a.json").string()};
    REQUIRE(run(args).code == 0);
    const std::string first = slurp(dir / "a.json");
    REQUIRE(run(args).code == 0);
    CHECK(slurp(dir / "a.json") == first);
  }
  fs::remove_all(dir);
}

TEST_CASE("recolor") {
  const auto dir = fixture::scratch_dir("cli-recolor");
  const Image img = oracle::random_scene(4, 64, 48);
  write_png(dir / "in.png", img);
  REQUIRE(run({"extract", "--image", (dir / "in.png").string(), "--format", "2d", "--out", (dir / "p.json").string()}).code == 0);
  const auto recolour = [&](const std::string& target, const std::string& out) {
    return run({"recolor", "--image", (dir / "in.png").string(), "--target", target, "--out", out});
  };
  REQUIRE(recolour((dir / "p.json").string(), (dir / "same.png").string()).code == 0);
  CHECK(oracle::mean_abs_channel_diff(read_png(dir / "same.png"), img) <= 1.0);

  json edited = json::parse(slurp(dir / "p.json"));
  edited["grid"][2][2] = "#00FF80";
  spit(dir / "e.json", edited.dump());
  REQUIRE(recolour((dir / "e.json").string(), (dir / "e1.png").string()).code == 0);
  REQUIRE(recolour((dir / "e.json").string(), (dir / "e2.png").string()).code == 0);
  CHECK(slurp(dir / "e1.png") == slurp(dir / "e2.png"));
  CHECK(read_png(dir / "e1.png") != img);

  json grid3 = edited;
  grid3["grid"] = json::array({json::array({"#000000", "#111111", "#222222"}), json::array({"#333333", "#444444", "#000000"}),
                               json::array({"#000000", "#000000", "#000000"})});
  grid3["grid_size"] = 3;
  spit(dir / "g3.json", grid3.dump());
  // Extraction takes k and grid from the target, so another grid size is a
  // legal request; a 1d target with too few colours for k is not.
  CHECK(recolour((dir / "g3.json").string(), (dir / "g3.png").string()).code == 0);

  spit(dir / "short.json", R"({"format":"1d","k":5,"colors":["#000000","#FFFFFF","#FF0000","#00FF00"]})");
  const Outcome mismatch = recolour((dir / "short.json").string(), (dir / "x.png").string());
  CHECK(mismatch.code == 3);

  spit(dir / "plus.json", R"({"format":"1d+","k":5,"colors":["#000000"],"proportions":[0.5]})");
  CHECK(recolour((dir / "plus.json").string(), (dir / "x.png").string()).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("recolor reports 1d+ convergence") {
  const auto dir = fixture::scratch_dir("cli-plus");
  write_png(dir / "in.png", two_colour(64, 64, 0.5));
  REQUIRE(run({"extract", "--image", (dir / "in.png").string(), "--format", "1dplus", "--k", "2", "--force-k", "--out",
               (dir / "p.json").string()})
              .code == 0);
  json p = json::parse(slurp(dir / "p.json"));
  p["proportions"] = {0.75, 0.25};
  spit(dir / "t.json", p.dump());
  const Outcome r = run({"recolor", "--image", (dir / "in.png").string(), "--target", (dir / "t.json").string(), "--out",
                         (dir / "out.png").string(), "--force-k"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("residual") != std::string::npos);
  CHECK(r.out.find("achieved") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("stimuli") {
  const auto dir = fixture::scratch_dir("cli-stimuli");
  fixture::write_corpus(dir / "corpus", fixture::synthetic_corpus(50));
  const Outcome r = run({"stimuli", "--corpus", (dir / "corpus").string(), "--out", (dir / "out").string(), "--seed", "3",
                         "--swatch-size", "50"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("155 swatches") != std::string::npos);
  int pngs = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "out")) pngs += e.path().extension() == ".png";
  CHECK(pngs == 155);
  const json manifest = json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(manifest["combinations"].size() == 5);

  CHECK(run({"stimuli", "--corpus", (dir / "corpus").string(), "--out", (dir / "o2").string(), "--picks", "[0,0]"}).code == 2);
  fs::create_directories(dir / "empty");
  CHECK(run({"stimuli", "--corpus", (dir / "empty").string(), "--out", (dir / "o3").string()}).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("stats") {
  const auto dir = fixture::scratch_dir("cli-stats");
  std::ostringstream csv;
  csv << "participant,system,factor,rating,pair_count\n";
  const char* factors[] = {"enjoyment", "exploration", "expressiveness", "immersion", "collaboration", "results_worth_effort"};
  const int counts[] = {5, 4, 3, 2, 1, 0};
  for (int p = 0; p < 3; ++p)
    for (int f = 0; f < 6; ++f) csv << "P" << p << ",studio," << factors[f] << ",10," << counts[f] << "\n";
  spit(dir / "csi.csv", csv.str());
  const Outcome r = run({"stats", "--ratings", (dir / "csi.csv").string(), "--mode", "csi", "--out", (dir / "csi.json").string()});
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(dir / "csi.json"));
  CHECK(j["systems"][0]["mean"].get<double>() == doctest::Approx(100.0));
  CHECK(fs::exists(dir / "csi.txt"));

  spit(dir / "bad.csv", "participant,system,factor,rating,pair_count\nP1,s,enjoyment,5,16\n");
  CHECK(run({"stats", "--ratings", (dir / "bad.csv").string(), "--mode", "csi"}).code == 2);

  std::ostringstream survey;
  survey << "participant,condition,format,combination,metric,rating\n";
  for (int p = 0; p < 6; ++p)
    for (int c = 1; c <= 5; ++c)
      for (const char* f : {"1d", "1dplus", "2d"})
        for (const char* m : {"harmony", "valence", "arousal"})
          survey << "P" << p << ",x," << f << "," << c << "," << m << "," << (1 + (p + c) % 9) << "\n";
  spit(dir / "survey.csv", survey.str());
  const Outcome s = run({"stats", "--ratings", (dir / "survey.csv").string(), "--out", (dir / "s.json").string()});
  REQUIRE(s.code == 0);
  const json sj = json::parse(slurp(dir / "s.json"));
  CHECK(sj["by_format"]["rows"].size() == 18);
  CHECK(sj["by_combination"]["rows"].size() == 3);
  fs::remove_all(dir);
}

TEST_CASE("serve rejects a bad address") {
  CHECK(run({"serve", "--addr", "nonsense"}).code == 1);
  CHECK(run({"serve", "--addr", "10.255.255.1:1"}).code == 1);
}

TEST_CASE("the installed binary uses the documented exit codes") {
  const char* bin = std::getenv("PSTUDIO_BIN");
  if (bin == nullptr) return;
  const auto dir = fixture::scratch_dir("cli-bin");
  write_png(dir / "in.png", oracle::random_scene(2, 32, 32));
  const auto status = [&](const std::string& args) {
    const int raw = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status("--version") == 0);
  CHECK(status("extract --image " + (dir / "in.png").string() + " --out " + (dir / "p.json").string()) == 0);
  CHECK(status("extract --image " + (dir / "in.png").string() + " --k 3") == 2);
  spit(dir / "short.json", R"({"format":"1d","k":5,"colors":["#000000","#FFFFFF","#FF0000","#00FF00"]})");
  CHECK(status("recolor --image " + (dir / "in.png").string() + " --target " + (dir / "short.json").string() + " --out " +
               (dir / "o.png").string()) == 3);
  CHECK(status("extract --image " + (dir / "nope.png").string()) == 1);
  fs::remove_all(dir);
}
