#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "alsim/cli.hpp"

using namespace alsim;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "alsim_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kFastConfig = R"(
[run]
name = demo
seeds = 1, 2
[data]
source = synthetic-classification
examples = 80
classes = 3
vocab = 50
signal = 0.8
sentence_length = 5
signal_tokens = 3
embedding_dim = 5
[model]
architecture = avg-embed-mlp
hidden = 4
[train]
epochs = 3
[al]
acquisition = lc
warmstart = 0.1
step = 0.2
stop = 0.5
)";

std::string write_config(const fs::path& dir, const std::string& text) {
  const std::string path = (dir / "config.ini").string();
  write_text_file(path, text);
  return path;
}

// Drops the final (wall_ms) column of every row; the one measured value.
std::string strip_wall_ms(const std::string& csv) {
  std::string out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    auto pos = line.rfind(',');
    out += line.substr(0, pos) + "\n";
  }
  return out;
}

std::size_t line_count(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("cmd_run writes the full artifact set") {
  fs::path dir = fresh_dir("single");
  const std::string cfg = write_config(dir, kFastConfig);
  const std::string out_dir = (dir / "out").string();

  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg, out_dir, 1, out, err) == 0);
  REQUIRE(err.str().empty());
  REQUIRE(out.str().find("demo: accuracy auc=") != std::string::npos);

  const std::string run_dir = out_dir + "/demo";
  const std::string rounds = read_text_file(run_dir + "/rounds.csv");
  REQUIRE(line_count(rounds) == 1 + 2 * 3);  // header + seeds x rounds
  REQUIRE(rounds.rfind("seed,round,", 0) == 0);

  const std::string acquired = read_text_file(run_dir + "/acquired.csv");
  REQUIRE(acquired.find("1,-1,0,") != std::string::npos);  // warmstart rows

  nlohmann::json manifest =
      nlohmann::json::parse(read_text_file(run_dir + "/manifest.json"));
  REQUIRE(manifest.at("complete") == true);
  REQUIRE(manifest.at("version") == kToolVersion);
  REQUIRE(manifest.at("config").at("al").at("acquisition") == "lc");

  nlohmann::json summary =
      nlohmann::json::parse(read_text_file(run_dir + "/summary.json"));
  REQUIRE(summary.at("points").size() == 3);
  REQUIRE(summary.at("seeds") == nlohmann::json({1, 2}));
}

TEST_CASE("a manifest rerun reproduces artifacts byte for byte") {
  fs::path dir = fresh_dir("rerun");
  const std::string cfg = write_config(dir, kFastConfig);
  const std::string out1 = (dir / "out1").string();
  const std::string out2 = (dir / "out2").string();

  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg, out1, 1, out, err) == 0);
  REQUIRE(cmd_run(out1 + "/demo/manifest.json", out2, 1, out, err) == 0);

  // wall_ms is measured, every other byte matches exactly.
  REQUIRE(strip_wall_ms(read_text_file(out1 + "/demo/rounds.csv")) ==
          strip_wall_ms(read_text_file(out2 + "/demo/rounds.csv")));
  REQUIRE(read_text_file(out1 + "/demo/acquired.csv") ==
          read_text_file(out2 + "/demo/acquired.csv"));
  REQUIRE(read_text_file(out1 + "/demo/summary.json") ==
          read_text_file(out2 + "/demo/summary.json"));
}

TEST_CASE("a matrix run expands and shares warmstart batches") {
  fs::path dir = fresh_dir("matrix");
  std::string text = kFastConfig;
  text +=
      "[matrix]\n"
      "acquisition = random, lc\n";
  const std::string cfg = write_config(dir, text);
  const std::string out_dir = (dir / "out").string();

  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg, out_dir, 2, out, err) == 0);
  REQUIRE(out.str().find("random: accuracy auc=") != std::string::npos);
  REQUIRE(out.str().find("lc: accuracy auc=") != std::string::npos);

  auto warmstart_rows = [](const std::string& csv) {
    std::string rows;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find(",-1,") != std::string::npos) rows += line + "\n";
    }
    return rows;
  };
  const std::string a = read_text_file(out_dir + "/random/acquired.csv");
  const std::string b = read_text_file(out_dir + "/lc/acquired.csv");
  REQUIRE(warmstart_rows(a) == warmstart_rows(b));
  REQUIRE(a != b);  // later batches diverge
}

TEST_CASE("bad configs are rejected with diagnostics before training") {
  fs::path dir = fresh_dir("bad");
  std::string text = kFastConfig;
  text += "[al2]\nx = 1\n";
  std::ostringstream out, err;
  REQUIRE(cmd_run(write_config(dir, text), (dir / "o").string(), 1, out,
                  err) == 2);
  REQUIRE(err.str().find("unknown section [al2]") != std::string::npos);
  REQUIRE_FALSE(fs::exists(dir / "o" / "demo"));

  // Task-incompatible acquisition also fails before any artifact exists.
  fs::path dir2 = fresh_dir("bad2");
  std::string mnlp = kFastConfig;
  mnlp.replace(mnlp.find("acquisition = lc"), 16, "acquisition = mnlp");
  std::ostringstream out2, err2;
  REQUIRE(cmd_run(write_config(dir2, mnlp), (dir2 / "o").string(), 1, out2,
                  err2) == 2);
  REQUIRE(err2.str().find("mnlp") != std::string::npos);
  REQUIRE_FALSE(fs::exists(dir2 / "o" / "demo"));
}

TEST_CASE("a failing run reports nonzero and names the run") {
  fs::path dir = fresh_dir("blocked");
  const std::string cfg = write_config(dir, kFastConfig);
  // A regular file where the output tree should go blocks creation.
  const std::string blocker = (dir / "occupied").string();
  write_text_file(blocker, "in the way\n");

  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg, blocker + "/out", 1, out, err) == 1);
  REQUIRE(err.str().find("demo: failed:") != std::string::npos);
}

TEST_CASE("gen-data writes loadable byte-stable datasets") {
  fs::path dir = fresh_dir("gendata");
  const std::string spec = write_config(dir,
                                        "[data]\n"
                                        "source = synthetic-classification\n"
                                        "examples = 30\n"
                                        "classes = 2\n"
                                        "vocab = 30\n"
                                        "signal = 0.9\n"
                                        "signal_tokens = 3\n");
  std::ostringstream out, err;
  REQUIRE(cmd_gen_data(spec, (dir / "d1").string(), out, err) == 0);
  REQUIRE(cmd_gen_data(spec, (dir / "d2").string(), out, err) == 0);
  REQUIRE(read_text_file((dir / "d1" / "data.tsv").string()) ==
          read_text_file((dir / "d2" / "data.tsv").string()));
  auto loaded =
      load_delimited_classification((dir / "d1" / "data.tsv").string());
  REQUIRE(loaded.size() == 30);
  nlohmann::json meta =
      nlohmann::json::parse(read_text_file((dir / "d1" / "meta.json").string()));
  REQUIRE(meta.at("bayes_accuracy").get<double>() > 0.5);

  const std::string tag_spec = write_config(
      fresh_dir("gendata_tag"),
      "[data]\nsource = synthetic-tagging\nsentences = 25\n");
  fs::path tdir = fresh_dir("gendata_tag_out");
  REQUIRE(cmd_gen_data(tag_spec, tdir.string(), out, err) == 0);
  auto tagged = load_column_format((tdir / "data.conll").string());
  REQUIRE(tagged.size() == 25);

  const std::string files_spec = write_config(
      fresh_dir("gendata_files"),
      "[data]\nsource = files\nformat = column\ntrain = /nonexistent\n");
  std::ostringstream err2;
  REQUIRE(cmd_gen_data(files_spec, (dir / "d3").string(), out, err2) == 2);
  REQUIRE(err2.str().find("synthetic") != std::string::npos);
}

TEST_CASE("plot renders summaries and report tabulates them") {
  fs::path dir = fresh_dir("plot_report");
  const std::string cfg = write_config(dir, kFastConfig);
  const std::string out_dir = (dir / "out").string();
  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg, out_dir, 1, out, err) == 0);

  const std::string svg_path = (dir / "curves.svg").string();
  REQUIRE(cmd_plot({out_dir + "/demo/summary.json"}, svg_path, "demo title",
                   err) == 0);
  const std::string svg = read_text_file(svg_path);
  REQUIRE(svg.rfind("<svg", 0) == 0);
  REQUIRE(svg.find("demo title") != std::string::npos);
  REQUIRE(svg.find(">demo</text>") != std::string::npos);
  REQUIRE(svg.find("labeled fraction") != std::string::npos);

  std::ostringstream table;
  REQUIRE(cmd_report(out_dir, table, err) == 0);
  REQUIRE(table.str().find("run\tmetric\tauc\tfinal\n") == 0);
  REQUIRE(table.str().find("demo\taccuracy\t") != std::string::npos);

  std::ostringstream err2;
  REQUIRE(cmd_plot({(dir / "missing.json").string()}, svg_path, "", err2) ==
          2);
  REQUIRE(cmd_report((dir / "empty").string(), table, err2) == 2);
}
