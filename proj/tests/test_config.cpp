#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "alsim/config.hpp"

using namespace alsim;

namespace {

const char* kMinimalCls = R"(
[data]
source = synthetic-classification
)";

}  // namespace

TEST_CASE("ini parsing handles sections comments and whitespace") {
  IniMap ini = parse_ini(
      "# leading comment\n"
      "[run]\n"
      "name = demo run \n"
      "; another comment\n"
      "  seeds=4,5\n"
      "\n"
      "[data]\n"
      "source = files\n");
  REQUIRE(ini.at("run").at("name") == "demo run");
  REQUIRE(ini.at("run").at("seeds") == "4,5");
  REQUIRE(ini.at("data").at("source") == "files");

  REQUIRE_THROWS_WITH(parse_ini("[run]\nname demo\n"),
                      Catch::Matchers::ContainsSubstring("line 2"));
  REQUIRE_THROWS_WITH(parse_ini("name = demo\n"),
                      Catch::Matchers::ContainsSubstring("outside any"));
  REQUIRE_THROWS_WITH(parse_ini("[run\nname = x\n"),
                      Catch::Matchers::ContainsSubstring("section header"));
  REQUIRE_THROWS_WITH(parse_ini("[run]\na = 1\na = 2\n"),
                      Catch::Matchers::ContainsSubstring("duplicate key"));
}

TEST_CASE("defaults are materialized into a complete snapshot") {
  auto runs = resolve_config(parse_ini(kMinimalCls));
  REQUIRE(runs.size() == 1);
  const ResolvedRun& r = runs[0];
  REQUIRE(r.name == "run");
  REQUIRE(r.experiment.acquisition == "random");
  REQUIRE(r.experiment.seeds == std::vector<std::uint64_t>{1, 2, 3});
  REQUIRE(r.experiment.warmstart_fraction == 0.02);
  REQUIRE(r.experiment.stop_fraction == 0.5);
  REQUIRE(r.experiment.ensemble_passes == 25);
  REQUIRE(r.experiment.train.max_epochs == 25);
  REQUIRE(r.experiment.train.patience == 1);
  REQUIRE(r.experiment.model.architecture == Architecture::kAvgEmbedMlp);
  REQUIRE(r.experiment.model.flavor == Flavor::kDeterministic);
  REQUIRE(r.data.examples == 2000);
  REQUIRE(r.data.classes == 4);

  // Every consumed default appears in the snapshot explicitly.
  REQUIRE(r.resolved.at("al").at("warmstart") == "0.02");
  REQUIRE(r.resolved.at("train").at("epochs") == "25");
  REQUIRE(r.resolved.at("model").at("hidden") == "16");
  REQUIRE(r.resolved.at("run").at("seeds") == "1, 2, 3");
}

TEST_CASE("resolution is a fixed point of its own snapshot") {
  IniMap ini = parse_ini(
      "[run]\n"
      "name = pin\n"
      "seeds = 9, 11\n"
      "[data]\n"
      "source = synthetic-tagging\n"
      "sentences = 300\n"
      "rare_weight = 0.05\n"
      "[model]\n"
      "architecture = recurrent-tagger\n"
      "hidden = 8\n"
      "flavor = dropout\n"
      "dropout_rate = 0.25\n"
      "dropout_scope = per-sequence\n"
      "[train]\n"
      "lr = 0.005\n"
      "[al]\n"
      "acquisition = mnlp\n"
      "warmstart = 0.1\n"
      "step = 0.1\n"
      "stop = 0.3\n");
  auto runs = resolve_config(ini);
  REQUIRE(runs.size() == 1);
  auto again = resolve_config(runs[0].resolved);
  REQUIRE(again.size() == 1);
  REQUIRE(again[0].resolved == runs[0].resolved);
  REQUIRE(again[0].name == "pin");
  REQUIRE(again[0].experiment.model.dropout.rate == 0.25);
  REQUIRE(serialize_ini(again[0].resolved) ==
          serialize_ini(runs[0].resolved));

  // The snapshot itself parses back to the identical map.
  REQUIRE(parse_ini(serialize_ini(runs[0].resolved)) == runs[0].resolved);
}

TEST_CASE("a matrix expands acquisition functions sharing seeds") {
  IniMap ini = parse_ini(
      "[data]\n"
      "source = synthetic-classification\n"
      "[run]\n"
      "seeds = 2, 4\n"
      "[matrix]\n"
      "acquisition = random, lc, do-bald\n");
  auto runs = resolve_config(ini);
  REQUIRE(runs.size() == 3);
  REQUIRE(runs[0].name == "random");
  REQUIRE(runs[1].name == "lc");
  REQUIRE(runs[2].name == "do-bald");
  for (const auto& r : runs) {
    REQUIRE(r.experiment.seeds == std::vector<std::uint64_t>{2, 4});
  }
  // Disagreement scoring needs stochastic passes; the grid adjusts flavor
  // per acquisition instead of rejecting the deterministic baselines.
  REQUIRE(runs[0].experiment.model.flavor == Flavor::kDeterministic);
  REQUIRE(runs[1].experiment.model.flavor == Flavor::kDeterministic);
  REQUIRE(runs[2].experiment.model.flavor == Flavor::kDropout);
  REQUIRE(runs[2].experiment.model.dropout.rate == 0.5);
}

TEST_CASE("a matrix crosses acquisitions with architectures") {
  IniMap ini = parse_ini(
      "[data]\n"
      "source = synthetic-classification\n"
      "[matrix]\n"
      "acquisition = random, lc\n"
      "architecture = avg-embed-mlp, conv-classifier\n");
  auto runs = resolve_config(ini);
  REQUIRE(runs.size() == 4);
  REQUIRE(runs[0].name == "random-avg-embed-mlp");
  REQUIRE(runs[1].name == "lc-avg-embed-mlp");
  REQUIRE(runs[2].name == "random-conv-classifier");
  REQUIRE(runs[3].name == "lc-conv-classifier");
}

TEST_CASE("self mode forces the variational flavor") {
  IniMap ini = parse_ini(
      "[data]\n"
      "source = synthetic-classification\n"
      "[al]\n"
      "acquisition = bb-bald\n"
      "bbb_mode = self\n");
  auto runs = resolve_config(ini);
  REQUIRE(runs[0].experiment.model.flavor == Flavor::kBayesByBackprop);

  IniMap sib = parse_ini(
      "[data]\n"
      "source = synthetic-classification\n"
      "[al]\n"
      "acquisition = bb-bald\n"
      "bbb_mode = sibling\n");
  auto sruns = resolve_config(sib);
  REQUIRE(sruns[0].experiment.model.flavor == Flavor::kDeterministic);
}

TEST_CASE("field errors name the offending section and key") {
  auto resolve = [](const std::string& text) {
    return resolve_config(parse_ini(text));
  };
  REQUIRE_THROWS_WITH(resolve("[data]\nsource = magic\n"),
                      Catch::Matchers::ContainsSubstring("[data] source"));
  REQUIRE_THROWS_WITH(
      resolve("[data]\nsource = files\nformat = column\n"),
      Catch::Matchers::ContainsSubstring("[data] train"));
  REQUIRE_THROWS_WITH(
      resolve(std::string(kMinimalCls) + "[train]\nepochs = soon\n"),
      Catch::Matchers::ContainsSubstring("[train] epochs"));
  REQUIRE_THROWS_WITH(
      resolve(std::string(kMinimalCls) + "[model]\nflavor = crispy\n"),
      Catch::Matchers::ContainsSubstring("[model] flavor"));
  REQUIRE_THROWS_WITH(
      resolve(std::string(kMinimalCls) + "[al]\nacquisition = oracle\n"),
      Catch::Matchers::ContainsSubstring("[al] acquisition"));
  REQUIRE_THROWS_WITH(
      resolve(std::string(kMinimalCls) + "[al]\nbbb_mode = twin\n"),
      Catch::Matchers::ContainsSubstring("[al] bbb_mode"));
  REQUIRE_THROWS_WITH(
      resolve(std::string(kMinimalCls) + "[model]\ntemperature = 2\n"),
      Catch::Matchers::ContainsSubstring("[model] temperature"));
  REQUIRE_THROWS_WITH(resolve(std::string(kMinimalCls) + "[plot]\ndpi = 2\n"),
                      Catch::Matchers::ContainsSubstring("[plot]"));
  REQUIRE_THROWS_WITH(
      resolve("[data]\nsource = synthetic-tagging\nrare_weight = 1.5\n"),
      Catch::Matchers::ContainsSubstring("rare_weight"));
  REQUIRE_THROWS_WITH(
      resolve(std::string(kMinimalCls) + "[run]\nseeds = 1, two\n"),
      Catch::Matchers::ContainsSubstring("[run] seeds"));
}

TEST_CASE("doubles round-trip through their shortest form") {
  for (double v : {0.02, 1e-3, 0.1, 1.0 / 3.0, 123456.789, 5e-324}) {
    const std::string s = format_double(v);
    double back = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), back);
    REQUIRE(res.ec == std::errc());
    REQUIRE(back == v);
  }
  REQUIRE(format_double(0.02) == "0.02");
  REQUIRE(format_double(25.0) == "25");
}
