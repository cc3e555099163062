#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "alsim/runio.hpp"

using namespace alsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  fs::path p = fs::temp_directory_path() / "alsim_runio_tests";
  fs::create_directories(p);
  return p;
}

DataConfig synthetic_cls_config() {
  DataConfig d;
  d.source = "synthetic-classification";
  d.examples = 200;
  d.classes = 3;
  d.vocab = 60;
  d.signal = 0.8;
  d.sentence_length = 6;
  d.signal_tokens = 3;
  d.embedding_dim = 7;
  d.data_seed = 42;
  d.split_seed = 5;
  return d;
}

}  // namespace

TEST_CASE("the rare template appears at its configured frequency") {
  auto spec = builtin_tagging_spec(5000, 0.02);
  auto gen = generate_synthetic_tagging(spec, 17);
  REQUIRE(gen.examples.size() == 5000);
  std::size_t rare = 0;
  for (const auto& ex : gen.examples) {
    if (ex.tokens.front() == "analysts") ++rare;
  }
  // Binomial(5000, 0.02): mean 100, sigma ~9.9; accept within 3 sigma.
  REQUIRE(rare >= 70);
  REQUIRE(rare <= 130);
  REQUIRE_THROWS_AS(builtin_tagging_spec(100, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(builtin_tagging_spec(100, 1.0), std::invalid_argument);
}

TEST_CASE("synthetic corpora load with split sizes and fixed fingerprints") {
  DataConfig d = synthetic_cls_config();
  Corpus c = load_corpus(d);
  REQUIRE(c.task == Task::kClassification);
  REQUIRE(c.cls.size() == 200);
  REQUIRE(c.split.train.size() == 160);
  REQUIRE(c.split.val.size() == 20);
  REQUIRE(c.split.test.size() == 20);
  REQUIRE(c.label_names.size() == 3);
  REQUIRE(c.embeddings.dim == 7);

  REQUIRE(corpus_fingerprint(c) == corpus_fingerprint(load_corpus(d)));
  d.data_seed = 43;
  REQUIRE(corpus_fingerprint(c) != corpus_fingerprint(load_corpus(d)));

  DataConfig t;
  t.source = "synthetic-tagging";
  t.sentences = 150;
  t.rare_weight = 0.1;
  t.embedding_dim = 5;
  Corpus tc = load_corpus(t);
  REQUIRE(tc.task == Task::kTagging);
  REQUIRE(tc.tag.size() == 150);
  REQUIRE(std::find(tc.label_names.begin(), tc.label_names.end(), "B-ORG") !=
          tc.label_names.end());
  REQUIRE(corpus_fingerprint(tc) == corpus_fingerprint(load_corpus(t)));
}

TEST_CASE("delimited files round-trip through the corpus loader") {
  fs::path dir = scratch_dir();
  std::vector<RawClassification> raw;
  for (int i = 0; i < 40; ++i) {
    RawClassification ex;
    ex.label = i % 2 ? "pos" : "neg";
    ex.tokens = {"Token" + std::to_string(i % 7), "filler"};
    raw.push_back(ex);
  }
  const std::string path = (dir / "cls.tsv").string();
  write_delimited_classification(path, raw);

  DataConfig d;
  d.source = "files";
  d.format = "delimited";
  d.train_path = path;
  d.embedding_dim = 4;
  Corpus c = load_corpus(d);
  REQUIRE(c.task == Task::kClassification);
  REQUIRE(c.cls.size() == 40);
  REQUIRE(c.label_names == std::vector<std::string>{"neg", "pos"});
  REQUIRE(c.split.train.size() == 32);

  // Lowercasing is on by default, so re-written tokens differ in case only.
  auto reread = load_delimited_classification(path, '\t', true);
  REQUIRE(reread[0].tokens[0] == "token0");
}

TEST_CASE("explicit validation and test files define the split") {
  fs::path dir = scratch_dir();
  auto write_block = [&](const std::string& name, std::size_t n,
                         const std::string& tag) {
    std::vector<RawTagged> raw;
    for (std::size_t i = 0; i < n; ++i) {
      RawTagged ex;
      ex.tokens = {"w" + std::to_string(i), "x"};
      ex.tags = {tag, "O"};
      raw.push_back(ex);
    }
    const std::string path = (dir / name).string();
    write_column_format(path, raw);
    return path;
  };
  DataConfig d;
  d.source = "files";
  d.format = "column";
  d.train_path = write_block("train.conll", 30, "B-PER");
  d.val_path = write_block("val.conll", 7, "B-PER");
  d.test_path = write_block("test.conll", 5, "B-PER");
  d.embedding_dim = 3;

  Corpus c = load_corpus(d);
  REQUIRE(c.task == Task::kTagging);
  REQUIRE(c.tag.size() == 42);
  REQUIRE(c.split.train.size() == 30);
  REQUIRE(c.split.val == std::vector<std::size_t>{30, 31, 32, 33, 34, 35, 36});
  REQUIRE(c.split.test == std::vector<std::size_t>{37, 38, 39, 40, 41});
  REQUIRE(c.split.train.front() == 0);
  REQUIRE(c.split.train.back() == 29);
}

TEST_CASE("pretrained vectors override the random embedding table") {
  fs::path dir = scratch_dir();
  const std::string emb_path = (dir / "vecs.txt").string();
  write_text_file(emb_path,
                  "alpha 1 2 3\n"
                  "beta 4 5 6\n");
  const std::string data_path = (dir / "emb_cls.tsv").string();
  write_delimited_classification(
      data_path, {{"a", {"alpha", "beta"}}, {"b", {"alpha", "gamma"}},
                  {"a", {"beta", "gamma"}}, {"b", {"alpha", "beta"}},
                  {"a", {"gamma", "gamma"}}});

  DataConfig d;
  d.source = "files";
  d.format = "delimited";
  d.train_path = data_path;
  d.embeddings_path = emb_path;
  Corpus c = load_corpus(d);
  REQUIRE(c.embeddings.dim == 3);
  REQUIRE(c.embeddings.matrix.cols() == 3);
}

TEST_CASE("round rows serialize every column in order") {
  SeedResult sr;
  sr.seed = 9;
  RoundRecord r;
  r.round = 0;
  r.labeled_sentences = 20;
  r.labeled_words = 120;
  r.labeled_fraction = 0.02;
  r.test_metric = 0.625;
  r.epochs = 3;
  r.wall_ms = 41.7;
  sr.rounds.push_back(r);
  r.round = 1;
  r.labeled_sentences = 40;
  r.labeled_words = 260;
  r.labeled_fraction = 0.04;
  r.test_metric = 0.75;
  r.epochs = 2;
  r.wall_ms = 39.2;
  sr.rounds.push_back(r);

  REQUIRE(rounds_csv_header() ==
          "seed,round,labeled_sentences,labeled_words,labeled_fraction,"
          "metric_name,metric_value,epochs,wall_ms\n");
  REQUIRE(rounds_csv_rows(sr, "accuracy") ==
          "9,0,20,120,0.02,accuracy,0.625,3,41\n"
          "9,1,40,260,0.04,accuracy,0.75,2,39\n");
}

TEST_CASE("the acquired log records warmstart and per-round batches") {
  SeedResult sr;
  sr.seed = 4;
  sr.warmstart_ids = {11, 3};
  RoundRecord r0;
  r0.round = 0;
  r0.acquired_ids = {8, 2, 5};
  sr.rounds.push_back(r0);
  RoundRecord r1;
  r1.round = 1;
  sr.rounds.push_back(r1);  // final round acquires nothing

  REQUIRE(acquired_csv_header() == "seed,round,slot,id\n");
  REQUIRE(acquired_csv_rows(sr) ==
          "4,-1,0,11\n"
          "4,-1,1,3\n"
          "4,0,0,8\n"
          "4,0,1,2\n"
          "4,0,2,5\n");
}

TEST_CASE("summaries carry the curve and serialize deterministically") {
  ExperimentResult res;
  res.metric_name = "accuracy";
  res.schedule = {0.1, 0.2};
  SeedResult sr;
  sr.seed = 1;
  res.seeds.push_back(sr);
  res.curve.points = {{0.1, 0.5, 0.0}, {0.2, 0.7, 0.01}};
  res.curve.auc = 0.6;

  nlohmann::json j = summary_json("lc", "lc", res);
  REQUIRE(j.at("name") == "lc");
  REQUIRE(j.at("metric_name") == "accuracy");
  REQUIRE(j.at("auc") == 0.6);
  REQUIRE(j.at("points").size() == 2);
  REQUIRE(j.at("points")[1].at("mean") == 0.7);
  REQUIRE(j.dump(1) == summary_json("lc", "lc", res).dump(1));

  auto back = nlohmann::json::parse(j.dump(1));
  REQUIRE(back == j);
}

TEST_CASE("a manifest reproduces its run exactly") {
  IniMap ini = parse_ini(
      "[data]\n"
      "source = synthetic-classification\n"
      "examples = 120\n"
      "[al]\n"
      "acquisition = lc\n"
      "warmstart = 0.1\n"
      "step = 0.2\n"
      "stop = 0.5\n");
  ResolvedRun run = resolve_config(ini)[0];
  nlohmann::json m = make_manifest(run, 0xabcdefULL, utc_timestamp(), true);
  REQUIRE(m.at("complete") == true);
  REQUIRE(m.at("tool") == "alsim");
  REQUIRE(m.at("corpus_fingerprint") == "fnv1a64:0000000000abcdef");
  REQUIRE(m.at("artifacts").at("rounds_csv") == "rounds.csv");

  ResolvedRun back = run_from_manifest(m);
  REQUIRE(back.resolved == run.resolved);
  REQUIRE(back.name == run.name);
  REQUIRE(back.experiment.acquisition == "lc");

  nlohmann::json failed =
      make_manifest(run, 1, utc_timestamp(), false, "disk full");
  REQUIRE(failed.at("complete") == false);
  REQUIRE(failed.at("error") == "disk full");

  REQUIRE_THROWS_AS(run_from_manifest(nlohmann::json::object()),
                    std::invalid_argument);
}

TEST_CASE("text files round-trip bytes") {
  fs::path dir = scratch_dir();
  const std::string path = (dir / "blob.txt").string();
  const std::string text = "line one\nline two\n\ttabbed\n";
  write_text_file(path, text);
  REQUIRE(read_text_file(path) == text);
  REQUIRE_THROWS_AS(read_text_file((dir / "missing.txt").string()),
                    std::invalid_argument);
}
