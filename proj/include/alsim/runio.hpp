#pragma once

// Turning a data recipe into a Corpus and an experiment into on-disk
// artifacts: rounds CSV, acquired-ids CSV, summary JSON, run manifest.

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "alsim/config.hpp"

namespace alsim {

inline constexpr const char kToolName[] = "alsim";
inline constexpr const char kToolVersion[] = "0.1.0";

// --- corpus construction ---------------------------------------------------

/// The built-in tagging grammar behind `source = synthetic-tagging`. One
/// template is rare; its weight is solved so the requested fraction of
/// sentences uses it, which gives uncertainty scorers something to find.
/// Several surface forms belong to two pools (sterling/hunter are PER or
/// ORG, madison/jordan PER or LOC, phoenix/summit ORG or LOC), so the tag
/// depends on sentence context rather than token identity alone, and the
/// rare template places entities in contexts no common template produces.
inline SyntheticTaggingSpec builtin_tagging_spec(std::size_t sentences,
                                                 double rare_weight) {
  if (!(rare_weight > 0.0 && rare_weight < 1.0)) {
    throw std::invalid_argument("rare template frequency must be in (0, 1)");
  }
  SyntheticTaggingSpec spec;
  spec.num_sentences = sentences;
  spec.pools.push_back(
      {"PER", {"alice", "bob", "carol", "dan", "erin", "frank", "grace",
               "henry", "sterling", "hunter", "madison", "jordan",
               "mary ann"}});
  spec.pools.push_back(
      {"ORG", {"acme", "globex", "initech", "umbrella", "stark", "wayne",
               "sterling", "hunter", "phoenix", "summit", "bank of gotham"}});
  spec.pools.push_back(
      {"LOC", {"springfield", "shelbyville", "gotham", "metropolis",
               "madison", "jordan", "phoenix", "summit", "new berlin"}});
  spec.templates.push_back({{"{PER}", "works", "at", "{ORG}"}, 4.0});
  spec.templates.push_back({{"{PER}", "joined", "{ORG}", "yesterday"}, 3.0});
  spec.templates.push_back({{"the", "firm", "{ORG}", "hired", "{PER}"}, 3.0});
  spec.templates.push_back({{"{PER}", "met", "{PER}", "in", "{LOC}"}, 2.0});
  spec.templates.push_back(
      {{"{ORG}", "opened", "an", "office", "in", "{LOC}"}, 2.0});
  double common = 0.0;
  for (const auto& t : spec.templates) common += t.weight;
  spec.templates.push_back(
      {{"analysts", "expect", "{ORG}", "to", "sue", "{ORG}", "over", "{LOC}"},
       common * rare_weight / (1.0 - rare_weight)});
  return spec;
}

namespace detail {

inline std::vector<std::vector<std::string>> train_token_sequences(
    const std::vector<std::vector<std::string>>& all,
    const std::vector<std::size_t>& train_ids) {
  std::vector<std::vector<std::string>> out;
  out.reserve(train_ids.size());
  for (std::size_t id : train_ids) out.push_back(all[id]);
  return out;
}

inline EmbeddingMatrix corpus_embeddings(const DataConfig& d,
                                         const Vocabulary& vocab) {
  if (!d.embeddings_path.empty()) {
    return load_embeddings(d.embeddings_path, vocab,
                           Rng::mix(d.data_seed, 5));
  }
  return random_embeddings(vocab, d.embedding_dim, Rng::mix(d.data_seed, 5));
}

}  // namespace detail

/// Builds the experiment corpus a data recipe describes. The vocabulary is
/// built from the training split only, so validation and test tokens unseen
/// in training map to the unknown index.
inline Corpus load_corpus(const DataConfig& d) {
  Corpus c;
  c.task = d.task();

  std::vector<RawClassification> raw_cls;
  std::vector<RawTagged> raw_tag;
  bool explicit_split = false;
  std::size_t n_train = 0;
  std::size_t n_val = 0;

  if (d.source == "synthetic-classification") {
    SyntheticClassificationSpec spec;
    spec.num_examples = d.examples;
    spec.num_classes = d.classes;
    spec.vocab_size = d.vocab;
    spec.signal_strength = d.signal;
    spec.sentence_length = d.sentence_length;
    spec.signal_tokens_per_class = d.signal_tokens;
    spec.class_weights = d.class_weights;
    raw_cls = generate_synthetic_classification(spec, d.data_seed).examples;
  } else if (d.source == "synthetic-tagging") {
    raw_tag = generate_synthetic_tagging(
                  builtin_tagging_spec(d.sentences, d.rare_weight),
                  d.data_seed)
                  .examples;
  } else if (d.format == "column") {
    raw_tag = load_column_format(d.train_path);
    if (!d.val_path.empty()) {
      explicit_split = true;
      n_train = raw_tag.size();
      auto val = load_column_format(d.val_path);
      n_val = val.size();
      auto test = load_column_format(d.test_path);
      raw_tag.insert(raw_tag.end(), val.begin(), val.end());
      raw_tag.insert(raw_tag.end(), test.begin(), test.end());
    }
  } else {
    const char delim = d.delimiter == "tab" ? '\t' : d.delimiter[0];
    raw_cls = load_delimited_classification(d.train_path, delim, d.lowercase);
    if (!d.val_path.empty()) {
      explicit_split = true;
      n_train = raw_cls.size();
      auto val = load_delimited_classification(d.val_path, delim, d.lowercase);
      n_val = val.size();
      auto test =
          load_delimited_classification(d.test_path, delim, d.lowercase);
      raw_cls.insert(raw_cls.end(), val.begin(), val.end());
      raw_cls.insert(raw_cls.end(), test.begin(), test.end());
    }
  }

  const std::size_t n =
      c.task == Task::kClassification ? raw_cls.size() : raw_tag.size();
  if (n == 0) throw std::invalid_argument("corpus is empty");

  if (explicit_split) {
    for (std::size_t i = 0; i < n_train; ++i) c.split.train.push_back(i);
    for (std::size_t i = n_train; i < n_train + n_val; ++i) {
      c.split.val.push_back(i);
    }
    for (std::size_t i = n_train + n_val; i < n; ++i) {
      c.split.test.push_back(i);
    }
  } else {
    c.split = split_dataset(n, d.split_seed);
  }

  std::vector<std::vector<std::string>> all_tokens;
  all_tokens.reserve(n);
  if (c.task == Task::kClassification) {
    for (const auto& ex : raw_cls) all_tokens.push_back(ex.tokens);
  } else {
    for (const auto& ex : raw_tag) all_tokens.push_back(ex.tokens);
  }
  Vocabulary vocab = Vocabulary::build(
      detail::train_token_sequences(all_tokens, c.split.train), d.min_freq);
  c.embeddings = detail::corpus_embeddings(d, vocab);

  if (c.task == Task::kClassification) {
    c.label_names = collect_labels(raw_cls);
    c.cls = encode_classification(raw_cls, vocab, c.label_names);
  } else {
    c.label_names = collect_tags(raw_tag);
    c.tag = encode_tagged(raw_tag, vocab, c.label_names);
  }
  return c;
}

// --- corpus fingerprint ------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 14695981039346656037ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

namespace detail {

inline std::uint64_t hash_longs(const std::vector<long>& v, std::uint64_t h) {
  return fnv1a64(v.data(), v.size() * sizeof(long), h);
}

inline std::uint64_t hash_sizes(const std::vector<std::size_t>& v,
                                std::uint64_t h) {
  return fnv1a64(v.data(), v.size() * sizeof(std::size_t), h);
}

}  // namespace detail

/// Order-sensitive digest of everything the simulation consumes: encoded
/// examples, labels, splits, and the embedding table. Two corpora with
/// equal fingerprints drive bitwise-identical experiments.
inline std::uint64_t corpus_fingerprint(const Corpus& c) {
  std::uint64_t h = fnv1a64("corpus", 6);
  const char task = c.task == Task::kClassification ? 'c' : 't';
  h = fnv1a64(&task, 1, h);
  for (const auto& name : c.label_names) {
    h = fnv1a64(name.data(), name.size(), h);
  }
  if (c.task == Task::kClassification) {
    for (const auto& ex : c.cls) {
      h = detail::hash_longs(ex.token_ids, h);
      h = fnv1a64(&ex.label, sizeof(ex.label), h);
    }
  } else {
    for (const auto& ex : c.tag) {
      h = detail::hash_longs(ex.token_ids, h);
      h = detail::hash_longs(ex.tags, h);
    }
  }
  h = detail::hash_sizes(c.split.train, h);
  h = detail::hash_sizes(c.split.val, h);
  h = detail::hash_sizes(c.split.test, h);
  h = fnv1a64(c.embeddings.matrix.data(),
              c.embeddings.matrix.size() * sizeof(double), h);
  return h;
}

inline std::string fingerprint_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + buf;
}

// --- text files ----------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open " + path + " for write");
  out << text;
  if (!out) throw std::runtime_error("short write to " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- run artifacts ---------------------------------------------------------

inline std::string rounds_csv_header() {
  return "seed,round,labeled_sentences,labeled_words,labeled_fraction,"
         "metric_name,metric_value,epochs,wall_ms\n";
}

/// One CSV row per round of one seed. Every column except wall_ms is a pure
/// function of (config, corpus); wall_ms is measured.
inline std::string rounds_csv_rows(const SeedResult& sr,
                                   const std::string& metric_name) {
  std::string out;
  for (const RoundRecord& r : sr.rounds) {
    out += std::to_string(sr.seed) + ',' + std::to_string(r.round) + ',' +
           std::to_string(r.labeled_sentences) + ',' +
           std::to_string(r.labeled_words) + ',' +
           format_double(r.labeled_fraction) + ',' + metric_name + ',' +
           format_double(r.test_metric) + ',' + std::to_string(r.epochs) +
           ',' + std::to_string(static_cast<long long>(r.wall_ms)) + '\n';
  }
  return out;
}

inline std::string acquired_csv_header() { return "seed,round,slot,id\n"; }

/// The labeled set's growth history. Round -1 is the warmstart batch; round
/// r >= 0 lists the ids chosen after round r's evaluation. Slot preserves
/// acquisition order within a batch.
inline std::string acquired_csv_rows(const SeedResult& sr) {
  std::string out;
  const std::string seed = std::to_string(sr.seed);
  for (std::size_t i = 0; i < sr.warmstart_ids.size(); ++i) {
    out += seed + ",-1," + std::to_string(i) + ',' +
           std::to_string(sr.warmstart_ids[i]) + '\n';
  }
  for (const RoundRecord& r : sr.rounds) {
    for (std::size_t i = 0; i < r.acquired_ids.size(); ++i) {
      out += seed + ',' + std::to_string(r.round) + ',' + std::to_string(i) +
             ',' + std::to_string(r.acquired_ids[i]) + '\n';
    }
  }
  return out;
}

/// The averaged learning curve plus its scalar summary, one document per
/// run. Field order is alphabetical, so serialization is deterministic.
inline nlohmann::json summary_json(const std::string& name,
                                   const std::string& acquisition,
                                   const ExperimentResult& res) {
  nlohmann::json j;
  j["name"] = name;
  j["acquisition"] = acquisition;
  j["metric_name"] = res.metric_name;
  j["auc"] = res.curve.auc;
  std::vector<std::uint64_t> seeds;
  for (const auto& sr : res.seeds) seeds.push_back(sr.seed);
  j["seeds"] = seeds;
  nlohmann::json pts = nlohmann::json::array();
  for (const CurvePoint& p : res.curve.points) {
    nlohmann::json row;
    row["fraction"] = p.fraction;
    row["mean"] = p.mean;
    row["stddev"] = p.stddev;
    pts.push_back(std::move(row));
  }
  j["points"] = std::move(pts);
  return j;
}

inline std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// The reproduction record: the fully resolved config, the corpus digest,
/// and relative artifact paths. Timestamps aside, rerunning from this
/// document regenerates every artifact byte-identically except the measured
/// wall_ms CSV column.
inline nlohmann::json make_manifest(const ResolvedRun& run,
                                    std::uint64_t fingerprint,
                                    const std::string& started,
                                    bool complete,
                                    const std::string& error = "") {
  nlohmann::json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["config"] = nlohmann::json::object();
  for (const auto& [sec, kv] : run.resolved) {
    nlohmann::json s = nlohmann::json::object();
    for (const auto& [k, v] : kv) s[k] = v;
    j["config"][sec] = std::move(s);
  }
  j["corpus_fingerprint"] = fingerprint_hex(fingerprint);
  j["artifacts"] = {{"rounds_csv", "rounds.csv"},
                    {"acquired_csv", "acquired.csv"},
                    {"summary", "summary.json"}};
  j["started_utc"] = started;
  j["finished_utc"] = complete || !error.empty() ? utc_timestamp() : "";
  j["complete"] = complete;
  if (!error.empty()) j["error"] = error;
  return j;
}

/// Reconstructs the single run a manifest describes from its embedded
/// resolved config.
inline ResolvedRun run_from_manifest(const nlohmann::json& manifest) {
  if (!manifest.contains("config")) {
    throw std::invalid_argument("manifest has no config object");
  }
  IniMap ini;
  for (const auto& [sec, kv] : manifest.at("config").items()) {
    for (const auto& [k, v] : kv.items()) {
      ini[sec][k] = v.get<std::string>();
    }
  }
  auto runs = resolve_config(ini);
  if (runs.size() != 1) {
    throw std::invalid_argument("manifest config expands to " +
                                std::to_string(runs.size()) +
                                " runs, expected exactly 1");
  }
  return runs[0];
}

}  // namespace alsim
