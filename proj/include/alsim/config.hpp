#pragma once

// INI-style experiment configuration: parsing, typed resolution with
// materialized defaults, and matrix expansion into concrete runs.

#include <charconv>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "alsim/al_loop.hpp"
#include "alsim/textio.hpp"

namespace alsim {

/// Section name -> key -> raw value. std::map keeps serialization stable.
using IniMap = std::map<std::string, std::map<std::string, std::string>>;

namespace detail {

inline std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parses `[section]` headers and `key = value` lines. Lines whose first
/// non-blank character is '#' or ';' are comments. Values keep internal
/// whitespace. Malformed lines are rejected with their line number.
inline IniMap parse_ini(const std::string& text) {
  IniMap out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": malformed section header '" + t + "'");
      }
      section = detail::trim(t.substr(1, t.size() - 2));
      out[section];  // a section may legitimately be empty
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value', got '" + t + "'");
    }
    if (section.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": key outside any [section]");
    }
    std::string key = detail::trim(t.substr(0, eq));
    std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key");
    }
    if (!out[section].emplace(key, value).second) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": duplicate key '" + key + "' in [" +
                                  section + "]");
    }
  }
  return out;
}

namespace detail {

[[noreturn]] inline void config_error(const std::string& section,
                                      const std::string& key,
                                      const std::string& what) {
  throw std::invalid_argument("config [" + section + "] " + key + ": " + what);
}

inline std::string get_str(const IniMap& ini, const std::string& sec,
                           const std::string& key, const std::string& dflt) {
  auto s = ini.find(sec);
  if (s == ini.end()) return dflt;
  auto k = s->second.find(key);
  return k == s->second.end() ? dflt : k->second;
}

inline bool get_bool(const IniMap& ini, const std::string& sec,
                     const std::string& key, bool dflt) {
  std::string v = get_str(ini, sec, key, dflt ? "true" : "false");
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  config_error(sec, key, "expected a boolean, got '" + v + "'");
}

inline double get_double(const IniMap& ini, const std::string& sec,
                         const std::string& key, double dflt) {
  std::string v = get_str(ini, sec, key, format_double(dflt));
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    config_error(sec, key, "expected a number, got '" + v + "'");
  }
  return out;
}

template <typename Int>
Int get_int(const IniMap& ini, const std::string& sec, const std::string& key,
            Int dflt) {
  std::string v = get_str(ini, sec, key, std::to_string(dflt));
  Int out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    config_error(sec, key, "expected an integer, got '" + v + "'");
  }
  return out;
}

inline std::vector<std::string> split_list(const IniMap& ini,
                                           const std::string& sec,
                                           const std::string& key,
                                           const std::string& dflt) {
  std::string v = get_str(ini, sec, key, dflt);
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    auto comma = v.find(',', pos);
    std::string item =
        trim(comma == std::string::npos ? v.substr(pos)
                                        : v.substr(pos, comma - pos));
    if (item.empty()) {
      config_error(sec, key, "empty item in list '" + v + "'");
    }
    out.push_back(std::move(item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) config_error(sec, key, "list must not be empty");
  return out;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const IniMap& ini, const std::string& sec,
                          const std::string& key, const std::string& dflt,
                          Parse parse) {
  std::vector<T> out;
  for (const std::string& item : split_list(ini, sec, key, dflt)) {
    T value{};
    auto res = parse(item, value);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size()) {
      config_error(sec, key, "bad list item '" + item + "'");
    }
    out.push_back(value);
  }
  return out;
}

// Every key the resolver understands; anything else is a likely typo and
// rejected with the offending section/key pair.
inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"run", {"name", "seeds"}},
      {"data",
       {"source", "format", "train", "val", "test", "delimiter", "lowercase",
        "min_freq", "embeddings", "embedding_dim", "split_seed", "data_seed",
        "examples", "classes", "vocab", "signal", "sentence_length",
        "signal_tokens", "class_weights", "sentences", "rare_weight"}},
      {"model",
       {"architecture", "hidden", "flavor", "dropout_rate", "dropout_scope",
        "prior", "prior_sigma", "prior_pi", "prior_sigma1", "prior_sigma2",
        "conv_filters", "conv_width", "window"}},
      {"train", {"epochs", "patience", "lr", "batch_cap", "min_updates"}},
      {"al",
       {"acquisition", "warmstart", "step", "stop", "passes", "bbb_mode"}},
      {"matrix", {"acquisition", "architecture"}},
  };
  return keys;
}

inline void reject_unknown(const IniMap& ini) {
  const auto& known = known_keys();
  for (const auto& [sec, kv] : ini) {
    auto it = known.find(sec);
    if (it == known.end()) {
      throw std::invalid_argument("config: unknown section [" + sec + "]");
    }
    for (const auto& [key, _] : kv) {
      if (!it->second.count(key)) {
        config_error(sec, key, "unknown key");
      }
    }
  }
}

}  // namespace detail

/// Where the corpus comes from and how to read or generate it. Defaults are
/// materialized here so the resolved snapshot is complete.
struct DataConfig {
  std::string source;  // synthetic-classification | synthetic-tagging | files
  // files source
  std::string format;  // column | delimited
  std::string train_path;
  std::string val_path;   // optional; empty means split from train
  std::string test_path;  // optional
  std::string delimiter = "tab";
  bool lowercase = true;
  std::size_t min_freq = 1;
  std::string embeddings_path;  // optional pretrained vectors
  std::size_t embedding_dim = 25;
  std::uint64_t split_seed = 13;
  std::uint64_t data_seed = 97;
  // synthetic classification source
  std::size_t examples = 2000;
  std::size_t classes = 4;
  std::size_t vocab = 200;
  double signal = 0.5;
  std::size_t sentence_length = 8;
  std::size_t signal_tokens = 4;
  std::vector<double> class_weights;  // empty means uniform
  // synthetic tagging source
  std::size_t sentences = 1000;
  double rare_weight = 0.02;  // frequency of the rare template

  Task task() const {
    if (source == "synthetic-classification") return Task::kClassification;
    if (source == "synthetic-tagging") return Task::kTagging;
    return format == "column" ? Task::kTagging : Task::kClassification;
  }
};

/// One concrete run after matrix expansion: a name (also its output
/// subdirectory), the data recipe, and the full experiment configuration.
/// `resolved` is the complete key/value snapshot with every default
/// materialized; resolving it again reproduces this run exactly.
struct ResolvedRun {
  std::string name;
  DataConfig data;
  ExperimentConfig experiment;
  IniMap resolved;
};

namespace detail {

inline DataConfig resolve_data(const IniMap& ini) {
  DataConfig d;
  d.source = get_str(ini, "data", "source", "");
  if (d.source != "synthetic-classification" &&
      d.source != "synthetic-tagging" && d.source != "files") {
    config_error("data", "source",
                 "expected synthetic-classification, synthetic-tagging or "
                 "files, got '" +
                     d.source + "'");
  }
  if (d.source == "files") {
    d.format = get_str(ini, "data", "format", "");
    if (d.format != "column" && d.format != "delimited") {
      config_error("data", "format",
                   "expected column or delimited, got '" + d.format + "'");
    }
    d.train_path = get_str(ini, "data", "train", "");
    if (d.train_path.empty()) config_error("data", "train", "path required");
    d.val_path = get_str(ini, "data", "val", "");
    d.test_path = get_str(ini, "data", "test", "");
    if (d.val_path.empty() != d.test_path.empty()) {
      config_error("data", "val",
                   "val and test paths must be given together");
    }
    d.delimiter = get_str(ini, "data", "delimiter", "tab");
    if (d.delimiter != "tab" && d.delimiter.size() != 1) {
      config_error("data", "delimiter",
                   "expected 'tab' or a single character");
    }
    d.lowercase = get_bool(ini, "data", "lowercase", true);
    d.min_freq = get_int<std::size_t>(ini, "data", "min_freq", 1);
  }
  d.embeddings_path = get_str(ini, "data", "embeddings", "");
  d.embedding_dim = get_int<std::size_t>(ini, "data", "embedding_dim", 25);
  d.split_seed = get_int<std::uint64_t>(ini, "data", "split_seed", 13);
  d.data_seed = get_int<std::uint64_t>(ini, "data", "data_seed", 97);
  if (d.source == "synthetic-classification") {
    d.examples = get_int<std::size_t>(ini, "data", "examples", 2000);
    d.classes = get_int<std::size_t>(ini, "data", "classes", 4);
    d.vocab = get_int<std::size_t>(ini, "data", "vocab", 200);
    d.signal = get_double(ini, "data", "signal", 0.5);
    d.sentence_length =
        get_int<std::size_t>(ini, "data", "sentence_length", 8);
    d.signal_tokens = get_int<std::size_t>(ini, "data", "signal_tokens", 4);
    if (get_str(ini, "data", "class_weights", "") != "") {
      d.class_weights = parse_list<double>(
          ini, "data", "class_weights", "", [](const std::string& s,
                                               double& v) {
            return std::from_chars(s.data(), s.data() + s.size(), v);
          });
    }
  }
  if (d.source == "synthetic-tagging") {
    d.sentences = get_int<std::size_t>(ini, "data", "sentences", 1000);
    d.rare_weight = get_double(ini, "data", "rare_weight", 0.02);
    if (!(d.rare_weight > 0.0 && d.rare_weight < 1.0)) {
      config_error("data", "rare_weight", "must lie in (0, 1)");
    }
  }
  return d;
}

inline ModelConfig resolve_model(const IniMap& ini, Task task,
                                 const std::string& arch_str) {
  ModelConfig m;
  m.task = task;
  m.architecture = [&] {
    try {
      return arch_from(arch_str);
    } catch (const std::invalid_argument&) {
      config_error("model", "architecture",
                   "unknown architecture '" + arch_str + "'");
    }
  }();
  m.hidden_sizes = parse_list<std::size_t>(
      ini, "model", "hidden", "16", [](const std::string& s, std::size_t& v) {
        return std::from_chars(s.data(), s.data() + s.size(), v);
      });
  const std::string flavor_str =
      get_str(ini, "model", "flavor", "deterministic");
  try {
    m.flavor = flavor_from(flavor_str);
  } catch (const std::invalid_argument&) {
    config_error("model", "flavor", "unknown flavor '" + flavor_str + "'");
  }
  const double rate = get_double(ini, "model", "dropout_rate", 0.5);
  const std::string scope_str =
      get_str(ini, "model", "dropout_scope", "per-activation");
  if (scope_str != "per-activation" && scope_str != "per-sequence") {
    config_error("model", "dropout_scope",
                 "expected per-activation or per-sequence");
  }
  try {
    m.dropout = DropoutSpec(rate, scope_str == "per-sequence"
                                      ? DropoutSpec::Scope::kPerSequence
                                      : DropoutSpec::Scope::kPerActivation);
  } catch (const std::invalid_argument& e) {
    config_error("model", "dropout_rate", e.what());
  }
  const std::string prior_str = get_str(ini, "model", "prior", "gaussian");
  if (prior_str == "gaussian") {
    m.prior = PriorSpec::gaussian(
        get_double(ini, "model", "prior_sigma", 1.0));
  } else if (prior_str == "mixture") {
    m.prior = PriorSpec::scale_mixture(
        get_double(ini, "model", "prior_pi", 0.5),
        get_double(ini, "model", "prior_sigma1", 1.0),
        get_double(ini, "model", "prior_sigma2", 0.1));
  } else {
    config_error("model", "prior", "expected gaussian or mixture");
  }
  m.conv_filters = get_int<std::size_t>(ini, "model", "conv_filters", 16);
  m.conv_width = get_int<std::size_t>(ini, "model", "conv_width", 3);
  m.window = get_int<std::size_t>(ini, "model", "window", 1);
  m.num_classes = 0;  // derived from the corpus label set at load time
  return m;
}

inline TrainConfig resolve_train(const IniMap& ini) {
  TrainConfig t;
  t.max_epochs = get_int<std::size_t>(ini, "train", "epochs", 25);
  t.patience = get_int<std::size_t>(ini, "train", "patience", 1);
  t.lr = get_double(ini, "train", "lr", 1e-3);
  t.batch_cap = get_int<std::size_t>(ini, "train", "batch_cap", 50);
  t.min_updates = get_int<std::size_t>(ini, "train", "min_updates", 10);
  return t;
}

/// The disagreement scorers need a stochastic model; a matrix config lists
/// them next to deterministic baselines, so the flavor follows the
/// acquisition function instead of failing the whole grid.
inline void adjust_flavor(ExperimentConfig& cfg) {
  if (cfg.acquisition == "do-bald" && cfg.model.flavor != Flavor::kDropout) {
    cfg.model.flavor = Flavor::kDropout;
  }
  if (cfg.acquisition == "bb-bald" &&
      cfg.bbb_mode == ExperimentConfig::BbbMode::kSelf) {
    cfg.model.flavor = Flavor::kBayesByBackprop;
  }
}

/// Writes the fully materialized key/value snapshot for one run. Parsing
/// and resolving this snapshot again yields an identical run.
inline IniMap snapshot_run(const std::string& name, const DataConfig& d,
                           const ExperimentConfig& e) {
  IniMap out;
  auto& run = out["run"];
  run["name"] = name;
  {
    std::string s;
    for (std::uint64_t v : e.seeds) {
      if (!s.empty()) s += ", ";
      s += std::to_string(v);
    }
    run["seeds"] = s;
  }

  auto& data = out["data"];
  data["source"] = d.source;
  if (d.source == "files") {
    data["format"] = d.format;
    data["train"] = d.train_path;
    if (!d.val_path.empty()) {
      data["val"] = d.val_path;
      data["test"] = d.test_path;
    }
    data["delimiter"] = d.delimiter;
    data["lowercase"] = d.lowercase ? "true" : "false";
    data["min_freq"] = std::to_string(d.min_freq);
  }
  if (!d.embeddings_path.empty()) data["embeddings"] = d.embeddings_path;
  data["embedding_dim"] = std::to_string(d.embedding_dim);
  data["split_seed"] = std::to_string(d.split_seed);
  data["data_seed"] = std::to_string(d.data_seed);
  if (d.source == "synthetic-classification") {
    data["examples"] = std::to_string(d.examples);
    data["classes"] = std::to_string(d.classes);
    data["vocab"] = std::to_string(d.vocab);
    data["signal"] = format_double(d.signal);
    data["sentence_length"] = std::to_string(d.sentence_length);
    data["signal_tokens"] = std::to_string(d.signal_tokens);
    if (!d.class_weights.empty()) {
      std::string s;
      for (double w : d.class_weights) {
        if (!s.empty()) s += ", ";
        s += format_double(w);
      }
      data["class_weights"] = s;
    }
  }
  if (d.source == "synthetic-tagging") {
    data["sentences"] = std::to_string(d.sentences);
    data["rare_weight"] = format_double(d.rare_weight);
  }

  auto& model = out["model"];
  model["architecture"] = arch_name(e.model.architecture);
  {
    std::string s;
    for (std::size_t h : e.model.hidden_sizes) {
      if (!s.empty()) s += ", ";
      s += std::to_string(h);
    }
    model["hidden"] = s;
  }
  model["flavor"] = flavor_name(e.model.flavor);
  model["dropout_rate"] = format_double(e.model.dropout.rate);
  model["dropout_scope"] =
      e.model.dropout.scope == DropoutSpec::Scope::kPerSequence
          ? "per-sequence"
          : "per-activation";
  if (e.model.prior.kind == PriorSpec::Kind::kGaussian) {
    model["prior"] = "gaussian";
    model["prior_sigma"] = format_double(e.model.prior.sigma1);
  } else {
    model["prior"] = "mixture";
    model["prior_pi"] = format_double(e.model.prior.pi);
    model["prior_sigma1"] = format_double(e.model.prior.sigma1);
    model["prior_sigma2"] = format_double(e.model.prior.sigma2);
  }
  model["conv_filters"] = std::to_string(e.model.conv_filters);
  model["conv_width"] = std::to_string(e.model.conv_width);
  model["window"] = std::to_string(e.model.window);

  auto& train = out["train"];
  train["epochs"] = std::to_string(e.train.max_epochs);
  train["patience"] = std::to_string(e.train.patience);
  train["lr"] = format_double(e.train.lr);
  train["batch_cap"] = std::to_string(e.train.batch_cap);
  train["min_updates"] = std::to_string(e.train.min_updates);

  auto& al = out["al"];
  al["acquisition"] = e.acquisition;
  al["warmstart"] = format_double(e.warmstart_fraction);
  al["step"] = format_double(e.step_fraction);
  al["stop"] = format_double(e.stop_fraction);
  al["passes"] = std::to_string(e.ensemble_passes);
  al["bbb_mode"] =
      e.bbb_mode == ExperimentConfig::BbbMode::kSelf ? "self" : "sibling";
  return out;
}

}  // namespace detail

/// Expands a parsed config into concrete runs. Without a [matrix] section
/// this is a single run; with one, the cross product of its acquisition and
/// architecture lists, each run named after its combination. All runs share
/// the seed list, so warmstart sets coincide across acquisition functions.
inline std::vector<ResolvedRun> resolve_config(const IniMap& ini) {
  detail::reject_unknown(ini);

  const DataConfig data = detail::resolve_data(ini);
  const Task task = data.task();

  ExperimentConfig base;
  base.train = detail::resolve_train(ini);
  base.acquisition = detail::get_str(ini, "al", "acquisition", "random");
  base.warmstart_fraction = detail::get_double(ini, "al", "warmstart", 0.02);
  base.step_fraction = detail::get_double(ini, "al", "step", 0.02);
  base.stop_fraction = detail::get_double(ini, "al", "stop", 0.5);
  base.ensemble_passes = detail::get_int<std::size_t>(ini, "al", "passes", 25);
  const std::string mode = detail::get_str(ini, "al", "bbb_mode", "sibling");
  if (mode == "self") {
    base.bbb_mode = ExperimentConfig::BbbMode::kSelf;
  } else if (mode == "sibling") {
    base.bbb_mode = ExperimentConfig::BbbMode::kSibling;
  } else {
    detail::config_error("al", "bbb_mode", "expected self or sibling");
  }
  base.seeds = detail::parse_list<std::uint64_t>(
      ini, "run", "seeds", "1, 2, 3",
      [](const std::string& s, std::uint64_t& v) {
        return std::from_chars(s.data(), s.data() + s.size(), v);
      });

  const std::string default_arch =
      task == Task::kTagging ? "window-tagger" : "avg-embed-mlp";
  const bool has_matrix = ini.count("matrix") != 0;
  std::vector<std::string> acquisitions =
      has_matrix && ini.at("matrix").count("acquisition")
          ? detail::split_list(ini, "matrix", "acquisition", "")
          : std::vector<std::string>{base.acquisition};
  std::vector<std::string> architectures =
      has_matrix && ini.at("matrix").count("architecture")
          ? detail::split_list(ini, "matrix", "architecture", "")
          : std::vector<std::string>{detail::get_str(ini, "model",
                                                     "architecture",
                                                     default_arch)};

  const std::string base_name = detail::get_str(ini, "run", "name", "run");
  const bool multi = acquisitions.size() * architectures.size() > 1;

  std::vector<ResolvedRun> runs;
  std::set<std::string> names;
  for (const std::string& arch : architectures) {
    for (const std::string& acq : acquisitions) {
      ExperimentConfig cfg = base;
      cfg.model = detail::resolve_model(ini, task, arch);
      cfg.acquisition = acq;
      try {
        acquisition_from(acq);
      } catch (const std::invalid_argument&) {
        detail::config_error(has_matrix ? "matrix" : "al", "acquisition",
                             "unknown acquisition function '" + acq + "'");
      }
      detail::adjust_flavor(cfg);
      std::string name = base_name;
      if (multi) {
        name = acq;
        if (architectures.size() > 1) name += "-" + arch;
      }
      if (!names.insert(name).second) {
        throw std::invalid_argument("config: duplicate run name '" + name +
                                    "' after matrix expansion");
      }
      runs.push_back(
          {name, data, cfg, detail::snapshot_run(name, data, cfg)});
    }
  }
  return runs;
}

/// Renders an IniMap back to config text. resolve_config(parse_ini(x)) on
/// the output reproduces the runs that produced it.
inline std::string serialize_ini(const IniMap& ini) {
  std::string out;
  bool first = true;
  for (const auto& [sec, kv] : ini) {
    if (!first) out += "\n";
    first = false;
    out += "[" + sec + "]\n";
    for (const auto& [key, value] : kv) {
      out += key + " = " + value + "\n";
    }
  }
  return out;
}

}  // namespace alsim
