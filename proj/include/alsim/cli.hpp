#pragma once

// The commands behind the alsim executable. Each takes explicit streams and
// returns a process exit status, so the thin main() stays untested logic-free.

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "alsim/runio.hpp"
#include "alsim/svg_plot.hpp"

namespace alsim {

namespace detail {

inline bool looks_like_json(const std::string& text) {
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') continue;
    return c == '{';
  }
  return false;
}

}  // namespace detail

/// Executes one resolved run into `dir`. CSV rows land on disk after every
/// seed and the manifest exists from the start marked incomplete, so an
/// interrupted process leaves usable partial artifacts. The caller owns
/// corpus loading; matrix runs share one immutable corpus.
inline ExperimentResult execute_run(const ResolvedRun& run,
                                    const Corpus& corpus,
                                    std::uint64_t fingerprint,
                                    const std::string& dir) {
  ExperimentConfig cfg = run.experiment;
  cfg.model.num_classes = corpus.label_names.size();
  check_experiment(cfg, corpus);

  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string started = utc_timestamp();
  write_text_file(dir + "/manifest.json",
                  make_manifest(run, fingerprint, started, false).dump(1) +
                      "\n");

  const std::string metric_name =
      corpus.task == Task::kClassification ? "accuracy" : "span_f1";
  std::string rounds_text = rounds_csv_header();
  std::string acquired_text = acquired_csv_header();
  write_text_file(dir + "/rounds.csv", rounds_text);
  write_text_file(dir + "/acquired.csv", acquired_text);

  std::vector<SeedResult> seeds;
  for (std::uint64_t seed : cfg.seeds) {
    seeds.push_back(run_seed(cfg, corpus, seed));
    rounds_text += rounds_csv_rows(seeds.back(), metric_name);
    acquired_text += acquired_csv_rows(seeds.back());
    write_text_file(dir + "/rounds.csv", rounds_text);
    write_text_file(dir + "/acquired.csv", acquired_text);
  }

  ExperimentResult result = assemble_result(cfg, corpus, std::move(seeds));
  write_text_file(
      dir + "/summary.json",
      summary_json(run.name, cfg.acquisition, result).dump(1) + "\n");
  write_text_file(dir + "/manifest.json",
                  make_manifest(run, fingerprint, started, true).dump(1) +
                      "\n");
  return result;
}

/// `run <config> [--out DIR] [--workers N]`. The config may be an INI file
/// (possibly a matrix) or a previously written manifest.json; a manifest
/// replays its single embedded run. Runs execute concurrently up to the
/// worker limit, each owning its own subdirectory of `out_dir`.
inline int cmd_run(const std::string& config_path, const std::string& out_dir,
                   std::size_t workers, std::ostream& out, std::ostream& err) {
  std::vector<ResolvedRun> runs;
  Corpus corpus;
  std::uint64_t fingerprint = 0;
  try {
    const std::string text = read_text_file(config_path);
    if (detail::looks_like_json(text)) {
      runs.push_back(run_from_manifest(nlohmann::json::parse(text)));
    } else {
      runs = resolve_config(parse_ini(text));
    }
    corpus = load_corpus(runs[0].data);
    fingerprint = corpus_fingerprint(corpus);
    // Fail fast on any bad run before spending time training.
    for (const ResolvedRun& run : runs) {
      ExperimentConfig cfg = run.experiment;
      cfg.model.num_classes = corpus.label_names.size();
      check_experiment(cfg, corpus);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  std::vector<std::string> lines(runs.size());
  std::vector<bool> failed(runs.size(), false);
  std::atomic<std::size_t> next{0};
  const std::size_t n_workers =
      std::max<std::size_t>(1, std::min(workers, runs.size()));

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      const ResolvedRun& run = runs[i];
      const std::string dir = out_dir + "/" + run.name;
      try {
        ExperimentResult res =
            execute_run(run, corpus, fingerprint, dir);
        lines[i] = run.name + ": " + res.metric_name +
                   " auc=" + format_double(res.curve.auc);
      } catch (const std::exception& e) {
        failed[i] = true;
        lines[i] = run.name + ": failed: " + e.what();
        try {
          write_text_file(dir + "/manifest.json",
                          make_manifest(run, fingerprint, utc_timestamp(),
                                        false, e.what())
                                  .dump(1) +
                              "\n");
        } catch (const std::exception&) {
          // The original failure is the one worth reporting.
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w + 1 < n_workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();

  bool any_failed = false;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    (failed[i] ? err : out) << lines[i] << "\n";
    any_failed = any_failed || failed[i];
  }
  return any_failed ? 1 : 0;
}

/// `plot <summary.json...> --out FILE`. Renders one series per summary.
inline int cmd_plot(const std::vector<std::string>& summary_paths,
                    const std::string& out_path, const std::string& title,
                    std::ostream& err) {
  try {
    if (summary_paths.empty()) {
      throw std::invalid_argument("plot needs at least one summary");
    }
    std::vector<PlotSeries> series;
    std::string metric;
    for (const std::string& path : summary_paths) {
      nlohmann::json j = nlohmann::json::parse(read_text_file(path));
      PlotSeries s;
      s.name = j.at("name").get<std::string>();
      for (const auto& p : j.at("points")) {
        s.points.push_back({p.at("fraction").get<double>(),
                            p.at("mean").get<double>(),
                            p.at("stddev").get<double>()});
      }
      metric = j.at("metric_name").get<std::string>();
      series.push_back(std::move(s));
    }
    PlotOptions opts;
    opts.title = title.empty() ? "learning curves" : title;
    opts.y_label = metric;
    write_text_file(out_path, render_curves_svg(series, opts));
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

/// `gen-data <spec> --out DIR`. Writes the synthetic corpus a config's
/// [data] section describes, in the matching on-disk format, plus a
/// metadata sidecar. Identical specs produce identical bytes.
inline int cmd_gen_data(const std::string& spec_path,
                        const std::string& out_dir, std::ostream& out,
                        std::ostream& err) {
  try {
    auto runs = resolve_config(parse_ini(read_text_file(spec_path)));
    const DataConfig& d = runs[0].data;
    std::filesystem::create_directories(out_dir);
    nlohmann::json meta;
    meta["source"] = d.source;
    meta["data_seed"] = d.data_seed;
    std::string data_path;
    if (d.source == "synthetic-classification") {
      SyntheticClassificationSpec spec;
      spec.num_examples = d.examples;
      spec.num_classes = d.classes;
      spec.vocab_size = d.vocab;
      spec.signal_strength = d.signal;
      spec.sentence_length = d.sentence_length;
      spec.signal_tokens_per_class = d.signal_tokens;
      spec.class_weights = d.class_weights;
      auto gen = generate_synthetic_classification(spec, d.data_seed);
      data_path = out_dir + "/data.tsv";
      write_delimited_classification(data_path, gen.examples);
      meta["examples"] = gen.examples.size();
      meta["class_names"] = gen.class_names;
      meta["bayes_accuracy"] = gen.bayes_accuracy;
    } else if (d.source == "synthetic-tagging") {
      auto gen = generate_synthetic_tagging(
          builtin_tagging_spec(d.sentences, d.rare_weight), d.data_seed);
      data_path = out_dir + "/data.conll";
      write_column_format(data_path, gen.examples);
      meta["sentences"] = gen.examples.size();
      meta["tag_names"] = gen.tag_names;
      meta["rare_weight"] = d.rare_weight;
    } else {
      throw std::invalid_argument(
          "gen-data needs a synthetic [data] source, got '" + d.source + "'");
    }
    write_text_file(out_dir + "/meta.json", meta.dump(1) + "\n");
    out << "wrote " << data_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

/// `report <dir>`. Prints an AUC table over every summary.json under dir,
/// in sorted path order.
inline int cmd_report(const std::string& dir, std::ostream& out,
                      std::ostream& err) {
  namespace fs = std::filesystem;
  try {
    std::vector<fs::path> paths;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file() &&
          entry.path().filename() == "summary.json") {
        paths.push_back(entry.path());
      }
    }
    if (paths.empty()) {
      throw std::invalid_argument("no summary.json under " + dir);
    }
    std::sort(paths.begin(), paths.end());
    out << "run\tmetric\tauc\tfinal\n";
    for (const fs::path& p : paths) {
      nlohmann::json j = nlohmann::json::parse(read_text_file(p.string()));
      const auto& points = j.at("points");
      const double final_mean =
          points.empty() ? 0.0 : points.back().at("mean").get<double>();
      out << j.at("name").get<std::string>() << "\t"
          << j.at("metric_name").get<std::string>() << "\t"
          << format_double(j.at("auc").get<double>()) << "\t"
          << format_double(final_mean) << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace alsim
