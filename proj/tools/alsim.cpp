// Entry point for the experiment harness. All logic lives in the headers;
// this file only maps argv onto the command functions.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alsim/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"active-learning simulation harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(alsim::kToolName) + " " +
                                        alsim::kToolVersion);

  std::string config_path;
  std::string out_dir = "out";
  std::size_t workers = 1;
  CLI::App* run = app.add_subcommand("run", "execute a config or manifest");
  run->add_option("config", config_path, "INI config or manifest.json")
      ->required();
  run->add_option("--out", out_dir, "output directory (default: out)");
  run->add_option("--workers", workers, "parallel runs for a matrix")
      ->check(CLI::PositiveNumber);

  std::vector<std::string> summaries;
  std::string plot_out;
  std::string title;
  CLI::App* plot = app.add_subcommand("plot", "render summaries to SVG");
  plot->add_option("summaries", summaries, "summary.json files")->required();
  plot->add_option("--out", plot_out, "output SVG path")->required();
  plot->add_option("--title", title, "plot title");

  std::string spec_path;
  std::string data_out;
  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  gen->add_option("spec", spec_path, "config with a synthetic [data] section")
      ->required();
  gen->add_option("--out", data_out, "output directory")->required();

  std::string report_dir;
  CLI::App* report = app.add_subcommand("report", "print an AUC table");
  report->add_option("dir", report_dir, "directory holding run outputs")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    return alsim::cmd_run(config_path, out_dir, workers, std::cout,
                          std::cerr);
  }
  if (plot->parsed()) {
    return alsim::cmd_plot(summaries, plot_out, title, std::cerr);
  }
  if (gen->parsed()) {
    return alsim::cmd_gen_data(spec_path, data_out, std::cout, std::cerr);
  }
  return alsim::cmd_report(report_dir, std::cout, std::cerr);
}
