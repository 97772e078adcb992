// SPDX-License-Identifier: Apache-2.0
// Command-line front end: train, eval, stats, grid, generate.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "hnlg/error.hpp"
#include "hnlg/experiment.hpp"

namespace fs = std::filesystem;
using namespace hnlg;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string mr;
  std::string model_dir;
};

experiment::ExperimentConfig load_config(const Options& o) {
  auto c = experiment::ExperimentConfig::load(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.out.empty()) c.out = o.out;
  c.validate();
  return c;
}

int cmd_train(const Options& o) {
  const auto c = load_config(o);
  const auto result = experiment::run(c);
  std::cout << experiment::ReportRow::header() << '\n' << result.row.str() << '\n';
  return 0;
}

int cmd_eval(const Options& o) {
  const auto c = load_config(o);
  const auto row = experiment::evaluate_run(c);
  std::cout << experiment::ReportRow::header() << '\n' << row.str() << '\n';
  return 0;
}

int cmd_stats(const Options& o) {
  const auto c = load_config(o);
  const std::string table = experiment::stats_table(c);
  std::cout << table;
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream(fs::path(o.out) / "stats.tsv") << table;
  }
  return 0;
}

int cmd_grid(const Options& o) {
  const fs::path out = o.out.empty() ? fs::path("runs") : fs::path(o.out);
  const auto s = experiment::grid(o.config, out, o.seed, &std::cerr);
  std::cerr << "completed " << s.completed << ", reused " << s.reused << ", failed " << s.failed << '\n';
  std::cout << (out / "grid.md").string() << '\n';
  return s.failed ? 1 : 0;
}

int cmd_generate(const Options& o) {
  fs::path dir = o.model_dir;
  if (dir.empty()) {
    if (o.config.empty()) throw UsageError("generate needs --config or --model");
    dir = load_config(o).run_dir() / "model";
  }
  if (!fs::is_regular_file(dir / "model.ckpt")) throw UsageError("no trained model in " + dir.string());
  auto m = model::Model::load(dir);
  const auto vocab = corpus::Vocabulary::load(dir / "vocab.txt");
  const auto frame = corpus::parse_mr(o.mr);
  // The repeat-input cursor is a decoding mode too; the run config knows it.
  bool repeat = false;
  if (!o.config.empty()) repeat = load_config(o).repeat_input;
  std::cout << model::generate(m, frame, vocab, repeat) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical decoder experiments on tagged E2E data"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool config_required, const std::string& config_help) {
    auto* opt = sub->add_option("--config", o.config, config_help);
    if (config_required) opt->required();
    sub->add_option("--seed", o.seed, "Override the config seed");
    sub->add_option("--out", o.out, "Output directory");
  };

  auto* train = app.add_subcommand("train", "Train one config, evaluate on test, write the report row");
  add_common(train, true, "Run config file");
  auto* eval = app.add_subcommand("eval", "Re-evaluate the trained model of a config on its test split");
  add_common(eval, true, "Run config file");
  auto* stats = app.add_subcommand("stats", "Per-layer target lengths for all six orders");
  add_common(stats, true, "Config naming the train and test data");
  auto* grid = app.add_subcommand("grid", "Run every *.cfg in a directory and aggregate the reports");
  add_common(grid, true, "Directory of run configs");
  auto* gen = app.add_subcommand("generate", "Generate a sentence for one meaning representation");
  add_common(gen, false, "Run config whose trained model to use");
  gen->add_option("--mr", o.mr, "Meaning representation, e.g. \"name[The Mill], food[French]\"")->required();
  gen->add_option("--model", o.model_dir, "Model directory (instead of --config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*stats) return cmd_stats(o);
    if (*grid) return cmd_grid(o);
    return cmd_generate(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
