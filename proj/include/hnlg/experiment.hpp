// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hnlg/corpus.hpp"
#include "hnlg/metrics.hpp"
#include "hnlg/model.hpp"
#include "hnlg/training.hpp"

namespace hnlg::experiment {

/// One run of the experiment grid, read from a `key = value` file.
struct ExperimentConfig {
  std::string id = "run";
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  corpus::GeneratingOrder order;
  bool hierarchical = true;
  bool repeat_input = false;
  bool curriculum = false;
  model::AttentionKind attention = model::AttentionKind::none;
  std::size_t epochs = 20;
  std::size_t curriculum_span = 5;
  double tf_prob = 0.5;
  double tf_decay = 0.9;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t embed_dim = 64;
  std::size_t encoder_hidden = 100;
  std::vector<std::size_t> decoder_hidden{100, 100, 100, 100};
  std::size_t flat_hidden = 400;
  std::size_t max_decode_len = 60;
  double dev_fraction = 0.1;
  std::uint64_t seed = 1;
  std::filesystem::path out = "runs";

  /// Relative paths are resolved against `base_dir`. Unknown keys and bad
  /// values raise UsageError.
  static ExperimentConfig parse(std::string_view text, const std::filesystem::path& base_dir = {},
                                std::string default_id = "run");
  /// Configs without an `id` take the file stem.
  static ExperimentConfig load(const std::filesystem::path& path);

  /// UsageError on inconsistent flags (repeat/curriculum/attention without
  /// the hierarchical decoder, bad ranges).
  void validate() const;
  /// UsageError when a data file is missing.
  void check_paths() const;

  /// Row label in the result tables.
  std::string variant() const;
  /// Every setting that affects results, one `key = value` per line.
  std::string canonical() const;
  /// FNV-1a over the canonical settings and the bytes of both data files.
  std::uint64_t hash() const;

  std::filesystem::path run_dir() const { return out / id; }
  model::ModelConfig model_config(std::size_t vocab_size) const;
  training::Schedule schedule() const;
};

std::string hash_hex(std::uint64_t h);

struct ReportRow {
  std::string config_id;
  std::string order;
  metrics::Scores scores;
  std::string variant;
  bool hierarchical = true, repeat_input = false, curriculum = false;
  std::string attention;
  std::uint64_t seed = 0;
  std::string hash;
  int order_index = 0;  // 1..6, 0 for custom orders

  static std::string header();
  std::string str() const;
  static ReportRow parse(std::string_view line);
};

ReportRow make_row(const ExperimentConfig& config, const metrics::Scores& scores);

struct RunResult {
  ReportRow row;
  training::TrainResult trace;
};

/// Trains, evaluates on the test split and writes into run_dir(): train.tsv,
/// dev_bleu.tsv, checkpoints/, model/ (checkpoint, sidecar, vocab.txt),
/// config.cfg and report.tsv.
RunResult run(const ExperimentConfig& config);

/// Re-evaluates the saved model of a finished run on the test split.
ReportRow evaluate_run(const ExperimentConfig& config);

/// Layer length table (six grid orders x four layers) for train and test,
/// as TSV with two decimals. Lengths are measured on delexicalized sentences.
std::string stats_table(const ExperimentConfig& config);

struct GridSummary {
  std::size_t completed = 0;
  std::size_t reused = 0;
  std::size_t failed = 0;
};

/// Runs every *.cfg in `config_dir` (name order) with outputs under `out`,
/// reusing finished runs whose hash matches, and writes grid.tsv and grid.md.
GridSummary grid(const std::filesystem::path& config_dir, const std::filesystem::path& out,
                 std::optional<std::uint64_t> seed = std::nullopt, std::ostream* progress = nullptr);

}  // namespace hnlg::experiment
