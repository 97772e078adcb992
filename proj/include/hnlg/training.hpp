// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hnlg/adam.hpp"
#include "hnlg/corpus.hpp"
#include "hnlg/metrics.hpp"
#include "hnlg/model.hpp"
#include "hnlg/rng.hpp"

namespace hnlg::training {

/// Non-finite loss or similar numerical failure during training.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Schedule {
  std::size_t epochs = 20;
  std::size_t curriculum_span = 5;
  bool curriculum = true;
  bool repeat_input = false;
  double tf_prob = 0.5;
  double tf_decay = 0.9;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;

  /// tf_prob * tf_decay^(epoch - 1), epochs counted from 1.
  double tf_prob_at(std::size_t epoch) const;
  /// Number of bottom layers trained in `epoch`: min(layers, 1 + (epoch - 1) / span)
  /// with curriculum on, all layers otherwise.
  std::size_t trainable_layers(std::size_t epoch, std::size_t layers) const;
  void validate() const;
};

/// Gold token with probability p, else the model's token. One draw per call.
int sample_inner(int gold_prev, int model_prev, double p, numkit::Rng& rng);
int sample_inter(int gold_lower, int model_lower, double p, numkit::Rng& rng);

/// Mean cross entropy (nats per token) of per-step logits [B x V] against
/// per-row targets; positions past a row's length are masked. The number of
/// steps must equal the longest target.
numkit::Var layer_loss(std::span<const numkit::Var> step_logits, const std::vector<std::vector<int>>& targets);

/// One training pair: encoded frame plus EOS-terminated layer targets.
struct Example {
  corpus::EncodedFrame frame;
  std::array<std::vector<int>, corpus::kLayers> targets;
  const std::vector<int>& target(std::size_t layer, bool hierarchical) const {
    return hierarchical ? targets[layer] : targets.back();
  }
};

/// Dev/test item: one frame and all of its delexicalized references.
struct EvalItem {
  corpus::SemanticFrame frame;  // delexicalized
  corpus::EncodedFrame encoded;
  std::vector<metrics::Tokens> references;
};

std::vector<Example> make_examples(std::span<const corpus::MrGroup> groups, const corpus::GeneratingOrder& order,
                                   const corpus::Vocabulary& vocab);
std::vector<EvalItem> make_eval_items(std::span<const corpus::MrGroup> groups, const corpus::Vocabulary& vocab);

/// Seeded split by meaning representation: about `fraction` of the groups
/// (at least one when there are two or more) go to the second part.
std::pair<std::vector<corpus::MrGroup>, std::vector<corpus::MrGroup>> split_groups(
    std::span<const corpus::MrGroup> groups, double fraction, std::uint64_t seed);

struct BatchLoss {
  std::vector<numkit::Var> layers;  // per trained layer, mean nats per token
  numkit::Var total;
};

/// Teacher-forced forward through the bottom `trained_layers` layers with
/// inner/inter scheduled sampling at probability `p`. With `repeat_input` the
/// lower stream follows the repeat cursor over the gold lower sequence.
BatchLoss forward_batch(model::Session& session, std::span<const Example* const> batch, std::size_t trained_layers,
                        double p, bool repeat_input, numkit::Rng& inner_rng, numkit::Rng& inter_rng);

struct BatchRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::vector<double> layer_losses;
  double total = 0;
  double tf_prob = 0;
  double wall_ms = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t trainable = 0;
  double tf_prob = 0;
  std::vector<double> layer_losses;  // batch means per trained layer
  double total = 0;
  std::optional<double> dev_bleu;
};

struct TrainHooks {
  /// Receives the TSV training log (header line first).
  std::ostream* log = nullptr;
  /// Writes epoch_NNN checkpoints every `checkpoint_every` epochs and at the end.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::size_t checkpoint_every = 5;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::vector<BatchRecord> batches;
};

/// Runs the full schedule. `dev` may be empty, which skips the BLEU trace.
TrainResult train(model::Model& model, const corpus::Vocabulary& vocab, std::span<const Example> examples,
                  std::span<const EvalItem> dev, const Schedule& schedule, const TrainHooks& hooks = {});

/// Greedy outputs for `items` in batches, as delexicalized token strings.
std::vector<metrics::Tokens> decode_items(model::Model& model, std::span<const EvalItem> items,
                                          const corpus::Vocabulary& vocab, bool repeat_input,
                                          std::size_t batch_size = 32);
/// Corpus BLEU of greedy outputs against each item's references.
double eval_bleu(model::Model& model, std::span<const EvalItem> items, const corpus::Vocabulary& vocab,
                 bool repeat_input);
metrics::Scores evaluate(model::Model& model, std::span<const EvalItem> items, const corpus::Vocabulary& vocab,
                         bool repeat_input);

}  // namespace hnlg::training
