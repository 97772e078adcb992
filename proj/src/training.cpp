// SPDX-License-Identifier: Apache-2.0
#include "hnlg/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "hnlg/error.hpp"

namespace hnlg::training {

using corpus::Vocabulary;
using numkit::Graph;
using numkit::Rng;
using numkit::Var;

double Schedule::tf_prob_at(std::size_t epoch) const {
  if (epoch == 0) throw ContractError("epochs are counted from 1");
  return tf_prob * std::pow(tf_decay, static_cast<double>(epoch - 1));
}

std::size_t Schedule::trainable_layers(std::size_t epoch, std::size_t layers) const {
  if (epoch == 0) throw ContractError("epochs are counted from 1");
  if (!curriculum) return layers;
  return std::min(layers, 1 + (epoch - 1) / curriculum_span);
}

void Schedule::validate() const {
  if (epochs == 0) throw ContractError("epochs must be positive");
  if (curriculum_span == 0) throw ContractError("curriculum_span must be positive");
  if (batch_size == 0) throw ContractError("batch_size must be positive");
  if (!(tf_prob >= 0 && tf_prob <= 1)) throw ContractError("tf_prob must lie in [0, 1]");
  if (!(tf_decay >= 0 && tf_decay <= 1)) throw ContractError("tf_decay must lie in [0, 1]");
  if (!(learning_rate > 0)) throw ContractError("learning_rate must be positive");
}

namespace {

int sample(int gold, int model, double p, Rng& rng) {
  if (!(p >= 0 && p <= 1)) throw ContractError("sampling probability must lie in [0, 1]");
  return rng.uniform() < p ? gold : model;
}

}  // namespace

int sample_inner(int gold_prev, int model_prev, double p, Rng& rng) { return sample(gold_prev, model_prev, p, rng); }
int sample_inter(int gold_lower, int model_lower, double p, Rng& rng) {
  return sample(gold_lower, model_lower, p, rng);
}

Var layer_loss(std::span<const Var> step_logits, const std::vector<std::vector<int>>& targets) {
  std::size_t T = 0, tokens = 0;
  for (const auto& t : targets) {
    T = std::max(T, t.size());
    tokens += t.size();
  }
  if (step_logits.size() != T)
    throw ContractError("layer_loss: " + std::to_string(step_logits.size()) + " logit steps for targets of length " +
                        std::to_string(T));
  if (tokens == 0) throw ContractError("layer_loss: no target tokens");
  const std::size_t B = targets.size();
  Var total;
  std::vector<int> tg(B);
  std::vector<double> mask(B);
  for (std::size_t t = 0; t < T; ++t) {
    if (step_logits[t].rows() != B)
      throw ContractError("layer_loss: logits have " + std::to_string(step_logits[t].rows()) + " rows for " +
                          std::to_string(B) + " targets");
    for (std::size_t b = 0; b < B; ++b) {
      const bool valid = t < targets[b].size();
      tg[b] = valid ? targets[b][t] : Vocabulary::kPad;
      mask[b] = valid ? 1.0 : 0.0;
    }
    Var l = numkit::masked_nll_sum(step_logits[t], tg, mask);
    total = t == 0 ? l : numkit::add(total, l);
  }
  return numkit::scale(total, 1.0 / static_cast<double>(tokens));
}

std::vector<Example> make_examples(std::span<const corpus::MrGroup> groups, const corpus::GeneratingOrder& order,
                                   const Vocabulary& vocab) {
  std::vector<Example> out;
  for (const auto& g : groups) {
    const auto encoded = corpus::encode_frame(corpus::delexicalize_frame(g.frame), vocab);
    for (const auto& ref : g.references) {
      auto lt = corpus::build_layer_targets(corpus::delexicalize(g.frame, ref).sentence, order, vocab);
      Example ex{encoded, {}};
      for (std::size_t i = 0; i < corpus::kLayers; ++i) {
        ex.targets[i] = std::move(lt.layers[i]);
        ex.targets[i].push_back(Vocabulary::kEos);
      }
      out.push_back(std::move(ex));
    }
  }
  return out;
}

std::vector<EvalItem> make_eval_items(std::span<const corpus::MrGroup> groups, const Vocabulary& vocab) {
  std::vector<EvalItem> out;
  for (const auto& g : groups) {
    EvalItem item;
    item.frame = corpus::delexicalize_frame(g.frame);
    item.encoded = corpus::encode_frame(item.frame, vocab);
    for (const auto& ref : g.references) item.references.push_back(corpus::delexicalize(g.frame, ref).sentence.lemmas());
    out.push_back(std::move(item));
  }
  return out;
}

std::pair<std::vector<corpus::MrGroup>, std::vector<corpus::MrGroup>> split_groups(
    std::span<const corpus::MrGroup> groups, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0 && fraction < 1)) throw ContractError("split fraction must lie in [0, 1)");
  std::vector<std::size_t> idx(groups.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  numkit::shuffle(idx, rng);
  std::size_t n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(groups.size())));
  if (fraction > 0 && n == 0 && groups.size() >= 2) n = 1;
  std::vector<bool> held(groups.size(), false);
  for (std::size_t i = 0; i < n; ++i) held[idx[i]] = true;
  std::pair<std::vector<corpus::MrGroup>, std::vector<corpus::MrGroup>> out;
  for (std::size_t i = 0; i < groups.size(); ++i) (held[i] ? out.second : out.first).push_back(groups[i]);
  return out;
}

BatchLoss forward_batch(model::Session& session, std::span<const Example* const> batch, std::size_t trained_layers,
                        double p, bool repeat_input, Rng& inner_rng, Rng& inter_rng) {
  if (batch.empty()) throw ContractError("forward_batch: empty batch");
  const auto& cfg = session.config();
  if (trained_layers == 0 || trained_layers > cfg.layers())
    throw ContractError("forward_batch: cannot train " + std::to_string(trained_layers) + " of " +
                        std::to_string(cfg.layers()) + " layers");
  const bool hier = cfg.hierarchical();
  const std::size_t B = batch.size();

  std::vector<corpus::EncodedFrame> frames;
  for (const auto* ex : batch) frames.push_back(ex->frame);
  model::EncoderState enc = session.encode(frames);

  BatchLoss out;
  model::LayerStates below;
  std::vector<std::vector<int>> below_pred;  // teacher-forced argmax of the layer below, per row
  for (std::size_t layer = 0; layer < trained_layers; ++layer) {
    std::vector<std::vector<int>> targets(B);
    for (std::size_t b = 0; b < B; ++b) targets[b] = batch[b]->target(layer, hier);
    std::size_t T = 0;
    for (const auto& t : targets) T = std::max(T, t.size());

    const bool has_lower = hier && layer > 0;
    std::vector<std::size_t> cursor(B, 0);
    std::vector<int> own(B, Vocabulary::kBos), cur(B, Vocabulary::kBos), last_pred(B, Vocabulary::kEos);
    std::vector<std::vector<int>> pred(B);
    std::vector<Var> logits;
    model::LayerStates states;
    Var h = enc.h_enc[layer];
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t b = 0; b < B; ++b) {
        const auto& tg = targets[b];
        const bool valid = t < tg.size();
        if (t > 0) own[b] = valid ? sample_inner(tg[t - 1], last_pred[b], p, inner_rng) : Vocabulary::kEos;
        if (has_lower) {
          const auto& gold_lower = batch[b]->target(layer - 1, hier);
          const std::size_t pos = repeat_input ? cursor[b] : t;
          const int gold = pos < gold_lower.size() ? gold_lower[pos] : Vocabulary::kEos;
          const int mine = pos < below_pred[b].size() ? below_pred[b][pos] : Vocabulary::kEos;
          cur[b] = valid ? sample_inter(gold, mine, p, inter_rng) : Vocabulary::kEos;
          if (repeat_input && valid && pos < gold_lower.size() && tg[t] == gold_lower[pos]) ++cursor[b];
        }
      }
      std::optional<Var> ctx;
      if (session.uses_attention(layer)) ctx = session.attend(layer, h, below).context;
      model::DecoderStep st = session.step(layer, own, cur, h, ctx);
      for (std::size_t b = 0; b < B; ++b) {
        last_pred[b] = st.emitted[b];
        if (t < targets[b].size()) pred[b].push_back(st.emitted[b]);
      }
      h = st.hidden;
      states.hidden.push_back(h);
      logits.push_back(st.logits);
    }
    for (const auto& t : targets) states.lengths.push_back(t.size());
    Var l = layer_loss(logits, targets);
    out.layers.push_back(l);
    out.total = layer == 0 ? l : numkit::add(out.total, l);
    below = std::move(states);
    below_pred = std::move(pred);
  }
  return out;
}

namespace {

// Layer index (1-based) encoded in a "dec.<i>." parameter name, 0 for encoder parameters.
std::size_t param_layer(const std::string& name) {
  if (name.rfind("dec.", 0) != 0) return 0;
  return static_cast<std::size_t>(std::stoul(name.substr(4)));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

TrainResult train(model::Model& model, const Vocabulary& vocab, std::span<const Example> examples,
                  std::span<const EvalItem> dev, const Schedule& schedule, const TrainHooks& hooks) {
  schedule.validate();
  if (examples.empty()) throw ContractError("train: no training examples");
  const std::size_t L = model.layers();
  Rng shuffle_rng(numkit::derive_seed(schedule.seed, 3));
  Rng inner_rng(numkit::derive_seed(schedule.seed, 1));
  Rng inter_rng(numkit::derive_seed(schedule.seed, 2));
  numkit::OptimizerState opt;
  opt.config.learning_rate = schedule.learning_rate;

  if (hooks.log) {
    *hooks.log << "epoch\tbatch";
    for (std::size_t i = 1; i <= L; ++i) *hooks.log << "\tl" << i;
    *hooks.log << "\ttotal\ttf_prob\twall_ms\n";
  }

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto start = std::chrono::steady_clock::now();
  TrainResult result;

  for (std::size_t epoch = 1; epoch <= schedule.epochs; ++epoch) {
    numkit::shuffle(order, shuffle_rng);
    const std::size_t k = schedule.trainable_layers(epoch, L);
    const double p = schedule.tf_prob_at(epoch);
    auto selected = [k](const std::string& name) { return param_layer(name) <= k; };
    EpochRecord rec{epoch, k, p, std::vector<double>(k, 0.0), 0.0, std::nullopt};
    std::size_t batches = 0;

    for (std::size_t first = 0; first < order.size(); first += schedule.batch_size) {
      const std::size_t last = std::min(order.size(), first + schedule.batch_size);
      std::vector<const Example*> batch;
      for (std::size_t i = first; i < last; ++i) batch.push_back(&examples[order[i]]);

      Graph g;
      model::Session session(model, g);
      BatchLoss loss = forward_batch(session, batch, k, p, schedule.repeat_input, inner_rng, inter_rng);
      const double total = loss.total.value()[0];
      if (!std::isfinite(total))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches + 1));
      g.backward(loss.total);
      numkit::adam_step(model.params(), opt, selected);
      model.params().clear_grads();

      BatchRecord br{epoch, batches + 1, {}, total, p, 0.0};
      for (std::size_t i = 0; i < k; ++i) {
        br.layer_losses.push_back(loss.layers[i].value()[0]);
        rec.layer_losses[i] += br.layer_losses.back();
      }
      br.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      rec.total += total;
      ++batches;
      if (hooks.log) {
        *hooks.log << epoch << '\t' << br.batch;
        for (std::size_t i = 0; i < L; ++i) *hooks.log << '\t' << (i < k ? fmt(br.layer_losses[i]) : "-");
        *hooks.log << '\t' << fmt(total) << '\t' << fmt(p) << '\t' << static_cast<long long>(br.wall_ms) << '\n';
      }
      result.batches.push_back(std::move(br));
    }
    for (auto& v : rec.layer_losses) v /= static_cast<double>(batches);
    rec.total /= static_cast<double>(batches);
    if (!dev.empty()) rec.dev_bleu = eval_bleu(model, dev, vocab, schedule.repeat_input);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (hooks.checkpoint_dir && (epoch % hooks.checkpoint_every == 0 || epoch == schedule.epochs)) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03zu", epoch);
      model.save(*hooks.checkpoint_dir / name);
    }
    result.epochs.push_back(std::move(rec));
  }
  return result;
}

std::vector<metrics::Tokens> decode_items(model::Model& model, std::span<const EvalItem> items, const Vocabulary& vocab,
                                          bool repeat_input, std::size_t batch_size) {
  std::vector<metrics::Tokens> out;
  for (std::size_t first = 0; first < items.size(); first += batch_size) {
    const std::size_t last = std::min(items.size(), first + batch_size);
    std::vector<corpus::EncodedFrame> frames;
    for (std::size_t i = first; i < last; ++i) frames.push_back(items[i].encoded);
    for (const auto& ids : model::generate_ids(model, frames, repeat_input)) {
      metrics::Tokens toks;
      for (int id : ids) toks.push_back(vocab.token(id));
      out.push_back(std::move(toks));
    }
  }
  return out;
}

namespace {

std::vector<metrics::EvalInstance> instances(model::Model& model, std::span<const EvalItem> items,
                                             const Vocabulary& vocab, bool repeat_input) {
  auto outputs = decode_items(model, items, vocab, repeat_input);
  std::vector<metrics::EvalInstance> inst;
  for (std::size_t i = 0; i < items.size(); ++i) inst.push_back({std::move(outputs[i]), items[i].references});
  return inst;
}

}  // namespace

double eval_bleu(model::Model& model, std::span<const EvalItem> items, const Vocabulary& vocab, bool repeat_input) {
  return metrics::corpus_bleu(instances(model, items, vocab, repeat_input));
}

metrics::Scores evaluate(model::Model& model, std::span<const EvalItem> items, const Vocabulary& vocab,
                         bool repeat_input) {
  return metrics::evaluate(instances(model, items, vocab, repeat_input));
}

}  // namespace hnlg::training
