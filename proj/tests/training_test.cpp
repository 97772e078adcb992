// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hnlg/error.hpp"
#include "hnlg/training.hpp"
#include "scenarios.hpp"

using namespace hnlg;
using namespace hnlg::training;
using hnlg::corpus::Vocabulary;
using hnlg::numkit::Graph;
using hnlg::numkit::Rng;
using hnlg::numkit::Tensor;
using hnlg::numkit::Var;

namespace {

const std::string kData = HNLG_DATA_DIR;

const std::vector<corpus::MrGroup>& fixture() {
  static const auto groups = corpus::load_tagged_corpus(kData + "/e2e_fixture.tagged.jsonl");
  return groups;
}

const Vocabulary& fixture_vocab() {
  static const auto v = Vocabulary::build(fixture());
  return v;
}

model::ModelConfig small_config(model::AttentionKind attention = model::AttentionKind::none) {
  model::ModelConfig c;
  c.vocab_size = fixture_vocab().size();
  c.embed_dim = 8;
  c.encoder_hidden = 8;
  c.decoder_hidden = {8, 8, 8, 8};
  c.attention = attention;
  return c;
}

std::vector<Example> fixture_examples(std::size_t n) {
  auto all = make_examples(fixture(), corpus::GeneratingOrder::table_order(1), fixture_vocab());
  all.resize(std::min(n, all.size()));
  return all;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Independent forward for p in {0, 1}: gold or model inputs everywhere,
// lower positions follow the gold repeat cursor when requested.
double reference_loss(model::Model& m, std::span<const Example* const> batch, std::size_t layers, bool gold,
                      bool repeat) {
  Graph g;
  model::Session s(m, g);
  std::vector<corpus::EncodedFrame> frames;
  for (auto* e : batch) frames.push_back(e->frame);
  auto enc = s.encode(frames);
  double total = 0;
  model::LayerStates below;
  std::vector<std::vector<int>> below_out(batch.size());
  for (std::size_t layer = 0; layer < layers; ++layer) {
    model::LayerStates states;
    std::vector<std::vector<int>> outs(batch.size());
    double nll = 0;
    std::size_t count = 0;
    std::size_t T = 0;
    for (auto* e : batch) T = std::max(T, e->targets[layer].size());
    Var h = enc.h_enc[layer];
    std::vector<int> prev_out(batch.size(), Vocabulary::kEos);
    std::vector<std::size_t> cursor(batch.size(), 0);
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<int> own(batch.size()), cur(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& tg = batch[b]->targets[layer];
        own[b] = t == 0 ? Vocabulary::kBos : (t < tg.size() ? (gold ? tg[t - 1] : prev_out[b]) : Vocabulary::kEos);
        cur[b] = Vocabulary::kBos;
        if (layer > 0) {
          const auto& lw = batch[b]->targets[layer - 1];
          std::size_t pos = repeat ? cursor[b] : t;
          if (t >= tg.size()) cur[b] = Vocabulary::kEos;
          else if (gold) cur[b] = pos < lw.size() ? lw[pos] : Vocabulary::kEos;
          else cur[b] = pos < below_out[b].size() ? below_out[b][pos] : Vocabulary::kEos;
          if (repeat && t < tg.size() && pos < lw.size() && lw[pos] == tg[t]) ++cursor[b];
        }
      }
      std::optional<Var> ctx;
      if (s.uses_attention(layer)) ctx = s.attend(layer, h, below).context;
      auto st = s.step(layer, own, cur, h, ctx);
      h = st.hidden;
      states.hidden.push_back(h);
      const auto& lg = st.logits.value();
      const std::size_t V = lg.cols();
      for (std::size_t b = 0; b < batch.size(); ++b) {
        prev_out[b] = st.emitted[b];
        const auto& tg = batch[b]->targets[layer];
        if (t >= tg.size()) continue;
        outs[b].push_back(st.emitted[b]);
        double mx = lg[b * V], z = 0;
        for (std::size_t v = 1; v < V; ++v) mx = std::max(mx, lg[b * V + v]);
        for (std::size_t v = 0; v < V; ++v) z += std::exp(lg[b * V + v] - mx);
        nll -= lg[b * V + static_cast<std::size_t>(tg[t])] - mx - std::log(z);
        ++count;
      }
    }
    for (auto* e : batch) states.lengths.push_back(e->targets[layer].size());
    below = std::move(states);
    below_out = std::move(outs);
    total += nll / static_cast<double>(count);
  }
  return total;
}

}  // namespace

TEST(LayerLoss, UniformLogits) {
  Graph g;
  std::vector<Var> logits(3, g.constant(Tensor({1, 4})));
  auto l = layer_loss(logits, {{1, 2, 3}});
  EXPECT_NEAR(l.value()[0], std::log(4.0), 1e-12);
}

TEST(LayerLoss, PerfectFitApproachesZero) {
  Graph g;
  std::vector<Var> logits;
  const std::vector<int> tg{2, 0, 3};
  for (int id : tg) {
    Tensor t({1, 4}, -25.0);
    t[static_cast<std::size_t>(id)] = 25.0;
    logits.push_back(g.constant(t));
  }
  EXPECT_LT(layer_loss(logits, {tg}).value()[0], 1e-20);
}

TEST(LayerLoss, RandomFiveTokensMatchHandSum) {
  Rng rng(31);
  Graph g;
  std::vector<Var> logits;
  std::vector<Tensor> raw;
  const std::vector<int> tg{4, 1, 1, 5, 0};
  for (std::size_t t = 0; t < 5; ++t) {
    Tensor x({1, 6});
    for (auto& v : x.data()) v = rng.uniform(-3, 3);
    raw.push_back(x);
    logits.push_back(g.constant(x));
  }
  double hand = 0;
  for (std::size_t t = 0; t < 5; ++t) {
    double z = 0;
    for (double v : raw[t].data()) z += std::exp(v);
    hand += -std::log(std::exp(raw[t][static_cast<std::size_t>(tg[t])]) / z);
  }
  EXPECT_NEAR(layer_loss(logits, {tg}).value()[0], hand / 5, 1e-9);
}

TEST(LayerLoss, MasksPaddingAndChecksLengths) {
  Graph g;
  Tensor a = Tensor::matrix({{0, 1, 2}, {2, 1, 0}});
  Tensor b = Tensor::matrix({{1, 1, 1}, {5, 5, 5}});
  std::vector<Var> logits{g.constant(a), g.constant(b)};
  auto l = layer_loss(logits, {{2, 0}, {1}});
  auto nll = [](std::vector<double> row, int k) {
    double z = 0;
    for (double v : row) z += std::exp(v);
    return std::log(z) - row[static_cast<std::size_t>(k)];
  };
  EXPECT_NEAR(l.value()[0], (nll({0, 1, 2}, 2) + nll({2, 1, 0}, 1) + nll({1, 1, 1}, 0)) / 3, 1e-12);
  EXPECT_THROW(layer_loss(std::span(logits).first(1), {{2, 0}, {1}}), ContractError);
}

TEST(Sampling, ExtremesAndMonteCarlo) {
  Rng rng(32);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(sample_inner(7, 9, 1.0, rng), 7);
    ASSERT_EQ(sample_inner(7, 9, 0.0, rng), 9);
    ASSERT_EQ(sample_inter(7, 9, 1.0, rng), 7);
    ASSERT_EQ(sample_inter(7, 9, 0.0, rng), 9);
  }
  Rng mc(33);
  int gold = 0;
  for (int i = 0; i < 10000; ++i) gold += sample_inner(1, 0, 0.5, mc);
  EXPECT_NEAR(gold / 10000.0, 0.5, 0.02);
  EXPECT_THROW(sample_inter(1, 0, 1.5, mc), ContractError);
}

TEST(Sampling, OneDrawPerCall) {
  Rng a(34), b(34);
  for (int i = 0; i < 50; ++i) sample_inner(1, 2, 0.3, a);
  for (int i = 0; i < 50; ++i) b.uniform();
  EXPECT_EQ(a.next(), b.next());
}

TEST(Schedule, CurriculumAndDecay) {
  Schedule s;
  EXPECT_EQ(s.trainable_layers(3, 4), 1u);
  EXPECT_EQ(s.trainable_layers(5, 4), 1u);
  EXPECT_EQ(s.trainable_layers(6, 4), 2u);
  EXPECT_EQ(s.trainable_layers(11, 4), 3u);
  EXPECT_EQ(s.trainable_layers(16, 4), 4u);
  EXPECT_EQ(s.trainable_layers(20, 4), 4u);
  EXPECT_EQ(s.trainable_layers(3, 1), 1u);
  s.curriculum = false;
  EXPECT_EQ(s.trainable_layers(1, 4), 4u);
  for (std::size_t e = 1; e <= 20; ++e) EXPECT_EQ(s.tf_prob_at(e), 0.5 * std::pow(0.9, static_cast<double>(e - 1)));
  EXPECT_THROW(s.tf_prob_at(0), ContractError);
}

TEST(Data, ExamplesAndSplit) {
  auto ex = fixture_examples(5000);
  ASSERT_EQ(ex.size(), 2000u);
  for (const auto& e : ex)
    for (const auto& t : e.targets) ASSERT_EQ(t.back(), Vocabulary::kEos);

  auto [train, dev] = split_groups(fixture(), 0.1, 7);
  EXPECT_EQ(train.size() + dev.size(), fixture().size());
  EXPECT_EQ(dev.size(), 60u);
  std::set<std::string> keys;
  for (const auto& g : train) keys.insert(g.mr_key);
  for (const auto& g : dev) EXPECT_EQ(keys.count(g.mr_key), 0u);
  auto again = split_groups(fixture(), 0.1, 7);
  ASSERT_EQ(again.second.size(), dev.size());
  for (std::size_t i = 0; i < dev.size(); ++i) EXPECT_EQ(again.second[i].mr_key, dev[i].mr_key);
}

class ForwardOracle : public ::testing::TestWithParam<std::tuple<bool, bool, model::AttentionKind>> {};

TEST_P(ForwardOracle, MatchesIndependentForwardAtExtremes) {
  auto [gold, repeat, attention] = GetParam();
  model::Model m(small_config(attention), 35);
  auto ex = fixture_examples(7);
  std::vector<const Example*> batch;
  for (auto& e : ex) batch.push_back(&e);
  Rng inner(1), inter(2);
  Graph g;
  model::Session s(m, g);
  auto loss = forward_batch(s, batch, 4, gold ? 1.0 : 0.0, repeat, inner, inter);
  EXPECT_NEAR(loss.total.value()[0], reference_loss(m, batch, 4, gold, repeat), 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Streams, ForwardOracle,
                         ::testing::Combine(::testing::Bool(), ::testing::Bool(),
                                            ::testing::Values(model::AttentionKind::none,
                                                              model::AttentionKind::general)));

TEST(ForwardBatch, SeparateStreamsReplay) {
  model::Model m(small_config(), 36);
  auto ex = fixture_examples(16);
  std::vector<const Example*> batch;
  for (auto& e : ex) batch.push_back(&e);
  auto run = [&](std::uint64_t inner_seed, std::uint64_t inter_seed) {
    Rng inner(inner_seed), inter(inter_seed);
    Graph g;
    model::Session s(m, g);
    return forward_batch(s, batch, 4, 0.5, false, inner, inter).total.value()[0];
  };
  EXPECT_EQ(run(1, 2), run(1, 2));
  EXPECT_NE(run(1, 2), run(1, 3));
  EXPECT_NE(run(1, 2), run(4, 2));
}

TEST(Train, CurriculumLeavesUpperLayersUntouched) {
  model::Model m(small_config(model::AttentionKind::concat), 37);
  auto before = m.params();
  auto ex = fixture_examples(64);
  Schedule s;
  s.epochs = 2;
  auto result = train(m, fixture_vocab(), ex, {}, s);
  for (const auto& [name, t] : m.params()) {
    const bool lowest = name.rfind("enc.", 0) == 0 || name.rfind("dec.1.", 0) == 0;
    if (lowest) EXPECT_NE(t, before.get(name)) << name;
    else EXPECT_EQ(t, before.get(name)) << name;
  }
  ASSERT_EQ(result.epochs.size(), 2u);
  EXPECT_EQ(result.epochs[0].tf_prob, 0.5);
  EXPECT_EQ(result.epochs[1].tf_prob, 0.5 * 0.9);
  EXPECT_EQ(result.epochs[1].trainable, 1u);
}

TEST(Train, ReproducibleCheckpointsAndLog) {
  auto root = std::filesystem::temp_directory_path() / "hnlg_train_repro";
  std::filesystem::remove_all(root);
  auto ex = fixture_examples(48);
  auto dev = make_eval_items(std::span(fixture()).first(4), fixture_vocab());
  std::string logs[2];
  for (int run = 0; run < 2; ++run) {
    model::Model m(small_config(model::AttentionKind::dot), 38);
    Schedule s;
    s.epochs = 6;
    s.curriculum_span = 2;
    s.repeat_input = true;
    std::ostringstream log;
    TrainHooks hooks{&log, root / std::to_string(run), 5, {}};
    auto res = train(m, fixture_vocab(), ex, dev, s, hooks);
    EXPECT_TRUE(res.epochs.back().dev_bleu.has_value());
    logs[run] = log.str();
  }
  for (const char* sub : {"epoch_005", "epoch_006"}) {
    auto a = read_bytes(root / "0" / sub / "model.ckpt");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, read_bytes(root / "1" / sub / "model.ckpt")) << sub;
  }
  EXPECT_NE(logs[0].find("epoch\tbatch\tl1\tl2\tl3\tl4\ttotal\ttf_prob\twall_ms\n"), std::string::npos);
  std::filesystem::remove_all(root);
}

TEST(Train, NonFiniteLossNamesEpochAndBatch) {
  model::Model m(small_config(), 39);
  m.params().get("dec.1.out_b")[0] = std::nan("");
  auto ex = fixture_examples(8);
  Schedule s;
  s.epochs = 1;
  try {
    train(m, fixture_vocab(), ex, {}, s);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1, batch 1"), std::string::npos) << e.what();
  }
}

TEST(Train, TrainedModelKeepsRestaurantName) {
  auto [train_groups, dev_groups] = split_groups(fixture(), 0.1, 40);
  auto vocab = Vocabulary::build(train_groups);
  auto ex = make_examples(train_groups, corpus::GeneratingOrder::table_order(1), vocab);
  model::ModelConfig c;
  c.vocab_size = vocab.size();
  c.embed_dim = 32;
  c.encoder_hidden = 32;
  c.decoder_hidden = {32, 32, 32, 32};
  model::Model m(c, 41);
  Schedule s;
  s.epochs = 3;
  s.curriculum = false;
  s.repeat_input = true;
  train(m, vocab, ex, {}, s);
  auto frame = corpus::parse_mr(
      "name[Bibimbap House], food[English], priceRange[moderate], area[riverside], near[Clare Hall]");
  auto text = model::generate(m, frame, vocab, true);
  EXPECT_NE(text.find("Bibimbap House"), std::string::npos) << text;
}

TEST(Train, SingleSampleOverfits) {
  const auto losses = hnlg::testing::single_sample_losses(kData + "/e2e_fixture.tagged.jsonl", 51);
  for (std::size_t i = 1; i < losses.size(); ++i) EXPECT_LT(losses[i], losses[i - 1]) << "step " << i;
  // Loss measured after the 50th update.
  EXPECT_LT(losses.back(), 0.1);
}
