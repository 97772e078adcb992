// SPDX-License-Identifier: Apache-2.0
// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "hnlg/experiment.hpp"
#include "hnlg/gru.hpp"
#include "layer_oracle.hpp"
#include "metric_oracle.hpp"
#include "scenarios.hpp"

using namespace hnlg;
namespace fs = std::filesystem;
using numkit::Graph;
using numkit::ParamSet;
using numkit::Rng;
using numkit::Tensor;
using numkit::Var;

namespace {

const std::string kData = HNLG_DATA_DIR;
const std::string kFixture = kData + "/e2e_fixture.tagged.jsonl";
const std::string kFixtureTest = kData + "/e2e_fixture_test.tagged.jsonl";

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("hnlg_acceptance_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------
// 1. Gradient soundness

Outcome gradients() {
  constexpr double kStep = 1e-5, kTol = 1e-5;
  const auto start = Clock::now();
  double worst = 0;
  std::string worst_case;
  std::size_t checks = 0;
  auto record = [&](const std::string& name, const testing::GradCheckResult& r) {
    ++checks;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_case = name + " (" + r.worst_param + ")";
    }
  };

  const char* ops[] = {"matmul", "add",    "add_row", "sub_col", "mul",  "mul_col", "scale",     "one_minus",
                       "sigmoid", "tanh",  "concat",  "slice",   "softmax", "row_dot", "embedding", "nll"};
  for (const std::string op : ops) {
    for (int trial = 0; trial < 3; ++trial) {
      ParamSet p;
      p.add("a", {3, 4});
      p.add("b", {3, 4});
      p.add("m", {4, 2});
      p.add("row", {4});
      p.add("col", {3, 1});
      testing::randomize(p, 1000 + trial);
      const int ids[] = {2, 0, 1};
      const int targets[] = {1, 3, 0};
      const double mask[] = {1, 1, 0};
      auto loss = [&](Graph& g, ParamSet& ps) -> Var {
        Var a = g.param(ps.get("a")), b = g.param(ps.get("b"));
        Var y;
        if (op == "matmul") y = numkit::matmul(a, g.param(ps.get("m")));
        else if (op == "add") y = numkit::add(a, b);
        else if (op == "add_row") y = numkit::add(a, g.param(ps.get("row")));
        else if (op == "sub_col") y = numkit::sub(a, g.param(ps.get("col")));
        else if (op == "mul") y = numkit::mul(a, b);
        else if (op == "mul_col") y = numkit::mul(g.param(ps.get("col")), a);
        else if (op == "scale") y = numkit::scale(a, 2.3);
        else if (op == "one_minus") y = numkit::one_minus(a);
        else if (op == "sigmoid") y = numkit::sigmoid(a);
        else if (op == "tanh") y = numkit::tanh(a);
        else if (op == "concat") { Var parts[] = {a, g.param(ps.get("col")), b}; y = numkit::concat_lastdim(parts); }
        else if (op == "slice") y = numkit::slice_lastdim(a, 1, 3);
        else if (op == "softmax") y = numkit::softmax_lastdim(a);
        else if (op == "row_dot") y = numkit::row_dot(a, b);
        else if (op == "embedding") y = numkit::embedding(b, ids);
        else return numkit::masked_nll_sum(a, targets, mask);
        Tensor probe(y.value().shape());
        Rng r(5 + trial);
        for (auto& v : probe.data()) v = r.uniform(-1, 1);
        return numkit::sum(numkit::mul(y, g.constant(probe)));
      };
      record(op, testing::grad_check(p, loss, kStep));
    }
  }

  for (int trial = 0; trial < 3; ++trial) {
    ParamSet p;
    numkit::add_gru_params(p, "g", 3, 4);
    p.add("x", {2, 3});
    p.add("h", {2, 4});
    testing::randomize(p, 2000 + trial);
    record("gru_cell", testing::grad_check(p, [](Graph& g, ParamSet& ps) {
             auto out = numkit::gru_cell(g.param(ps.get("x")), g.param(ps.get("h")), numkit::GruVars::bind(g, ps, "g"));
             return numkit::sum(numkit::mul(out, numkit::tanh(out)));
           }, kStep));
  }

  using model::AttentionKind;
  for (auto kind : {AttentionKind::dot, AttentionKind::general, AttentionKind::concat}) {
    ParamSet p;
    const std::size_t B = 2, L = 3, dq = 4, dk = kind == AttentionKind::dot ? 4 : 3;
    p.add("q", {B, dq});
    for (std::size_t j = 0; j < L; ++j) p.add("k" + std::to_string(j), {B, dk});
    if (kind == AttentionKind::general) p.add("w", {dq, dk});
    if (kind == AttentionKind::concat) p.add("w", {dq + dk, 1});
    testing::randomize(p, 3000 + static_cast<int>(kind));
    Tensor probe({B, dk});
    Rng r(9);
    for (auto& v : probe.data()) v = r.uniform(-1, 1);
    const std::vector<std::size_t> lengths{3, 2};
    record(std::string("attention ") + std::string(model::attention_name(kind)),
           testing::grad_check(p, [&](Graph& g, ParamSet& ps) {
             std::vector<Var> keys;
             for (std::size_t j = 0; j < L; ++j) keys.push_back(g.param(ps.get("k" + std::to_string(j))));
             std::optional<Var> w;
             if (ps.contains("w")) w = g.param(ps.get("w"));
             auto res = model::attend(kind, g.param(ps.get("q")), w, keys, lengths);
             return numkit::sum(numkit::mul(res.context, g.constant(probe)));
           }, kStep));
  }

  // Encoder plus four teacher-forced layers on a two-sentence micro-batch,
  // through the training forward pass.
  for (auto kind : {AttentionKind::none, AttentionKind::dot, AttentionKind::general, AttentionKind::concat}) {
    model::ModelConfig c;
    c.vocab_size = 10;
    c.embed_dim = 3;
    c.encoder_hidden = 3;
    c.decoder_hidden = {3, 3, 3, 3};
    c.attention = kind;
    model::Model m(c, 4000);
    testing::randomize(m.params(), 4001 + static_cast<int>(kind), -0.5, 0.5);
    auto frame = [&](std::vector<int> ids) {
      corpus::EncodedFrame f{std::move(ids), std::vector<double>(10, 0.0)};
      for (int id : f.ids) f.multi_hot[static_cast<std::size_t>(id)] = 1.0;
      return f;
    };
    const int E = corpus::Vocabulary::kEos;
    training::Example a{frame({6, 7, 8}), {{{6, E}, {6, 7, E}, {6, 9, 7, E}, {6, 9, 7, 8, E}}}};
    training::Example b{frame({8, 6}), {{{8, E}, {8, E}, {8, 6, E}, {8, 6, 6, E}}}};
    const training::Example* batch[] = {&a, &b};
    record(std::string("encode + 4 layers, attention ") + std::string(model::attention_name(kind)),
           testing::grad_check(m.params(), [&](Graph& g, ParamSet&) {
             model::Session s(m, g);
             Rng inner(1), inter(2);
             return training::forward_batch(s, batch, 4, 1.0, false, inner, inter).total;
           }, kStep));
  }

  const double secs = seconds_since(start);
  Outcome o;
  o.pass = worst < kTol && secs < 60;
  o.detail = std::to_string(checks) + " checks, worst relative error " + fmt("%.2e", worst) + " in " + worst_case +
             ", " + fmt("%.1f", secs) + " s (limits 1e-05, 60 s)";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Layer targets against the brute-force filter

Outcome layer_targets() {
  const auto groups = corpus::load_tagged_corpus(kFixture);
  const auto vocab = corpus::Vocabulary::build(groups);
  std::size_t records = 0, mismatches = 0, invariant_failures = 0;
  for (const auto& g : groups)
    for (const auto& sent : g.references) {
      ++records;
      for (int k = 1; k <= 6; ++k) {
        const auto order = corpus::GeneratingOrder::table_order(k);
        const auto expect = testing::brute_force_layers(sent, k);
        const auto got = corpus::build_layer_tokens(sent, order);
        const auto ids = corpus::build_layer_targets(sent, order, vocab);
        bool same = true;
        for (std::size_t i = 0; i < corpus::kLayers; ++i) {
          same = same && got[i] == expect[i] && ids.layers[i].size() == expect[i].size();
          for (std::size_t j = 0; same && j < expect[i].size(); ++j)
            same = ids.layers[i][j] == vocab.id(expect[i][j].lemma);
        }
        mismatches += !same;

        bool ok = got[3] == sent.tokens;
        for (std::size_t i = 0; i + 1 < corpus::kLayers; ++i) ok = ok && testing::is_subsequence(got[i], got[i + 1]);
        // Each token belongs to exactly one group, so it first appears in exactly one layer.
        std::size_t introduced = got[0].size();
        for (std::size_t i = 1; i < corpus::kLayers; ++i) introduced += got[i].size() - got[i - 1].size();
        ok = ok && introduced == sent.tokens.size();
        for (const auto& tok : sent.tokens) {
          std::size_t hits = 0;
          for (std::size_t i = 0; i < corpus::kLayers; ++i) {
            const auto tags = order.tags(i);
            hits += std::count(tags.begin(), tags.end(), tok.pos);
          }
          ok = ok && hits == 1;
        }
        invariant_failures += !ok;
      }
    }
  Outcome o;
  o.pass = records == 2000 && mismatches == 0 && invariant_failures == 0;
  o.detail = std::to_string(records) + " records x 6 orders, " + std::to_string(mismatches) + " oracle mismatches, " +
             std::to_string(invariant_failures) + " nesting/partition failures";
  return o;
}

// ---------------------------------------------------------------------------
// 3. Metric oracles

metrics::Tokens toks(const std::string& s) {
  metrics::Tokens out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

metrics::EvalInstance inst(const std::string& cand, std::initializer_list<const char*> refs) {
  metrics::EvalInstance e{toks(cand), {}};
  for (auto r : refs) e.references.push_back(toks(r));
  return e;
}

Outcome metric_oracles() {
  using namespace metrics;
  std::vector<std::string> failures;
  auto near = [&](const std::string& name, double got, double want) {
    if (!(std::abs(got - want) <= 1e-6)) failures.push_back(name + " " + fmt("%.9f", got) + " != " + fmt("%.9f", want));
  };
  // Hand-computed cases.
  near("bleu short", corpus_bleu(std::vector{inst("the cat", {"the cat sat"})}), 60.6530659713);
  near("bleu all orders", corpus_bleu(std::vector{inst("a b c d e", {"a b c d f g"})}),
       100.0 * std::exp(-0.2) * std::pow(0.8 * 0.75 * (2.0 / 3) * 0.5, 0.25));
  near("bleu clipping", corpus_bleu(std::vector{inst("the the the the", {"the cat"})}), 0.0);
  near("bleu two sentences", corpus_bleu(std::vector{inst("the the", {"the the cat"}), inst("x y z w", {"x y z w"})}),
       100.0 * std::exp(1.0 - 7.0 / 6.0));
  near("rouge-1", rouge_n(inst("a b c", {"a c"}), 1), 0.8);
  near("rouge-l", rouge_l(inst("a b c", {"a c"})), 0.8);
  near("rouge-l reversed", rouge_l(inst("c b a", {"a b c"})), 1.0 / 3);
  near("rouge-2 short", rouge_n(inst("a", {"a b"}), 2), 0.0);

  Rng rng(2024);
  static const char* kVocab[] = {"a", "b", "c", "d", "e", "f", "g"};
  auto random_tokens = [&](std::size_t lo, std::size_t hi) {
    Tokens t(lo + rng.below(hi - lo + 1));
    for (auto& w : t) w = kVocab[rng.below(7)];
    return t;
  };
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<EvalInstance> corpus(1 + rng.below(4));
    for (auto& e : corpus) {
      e.candidate = random_tokens(0, 9);
      const std::size_t refs = 1 + rng.below(3);
      for (std::size_t r = 0; r < refs; ++r) e.references.push_back(random_tokens(1, 9));
    }
    const double bleu = corpus_bleu(corpus);
    // Independent oracle.
    violations += std::abs(bleu - testing::oracle_bleu(corpus)) > 1e-9;
    for (const auto& e : corpus) {
      violations += std::abs(rouge_n(e, 1) - testing::oracle_rouge_n(e, 1)) > 1e-12;
      violations += std::abs(rouge_n(e, 2) - testing::oracle_rouge_n(e, 2)) > 1e-12;
      violations += std::abs(rouge_l(e) - testing::oracle_rouge_l(e)) > 1e-12;
    }
    // Identity candidates score maximally.
    auto ident = corpus;
    for (auto& e : ident) e.candidate = e.references[rng.below(e.references.size())];
    violations += std::abs(corpus_bleu(ident) - 100.0) > 1e-9;
    for (const auto& e : ident) violations += rouge_n(e, 1) != 1.0 || rouge_l(e) != 1.0 ||
                                              (e.candidate.size() >= 2 && rouge_n(e, 2) != 1.0);
    // Reference and instance permutations change nothing.
    auto perm = corpus;
    for (auto& e : perm) numkit::shuffle(e.references, rng);
    numkit::shuffle(perm, rng);
    violations += std::abs(corpus_bleu(perm) - bleu) > 1e-9;
    // Adding a reference never lowers any per-instance score.
    auto more = corpus[0];
    const double r1 = rouge_n(more, 1), r2 = rouge_n(more, 2), rl = rouge_l(more);
    more.references.push_back(random_tokens(1, 9));
    violations += rouge_n(more, 1) < r1 || rouge_n(more, 2) < r2 || rouge_l(more) < rl;
    const double single = corpus_bleu(std::vector{corpus[0]});
    more.references.push_back(more.candidate.empty() ? Tokens{"a"} : more.candidate);
    violations += corpus_bleu(std::vector{more}) + 1e-9 < single && !more.candidate.empty();
  }
  Outcome o;
  o.pass = failures.empty() && violations == 0;
  o.detail = std::to_string(8 - failures.size()) + "/8 hand cases within 1e-6, " + std::to_string(violations) +
             " property violations over 1000 trials";
  for (const auto& f : failures) o.detail += "; " + f;
  return o;
}

// ---------------------------------------------------------------------------
// 4. Desk-scale direction

Outcome desk_scale() {
  const auto start = Clock::now();
  const auto root = scratch("desk");
  struct Variant {
    const char* name;
    const char* flags;
  };
  const Variant variants[] = {{"baseline", "hierarchical = false\n"},
                              {"hd", ""},
                              {"all", "repeat_input = true\ncurriculum = true\n"}};
  std::map<std::string, double> mean;
  std::ostringstream per_seed;
  for (const auto& v : variants) {
    for (std::uint64_t seed : {1, 2, 3}) {
      auto c = experiment::ExperimentConfig::parse("train = " + kFixture + "\ntest = " + kFixtureTest +
                                                   "\nepochs = 20\ndev_fraction = 0.1\n" + v.flags);
      c.seed = seed;
      c.id = std::string(v.name) + "_" + std::to_string(seed);
      c.out = root;
      const auto result = experiment::run(c);
      const double bleu = result.trace.epochs.back().dev_bleu.value_or(0.0);
      mean[v.name] += bleu / 3;
      per_seed << ' ' << v.name << '@' << seed << '=' << metrics::format_score(bleu);
      std::cerr << "  desk " << c.id << " dev BLEU " << metrics::format_score(bleu) << " at "
                << fmt("%.0f", seconds_since(start)) << " s\n";
    }
  }
  fs::remove_all(root);
  const double minutes = seconds_since(start) / 60;
  const double all = mean["all"], hd = mean["hd"], base = mean["baseline"];
  Outcome o;
  o.pass = all > hd && hd > base && all - base >= 8 && minutes <= 45;
  o.detail = "mean dev BLEU +All " + metrics::format_score(all) + ", +HD " + metrics::format_score(hd) +
             ", baseline " + metrics::format_score(base) + " (need All > HD > baseline, All - baseline >= 8), " +
             fmt("%.1f", minutes) + " min (limit 45);" + per_seed.str();
  return o;
}

// ---------------------------------------------------------------------------
// 5. Overfit sanity

Outcome overfit() {
  const auto losses = testing::single_sample_losses(kFixture, 51);
  bool decreasing = true;
  for (std::size_t i = 1; i < losses.size(); ++i) decreasing = decreasing && losses[i] < losses[i - 1];
  Outcome o;
  o.pass = losses.back() < 0.1;
  o.detail = "layer-1 loss " + fmt("%.4f", losses.front()) + " -> " + fmt("%.4f", losses.back()) +
             " nats/token after 50 steps (limit 0.1)" + (decreasing ? ", strictly decreasing" : ", not monotone");
  return o;
}

// ---------------------------------------------------------------------------
// 6. Determinism

Outcome determinism() {
  const auto a = scratch("det_a"), b = scratch("det_b");
  std::string rows[2];
  int i = 0;
  for (const auto& dir : {a, b}) {
    auto c = experiment::ExperimentConfig::parse("train = " + kData + "/e2e_fixture_100.tagged.jsonl\ntest = " +
                                                 kData + "/e2e_fixture_100.tagged.jsonl\nepochs = 6\n"
                                                 "repeat_input = true\ncurriculum = true\ncurriculum_span = 2\n"
                                                 "attention = concat\nseed = 17\n");
    c.id = "det";
    c.out = dir;
    rows[i++] = experiment::run(c).row.str();
  }
  std::size_t compared = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a / "det")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    if (rel == fs::path("det/train.tsv")) continue;  // carries wall-clock times
    ++compared;
    differing += !fs::exists(b / rel) || slurp(entry.path()) != slurp(b / rel);
  }
  const bool ckpts = fs::exists(a / "det/checkpoints/epoch_005/model.ckpt") &&
                     fs::exists(a / "det/checkpoints/epoch_006/model.ckpt");
  fs::remove_all(a.parent_path());
  Outcome o;
  o.pass = rows[0] == rows[1] && differing == 0 && ckpts && compared >= 8;
  o.detail = std::to_string(compared) + " artifacts byte-compared (checkpoints, model, report), " +
             std::to_string(differing) + " differ; report rows " + (rows[0] == rows[1] ? "identical" : "differ");
  return o;
}

}  // namespace

// Optional arguments pick criteria by number, e.g. `acceptance_test 1 5`.
int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  const Criterion criteria[] = {
      {1, "gradient soundness", gradients},   {2, "layer-target oracle", layer_targets},
      {3, "metric oracles", metric_oracles},  {4, "desk-scale direction", desk_scale},
      {5, "overfit sanity", overfit},         {6, "determinism", determinism},
  };
  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    ++ran;
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (o.pass ? "PASS" : "FAIL") << ": " << o.detail
              << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " of " + std::to_string(ran) + " criteria failed"
                      : "all " + std::to_string(ran) + " criteria passed")
            << std::endl;
  return failed ? 1 : 0;
}
