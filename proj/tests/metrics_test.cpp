// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hnlg/error.hpp"
#include "hnlg/metrics.hpp"
#include "hnlg/rng.hpp"
#include "metric_oracle.hpp"

using namespace hnlg;
using namespace hnlg::metrics;
using hnlg::numkit::Rng;
using hnlg::numkit::shuffle;
namespace oracle = hnlg::testing;

namespace {

Tokens toks(const std::string& s) {
  Tokens out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

EvalInstance inst(const std::string& cand, std::initializer_list<const char*> refs) {
  EvalInstance e{toks(cand), {}};
  for (auto r : refs) e.references.push_back(toks(r));
  return e;
}

Tokens random_tokens(Rng& rng, std::size_t min_len, std::size_t max_len) {
  static const char* kVocab[] = {"a", "b", "c", "d", "e", "f"};
  Tokens t(min_len + rng.below(max_len - min_len + 1));
  for (auto& w : t) w = kVocab[rng.below(6)];
  return t;
}

EvalInstance random_instance(Rng& rng) {
  EvalInstance e{random_tokens(rng, 0, 9), {}};
  std::size_t refs = 1 + rng.below(4);
  for (std::size_t i = 0; i < refs; ++i) e.references.push_back(random_tokens(rng, 1, 9));
  return e;
}

}  // namespace

TEST(Bleu, IdentityScoresHundred) {
  std::vector<EvalInstance> v{inst("the pub be cheap", {"the pub be cheap"}),
                              inst("RESTAURANT_NAME serve french food", {"RESTAURANT_NAME serve french food"})};
  EXPECT_DOUBLE_EQ(corpus_bleu(v), 100.0);
}

TEST(Bleu, ShortCandidateUsesAvailableOrders) {
  // Unigram and bigram precision 1; no trigrams or 4-grams in the candidate;
  // brevity penalty exp(1 - 3/2).
  std::vector<EvalInstance> v{inst("the cat", {"the cat sat"})};
  EXPECT_NEAR(corpus_bleu(v), 100.0 * std::exp(-0.5), 1e-6);
  EXPECT_NEAR(corpus_bleu(v), 60.6530659713, 1e-6);
}

TEST(Bleu, ClosestReferenceLength) {
  std::vector<EvalInstance> v{inst("a b c d", {"a b c d", "a b c d e f g"})};
  EXPECT_NEAR(corpus_bleu(v), 100.0, 1e-9);
  // Equidistant references (3 and 5 tokens for a 4-token candidate): the shorter
  // one sets the penalty, so none applies.
  std::vector<EvalInstance> tie{inst("a b c d", {"a b c", "a b c d e"})};
  EXPECT_NEAR(corpus_bleu(tie), 100.0, 1e-9);
}

TEST(Bleu, HandComputedAllOrders) {
  std::vector<EvalInstance> v{inst("a b c d e", {"a b c d f g"})};
  double expected = 100.0 * std::exp(1.0 - 6.0 / 5.0) * std::pow(4.0 / 5 * 3.0 / 4 * 2.0 / 3 * 1.0 / 2, 0.25);
  EXPECT_NEAR(corpus_bleu(v), expected, 1e-6);
}

TEST(Bleu, ClippingAndZeroMatchOrder) {
  // "the" occurs once in the reference, so only one of four counts; no bigram matches.
  std::vector<EvalInstance> v{inst("the the the the", {"the cat"})};
  EXPECT_EQ(corpus_bleu(v), 0.0);
  std::vector<EvalInstance> u{inst("the the", {"the the cat"}), inst("x y z w", {"x y z w"})};
  // unigrams 6/6, bigrams 4/4, trigrams 2/2, 4-grams 1/1; lengths 6 vs 7.
  EXPECT_NEAR(corpus_bleu(u), 100.0 * std::exp(1.0 - 7.0 / 6.0), 1e-9);
}

TEST(Bleu, EmptyCandidateIsNotAnError) {
  std::vector<EvalInstance> v{inst("", {"a b"}), inst("a b", {"a b"})};
  EXPECT_NEAR(corpus_bleu(v), 100.0 * std::exp(1.0 - 4.0 / 2.0), 1e-9);
  std::vector<EvalInstance> only_empty{inst("", {"a b"})};
  EXPECT_EQ(corpus_bleu(only_empty), 0.0);
}

TEST(Bleu, Preconditions) {
  EXPECT_THROW(corpus_bleu({}), ContractError);
  std::vector<EvalInstance> v{EvalInstance{toks("a"), {}}};
  EXPECT_THROW(corpus_bleu(v), ContractError);
}

TEST(Rouge, HandExamples) {
  EXPECT_NEAR(rouge_n(inst("a b c", {"a c"}), 1), 0.8, 1e-12);
  EXPECT_NEAR(rouge_l(inst("a b c", {"a c"})), 0.8, 1e-12);
  EXPECT_EQ(rouge_n(inst("a b", {"c d"}), 1), 0.0);
  EXPECT_EQ(rouge_n(inst("a b", {"c d"}), 2), 0.0);
  EXPECT_EQ(rouge_n(inst("a b c", {"a b c"}), 2), 1.0);
  EXPECT_EQ(rouge_l(inst("a b c", {"a b c"})), 1.0);
  EXPECT_EQ(lcs_length(toks("c b a"), toks("a b c")), 1u);
  EXPECT_NEAR(rouge_l(inst("c b a", {"a b c"})), 1.0 / 3.0, 1e-12);
  // Candidate shorter than n.
  EXPECT_EQ(rouge_n(inst("a", {"a b"}), 2), 0.0);
  // Max over references.
  EXPECT_EQ(rouge_n(inst("a b", {"x y", "a b"}), 2), 1.0);
  EXPECT_THROW(rouge_n(inst("a", {"a"}), 3), ContractError);
}

TEST(Metrics, EvaluateScalesAndFormats) {
  std::vector<EvalInstance> v{inst("a b c", {"a c"}), inst("a b", {"a b"})};
  auto s = evaluate(v);
  EXPECT_NEAR(s.rouge1, 90.0, 1e-9);
  EXPECT_NEAR(s.rouge_l, 90.0, 1e-9);
  EXPECT_NEAR(s.rouge2, 50.0, 1e-9);
  EXPECT_EQ(format_score(61.494), "61.49");
  EXPECT_EQ(format_score(100.0), "100.00");
}

TEST(MetricsProperty, MatchesOracleOnRandomInstances) {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<EvalInstance> corpus(1 + rng.below(5));
    for (auto& e : corpus) e = random_instance(rng);
    ASSERT_NEAR(corpus_bleu(corpus), oracle::oracle_bleu(corpus), 1e-9) << "trial " << trial;
    for (const auto& e : corpus) {
      ASSERT_NEAR(rouge_n(e, 1), oracle::oracle_rouge_n(e, 1), 1e-12);
      ASSERT_NEAR(rouge_n(e, 2), oracle::oracle_rouge_n(e, 2), 1e-12);
      ASSERT_NEAR(rouge_l(e), oracle::oracle_rouge_l(e), 1e-12);
    }
  }
}

TEST(MetricsProperty, RangesAndIdentity) {
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<EvalInstance> corpus(1 + rng.below(5));
    for (auto& e : corpus) e = random_instance(rng);
    auto s = evaluate(corpus);
    for (double x : {s.bleu, s.rouge1, s.rouge2, s.rouge_l}) {
      ASSERT_GE(x, 0.0);
      ASSERT_LE(x, 100.0 + 1e-9);
    }
    // Identity: candidates at least two tokens long equal one of their references.
    for (auto& e : corpus) {
      e.candidate = random_tokens(rng, 2, 9);
      e.references.insert(e.references.begin() + static_cast<std::ptrdiff_t>(rng.below(e.references.size() + 1)),
                          e.candidate);
    }
    auto id = evaluate(corpus);
    ASSERT_NEAR(id.rouge1, 100.0, 1e-9);
    ASSERT_NEAR(id.rouge2, 100.0, 1e-9);
    ASSERT_NEAR(id.rouge_l, 100.0, 1e-9);
    for (auto& e : corpus) e.references = {e.candidate};
    ASSERT_NEAR(corpus_bleu(corpus), 100.0, 1e-9);
  }
}

TEST(MetricsProperty, ReferenceOrderDoesNotMatter) {
  Rng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<EvalInstance> corpus(1 + rng.below(5));
    for (auto& e : corpus) e = random_instance(rng);
    auto before = evaluate(corpus);
    for (auto& e : corpus) shuffle(e.references, rng);
    auto after = evaluate(corpus);
    ASSERT_EQ(before.bleu, after.bleu);
    ASSERT_EQ(before.rouge1, after.rouge1);
    ASSERT_EQ(before.rouge2, after.rouge2);
    ASSERT_EQ(before.rouge_l, after.rouge_l);
  }
}

TEST(MetricsProperty, AddingReferenceNeverLowersRouge) {
  Rng rng(14);
  for (int trial = 0; trial < 1000; ++trial) {
    auto e = random_instance(rng);
    double r1 = rouge_n(e, 1), r2 = rouge_n(e, 2), rl = rouge_l(e);
    e.references.push_back(random_tokens(rng, 1, 9));
    ASSERT_GE(rouge_n(e, 1), r1);
    ASSERT_GE(rouge_n(e, 2), r2);
    ASSERT_GE(rouge_l(e), rl);
  }
}

TEST(MetricsProperty, BleuIgnoresInstanceOrder) {
  Rng rng(15);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<EvalInstance> corpus(2 + rng.below(6));
    for (auto& e : corpus) e = random_instance(rng);
    double before = corpus_bleu(corpus);
    shuffle(corpus, rng);
    ASSERT_NEAR(corpus_bleu(corpus), before, 1e-12);
  }
}
