// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

namespace hnlg::metrics {

using Tokens = std::vector<std::string>;

struct EvalInstance {
  Tokens candidate;
  std::vector<Tokens> references;  // nonempty
};

/// Corpus BLEU-4 in [0, 100], no smoothing. Clipping uses the maximum count
/// of each n-gram over an instance's references; the brevity penalty uses the
/// reference closest in length (shorter on ties). Orders for which the
/// candidates contain no n-grams at all drop out of the geometric mean; any
/// remaining order with zero matches makes the score 0.
double corpus_bleu(std::span<const EvalInstance> instances);

/// ROUGE-N F1 in [0, 1], maximum over references. n is 1 or 2.
double rouge_n(const EvalInstance& instance, int n);
/// LCS-based ROUGE-L F1 (beta = 1) in [0, 1], maximum over references.
double rouge_l(const EvalInstance& instance);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// Corpus scores scaled to percentages; ROUGE values are instance means.
struct Scores {
  double bleu = 0;
  double rouge1 = 0;
  double rouge2 = 0;
  double rouge_l = 0;
};

Scores evaluate(std::span<const EvalInstance> instances);

/// Two decimals, as reported in the result tables.
std::string format_score(double value);

}  // namespace hnlg::metrics
