// SPDX-License-Identifier: Apache-2.0
#include "hnlg/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "hnlg/error.hpp"

namespace hnlg::metrics {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const Tokens& tokens, std::size_t n) {
  NgramCounts out;
  if (tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++out[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

void check_instance(const EvalInstance& inst) {
  if (inst.references.empty()) throw ContractError("evaluation instance has no references");
}

double f1(double overlap, double cand_total, double ref_total) {
  if (overlap == 0 || cand_total == 0 || ref_total == 0) return 0;
  double p = overlap / cand_total;
  double r = overlap / ref_total;
  return 2 * p * r / (p + r);
}

}  // namespace

double corpus_bleu(std::span<const EvalInstance> instances) {
  if (instances.empty()) throw ContractError("corpus_bleu needs at least one instance");
  constexpr std::size_t kMaxOrder = 4;
  std::array<double, kMaxOrder> matches{}, totals{};
  double cand_len = 0, ref_len = 0;

  for (const auto& inst : instances) {
    check_instance(inst);
    const std::size_t c = inst.candidate.size();
    cand_len += static_cast<double>(c);
    std::size_t best = inst.references[0].size();
    for (const auto& r : inst.references) {
      auto d = [c](std::size_t len) { return len > c ? len - c : c - len; };
      if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
    }
    ref_len += static_cast<double>(best);

    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      auto cand = ngrams(inst.candidate, n);
      NgramCounts max_ref;
      for (const auto& r : inst.references)
        for (const auto& [g, k] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], k);
      for (const auto& [g, k] : cand) {
        auto it = max_ref.find(g);
        if (it != max_ref.end()) matches[n - 1] += static_cast<double>(std::min(k, it->second));
        totals[n - 1] += static_cast<double>(k);
      }
    }
  }

  double log_sum = 0;
  int orders = 0;
  for (std::size_t n = 0; n < kMaxOrder; ++n) {
    if (totals[n] == 0) continue;
    if (matches[n] == 0) return 0;
    log_sum += std::log(matches[n] / totals[n]);
    ++orders;
  }
  if (orders == 0) return 0;
  double bp = cand_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return 100.0 * bp * std::exp(log_sum / orders);
}

double rouge_n(const EvalInstance& instance, int n) {
  check_instance(instance);
  if (n != 1 && n != 2) throw ContractError("rouge_n supports n = 1 or 2, got " + std::to_string(n));
  const auto un = static_cast<std::size_t>(n);
  auto cand = ngrams(instance.candidate, un);
  const double cand_total = instance.candidate.size() >= un ? static_cast<double>(instance.candidate.size() - un + 1) : 0;
  double best = 0;
  for (const auto& ref : instance.references) {
    auto rc = ngrams(ref, un);
    double overlap = 0;
    for (const auto& [g, k] : cand) {
      auto it = rc.find(g);
      if (it != rc.end()) overlap += static_cast<double>(std::min(k, it->second));
    }
    const double ref_total = ref.size() >= un ? static_cast<double>(ref.size() - un + 1) : 0;
    best = std::max(best, f1(overlap, cand_total, ref_total));
  }
  return best;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const EvalInstance& instance) {
  check_instance(instance);
  double best = 0;
  for (const auto& ref : instance.references) {
    auto l = static_cast<double>(lcs_length(instance.candidate, ref));
    best = std::max(best, f1(l, static_cast<double>(instance.candidate.size()), static_cast<double>(ref.size())));
  }
  return best;
}

Scores evaluate(std::span<const EvalInstance> instances) {
  Scores s;
  s.bleu = corpus_bleu(instances);
  for (const auto& inst : instances) {
    s.rouge1 += rouge_n(inst, 1);
    s.rouge2 += rouge_n(inst, 2);
    s.rouge_l += rouge_l(inst);
  }
  const double scale = 100.0 / static_cast<double>(instances.size());
  s.rouge1 *= scale;
  s.rouge2 *= scale;
  s.rouge_l *= scale;
  return s;
}

std::string format_score(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

}  // namespace hnlg::metrics
