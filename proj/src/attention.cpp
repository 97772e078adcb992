// SPDX-License-Identifier: Apache-2.0
#include "hnlg/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hnlg/error.hpp"

namespace hnlg::model {

using numkit::Graph;
using numkit::Tensor;
using numkit::Var;

std::string_view attention_name(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::none: return "none";
    case AttentionKind::dot: return "dot";
    case AttentionKind::general: return "general";
    case AttentionKind::concat: return "concat";
  }
  return "none";
}

AttentionKind parse_attention(std::string_view name) {
  for (auto k : {AttentionKind::none, AttentionKind::dot, AttentionKind::general, AttentionKind::concat})
    if (attention_name(k) == name) return k;
  throw ContractError("unknown attention kind '" + std::string(name) + "' (expected none, dot, general or concat)");
}

AttentionResult attend(AttentionKind kind, Var query, std::optional<Var> w, std::span<const Var> keys,
                       std::span<const std::size_t> lengths) {
  if (kind == AttentionKind::none) throw ContractError("attend called with attention kind none");
  if (keys.empty()) throw ContractError("attend needs at least one key state");
  Graph& g = *query.graph;
  const std::size_t B = query.rows(), dq = query.cols(), dk = keys[0].cols(), L = keys.size();
  for (const auto& k : keys)
    if (k.rows() != B || k.cols() != dk)
      throw DimensionError("attend: key shape " + numkit::shape_str(k.value().shape()) + " does not match [" +
                           std::to_string(B) + "x" + std::to_string(dk) + "]");
  if (!lengths.empty() && lengths.size() != B) throw DimensionError("attend: one length per query row expected");
  if (kind == AttentionKind::dot && dq != dk)
    throw DimensionError("dot attention needs equal sizes, got query " + std::to_string(dq) + " and key " +
                         std::to_string(dk));
  if (kind != AttentionKind::dot) {
    if (!w) throw ContractError("attention kind needs a weight matrix");
    numkit::Shape want = kind == AttentionKind::general ? numkit::Shape{dq, dk} : numkit::Shape{dq + dk, 1};
    if (w->value().shape() != want)
      throw DimensionError("attention weight has shape " + numkit::shape_str(w->value().shape()) + ", expected " +
                           numkit::shape_str(want));
  }

  std::vector<std::size_t> len(B, L);
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    if (lengths[b] == 0 || lengths[b] > L) throw ContractError("attend: row length out of range");
    len[b] = lengths[b];
  }

  const double* q = query.value().data().data();
  // Projected query: q W for general; for concat, q . W[:dq] as one scalar per row.
  std::vector<double> u;
  if (kind == AttentionKind::general) {
    const double* W = w->value().data().data();
    u.assign(B * dk, 0.0);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < dq; ++i) {
        const double qi = q[b * dq + i];
        for (std::size_t j = 0; j < dk; ++j) u[b * dk + j] += qi * W[i * dk + j];
      }
  } else if (kind == AttentionKind::concat) {
    const double* W = w->value().data().data();
    u.assign(B, 0.0);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < dq; ++i) u[b] += q[b * dq + i] * W[i];
  }

  std::vector<double> scores(B * L, 0.0);  // raw s (post-tanh for concat)
  Tensor alpha({B, L});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t j = 0; j < len[b]; ++j) {
      const double* k = keys[j].value().data().data() + b * dk;
      double s = 0;
      switch (kind) {
        case AttentionKind::dot:
          for (std::size_t i = 0; i < dk; ++i) s += q[b * dq + i] * k[i];
          break;
        case AttentionKind::general:
          for (std::size_t i = 0; i < dk; ++i) s += u[b * dk + i] * k[i];
          break;
        case AttentionKind::concat: {
          const double* Wk = w->value().data().data() + dq;
          s = u[b];
          for (std::size_t i = 0; i < dk; ++i) s += k[i] * Wk[i];
          s = std::tanh(s);
          break;
        }
        case AttentionKind::none: break;
      }
      scores[b * L + j] = s;
    }
    double mx = scores[b * L];
    for (std::size_t j = 1; j < len[b]; ++j) mx = std::max(mx, scores[b * L + j]);
    double z = 0;
    for (std::size_t j = 0; j < len[b]; ++j) z += (alpha[b * L + j] = std::exp(scores[b * L + j] - mx));
    for (std::size_t j = 0; j < len[b]; ++j) alpha[b * L + j] /= z;
  }

  Tensor ctx({B, dk});
  for (std::size_t j = 0; j < L; ++j) {
    const double* k = keys[j].value().data().data();
    for (std::size_t b = 0; b < B; ++b) {
      const double a = alpha[b * L + j];
      if (a == 0) continue;
      for (std::size_t i = 0; i < dk; ++i) ctx[b * dk + i] += a * k[b * dk + i];
    }
  }

  std::vector<std::size_t> inputs{query.id};
  const bool has_w = kind != AttentionKind::dot;
  if (has_w) inputs.push_back(w->id);
  for (const auto& k : keys) inputs.push_back(k.id);

  AttentionResult result{{}, alpha};
  result.context = g.push(
      std::move(ctx), inputs,
      [kind, inputs, has_w, B, L, dq, dk, len, alpha = std::move(alpha), u = std::move(u),
       scores = std::move(scores)](Graph& g, std::size_t self) {
        const auto& gc = g.grad(self);
        const std::size_t qid = inputs[0];
        const std::size_t first_key = has_w ? 2 : 1;
        const double* q = g.value(qid).data().data();
        const double* W = has_w ? g.value(inputs[1]).data().data() : nullptr;
        std::vector<double> ds(L), du(kind == AttentionKind::general ? dk : 0);
        for (std::size_t b = 0; b < B; ++b) {
          const double* gcb = gc.data() + b * dk;
          double mean = 0;
          for (std::size_t j = 0; j < len[b]; ++j) {
            const double* k = g.value(inputs[first_key + j]).data().data() + b * dk;
            double da = 0;
            for (std::size_t i = 0; i < dk; ++i) da += gcb[i] * k[i];
            ds[j] = da;
            mean += alpha[b * L + j] * da;
          }
          for (std::size_t j = 0; j < len[b]; ++j) ds[j] = alpha[b * L + j] * (ds[j] - mean);
          std::fill(du.begin(), du.end(), 0.0);
          for (std::size_t j = 0; j < len[b]; ++j) {
            const std::size_t kid = inputs[first_key + j];
            const double* k = g.value(kid).data().data() + b * dk;
            const double a = alpha[b * L + j];
            const double d = ds[j];
            double* gk = g.requires_grad(kid) ? g.grad(kid).data() + b * dk : nullptr;
            if (gk)
              for (std::size_t i = 0; i < dk; ++i) gk[i] += a * gcb[i];
            switch (kind) {
              case AttentionKind::dot:
                if (gk)
                  for (std::size_t i = 0; i < dk; ++i) gk[i] += d * q[b * dq + i];
                if (g.requires_grad(qid)) {
                  double* gq = g.grad(qid).data() + b * dq;
                  for (std::size_t i = 0; i < dq; ++i) gq[i] += d * k[i];
                }
                break;
              case AttentionKind::general:
                if (gk)
                  for (std::size_t i = 0; i < dk; ++i) gk[i] += d * u[b * dk + i];
                for (std::size_t i = 0; i < dk; ++i) du[i] += d * k[i];
                break;
              case AttentionKind::concat: {
                const double s = scores[b * L + j];
                const double dpre = d * (1 - s * s);
                if (gk)
                  for (std::size_t i = 0; i < dk; ++i) gk[i] += dpre * W[dq + i];
                if (g.requires_grad(qid)) {
                  double* gq = g.grad(qid).data() + b * dq;
                  for (std::size_t i = 0; i < dq; ++i) gq[i] += dpre * W[i];
                }
                if (g.requires_grad(inputs[1])) {
                  double* gw = g.grad(inputs[1]).data();
                  for (std::size_t i = 0; i < dq; ++i) gw[i] += dpre * q[b * dq + i];
                  for (std::size_t i = 0; i < dk; ++i) gw[dq + i] += dpre * k[i];
                }
                break;
              }
              case AttentionKind::none: break;
            }
          }
          if (kind == AttentionKind::general) {
            if (g.requires_grad(qid)) {
              double* gq = g.grad(qid).data() + b * dq;
              for (std::size_t i = 0; i < dq; ++i) {
                double acc = 0;
                for (std::size_t j = 0; j < dk; ++j) acc += du[j] * W[i * dk + j];
                gq[i] += acc;
              }
            }
            if (g.requires_grad(inputs[1])) {
              double* gw = g.grad(inputs[1]).data();
              for (std::size_t i = 0; i < dq; ++i) {
                const double qi = q[b * dq + i];
                for (std::size_t j = 0; j < dk; ++j) gw[i * dk + j] += qi * du[j];
              }
            }
          }
        }
      });
  return result;
}

}  // namespace hnlg::model
