// SPDX-License-Identifier: Apache-2.0
#include "hnlg/gru.hpp"

#include "hnlg/error.hpp"

namespace hnlg::numkit {

void add_gru_params(ParamSet& params, const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim) {
  for (const char* gate : {"z", "r", "h"})
    params.add(prefix + ".W" + gate, {input_dim + hidden_dim, hidden_dim}, Init::glorot);
  for (const char* gate : {"z", "r", "h"}) params.add(prefix + ".b" + gate, {hidden_dim}, Init::zeros);
}

GruVars GruVars::bind(Graph& graph, ParamSet& params, const std::string& prefix) {
  auto p = [&](const char* suffix) { return graph.param(params.get(prefix + suffix)); };
  return {p(".Wz"), p(".Wr"), p(".Wh"), p(".bz"), p(".br"), p(".bh")};
}

Var gru_cell(Var x, Var h, const GruVars& w) {
  const std::size_t dh = w.hidden_dim();
  if (h.cols() != dh || x.cols() != w.input_dim() || x.rows() != h.rows())
    throw DimensionError("gru_cell: input " + shape_str(x.value().shape()) + " and state " +
                         shape_str(h.value().shape()) + " do not fit weights " + shape_str(w.wz.value().shape()));
  Var xh_parts[] = {x, h};
  Var xh = concat_lastdim(xh_parts);
  Var z = sigmoid(add(matmul(xh, w.wz), w.bz));
  Var r = sigmoid(add(matmul(xh, w.wr), w.br));
  Var xrh_parts[] = {x, mul(r, h)};
  Var cand = tanh(add(matmul(concat_lastdim(xrh_parts), w.wh), w.bh));
  return add(mul(one_minus(z), h), mul(z, cand));
}

}  // namespace hnlg::numkit
