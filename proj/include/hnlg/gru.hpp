// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "hnlg/autograd.hpp"
#include "hnlg/params.hpp"

namespace hnlg::numkit {

/// Registers `<prefix>.Wz/.Wr/.Wh` of shape [(d_in + d_h) x d_h] and
/// zero biases `<prefix>.bz/.br/.bh` of shape [d_h].
void add_gru_params(ParamSet& params, const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim);

/// GRU weights bound to one graph.
struct GruVars {
  Var wz, wr, wh, bz, br, bh;

  static GruVars bind(Graph& graph, ParamSet& params, const std::string& prefix);
  std::size_t hidden_dim() const { return wz.cols(); }
  std::size_t input_dim() const { return wz.value().shape()[0] - wz.cols(); }
};

/// One GRU step on a batch of rows:
///   z = sigmoid([x;h] Wz + bz),  r = sigmoid([x;h] Wr + br)
///   c = tanh([x; r*h] Wh + bh),  h' = (1 - z) * h + z * c
Var gru_cell(Var x, Var h, const GruVars& w);

}  // namespace hnlg::numkit
