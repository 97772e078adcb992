// SPDX-License-Identifier: Apache-2.0
#include "hnlg/adam.hpp"

#include <cmath>

#include "hnlg/error.hpp"

namespace hnlg::numkit {

void adam_step(ParamSet& params, OptimizerState& state, const ParamFilter& selected) {
  const auto& cfg = state.config;
  for (auto& [name, p] : params) {
    if (selected && !selected(name)) continue;
    if (!p.has_grad()) throw ContractError("adam_step: parameter '" + name + "' has no gradient");
  }
  for (auto& [name, p] : params) {
    if (selected && !selected(name)) continue;
    auto& m = state.moments[name];
    if (m.first.empty()) {
      m.first.assign(p.size(), 0.0);
      m.second.assign(p.size(), 0.0);
    }
    ++m.updates;
    const double t = static_cast<double>(m.updates);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    auto g = p.grad();
    auto w = p.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m.first[i] = cfg.beta1 * m.first[i] + (1.0 - cfg.beta1) * g[i];
      m.second[i] = cfg.beta2 * m.second[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m.first[i] / c1;
      const double vhat = m.second[i] / c2;
      w[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
    p.clear_grad();
  }
  ++state.step_count;
}

}  // namespace hnlg::numkit
