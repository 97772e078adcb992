// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hnlg/params.hpp"

namespace hnlg::numkit {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct Moments {
  std::vector<double> first;
  std::vector<double> second;
  std::uint64_t updates = 0;
};

struct OptimizerState {
  AdamConfig config;
  std::map<std::string, Moments> moments;
  std::uint64_t step_count = 0;
};

using ParamFilter = std::function<bool(const std::string&)>;

/// Bias-corrected Adam update of every selected parameter, then clears their
/// gradients. Bias correction uses each parameter's own update count, so a
/// parameter that joins training late starts with a proper first step.
/// Throws ContractError if a selected parameter has no gradient.
void adam_step(ParamSet& params, OptimizerState& state, const ParamFilter& selected = {});

}  // namespace hnlg::numkit
