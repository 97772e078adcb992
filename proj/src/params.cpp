// SPDX-License-Identifier: Apache-2.0
#include "hnlg/params.hpp"

#include <cmath>

#include "hnlg/error.hpp"

namespace hnlg::numkit {

Tensor& ParamSet::add(const std::string& name, Shape shape, Init init) {
  Tensor t(shape);
  if (init == Init::glorot) {
    const double fan_in = static_cast<double>(shape.front());
    const double fan_out = static_cast<double>(shape.back());
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : t.data()) v = rng_.uniform(-limit, limit);
  }
  return insert(name, std::move(t));
}

Tensor& ParamSet::insert(const std::string& name, Tensor value) {
  auto [it, inserted] = params_.emplace(name, std::move(value));
  if (!inserted) throw ContractError("duplicate parameter name '" + name + "'");
  return it->second;
}

Tensor& ParamSet::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamSet::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void ParamSet::clear_grads() {
  for (auto& [_, t] : params_) t.clear_grad();
}

}  // namespace hnlg::numkit
