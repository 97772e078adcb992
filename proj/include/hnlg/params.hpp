// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "hnlg/rng.hpp"
#include "hnlg/tensor.hpp"

namespace hnlg::numkit {

enum class Init {
  zeros,
  /// Uniform in +-sqrt(6 / (fan_in + fan_out)), fans taken from the first
  /// and last dimension.
  glorot,
};

/// Named parameters, ordered by name. Initial values depend only on the seed
/// and the sequence of `add` calls.
class ParamSet {
 public:
  explicit ParamSet(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}

  Tensor& add(const std::string& name, Shape shape, Init init = Init::glorot);
  /// Inserts an already-built tensor (checkpoint loading).
  Tensor& insert(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void clear_grads();
  std::uint64_t seed() const { return seed_; }

 private:
  std::map<std::string, Tensor> params_;
  std::uint64_t seed_;
  Rng rng_;
};

}  // namespace hnlg::numkit
