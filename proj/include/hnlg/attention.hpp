// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "hnlg/autograd.hpp"

namespace hnlg::model {

enum class AttentionKind { none, dot, general, concat };

std::string_view attention_name(AttentionKind kind);
/// Accepts none, dot, general, concat. Throws ContractError otherwise.
AttentionKind parse_attention(std::string_view name);

struct AttentionResult {
  numkit::Var context;     // [B x d_key]
  numkit::Tensor weights;  // [B x L], zero past each row's length
};

/// Scores a batch of queries [B x d_q] against L key states [B x d_key]:
///   dot      s = q . k
///   general  s = (q W) . k          W: [d_q x d_key]
///   concat   s = tanh([q; k] W)     W: [(d_q + d_key) x 1]
/// then softmax over the first lengths[b] keys of row b (all L when lengths is
/// empty) and returns the weighted sum of keys.
AttentionResult attend(AttentionKind kind, numkit::Var query, std::optional<numkit::Var> w,
                       std::span<const numkit::Var> keys, std::span<const std::size_t> lengths = {});

}  // namespace hnlg::model
