// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hnlg/attention.hpp"
#include "hnlg/autograd.hpp"
#include "hnlg/corpus.hpp"
#include "hnlg/gru.hpp"
#include "hnlg/params.hpp"

namespace hnlg::model {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 64;
  std::size_t encoder_hidden = 100;
  /// Four sizes for the hierarchical decoder, one for the flat baseline.
  std::vector<std::size_t> decoder_hidden{100, 100, 100, 100};
  AttentionKind attention = AttentionKind::none;
  corpus::GeneratingOrder order;
  std::size_t max_decode_len = 60;

  bool hierarchical() const { return decoder_hidden.size() == corpus::kLayers; }
  std::size_t layers() const { return decoder_hidden.size(); }
  /// Throws ContractError on an inconsistent configuration.
  void validate() const;

  /// key = value sidecar text.
  std::string to_text() const;
  static ModelConfig from_text(std::string_view text);
  bool operator==(const ModelConfig&) const = default;
};

/// Flat-baseline configuration: one decoder layer of the given size.
ModelConfig flat_config(std::size_t vocab_size, std::size_t hidden = 400);

struct EncoderState {
  /// Initial hidden state per decoder layer, [B x d_i].
  std::vector<numkit::Var> h_enc;
  /// Concatenated forward/backward states per input position, [B x 2H].
  std::vector<numkit::Var> step_states;
};

struct DecoderStep {
  numkit::Var hidden;  // [B x d_i]
  numkit::Var logits;  // [B x V]
  std::vector<int> emitted;
};

/// Hidden states of a decoded layer, for the attention of the layer above.
struct LayerStates {
  std::vector<numkit::Var> hidden;  // one [B x d] per step
  std::vector<std::size_t> lengths; // valid steps per row
};

/// Per-row record of one greedy layer pass.
struct DecodeTrace {
  std::vector<int> tokens;        // emitted tokens, EOS included when reached
  std::vector<int> lower_inputs;  // y_lower fed at each step
  std::vector<bool> advanced;     // repeat-input cursor moved after this step
  bool lower_unconsumed = false;  // hit max length before using up the lower sequence
};

class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);
  Model(ModelConfig config, numkit::ParamSet params);

  const ModelConfig& config() const { return config_; }
  numkit::ParamSet& params() { return params_; }
  const numkit::ParamSet& params() const { return params_; }
  std::size_t layers() const { return config_.layers(); }
  /// Prefix of decoder layer parameters, "dec.<i+1>".
  static std::string layer_prefix(std::size_t layer);

  void save(const std::filesystem::path& dir) const;
  static Model load(const std::filesystem::path& dir);

 private:
  ModelConfig config_;
  numkit::ParamSet params_;
};

/// A model bound to one graph. Building blocks operate on batches of rows.
class Session {
 public:
  Session(Model& model, numkit::Graph& graph);

  numkit::Graph& graph() { return graph_; }
  const ModelConfig& config() const { return model_.config(); }

  /// Throws ContractError if any frame has no tokens.
  EncoderState encode(std::span<const corpus::EncodedFrame> frames);

  /// One decoder step for layer `layer` (0-based). `lower_cur` is ignored by
  /// the flat baseline. `context` is required iff the layer uses attention.
  DecoderStep step(std::size_t layer, std::span<const int> own_prev, std::span<const int> lower_cur,
                   numkit::Var h_prev, std::optional<numkit::Var> context = std::nullopt);

  bool uses_attention(std::size_t layer) const;
  /// Attention of `layer` with query h over the layer below.
  AttentionResult attend(std::size_t layer, numkit::Var query, const LayerStates& below);

  /// Greedy pass through one layer. For layer > 0 each lower sequence should
  /// end with EOS (appended if missing). With `forced`, the given tokens are
  /// emitted and fed back instead of the argmax.
  std::vector<DecodeTrace> decode_layer(std::size_t layer, const std::vector<std::vector<int>>& lower,
                                        const EncoderState& enc, bool repeat_input, const LayerStates* below,
                                        LayerStates* states_out = nullptr,
                                        const std::vector<std::vector<int>>* forced = nullptr);

 private:
  struct LayerVars {
    numkit::Var embed, init_w, init_b, out_w, out_b;
    std::optional<numkit::Var> attn_w;
    numkit::GruVars gru;
  };
  Model& model_;
  numkit::Graph& graph_;
  numkit::Var enc_embed_, enc_init_fwd_, enc_init_bwd_;
  numkit::GruVars enc_fwd_, enc_bwd_;
  std::vector<LayerVars> layers_;
};

/// Runs every layer greedily and returns the top layer's tokens, EOS removed.
std::vector<std::vector<int>> generate_ids(Model& model, std::span<const corpus::EncodedFrame> frames,
                                           bool repeat_input);

/// Frame in, relexicalized sentence out (tokens joined by single spaces).
std::string generate(Model& model, const corpus::SemanticFrame& frame, const corpus::Vocabulary& vocab,
                     bool repeat_input);

}  // namespace hnlg::model
