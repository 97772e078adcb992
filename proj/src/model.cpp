// SPDX-License-Identifier: Apache-2.0
#include "hnlg/model.hpp"

#include <fstream>
#include <sstream>

#include "hnlg/checkpoint.hpp"
#include "hnlg/error.hpp"
#include "hnlg/keyvalue.hpp"

namespace hnlg::model {

using corpus::Vocabulary;
using numkit::Graph;
using numkit::Init;
using numkit::Tensor;
using numkit::Var;

// ---------------------------------------------------------------------------
// Configuration

void ModelConfig::validate() const {
  if (vocab_size <= static_cast<std::size_t>(Vocabulary::kNearPh))
    throw ContractError("vocabulary must hold the reserved symbols, got size " + std::to_string(vocab_size));
  if (embed_dim == 0 || encoder_hidden == 0 || max_decode_len == 0)
    throw ContractError("model dimensions and max_decode_len must be positive");
  if (decoder_hidden.size() != 1 && decoder_hidden.size() != corpus::kLayers)
    throw ContractError("decoder_hidden needs 1 (flat) or 4 (hierarchical) sizes, got " +
                        std::to_string(decoder_hidden.size()));
  for (auto d : decoder_hidden)
    if (d == 0) throw ContractError("decoder hidden sizes must be positive");
  if (attention != AttentionKind::none && !hierarchical())
    throw ContractError("attention needs the hierarchical decoder");
  if (attention == AttentionKind::dot)
    for (std::size_t i = 1; i < decoder_hidden.size(); ++i)
      if (decoder_hidden[i] != decoder_hidden[i - 1])
        throw ContractError("dot attention needs equal adjacent decoder sizes");
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out << "vocab_size = " << vocab_size << "\n";
  out << "embed_dim = " << embed_dim << "\n";
  out << "encoder_hidden = " << encoder_hidden << "\n";
  out << "decoder_hidden = ";
  for (std::size_t i = 0; i < decoder_hidden.size(); ++i) out << (i ? "," : "") << decoder_hidden[i];
  out << "\n";
  out << "attention = " << attention_name(attention) << "\n";
  out << "order = " << order.str() << "\n";
  out << "max_decode_len = " << max_decode_len << "\n";
  return out.str();
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  ModelConfig c;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "vocab_size") c.vocab_size = parse_uint(value, key);
    else if (key == "embed_dim") c.embed_dim = parse_uint(value, key);
    else if (key == "encoder_hidden") c.encoder_hidden = parse_uint(value, key);
    else if (key == "decoder_hidden") {
      c.decoder_hidden.clear();
      for (const auto& part : split(value, ',')) c.decoder_hidden.push_back(parse_uint(part, key));
    } else if (key == "attention") c.attention = parse_attention(value);
    else if (key == "order") c.order = corpus::GeneratingOrder::parse(value, true);
    else if (key == "max_decode_len") c.max_decode_len = parse_uint(value, key);
    else throw ParseError("unknown model config key '" + key + "'");
  }
  c.validate();
  return c;
}

ModelConfig flat_config(std::size_t vocab_size, std::size_t hidden) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.decoder_hidden = {hidden};
  return c;
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

std::size_t layer_input_dim(const ModelConfig& c, std::size_t layer) {
  std::size_t d = c.embed_dim;
  if (c.hierarchical()) d += c.embed_dim;
  if (c.attention != AttentionKind::none && layer > 0) d += c.decoder_hidden[layer - 1];
  return d;
}

void register_params(const ModelConfig& c, numkit::ParamSet& p) {
  const std::size_t V = c.vocab_size, E = c.embed_dim, H = c.encoder_hidden;
  p.add("enc.embed", {V, E});
  p.add("enc.init_fwd", {V, H});
  p.add("enc.init_bwd", {V, H});
  numkit::add_gru_params(p, "enc.fwd", E, H);
  numkit::add_gru_params(p, "enc.bwd", E, H);
  for (std::size_t i = 0; i < c.layers(); ++i) {
    const std::string pre = Model::layer_prefix(i);
    const std::size_t d = c.decoder_hidden[i];
    p.add(pre + ".embed", {V, E});
    p.add(pre + ".init", {2 * H, d});
    p.add(pre + ".init_b", {d}, Init::zeros);
    numkit::add_gru_params(p, pre + ".gru", layer_input_dim(c, i), d);
    p.add(pre + ".out", {d, V});
    p.add(pre + ".out_b", {V}, Init::zeros);
    if (i > 0 && c.attention == AttentionKind::general) p.add(pre + ".attn", {d, c.decoder_hidden[i - 1]});
    if (i > 0 && c.attention == AttentionKind::concat) p.add(pre + ".attn", {d + c.decoder_hidden[i - 1], 1});
  }
}

}  // namespace

std::string Model::layer_prefix(std::size_t layer) { return "dec." + std::to_string(layer + 1); }

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)), params_(seed) {
  config_.validate();
  register_params(config_, params_);
}

Model::Model(ModelConfig config, numkit::ParamSet params) : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  numkit::ParamSet expected;
  register_params(config_, expected);
  if (expected.size() != params_.size())
    throw ContractError("parameter set has " + std::to_string(params_.size()) + " tensors, model expects " +
                        std::to_string(expected.size()));
  for (const auto& [name, t] : expected) {
    if (!params_.contains(name)) throw ContractError("parameter set lacks '" + name + "'");
    if (params_.get(name).shape() != t.shape())
      throw ContractError("parameter '" + name + "' has shape " + numkit::shape_str(params_.get(name).shape()) +
                          ", expected " + numkit::shape_str(t.shape()));
  }
}

void Model::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  numkit::save_checkpoint(dir / "model.ckpt", params_);
  std::ofstream out(dir / "model.cfg", std::ios::binary);
  out << config_.to_text();
  if (!out) throw std::runtime_error("cannot write " + (dir / "model.cfg").string());
}

Model Model::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.cfg", std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + (dir / "model.cfg").string());
  std::stringstream text;
  text << in.rdbuf();
  return Model(ModelConfig::from_text(text.str()), numkit::load_checkpoint(dir / "model.ckpt"));
}

// ---------------------------------------------------------------------------
// Session

Session::Session(Model& model, Graph& graph) : model_(model), graph_(graph) {
  auto& p = model.params();
  enc_embed_ = graph.param(p.get("enc.embed"));
  enc_init_fwd_ = graph.param(p.get("enc.init_fwd"));
  enc_init_bwd_ = graph.param(p.get("enc.init_bwd"));
  enc_fwd_ = numkit::GruVars::bind(graph, p, "enc.fwd");
  enc_bwd_ = numkit::GruVars::bind(graph, p, "enc.bwd");
  for (std::size_t i = 0; i < model.layers(); ++i) {
    const std::string pre = Model::layer_prefix(i);
    LayerVars lv{graph.param(p.get(pre + ".embed")), graph.param(p.get(pre + ".init")),
                 graph.param(p.get(pre + ".init_b")), graph.param(p.get(pre + ".out")),
                 graph.param(p.get(pre + ".out_b")), std::nullopt,
                 numkit::GruVars::bind(graph, p, pre + ".gru")};
    if (p.contains(pre + ".attn")) lv.attn_w = graph.param(p.get(pre + ".attn"));
    layers_.push_back(lv);
  }
}

EncoderState Session::encode(std::span<const corpus::EncodedFrame> frames) {
  if (frames.empty()) throw ContractError("encode needs at least one frame");
  const std::size_t B = frames.size(), V = config().vocab_size;
  std::size_t T = 0;
  for (const auto& f : frames) {
    if (f.ids.empty()) throw ContractError("encode: empty frame token sequence");
    if (f.multi_hot.size() != V) throw DimensionError("encode: multi-hot length differs from vocabulary size");
    T = std::max(T, f.ids.size());
  }
  Tensor hot({B, V});
  for (std::size_t b = 0; b < B; ++b) std::copy(frames[b].multi_hot.begin(), frames[b].multi_hot.end(), &hot[b * V]);
  Var hot_v = graph_.constant(std::move(hot));

  auto column_inputs = [&](std::size_t t, std::vector<int>& ids) {
    Tensor mask({B, 1});
    bool full = true;
    for (std::size_t b = 0; b < B; ++b) {
      const bool valid = t < frames[b].ids.size();
      ids[b] = valid ? frames[b].ids[t] : Vocabulary::kPad;
      mask[b] = valid ? 1.0 : 0.0;
      full = full && valid;
    }
    return std::pair{std::move(mask), full};
  };
  auto masked_step = [&](Var h, std::size_t t, const numkit::GruVars& w) {
    std::vector<int> ids(B);
    auto [mask, full] = column_inputs(t, ids);
    Var h_new = numkit::gru_cell(numkit::embedding(enc_embed_, ids), h, w);
    if (full) return h_new;
    return numkit::add(h, numkit::mul(numkit::sub(h_new, h), graph_.constant(std::move(mask))));
  };

  std::vector<Var> fwd(T), bwd(T);
  Var h = numkit::matmul(hot_v, enc_init_fwd_);
  for (std::size_t t = 0; t < T; ++t) fwd[t] = h = masked_step(h, t, enc_fwd_);
  Var hb = numkit::matmul(hot_v, enc_init_bwd_);
  for (std::size_t t = T; t-- > 0;) bwd[t] = hb = masked_step(hb, t, enc_bwd_);

  EncoderState state;
  for (std::size_t t = 0; t < T; ++t) {
    Var parts[] = {fwd[t], bwd[t]};
    state.step_states.push_back(numkit::concat_lastdim(parts));
  }
  Var finals[] = {h, hb};
  Var final_state = numkit::concat_lastdim(finals);
  for (const auto& lv : layers_)
    state.h_enc.push_back(numkit::add(numkit::matmul(final_state, lv.init_w), lv.init_b));
  return state;
}

bool Session::uses_attention(std::size_t layer) const {
  return layer > 0 && config().attention != AttentionKind::none;
}

DecoderStep Session::step(std::size_t layer, std::span<const int> own_prev, std::span<const int> lower_cur, Var h_prev,
                          std::optional<Var> context) {
  if (layer >= layers_.size()) throw ContractError("decoder layer " + std::to_string(layer) + " does not exist");
  const auto& lv = layers_[layer];
  const std::size_t B = h_prev.rows();
  if (h_prev.cols() != config().decoder_hidden[layer])
    throw DimensionError("decoder step: hidden state " + numkit::shape_str(h_prev.value().shape()) +
                         " does not match layer size " + std::to_string(config().decoder_hidden[layer]));
  if (own_prev.size() != B || (config().hierarchical() && lower_cur.size() != B))
    throw DimensionError("decoder step: one token per batch row expected");
  if (context.has_value() != uses_attention(layer))
    throw ContractError("decoder step: attention context given to a layer without attention, or missing");

  std::vector<Var> parts{numkit::embedding(lv.embed, own_prev)};
  if (config().hierarchical()) parts.push_back(numkit::embedding(lv.embed, lower_cur));
  if (context) parts.push_back(*context);
  Var x = parts.size() == 1 ? parts[0] : numkit::concat_lastdim(parts);
  DecoderStep out;
  out.hidden = numkit::gru_cell(x, h_prev, lv.gru);
  out.logits = numkit::add(numkit::matmul(out.hidden, lv.out_w), lv.out_b);
  out.emitted = numkit::argmax_rows(out.logits.value());
  return out;
}

AttentionResult Session::attend(std::size_t layer, Var query, const LayerStates& below) {
  if (!uses_attention(layer)) throw ContractError("layer " + std::to_string(layer) + " has no attention");
  return model::attend(config().attention, query, layers_[layer].attn_w, below.hidden, below.lengths);
}

std::vector<DecodeTrace> Session::decode_layer(std::size_t layer, const std::vector<std::vector<int>>& lower,
                                               const EncoderState& enc, bool repeat_input, const LayerStates* below,
                                               LayerStates* states_out,
                                               const std::vector<std::vector<int>>* forced) {
  if (layer >= enc.h_enc.size()) throw ContractError("encoder state lacks layer " + std::to_string(layer));
  const std::size_t B = enc.h_enc[layer].rows();
  const bool has_lower = config().hierarchical() && layer > 0;
  std::vector<std::vector<int>> lw;
  if (has_lower) {
    if (lower.size() != B) throw ContractError("decode_layer: one lower sequence per batch row expected");
    lw = lower;
    for (auto& s : lw)
      if (s.empty() || s.back() != Vocabulary::kEos) s.push_back(Vocabulary::kEos);
  }
  if (forced && forced->size() != B) throw ContractError("decode_layer: one forced sequence per batch row expected");
  if (uses_attention(layer) && !below) throw ContractError("decode_layer: attention needs the lower layer's states");

  std::vector<DecodeTrace> traces(B);
  std::vector<std::size_t> cursor(B, 0);
  std::vector<bool> done(B, false);
  std::vector<int> own(B, Vocabulary::kBos), cur(B, Vocabulary::kBos);
  Var h = enc.h_enc[layer];
  if (states_out) *states_out = {};
  std::size_t remaining = B;
  for (std::size_t t = 0; t < config().max_decode_len && remaining > 0; ++t) {
    for (std::size_t b = 0; b < B && has_lower; ++b) {
      const auto& s = lw[b];
      const std::size_t pos = repeat_input ? cursor[b] : t;
      cur[b] = pos < s.size() ? s[pos] : Vocabulary::kEos;
    }
    std::optional<Var> ctx;
    if (uses_attention(layer)) ctx = attend(layer, h, *below).context;
    DecoderStep st = step(layer, own, cur, h, ctx);
    for (std::size_t b = 0; b < B; ++b) {
      if (done[b]) {
        own[b] = Vocabulary::kEos;
        continue;
      }
      int y = st.emitted[b];
      if (forced) y = t < (*forced)[b].size() ? (*forced)[b][t] : Vocabulary::kEos;
      auto& tr = traces[b];
      tr.tokens.push_back(y);
      tr.lower_inputs.push_back(cur[b]);
      const bool adv = has_lower && repeat_input && cursor[b] < lw[b].size() && y == lw[b][cursor[b]];
      if (adv) ++cursor[b];
      tr.advanced.push_back(adv);
      own[b] = y;
      if (y == Vocabulary::kEos) {
        done[b] = true;
        --remaining;
      }
    }
    h = st.hidden;
    if (states_out) states_out->hidden.push_back(h);
  }
  for (std::size_t b = 0; b < B; ++b) {
    if (states_out) states_out->lengths.push_back(traces[b].tokens.size());
    if (!done[b] && has_lower)
      traces[b].lower_unconsumed = repeat_input ? cursor[b] < lw[b].size() : traces[b].tokens.size() < lw[b].size();
  }
  return traces;
}

// ---------------------------------------------------------------------------
// Generation

std::vector<std::vector<int>> generate_ids(Model& model, std::span<const corpus::EncodedFrame> frames,
                                           bool repeat_input) {
  Graph g(false);
  Session s(model, g);
  EncoderState enc = s.encode(frames);
  std::vector<std::vector<int>> lower;
  LayerStates below;
  for (std::size_t layer = 0; layer < model.layers(); ++layer) {
    LayerStates states;
    auto traces = s.decode_layer(layer, lower, enc, repeat_input, layer > 0 ? &below : nullptr, &states);
    lower.clear();
    for (auto& t : traces) lower.push_back(std::move(t.tokens));
    below = std::move(states);
  }
  for (auto& seq : lower)
    if (!seq.empty() && seq.back() == Vocabulary::kEos) seq.pop_back();
  return lower;
}

std::string generate(Model& model, const corpus::SemanticFrame& frame, const Vocabulary& vocab, bool repeat_input) {
  const corpus::SemanticFrame delex = frame.delex_map.empty() ? corpus::delexicalize_frame(frame) : frame;
  corpus::EncodedFrame enc = corpus::encode_frame(delex, vocab);
  if (enc.ids.empty()) throw ContractError("generate: frame has no slots");
  auto ids = generate_ids(model, std::span(&enc, 1), repeat_input).front();
  std::vector<std::string> tokens;
  for (int id : ids) tokens.push_back(vocab.token(id));
  std::string out;
  for (const auto& t : corpus::relexicalize_tokens(tokens, delex)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace hnlg::model
