// SPDX-License-Identifier: Apache-2.0
#include "hnlg/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "hnlg/error.hpp"

namespace hnlg::corpus {

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

constexpr std::array<PosGroup, 4> kTableOrders[6] = {
    {PosGroup::nominal, PosGroup::verb, PosGroup::modifier, PosGroup::other},
    {PosGroup::nominal, PosGroup::modifier, PosGroup::verb, PosGroup::other},
    {PosGroup::verb, PosGroup::nominal, PosGroup::modifier, PosGroup::other},
    {PosGroup::verb, PosGroup::modifier, PosGroup::nominal, PosGroup::other},
    {PosGroup::nominal, PosGroup::other, PosGroup::verb, PosGroup::modifier},
    {PosGroup::nominal, PosGroup::other, PosGroup::modifier, PosGroup::verb},
};

const std::vector<std::string>& group_tags(PosGroup g) {
  static const std::vector<std::string> nominal{"NOUN", "PROPN", "PRON"};
  static const std::vector<std::string> verb{"VERB"};
  static const std::vector<std::string> modifier{"ADJ", "ADV"};
  static const std::vector<std::string> other = [] {
    std::vector<std::string> out;
    for (const auto& t : upos_tags())
      if (group_of(t) == PosGroup::other) out.push_back(t);
    return out;
  }();
  switch (g) {
    case PosGroup::nominal: return nominal;
    case PosGroup::verb: return verb;
    case PosGroup::modifier: return modifier;
    case PosGroup::other: return other;
  }
  return other;
}

}  // namespace

const std::vector<std::string>& upos_tags() {
  static const std::vector<std::string> tags{"ADJ", "ADP", "ADV",  "AUX",   "CCONJ", "DET", "INTJ", "NOUN", "NUM",
                                             "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM",  "VERB", "X"};
  return tags;
}

bool is_known_tag(std::string_view tag) {
  if (tag == kPlaceholderTag) return true;
  const auto& tags = upos_tags();
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

const std::vector<std::string>& slot_schema() {
  static const std::vector<std::string> schema{"name", "eatType",        "food",           "priceRange",
                                               "customerRating", "area", "familyFriendly", "near"};
  return schema;
}

std::optional<std::string> canonical_slot_name(std::string_view raw) {
  std::string key;
  for (char c : ascii_lower(raw))
    if (c != ' ' && c != '_') key += c;
  for (const auto& s : slot_schema())
    if (ascii_lower(s) == key) return s;
  return std::nullopt;
}

const std::string* SemanticFrame::value(std::string_view slot) const {
  for (const auto& s : slots)
    if (s.name == slot) return &s.value;
  return nullptr;
}

std::vector<std::string> TaggedSentence::lemmas() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.lemma);
  return out;
}

// ---------------------------------------------------------------------------
// Loading

std::vector<MrGroup> parse_tagged_corpus(std::istream& in) {
  using nlohmann::json;
  std::vector<MrGroup> groups;
  std::unordered_map<std::string, std::size_t> by_key;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    if (!rec.is_object()) throw ParseError("record is not a JSON object", lineno);
    if (rec.contains("_meta")) continue;
    if (!rec.contains("mr") || !rec["mr"].is_array()) throw ParseError("missing or non-list 'mr'", lineno);
    if (!rec.contains("ref") || !rec["ref"].is_array()) throw ParseError("missing or non-list 'ref'", lineno);

    SemanticFrame frame;
    std::string key;
    for (const auto& pair : rec["mr"]) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string())
        throw ParseError("mr entries must be [slot, value] string pairs", lineno);
      const auto raw_slot = pair[0].get<std::string>();
      const auto value = pair[1].get<std::string>();
      auto slot = canonical_slot_name(raw_slot);
      if (!slot) throw ParseError("unknown slot '" + raw_slot + "'", lineno);
      if (!key.empty()) key += ", ";
      key += raw_slot + "[" + value + "]";
      frame.slots.push_back({*slot, value});
    }

    TaggedSentence sentence;
    for (const auto& tok : rec["ref"]) {
      if (!tok.is_array() || tok.size() != 2 || !tok[0].is_string() || !tok[1].is_string())
        throw ParseError("ref entries must be [lemma, upos] string pairs", lineno);
      auto pos = tok[1].get<std::string>();
      if (!is_known_tag(pos)) throw ParseError("unknown POS tag '" + pos + "'", lineno);
      if (pos == "PUNCT") continue;
      auto lemma = ascii_lower(tok[0].get<std::string>());
      if (lemma.empty()) throw ParseError("empty lemma", lineno);
      sentence.tokens.push_back({std::move(lemma), std::move(pos)});
    }
    if (sentence.tokens.empty()) throw ParseError("reference is empty after trimming punctuation", lineno);

    auto [it, inserted] = by_key.emplace(key, groups.size());
    if (inserted) groups.push_back({key, std::move(frame), {}});
    groups[it->second].references.push_back(std::move(sentence));
  }
  return groups;
}

std::vector<MrGroup> load_tagged_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  return parse_tagged_corpus(in);
}

SemanticFrame parse_mr(std::string_view mr) {
  SemanticFrame frame;
  std::size_t i = 0;
  const auto fail = [&](const std::string& what) {
    throw ParseError("MR: " + what + " at offset " + std::to_string(i));
  };
  while (i < mr.size()) {
    while (i < mr.size() && (mr[i] == ' ' || mr[i] == ',')) ++i;
    if (i >= mr.size()) break;
    const auto open = mr.find('[', i);
    if (open == std::string_view::npos) fail("missing '['");
    const auto close = mr.find(']', open);
    if (close == std::string_view::npos) fail("unbalanced '['");
    const auto nested = mr.find('[', open + 1);
    if (nested != std::string_view::npos && nested < close) fail("nested '['");
    const auto raw_slot = trim(mr.substr(i, open - i));
    if (raw_slot.find(']') != std::string::npos) fail("unbalanced ']'");
    auto slot = canonical_slot_name(raw_slot);
    if (!slot) fail("unknown slot '" + raw_slot + "'");
    frame.slots.push_back({*slot, trim(mr.substr(open + 1, close - open - 1))});
    i = close + 1;
  }
  return frame;
}

std::string mr_string(const SemanticFrame& frame) {
  std::string out;
  for (const auto& s : frame.slots) {
    if (!out.empty()) out += ", ";
    out += s.name + "[" + s.value + "]";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Delexicalization

std::vector<std::string> value_tokens(std::string_view value) {
  std::vector<std::string> out;
  std::istringstream ss{std::string(value)};
  std::string w;
  while (ss >> w) out.push_back(ascii_lower(w));
  return out;
}

namespace {

struct DelexSlot {
  std::string_view slot;
  std::string_view placeholder;
};
constexpr DelexSlot kDelexSlots[] = {{"name", kNamePlaceholder}, {"near", kNearPlaceholder}};

}  // namespace

SemanticFrame delexicalize_frame(const SemanticFrame& frame) {
  SemanticFrame out = frame;
  for (auto& s : out.slots) {
    for (const auto& d : kDelexSlots) {
      if (s.name != d.slot || s.value == d.placeholder) continue;
      out.delex_map[std::string(d.placeholder)] = s.value;
      s.value = std::string(d.placeholder);
    }
  }
  return out;
}

Delexicalized delexicalize(const SemanticFrame& frame, const TaggedSentence& sentence) {
  Delexicalized out;
  out.frame = delexicalize_frame(frame);
  struct Candidate {
    std::vector<std::string> words;
    std::string placeholder;
  };
  std::vector<Candidate> candidates;
  for (const auto& d : kDelexSlots) {
    auto it = out.frame.delex_map.find(std::string(d.placeholder));
    if (it == out.frame.delex_map.end()) continue;
    auto words = value_tokens(it->second);
    if (!words.empty()) candidates.push_back({std::move(words), std::string(d.placeholder)});
  }
  const auto& toks = sentence.tokens;
  std::size_t p = 0;
  while (p < toks.size()) {
    const Candidate* best = nullptr;
    for (const auto& c : candidates) {
      if (p + c.words.size() > toks.size()) continue;
      bool match = true;
      for (std::size_t k = 0; k < c.words.size() && match; ++k) match = toks[p + k].lemma == c.words[k];
      if (match && (!best || c.words.size() > best->words.size())) best = &c;
    }
    if (!best) {
      out.sentence.tokens.push_back(toks[p++]);
      continue;
    }
    DelexSpan span{out.sentence.tokens.size(), best->placeholder,
                   std::vector<Token>(toks.begin() + p, toks.begin() + p + best->words.size())};
    out.sentence.tokens.push_back({best->placeholder, std::string(kPlaceholderTag)});
    out.spans.push_back(std::move(span));
    p += best->words.size();
  }
  return out;
}

TaggedSentence relexicalize(const TaggedSentence& sentence, std::span<const DelexSpan> spans) {
  TaggedSentence out;
  std::size_t next = 0;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    if (next < spans.size() && spans[next].position == i) {
      const auto& orig = spans[next++].original;
      out.tokens.insert(out.tokens.end(), orig.begin(), orig.end());
    } else {
      out.tokens.push_back(sentence.tokens[i]);
    }
  }
  return out;
}

std::vector<std::string> relexicalize_tokens(std::span<const std::string> tokens, const SemanticFrame& frame) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = frame.delex_map.find(t);
    out.push_back(it == frame.delex_map.end() ? t : it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Orders

PosGroup group_of(std::string_view tag) {
  if (tag == "NOUN" || tag == "PROPN" || tag == "PRON" || tag == kPlaceholderTag) return PosGroup::nominal;
  if (tag == "VERB") return PosGroup::verb;
  if (tag == "ADJ" || tag == "ADV") return PosGroup::modifier;
  return PosGroup::other;
}

std::string_view group_label(PosGroup group) {
  switch (group) {
    case PosGroup::nominal: return "NOUN+PROPN+PRON";
    case PosGroup::verb: return "VERB";
    case PosGroup::modifier: return "ADJ+ADV";
    case PosGroup::other: return "others";
  }
  return "others";
}

GeneratingOrder GeneratingOrder::table_order(int index) {
  if (index < 1 || index > 6) throw ContractError("order index must be 1..6, got " + std::to_string(index));
  return GeneratingOrder(kTableOrders[index - 1]);
}

GeneratingOrder GeneratingOrder::from_groups(const std::array<PosGroup, 4>& groups, bool allow_custom) {
  std::array<bool, 4> seen{};
  for (auto g : groups) {
    if (seen[static_cast<int>(g)]) throw ContractError("generating order repeats a POS group");
    seen[static_cast<int>(g)] = true;
  }
  GeneratingOrder order(groups);
  if (!allow_custom && order.table_index() == 0)
    throw ContractError("order " + order.str() + " is not one of the six grid orders (custom orders must be enabled)");
  return order;
}

GeneratingOrder GeneratingOrder::parse(std::string_view text, bool allow_custom) {
  const auto t = trim(text);
  if (t.size() == 1 && t[0] >= '1' && t[0] <= '6') return table_order(t[0] - '0');
  std::array<PosGroup, 4> groups{};
  std::size_t n = 0;
  std::stringstream ss(t);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (n == 4) throw ContractError("order '" + t + "' has more than four groups");
    auto p = trim(part);
    std::set<std::string> tags;
    std::stringstream ps(p);
    std::string tag;
    while (std::getline(ps, tag, '+')) tags.insert(trim(tag));
    const auto lower = ascii_lower(p);
    if (lower == "others" || lower == "other") {
      groups[n++] = PosGroup::other;
      continue;
    }
    bool found = false;
    for (auto g : {PosGroup::nominal, PosGroup::verb, PosGroup::modifier}) {
      const auto& want = group_tags(g);
      if (std::set<std::string>(want.begin(), want.end()) == tags) {
        groups[n++] = g;
        found = true;
        break;
      }
    }
    if (!found) throw ContractError("order group '" + p + "' is not one of the four POS groups");
  }
  if (n != 4) throw ContractError("order '" + t + "' must list four groups");
  return from_groups(groups, allow_custom);
}

std::size_t GeneratingOrder::layer_of(std::string_view tag) const {
  const auto g = group_of(tag);
  for (std::size_t i = 0; i < 4; ++i)
    if (groups_[i] == g) return i;
  return 3;
}

std::vector<std::string> GeneratingOrder::tags(std::size_t layer) const { return group_tags(groups_.at(layer)); }

int GeneratingOrder::table_index() const {
  for (int i = 0; i < 6; ++i)
    if (kTableOrders[i] == groups_) return i + 1;
  return 0;
}

std::string GeneratingOrder::str() const {
  std::string out;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i) out += ",";
    out += group_label(groups_[i]);
  }
  return out;
}

std::string GeneratingOrder::pretty() const {
  std::string out;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i) out += " -> ";
    if (groups_[i] == PosGroup::other) {
      out += "(others)";
      continue;
    }
    out += "(";
    const auto& tags = group_tags(groups_[i]);
    for (std::size_t k = 0; k < tags.size(); ++k) out += (k ? ", '" : "'") + tags[k] + "'";
    out += ")";
  }
  return out;
}

LayerTokens build_layer_tokens(const TaggedSentence& sentence, const GeneratingOrder& order) {
  LayerTokens out;
  for (const auto& tok : sentence.tokens) {
    const auto first = order.layer_of(tok.pos);
    for (std::size_t i = first; i < kLayers; ++i) out[i].push_back(tok);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

namespace {
const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> r{"<pad>", "<bos>", "<eos>", "<unk>", std::string(kNamePlaceholder),
                                          std::string(kNearPlaceholder)};
  return r;
}
}  // namespace

Vocabulary::Vocabulary() : tokens_(reserved_tokens()) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  const auto& reserved = reserved_tokens();
  if (tokens.size() < reserved.size() || !std::equal(reserved.begin(), reserved.end(), tokens.begin()))
    throw ContractError("vocabulary must start with the reserved symbols");
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second)
      throw ContractError("duplicate vocabulary token '" + v.tokens_[i] + "'");
  }
  return v;
}

Vocabulary Vocabulary::build(std::span<const MrGroup> groups) {
  std::set<std::string> words;
  for (const auto& g : groups) {
    for (auto& t : frame_tokens(g.frame)) words.insert(std::move(t));
    for (const auto& ref : g.references)
      for (const auto& tok : ref.tokens) words.insert(tok.lemma);
  }
  auto tokens = reserved_tokens();
  for (const auto& r : reserved_tokens()) words.erase(r);
  tokens.insert(tokens.end(), words.begin(), words.end());
  return from_tokens(std::move(tokens));
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return from_tokens(std::move(tokens));
}

LayerTargetSet build_layer_targets(const TaggedSentence& sentence, const GeneratingOrder& order,
                                   const Vocabulary& vocab) {
  LayerTargetSet out;
  out.source = &sentence;
  auto layers = build_layer_tokens(sentence, order);
  for (std::size_t i = 0; i < kLayers; ++i)
    for (const auto& tok : layers[i]) out.layers[i].push_back(vocab.id(tok.lemma));
  return out;
}

std::array<double, kLayers> length_stats(std::span<const LayerTargetSet> corpus) {
  if (corpus.empty()) throw ContractError("length_stats: empty corpus");
  std::array<double, kLayers> totals{};
  for (const auto& t : corpus)
    for (std::size_t i = 0; i < kLayers; ++i) totals[i] += static_cast<double>(t.layers[i].size());
  for (auto& v : totals) v /= static_cast<double>(corpus.size());
  return totals;
}

std::vector<std::string> frame_tokens(const SemanticFrame& frame) {
  std::vector<std::string> out;
  for (const auto& name : slot_schema()) {
    for (const auto& s : frame.slots) {
      if (s.name != name) continue;
      out.push_back(s.name);
      if (frame.delex_map.count(s.value)) {
        out.push_back(s.value);
      } else {
        for (auto& w : value_tokens(s.value)) out.push_back(std::move(w));
      }
    }
  }
  return out;
}

EncodedFrame encode_frame(const SemanticFrame& frame, const Vocabulary& vocab) {
  EncodedFrame out;
  out.multi_hot.assign(vocab.size(), 0.0);
  for (const auto& t : frame_tokens(frame)) {
    const int id = vocab.id(t);
    out.ids.push_back(id);
    out.multi_hot[static_cast<std::size_t>(id)] = 1.0;
  }
  return out;
}

}  // namespace hnlg::corpus
