// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hnlg::corpus {

inline constexpr std::string_view kNamePlaceholder = "RESTAURANT_NAME";
inline constexpr std::string_view kNearPlaceholder = "NEAR_NAME";
/// POS tag carried by placeholder tokens; grouped with PROPN.
inline constexpr std::string_view kPlaceholderTag = "DELEX";

/// The 17 Universal POS tags.
const std::vector<std::string>& upos_tags();
bool is_known_tag(std::string_view tag);

/// E2E slots in canonical order: name, eatType, food, priceRange,
/// customerRating, area, familyFriendly, near.
const std::vector<std::string>& slot_schema();
/// Maps raw slot spellings ("customer rating", "eattype") to schema names.
/// Returns nullopt for slots outside the schema.
std::optional<std::string> canonical_slot_name(std::string_view raw);

struct Slot {
  std::string name;
  std::string value;
  bool operator==(const Slot&) const = default;
};

struct SemanticFrame {
  std::vector<Slot> slots;
  /// Placeholder symbol -> original value, for delexicalized slots.
  std::map<std::string, std::string> delex_map;

  const std::string* value(std::string_view slot) const;
  bool operator==(const SemanticFrame&) const = default;
};

struct Token {
  std::string lemma;
  std::string pos;
  bool operator==(const Token&) const = default;
};

struct TaggedSentence {
  std::vector<Token> tokens;

  std::vector<std::string> lemmas() const;
  bool operator==(const TaggedSentence&) const = default;
};

/// All references that share one raw meaning representation.
struct MrGroup {
  std::string mr_key;
  SemanticFrame frame;
  std::vector<TaggedSentence> references;
};

/// Reads the tagged interchange format: one JSON object per line with
/// `mr` (list of [slot, value]) and `ref` (list of [lemma, upos]). Lines whose
/// object carries a `_meta` key and blank lines are skipped. PUNCT tokens are
/// dropped and lemmas lowercased. Groups keep first-appearance order.
std::vector<MrGroup> parse_tagged_corpus(std::istream& in);
std::vector<MrGroup> load_tagged_corpus(const std::filesystem::path& path);

/// Parses "name[The Mill], food[French]" into a frame.
SemanticFrame parse_mr(std::string_view mr);
/// Inverse of parse_mr for the frame's slots, in stored order.
std::string mr_string(const SemanticFrame& frame);

// ---------------------------------------------------------------------------
// Delexicalization

/// Lowercased, whitespace-split value as it appears among the lemmas.
std::vector<std::string> value_tokens(std::string_view value);

struct DelexSpan {
  std::size_t position;  // index of the placeholder in the delexicalized sentence
  std::string placeholder;
  std::vector<Token> original;
};

struct Delexicalized {
  SemanticFrame frame;
  TaggedSentence sentence;
  std::vector<DelexSpan> spans;
};

/// Replaces the `name` and `near` values by placeholders in the frame, and
/// their occurrences in the sentence by single placeholder tokens. Scans left
/// to right; at each position the longest matching value wins.
Delexicalized delexicalize(const SemanticFrame& frame, const TaggedSentence& sentence);
SemanticFrame delexicalize_frame(const SemanticFrame& frame);
/// Restores the exact original token spans.
TaggedSentence relexicalize(const TaggedSentence& sentence, std::span<const DelexSpan> spans);
/// Replaces placeholder tokens with the frame's original value strings.
std::vector<std::string> relexicalize_tokens(std::span<const std::string> tokens, const SemanticFrame& frame);

// ---------------------------------------------------------------------------
// Generating orders and layer targets

/// The four POS groups: {NOUN, PROPN, PRON}, {VERB}, {ADJ, ADV}, {others}.
enum class PosGroup { nominal = 0, verb = 1, modifier = 2, other = 3 };

PosGroup group_of(std::string_view tag);
std::string_view group_label(PosGroup group);

/// Ordered partition of the tag set into the four POS groups.
class GeneratingOrder {
 public:
  /// Default is grid order 1: nominal, verb, modifier, other.
  GeneratingOrder() : GeneratingOrder(table_order(1)) {}

  /// One of the six orders of the experiment grid, 1-based.
  static GeneratingOrder table_order(int index);
  /// Any permutation of the four groups; non-grid orders need allow_custom.
  static GeneratingOrder from_groups(const std::array<PosGroup, 4>& groups, bool allow_custom = false);
  /// Accepts "1".."6" or a group list such as "VERB,ADJ+ADV,NOUN+PROPN+PRON,others".
  static GeneratingOrder parse(std::string_view text, bool allow_custom = false);

  const std::array<PosGroup, 4>& groups() const { return groups_; }
  /// 0-based decoder layer that first emits tokens with this tag.
  std::size_t layer_of(std::string_view tag) const;
  /// Tags of group `layer`; the "others" group lists every remaining UPOS tag.
  std::vector<std::string> tags(std::size_t layer) const;
  /// 1..6 for grid orders, 0 for custom ones.
  int table_index() const;
  /// Round-trips through parse().
  std::string str() const;
  /// Display form, e.g. ('NOUN', 'PROPN', 'PRON') -> ('VERB') -> ...
  std::string pretty() const;

  bool operator==(const GeneratingOrder&) const = default;

 private:
  explicit GeneratingOrder(const std::array<PosGroup, 4>& groups) : groups_(groups) {}
  std::array<PosGroup, 4> groups_;
};

inline constexpr std::size_t kLayers = 4;

/// Per-layer token subsequences: layer i keeps the tokens whose group sits at
/// position <= i in the order.
using LayerTokens = std::array<std::vector<Token>, kLayers>;
LayerTokens build_layer_tokens(const TaggedSentence& sentence, const GeneratingOrder& order);

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNamePh = 4;
  static constexpr int kNearPh = 5;

  Vocabulary();
  /// Reserved symbols first, then every other token of the given groups'
  /// frames and references in byte order.
  static Vocabulary build(std::span<const MrGroup> groups);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct LayerTargetSet {
  std::array<std::vector<int>, kLayers> layers;
  const TaggedSentence* source = nullptr;
};

LayerTargetSet build_layer_targets(const TaggedSentence& sentence, const GeneratingOrder& order,
                                   const Vocabulary& vocab);

/// Mean per-layer lengths. Throws ContractError on an empty corpus.
std::array<double, kLayers> length_stats(std::span<const LayerTargetSet> corpus);

struct EncodedFrame {
  std::vector<int> ids;
  std::vector<double> multi_hot;
};

/// Slot names and value tokens flattened in schema order, plus a multi-hot
/// vector over the vocabulary. Unknown tokens map to UNK.
EncodedFrame encode_frame(const SemanticFrame& frame, const Vocabulary& vocab);
/// The token strings behind encode_frame.
std::vector<std::string> frame_tokens(const SemanticFrame& frame);

}  // namespace hnlg::corpus
