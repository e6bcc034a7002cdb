#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace tagfont::corpus {

// Rule tables driving tag normalization. Loaded from plain-text TSV files in
// the data directory:
//   misspellings.tsv      wrong<TAB>right
//   lemma_exceptions.tsv  word<TAB>lemma
//   suffix_rules.tsv      suffix<TAB>replacement<TAB>min_stem<TAB>protected,endings
class TagRules {
 public:
  struct SuffixRule {
    std::string suffix;
    std::string replacement;
    std::size_t min_stem = 1;
    std::vector<std::string> protected_endings;
  };

  static TagRules load(const std::string& data_dir);
  // Tables shipped with the library (TAGFONT_DATA_DIR at build time).
  static const TagRules& builtin();

  std::string correct_spelling(const std::string& lowered) const;
  std::string lemmatize_word(const std::string& word) const;
  // lowercase -> spelling -> per-word lemma -> hyphen-join.
  std::string normalize(const std::string& raw) const;

  std::map<std::string, std::string> misspellings;
  std::map<std::string, std::string> lemma_exceptions;
  std::vector<SuffixRule> suffix_rules;
};

// Ordered tag space; index of a tag is its position in `tags`.
class TagVocabulary {
 public:
  TagVocabulary() = default;
  TagVocabulary(std::vector<std::string> tags, std::vector<int> frequency);

  std::size_t size() const { return tags_.size(); }
  const std::vector<std::string>& tags() const { return tags_; }
  const std::vector<int>& frequency() const { return frequency_; }
  const std::string& tag(std::size_t i) const { return tags_.at(i); }
  int frequency_of(std::size_t i) const { return frequency_.at(i); }
  std::optional<std::size_t> index_of(const std::string& tag) const;
  bool contains(const std::string& tag) const { return index_of(tag).has_value(); }

  // Indices sorted by descending frequency, then tag string.
  std::vector<std::size_t> by_frequency() const;

  // Content hash over the ordered tag list; used to bind checkpoints.
  std::string hash() const;

 private:
  std::vector<std::string> tags_;
  std::vector<int> frequency_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Binary per-font label over a vocabulary.
using TagLabelVector = std::vector<std::uint8_t>;

TagLabelVector make_label_vector(const std::vector<std::string>& tags,
                                 const TagVocabulary& vocab);

struct NormalizedTags {
  TagVocabulary vocabulary;
  // Per input font: normalized tags that survived, in vocabulary order.
  // Empty for dropped fonts.
  std::vector<std::vector<std::string>> font_tags;
  std::vector<TagLabelVector> labels;
  // Input positions of fonts left with no tags.
  std::vector<std::size_t> dropped;
};

// Normalizes raw per-font tag lists and builds the vocabulary. Frequencies
// count each font once per tag and only over fonts where counts[i] is true
// (the training split); empty `counts` means every font counts. Tags with
// frequency < min_count are removed.
NormalizedTags normalize_tags(const std::vector<std::vector<std::string>>& raw,
                              int min_count,
                              const std::vector<bool>& counts = {},
                              const TagRules& rules = TagRules::builtin());

}  // namespace tagfont::corpus
