#include "tagfont/corpus/tags.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "tagfont/common/errors.hpp"
#include "tagfont/common/hash.hpp"

#ifndef TAGFONT_DATA_DIR
#define TAGFONT_DATA_DIR "data"
#endif

namespace tagfont::corpus {

namespace {

std::vector<std::vector<std::string>> read_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read rule table " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (line.back() == '\t') cols.emplace_back();
    rows.push_back(std::move(cols));
  }
  return rows;
}

std::string lower_ascii(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '-' || c == '_') {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

}  // namespace

TagRules TagRules::load(const std::string& data_dir) {
  TagRules rules;
  for (const auto& row : read_tsv(data_dir + "/misspellings.tsv")) {
    if (row.size() < 2) throw ConfigError("misspellings.tsv: expected 2 columns");
    rules.misspellings[lower_ascii(row[0])] = lower_ascii(row[1]);
  }
  for (const auto& row : read_tsv(data_dir + "/lemma_exceptions.tsv")) {
    if (row.size() < 2) throw ConfigError("lemma_exceptions.tsv: expected 2 columns");
    rules.lemma_exceptions[lower_ascii(row[0])] = lower_ascii(row[1]);
  }
  for (const auto& row : read_tsv(data_dir + "/suffix_rules.tsv")) {
    if (row.size() < 3) throw ConfigError("suffix_rules.tsv: expected >= 3 columns");
    SuffixRule r;
    r.suffix = row[0];
    r.replacement = row[1];
    r.min_stem = static_cast<std::size_t>(std::stoul(row[2]));
    if (row.size() > 3) {
      std::stringstream ss(row[3]);
      std::string e;
      while (std::getline(ss, e, ','))
        if (!e.empty()) r.protected_endings.push_back(e);
    }
    rules.suffix_rules.push_back(std::move(r));
  }
  return rules;
}

const TagRules& TagRules::builtin() {
  static const TagRules rules = load(TAGFONT_DATA_DIR);
  return rules;
}

std::string TagRules::correct_spelling(const std::string& lowered) const {
  auto it = misspellings.find(lowered);
  return it == misspellings.end() ? lowered : it->second;
}

std::string TagRules::lemmatize_word(const std::string& word) const {
  if (auto it = lemma_exceptions.find(word); it != lemma_exceptions.end()) return it->second;
  for (const auto& rule : suffix_rules) {
    if (!ends_with(word, rule.suffix)) continue;
    if (word.size() - rule.suffix.size() < rule.min_stem) continue;
    const bool guarded = std::any_of(
        rule.protected_endings.begin(), rule.protected_endings.end(),
        [&](const std::string& e) { return ends_with(word, e); });
    if (guarded) continue;
    return word.substr(0, word.size() - rule.suffix.size()) + rule.replacement;
  }
  return word;
}

std::string TagRules::normalize(const std::string& raw) const {
  auto once = [this](const std::string& in) {
    const std::string whole = correct_spelling(lower_ascii(in));
    std::string out;
    for (const auto& w : split_words(whole)) {
      if (!out.empty()) out.push_back('-');
      out += lemmatize_word(correct_spelling(w));
    }
    return out;
  };
  // A lemma or correction may itself be a table key (or contain a space), so
  // iterate to a fixed point; this makes normalization idempotent.
  std::string cur = once(raw);
  for (int i = 0; i < 8; ++i) {
    std::string next = once(cur);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

TagVocabulary::TagVocabulary(std::vector<std::string> tags, std::vector<int> frequency)
    : tags_(std::move(tags)), frequency_(std::move(frequency)) {
  if (frequency_.size() != tags_.size()) {
    throw InvalidArgument("vocabulary: tags/frequency length mismatch");
  }
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    if (!index_.emplace(tags_[i], i).second) {
      throw InvalidArgument("vocabulary: duplicate tag '" + tags_[i] + "'");
    }
  }
}

std::optional<std::size_t> TagVocabulary::index_of(const std::string& tag) const {
  auto it = index_.find(tag);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> TagVocabulary::by_frequency() const {
  std::vector<std::size_t> idx(tags_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (frequency_[a] != frequency_[b]) return frequency_[a] > frequency_[b];
    return tags_[a] < tags_[b];
  });
  return idx;
}

std::string TagVocabulary::hash() const {
  std::string joined;
  for (const auto& t : tags_) {
    joined += t;
    joined.push_back('\n');
  }
  return sha1_hex(joined);
}

TagLabelVector make_label_vector(const std::vector<std::string>& tags,
                                 const TagVocabulary& vocab) {
  TagLabelVector v(vocab.size(), 0);
  for (const auto& t : tags) {
    auto idx = vocab.index_of(t);
    if (!idx) throw InvalidArgument("tag '" + t + "' not in vocabulary");
    v[*idx] = 1;
  }
  return v;
}

NormalizedTags normalize_tags(const std::vector<std::vector<std::string>>& raw,
                              int min_count, const std::vector<bool>& counts,
                              const TagRules& rules) {
  if (raw.empty()) throw InvalidArgument("normalize_tags: no fonts given");
  if (!counts.empty() && counts.size() != raw.size()) {
    throw InvalidArgument("normalize_tags: counts mask length mismatch");
  }

  std::vector<std::set<std::string>> merged(raw.size());
  std::map<std::string, int> freq;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (const auto& r : raw[i]) {
      std::string t = rules.normalize(r);
      if (!t.empty()) merged[i].insert(std::move(t));
    }
    const bool counted = counts.empty() || counts[i];
    for (const auto& t : merged[i]) {
      auto& f = freq[t];
      if (counted) ++f;
    }
  }

  std::vector<std::string> kept;
  std::vector<int> kept_freq;
  for (const auto& [t, f] : freq) {
    if (f >= min_count && f > 0) {
      kept.push_back(t);
      kept_freq.push_back(f);
    }
  }
  if (kept.empty()) throw ConfigError("normalize_tags: empty vocabulary after filtering");

  NormalizedTags out;
  out.vocabulary = TagVocabulary(std::move(kept), std::move(kept_freq));
  out.font_tags.resize(raw.size());
  out.labels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (const auto& t : merged[i])
      if (out.vocabulary.contains(t)) out.font_tags[i].push_back(t);
    // std::set iteration is lexicographic, matching vocabulary order.
    if (out.font_tags[i].empty()) {
      out.dropped.push_back(i);
    } else {
      out.labels[i] = make_label_vector(out.font_tags[i], out.vocabulary);
    }
  }
  return out;
}

}  // namespace tagfont::corpus
