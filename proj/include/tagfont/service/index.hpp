#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagfont/attention/attention.hpp"
#include "tagfont/retrieval/retrieval.hpp"

namespace tagfont::service {

using nn::Scalar;

enum class Variant { kBasic, kFull };
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);  // throws InvalidArgument

// Per-glyph tag probabilities of every manifest font under both model
// variants, bound to the vocabulary and the model that produced them.
struct FontIndex {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  corpus::TagVocabulary vocabulary;
  std::string vocab_hash;
  std::string model_version;
  recognizer::GlyphBank basic;  // stage-1 recognizer
  recognizer::GlyphBank full;   // attended stage-3 recognizer

  const std::vector<std::string>& font_ids() const { return basic.font_ids; }
  std::size_t n_fonts() const { return basic.font_ids.size(); }
  const recognizer::GlyphBank& bank(Variant v) const { return v == Variant::kBasic ? basic : full; }
  // 52-glyph mean of one font.
  std::vector<Scalar> font_probabilities(Variant v, const std::string& font_id) const;

  std::string serialize() const;
  static FontIndex deserialize(const std::string& bytes);
  void save(const std::string& path) const;
  static FontIndex load(const std::string& path);

  // Throws FormatError when the index was built for another vocabulary or model.
  void check_compatible(const corpus::TagVocabulary& vocab, const std::string& model_version) const;
};

// Covers every font of the manifest, in manifest order.
FontIndex build_index(const corpus::DatasetManifest& m, corpus::GlyphStore& store,
                      recognizer::TagRecognizer& basic, recognizer::TagRecognizer& full,
                      recognizer::FontClassifier& font_model, attention::AttentionModule& module,
                      const std::string& model_version);

struct TagEntry {
  std::string tag;
  int frequency = 0;
};

// Descending frequency, then tag.
std::vector<TagEntry> list_tags(const FontIndex& index);

struct SearchRequest {
  std::vector<std::string> tags;  // raw; normalized before lookup
  int k = 10;
  Variant variant = Variant::kFull;
};

struct SearchHit {
  std::string font_id;
  double score = 0;
};

struct SearchResponse {
  std::vector<std::string> query;  // normalized, sorted
  Variant variant = Variant::kFull;
  std::vector<SearchHit> results;
};

// Read-only; safe to call concurrently. Throws UnknownTagError for tags
// outside the vocabulary and InvalidArgument for k <= 0 or an empty query.
SearchResponse search(const SearchRequest& request, const FontIndex& index,
                      const retrieval::AffinityHead& head);

}  // namespace tagfont::service
