#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tagfont/corpus/glyph.hpp"
#include "tagfont/corpus/tags.hpp"

namespace tagfont::corpus {

struct FontRecord {
  std::string font_id;
  FontParams params;
  std::vector<std::string> raw_tags;  // as "collected", before normalization
  std::vector<std::string> tags;      // normalized, vocabulary order
};

// Named view of FontParams for serialization and reporting.
std::map<std::string, double> family_params_map(const FontParams& p);
FontParams family_params_from_map(const std::map<std::string, double>& m);

enum class Split { kTrain, kVal, kTest };

struct Splits {
  std::vector<std::string> train, val, test;
  const std::vector<std::string>& of(Split s) const;
};

// Sampling probabilities of the style generator. The "imbalanced" preset makes
// some tags much rarer than others.
struct StyleDistribution {
  double p_serif = 0.45;
  double p_italic = 0.35;
  double p_rounded = 0.25;
  double p_outline = 0.15;
  double p_shadow = 0.15;
  double p_rough = 0.15;
  double p_wide = 0.2;
  double p_condensed = 0.2;
  double weight_exponent = 1.3;  // weight ~ U(0,1)^exponent

  static StyleDistribution standard() { return {}; }
  static StyleDistribution imbalanced();
  static StyleDistribution preset(const std::string& name);
};

struct CorpusOptions {
  int n_fonts = 100;
  std::uint64_t seed = 7;
  int min_count = 10;
  StyleDistribution styles;
  std::string preset = "standard";
};

struct DatasetManifest {
  std::vector<FontRecord> fonts;
  Splits splits;
  TagVocabulary vocabulary;
  std::uint64_t seed = 0;
  CorpusOptions options;
  std::vector<std::string> dropped_fonts;

  const FontRecord& font(const std::string& id) const;
  const FontRecord* find(const std::string& id) const;
  TagLabelVector labels(const FontRecord& f) const { return make_label_vector(f.tags, vocabulary); }
  bool has_tag(const FontRecord& f, const std::string& tag) const;

  // Rebuilds the id -> position index (call after mutating `fonts`).
  void reindex();

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Parameter -> tag rule table.
inline constexpr double kBoldThreshold = 0.42;
inline constexpr double kThinThreshold = 0.15;
inline constexpr double kItalicThreshold = 4.0;  // |slant| degrees
inline constexpr double kWideThreshold = 1.15;
inline constexpr double kCondensedThreshold = 0.87;

// Canonical (normalized) tags implied by the style parameters, sorted.
std::vector<std::string> derive_tags(const FontParams& p);

// How strongly a font's generating parameters express a tag; nullopt for tags
// that have no continuous parameter behind them.
std::optional<double> tag_strength(const FontParams& p, const std::string& tag);

FontParams sample_font_params(const StyleDistribution& dist, std::uint64_t seed);

// Partitions ids 0.8/0.1/0.1 after a seeded shuffle.
Splits split_ids(const std::vector<std::string>& ids, std::uint64_t seed);

DatasetManifest synthesize_corpus(const CorpusOptions& options);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);
void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Thread-safe memoizing renderer over a manifest. Returned references stay
// valid for the lifetime of the store.
class GlyphStore {
 public:
  GlyphStore(const DatasetManifest& manifest, int image_size);

  const GlyphImage& glyph(const std::string& font_id, char c);
  const GlyphImage& glyph(const std::string& font_id, int glyph_idx) {
    return glyph(font_id, kGlyphSet[static_cast<std::size_t>(glyph_idx)]);
  }
  // Glyph of the fixed standard font.
  const GlyphImage& standard(char c);
  int image_size() const { return size_; }
  const DatasetManifest& manifest() const { return manifest_; }

 private:
  const DatasetManifest& manifest_;
  int size_;
  std::mutex mu_;
  std::map<std::pair<std::string, char>, std::unique_ptr<GlyphImage>> cache_;
};

}  // namespace tagfont::corpus
