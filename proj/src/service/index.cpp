#include "tagfont/service/index.hpp"

#include <algorithm>

#include "json.hpp"
#include "tagfont/common/errors.hpp"
#include "tagfont/nn/checkpoint.hpp"

namespace tagfont::service {

using nlohmann::json;

std::string to_string(Variant v) { return v == Variant::kBasic ? "basic" : "full"; }

Variant variant_from_string(const std::string& s) {
  if (s == "basic") return Variant::kBasic;
  if (s == "full") return Variant::kFull;
  throw InvalidArgument("unknown variant '" + s + "' (expected basic or full)");
}

std::vector<Scalar> FontIndex::font_probabilities(Variant v, const std::string& font_id) const {
  const auto& b = bank(v);
  const int f = b.font_pos(font_id);
  std::vector<std::vector<Scalar>> rows;
  for (int g = 0; g < b.n_glyphs(); ++g) {
    auto r = b.row(f, g);
    rows.emplace_back(r.begin(), r.end());
  }
  return recognizer::mean_probabilities(rows);
}

namespace {

nn::Checkpoint pack(const FontIndex& ix) {
  nn::Checkpoint c;
  c.set_text("index.format", std::to_string(ix.format_version));
  c.set_text("index.vocab_hash", ix.vocab_hash);
  c.set_text("index.model_version", ix.model_version);
  c.set_text("index.tags", json(ix.vocabulary.tags()).dump());
  c.set_text("index.frequency", json(ix.vocabulary.frequency()).dump());
  c.set_text("index.fonts", json(ix.basic.font_ids).dump());
  c.set_text("index.glyphs", ix.basic.glyphs);
  c.set_tensor("index.basic", ix.basic.values);
  c.set_tensor("index.full", ix.full.values);
  return c;
}

FontIndex unpack(const nn::Checkpoint& c) {
  if (!c.has_text("index.format")) throw FormatError("not a font index");
  FontIndex ix;
  ix.format_version = static_cast<std::uint32_t>(std::stoul(c.text("index.format")));
  if (ix.format_version != FontIndex::kFormatVersion) {
    throw FormatError("font index format " + std::to_string(ix.format_version) + ", this build reads " +
                      std::to_string(FontIndex::kFormatVersion) + "; rerun build-index");
  }
  ix.vocabulary = corpus::TagVocabulary(json::parse(c.text("index.tags")).get<std::vector<std::string>>(),
                                        json::parse(c.text("index.frequency")).get<std::vector<int>>());
  ix.vocab_hash = c.text("index.vocab_hash");
  if (ix.vocab_hash != ix.vocabulary.hash()) throw FormatError("font index: stored vocabulary hash is corrupt");
  ix.model_version = c.text("index.model_version");
  const auto fonts = json::parse(c.text("index.fonts")).get<std::vector<std::string>>();
  const std::string glyphs = c.text("index.glyphs");
  ix.basic = {fonts, glyphs, c.tensor("index.basic")};
  ix.full = {fonts, glyphs, c.tensor("index.full")};
  const int rows = static_cast<int>(fonts.size() * glyphs.size());
  const int n = static_cast<int>(ix.vocabulary.size());
  for (const auto* b : {&ix.basic, &ix.full}) {
    if (b->values.rank() != 2 || b->values.dim(0) != rows || b->values.dim(1) != n) {
      throw FormatError("font index: probability table shape does not match fonts x glyphs x tags");
    }
  }
  return ix;
}

}  // namespace

std::string FontIndex::serialize() const { return pack(*this).serialize(); }
FontIndex FontIndex::deserialize(const std::string& bytes) { return unpack(nn::Checkpoint::deserialize(bytes)); }
void FontIndex::save(const std::string& path) const { pack(*this).save(path); }
FontIndex FontIndex::load(const std::string& path) { return unpack(nn::Checkpoint::load(path)); }

void FontIndex::check_compatible(const corpus::TagVocabulary& vocab, const std::string& model) const {
  if (vocab.hash() != vocab_hash) {
    throw FormatError("font index was built for vocabulary " + vocab_hash + ", loaded model uses " +
                      vocab.hash() + "; rerun build-index");
  }
  if (model != model_version) {
    throw FormatError("font index was built from model " + model_version + ", found " + model +
                      "; rerun build-index");
  }
}

FontIndex build_index(const corpus::DatasetManifest& m, corpus::GlyphStore& store,
                      recognizer::TagRecognizer& basic, recognizer::TagRecognizer& full,
                      recognizer::FontClassifier& font_model, attention::AttentionModule& module,
                      const std::string& model_version) {
  const std::string vh = m.vocabulary.hash();
  if (basic.vocab_hash() != vh || full.vocab_hash() != vh) {
    throw FormatError("build_index: checkpoint vocabulary does not match the manifest");
  }
  std::vector<std::string> ids;
  for (const auto& f : m.fonts) ids.push_back(f.font_id);
  FontIndex ix;
  ix.vocabulary = m.vocabulary;
  ix.vocab_hash = vh;
  ix.model_version = model_version;
  ix.basic = recognizer::compute_tag_probabilities(basic, store, ids);
  ix.full = attention::compute_attended_probabilities(full, font_model, module, store, ids);
  return ix;
}

std::vector<TagEntry> list_tags(const FontIndex& index) {
  std::vector<TagEntry> out;
  for (auto i : index.vocabulary.by_frequency()) {
    out.push_back({index.vocabulary.tag(i), index.vocabulary.frequency_of(i)});
  }
  return out;
}

SearchResponse search(const SearchRequest& request, const FontIndex& index,
                      const retrieval::AffinityHead& head) {
  if (request.k <= 0) throw InvalidArgument("k must be positive, got " + std::to_string(request.k));
  if (index.n_fonts() == 0) throw InvalidArgument("font index is empty");
  std::vector<std::string> normalized;
  for (const auto& t : request.tags) normalized.push_back(corpus::TagRules::builtin().normalize(t));
  const auto q = retrieval::encode_query(normalized, index.vocabulary);
  const auto& bank = index.bank(request.variant);
  const auto scores = request.variant == Variant::kFull ? retrieval::score_fonts(bank, q, head)
                                                        : retrieval::product_scores(bank, q);
  const auto ranked = retrieval::rank(bank.font_ids, scores);
  SearchResponse r{q.tags, request.variant, {}};
  const std::size_t n = std::min(ranked.size(), static_cast<std::size_t>(request.k));
  for (std::size_t i = 0; i < n; ++i) r.results.push_back({ranked[i].font_id, ranked[i].score});
  return r;
}

}  // namespace tagfont::service
