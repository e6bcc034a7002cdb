#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "tagfont/common/errors.hpp"
#include "tagfont/corpus/manifest.hpp"

namespace tagfont::corpus {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Surface forms a canonical tag may appear under in "collected" data. Every
// form normalizes back to the canonical tag through the shipped rule tables.
const std::map<std::string, std::vector<std::string>>& surface_forms() {
  static const std::map<std::string, std::vector<std::string>> forms = {
      {"bold", {"bold", "Bold", "BOLD"}},
      {"condensed", {"Condensed", "condensed", "condenced"}},
      {"decorative", {"Decorative", "decorative", "decorativ"}},
      {"display", {"Display", "displays"}},
      {"elegant", {"Elegant", "elegent"}},
      {"formal", {"formal", "Formal"}},
      {"grunge", {"grunge", "Grungy"}},
      {"heavy", {"Heavy", "heavy"}},
      {"italic", {"Italic", "italics", "Itallic"}},
      {"kid", {"kids", "Kid", "Kids"}},
      {"light", {"Light", "light"}},
      {"outline", {"Outline", "outlines", "outlined"}},
      {"round", {"round", "Rounded"}},
      {"sans-serif", {"Sans Serif", "sans serif", "Sans-Serif", "sansserif"}},
      {"script", {"Script", "scripts"}},
      {"serif", {"Serif", "serifs"}},
      {"shadow", {"Shadow", "shadows", "Shadowed"}},
      {"thin", {"thin", "Thin"}},
      {"wide", {"Wide", "wide"}},
  };
  return forms;
}

}  // namespace

std::map<std::string, double> family_params_map(const FontParams& p) {
  return {
      {"stroke-width", p.weight},
      {"slant-degrees", p.slant_degrees},
      {"serif-flag", p.serif ? 1.0 : 0.0},
      {"serif-length", p.serif_length},
      {"rounded-flag", p.rounded ? 1.0 : 0.0},
      {"outline-flag", p.outline ? 1.0 : 0.0},
      {"shadow-flag", p.shadow ? 1.0 : 0.0},
      {"shadow-offset", p.shadow_offset},
      {"width-ratio", p.width_ratio},
      {"rough-flag", p.rough ? 1.0 : 0.0},
      {"rough-amount", p.rough_amount},
      {"noise-seed", static_cast<double>(p.noise_seed)},
  };
}

FontParams family_params_from_map(const std::map<std::string, double>& m) {
  auto get = [&](const char* k) {
    auto it = m.find(k);
    if (it == m.end()) throw FormatError(std::string("family_params: missing '") + k + "'");
    return it->second;
  };
  FontParams p;
  p.weight = get("stroke-width");
  p.slant_degrees = get("slant-degrees");
  p.serif = get("serif-flag") != 0;
  p.serif_length = get("serif-length");
  p.rounded = get("rounded-flag") != 0;
  p.outline = get("outline-flag") != 0;
  p.shadow = get("shadow-flag") != 0;
  p.shadow_offset = get("shadow-offset");
  p.width_ratio = get("width-ratio");
  p.rough = get("rough-flag") != 0;
  p.rough_amount = get("rough-amount");
  p.noise_seed = static_cast<std::uint64_t>(get("noise-seed"));
  return p;
}

const std::vector<std::string>& Splits::of(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kVal: return val;
    case Split::kTest: return test;
  }
  return train;
}

StyleDistribution StyleDistribution::imbalanced() {
  StyleDistribution d;
  d.p_serif = 0.5;
  d.p_italic = 0.5;
  d.p_rounded = 0.3;
  d.p_outline = 0.05;
  d.p_shadow = 0.05;
  d.p_rough = 0.04;
  d.p_wide = 0.3;
  d.p_condensed = 0.08;
  return d;
}

StyleDistribution StyleDistribution::preset(const std::string& name) {
  if (name == "standard") return standard();
  if (name == "imbalanced") return imbalanced();
  throw ConfigError("unknown corpus preset '" + name + "' (expected standard|imbalanced)");
}

const FontRecord& DatasetManifest::font(const std::string& id) const {
  const FontRecord* f = find(id);
  if (!f) throw InvalidArgument("unknown font_id '" + id + "'");
  return *f;
}

const FontRecord* DatasetManifest::find(const std::string& id) const {
  if (index_.size() != fonts.size()) const_cast<DatasetManifest*>(this)->reindex();
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &fonts[it->second];
}

bool DatasetManifest::has_tag(const FontRecord& f, const std::string& tag) const {
  return std::binary_search(f.tags.begin(), f.tags.end(), tag);
}

void DatasetManifest::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < fonts.size(); ++i) {
    if (!index_.emplace(fonts[i].font_id, i).second) {
      throw FormatError("manifest: duplicate font_id '" + fonts[i].font_id + "'");
    }
  }
}

std::vector<std::string> derive_tags(const FontParams& p) {
  std::set<std::string> t;
  const bool bold = p.weight > kBoldThreshold;
  const bool thin = p.weight < kThinThreshold;
  const bool italic = std::abs(p.slant_degrees) > kItalicThreshold;
  const bool decorated = p.outline || p.shadow || p.rough;
  const bool wide = p.width_ratio > kWideThreshold;
  if (bold) t.insert({"bold", "heavy"});
  if (thin) t.insert({"thin", "light"});
  if (italic) t.insert("italic");
  t.insert(p.serif ? "serif" : "sans-serif");
  if (p.rounded) t.insert("round");
  if (p.outline) t.insert("outline");
  if (p.shadow) t.insert("shadow");
  if (p.rough) t.insert("grunge");
  if (wide) t.insert("wide");
  if (p.width_ratio < kCondensedThreshold) t.insert("condensed");
  if (decorated) t.insert("decorative");
  if (p.rounded && bold) t.insert("kid");
  if (p.serif && italic && !bold) t.insert("elegant");
  if (p.serif && !italic && !decorated && !p.rounded) t.insert("formal");
  if (italic && !p.serif && !bold) t.insert("script");
  if (bold && (wide || p.outline || p.shadow)) t.insert("display");
  return {t.begin(), t.end()};
}

std::optional<double> tag_strength(const FontParams& p, const std::string& tag) {
  if (tag == "bold" || tag == "heavy") return p.weight;
  if (tag == "thin" || tag == "light") return -p.weight;
  if (tag == "italic") return std::abs(p.slant_degrees);
  if (tag == "wide") return p.width_ratio;
  if (tag == "condensed") return -p.width_ratio;
  if (tag == "serif") return p.serif ? p.serif_length : 0.0;
  if (tag == "shadow") return p.shadow ? p.shadow_offset : 0.0;
  if (tag == "grunge") return p.rough ? p.rough_amount : 0.0;
  return std::nullopt;
}

FontParams sample_font_params(const StyleDistribution& dist, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  auto coin = [&](double p) { return u(rng) < p; };

  FontParams p;
  p.weight = std::pow(u(rng), dist.weight_exponent);
  if (coin(dist.p_italic)) {
    p.slant_degrees = uniform(7.0, 13.0);
  } else {
    p.slant_degrees = uniform(-2.0, 2.0);
  }
  p.serif = coin(dist.p_serif);
  p.serif_length = p.serif ? uniform(0.08, 0.18) : 0.0;
  p.rounded = coin(dist.p_rounded);
  p.outline = coin(dist.p_outline);
  // The outline ring needs room inside the stroke.
  if (p.outline) p.weight = 0.5 + 0.5 * p.weight;
  // Round caps are invisible on hairline strokes.
  if (p.rounded && !p.outline) p.weight = 0.3 + 0.7 * p.weight;
  p.shadow = coin(dist.p_shadow);
  p.shadow_offset = p.shadow ? uniform(0.02, 0.05) : 0.0;
  const double w = u(rng);
  if (w < dist.p_wide) {
    p.width_ratio = uniform(1.2, 1.35);
  } else if (w < dist.p_wide + dist.p_condensed) {
    p.width_ratio = uniform(0.7, 0.82);
  } else {
    p.width_ratio = uniform(0.92, 1.08);
  }
  p.rough = coin(dist.p_rough);
  p.rough_amount = p.rough ? uniform(0.008, 0.02) : 0.0;
  p.noise_seed = rng() >> 11;  // exactly representable as a double
  return p;
}

Splits split_ids(const std::vector<std::string>& ids, std::uint64_t seed) {
  std::vector<std::string> order = ids;
  std::mt19937_64 rng(mix_seed(seed, 0x5917));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<long>(order.size());
  const long n_train = std::lround(0.8 * static_cast<double>(n));
  const long n_val = std::lround(0.1 * static_cast<double>(n));
  Splits s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test.assign(order.begin() + n_train + n_val, order.end());
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

DatasetManifest synthesize_corpus(const CorpusOptions& options) {
  if (options.n_fonts < 10) {
    throw InvalidArgument("synthesize_corpus: n_fonts must be >= 10 to populate all splits");
  }
  DatasetManifest m;
  m.seed = options.seed;
  m.options = options;

  std::mt19937_64 surface_rng(mix_seed(options.seed, 0x7A65));
  std::vector<std::string> ids;
  for (int i = 0; i < options.n_fonts; ++i) {
    FontRecord f;
    char buf[16];
    std::snprintf(buf, sizeof buf, "f%04d", i);
    f.font_id = buf;
    f.params = sample_font_params(options.styles, mix_seed(options.seed, static_cast<std::uint64_t>(i)));
    for (const auto& tag : derive_tags(f.params)) {
      const auto& forms = surface_forms().at(tag);
      std::uniform_int_distribution<std::size_t> pick(0, forms.size() - 1);
      f.raw_tags.push_back(forms[pick(surface_rng)]);
      if (std::uniform_real_distribution<double>(0, 1)(surface_rng) < 0.3) {
        f.raw_tags.push_back(forms[pick(surface_rng)]);
      }
    }
    std::shuffle(f.raw_tags.begin(), f.raw_tags.end(), surface_rng);
    ids.push_back(f.font_id);
    m.fonts.push_back(std::move(f));
  }

  Splits splits = split_ids(ids, options.seed);
  const std::set<std::string> train(splits.train.begin(), splits.train.end());
  std::vector<std::vector<std::string>> raw;
  std::vector<bool> counts;
  for (const auto& f : m.fonts) {
    raw.push_back(f.raw_tags);
    counts.push_back(train.count(f.font_id) != 0);
  }
  NormalizedTags norm = normalize_tags(raw, options.min_count, counts);
  m.vocabulary = norm.vocabulary;

  std::set<std::string> dropped;
  for (std::size_t i : norm.dropped) dropped.insert(m.fonts[i].font_id);
  std::vector<FontRecord> kept;
  for (std::size_t i = 0; i < m.fonts.size(); ++i) {
    if (dropped.count(m.fonts[i].font_id)) continue;
    m.fonts[i].tags = norm.font_tags[i];
    kept.push_back(std::move(m.fonts[i]));
  }
  m.fonts = std::move(kept);
  auto prune = [&](std::vector<std::string>& v) {
    std::erase_if(v, [&](const std::string& id) { return dropped.count(id) != 0; });
  };
  prune(splits.train);
  prune(splits.val);
  prune(splits.test);
  m.splits = std::move(splits);
  m.dropped_fonts.assign(dropped.begin(), dropped.end());
  m.reindex();
  return m;
}

}  // namespace tagfont::corpus
