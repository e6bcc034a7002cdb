#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tagfont/common/errors.hpp"
#include "tagfont/corpus/manifest.hpp"

namespace tagfont::corpus {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "tagfont-manifest";
constexpr int kFormatVersion = 1;

json styles_to_json(const StyleDistribution& s) {
  return {{"p_serif", s.p_serif},       {"p_italic", s.p_italic},
          {"p_rounded", s.p_rounded},   {"p_outline", s.p_outline},
          {"p_shadow", s.p_shadow},     {"p_rough", s.p_rough},
          {"p_wide", s.p_wide},         {"p_condensed", s.p_condensed},
          {"weight_exponent", s.weight_exponent}};
}

StyleDistribution styles_from_json(const json& j) {
  StyleDistribution s;
  s.p_serif = j.at("p_serif");
  s.p_italic = j.at("p_italic");
  s.p_rounded = j.at("p_rounded");
  s.p_outline = j.at("p_outline");
  s.p_shadow = j.at("p_shadow");
  s.p_rough = j.at("p_rough");
  s.p_wide = j.at("p_wide");
  s.p_condensed = j.at("p_condensed");
  s.weight_exponent = j.at("weight_exponent");
  return s;
}
}  // namespace

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["format"] = kFormat;
  j["version"] = kFormatVersion;
  j["seed"] = m.seed;
  j["options"] = {{"n_fonts", m.options.n_fonts},
                  {"seed", m.options.seed},
                  {"min_count", m.options.min_count},
                  {"preset", m.options.preset},
                  {"styles", styles_to_json(m.options.styles)}};
  json fonts = json::array();
  for (const auto& f : m.fonts) {
    json params = json::object();
    for (const auto& [k, v] : family_params_map(f.params)) params[k] = v;
    fonts.push_back({{"font_id", f.font_id},
                     {"family_params", params},
                     {"raw_tags", f.raw_tags},
                     {"tags", f.tags}});
  }
  j["fonts"] = fonts;
  j["splits"] = {{"train", m.splits.train}, {"val", m.splits.val}, {"test", m.splits.test}};
  j["vocabulary"] = {{"tags", m.vocabulary.tags()}, {"frequency", m.vocabulary.frequency()}};
  j["dropped_fonts"] = m.dropped_fonts;
  return j.dump(1);
}

DatasetManifest manifest_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: invalid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != kFormat) throw FormatError("manifest: wrong format tag");
    if (j.at("version") != kFormatVersion) throw FormatError("manifest: unsupported version");
    DatasetManifest m;
    m.seed = j.at("seed");
    const auto& o = j.at("options");
    m.options.n_fonts = o.at("n_fonts");
    m.options.seed = o.at("seed");
    m.options.min_count = o.at("min_count");
    m.options.preset = o.at("preset");
    m.options.styles = styles_from_json(o.at("styles"));
    for (const auto& jf : j.at("fonts")) {
      FontRecord f;
      f.font_id = jf.at("font_id");
      f.params = family_params_from_map(jf.at("family_params").get<std::map<std::string, double>>());
      f.raw_tags = jf.at("raw_tags").get<std::vector<std::string>>();
      f.tags = jf.at("tags").get<std::vector<std::string>>();
      m.fonts.push_back(std::move(f));
    }
    m.splits.train = j.at("splits").at("train").get<std::vector<std::string>>();
    m.splits.val = j.at("splits").at("val").get<std::vector<std::string>>();
    m.splits.test = j.at("splits").at("test").get<std::vector<std::string>>();
    m.vocabulary = TagVocabulary(j.at("vocabulary").at("tags").get<std::vector<std::string>>(),
                                 j.at("vocabulary").at("frequency").get<std::vector<int>>());
    m.dropped_fonts = j.at("dropped_fonts").get<std::vector<std::string>>();
    m.reindex();
    for (const auto& f : m.fonts) {
      if (f.tags.empty()) throw FormatError("manifest: font '" + f.font_id + "' has no tags");
      for (const auto& t : f.tags)
        if (!m.vocabulary.contains(t))
          throw FormatError("manifest: font '" + f.font_id + "' uses unknown tag '" + t + "'");
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write manifest " + path);
  out << manifest_to_json(m) << '\n';
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read manifest " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str());
}

GlyphStore::GlyphStore(const DatasetManifest& manifest, int image_size)
    : manifest_(manifest), size_(image_size) {}

const GlyphImage& GlyphStore::glyph(const std::string& font_id, char c) {
  std::lock_guard lock(mu_);
  auto key = std::make_pair(font_id, c);
  auto it = cache_.find(key);
  if (it != cache_.end()) return *it->second;
  const FontRecord& f = manifest_.font(font_id);
  auto img = std::make_unique<GlyphImage>(render_glyph(f.params, c, size_, font_id));
  return *cache_.emplace(key, std::move(img)).first->second;
}

const GlyphImage& GlyphStore::standard(char c) {
  std::lock_guard lock(mu_);
  auto key = std::make_pair(std::string(), c);
  auto it = cache_.find(key);
  if (it != cache_.end()) return *it->second;
  auto img = std::make_unique<GlyphImage>(render_glyph(standard_font_params(), c, size_, "standard"));
  return *cache_.emplace(key, std::move(img)).first->second;
}

}  // namespace tagfont::corpus
