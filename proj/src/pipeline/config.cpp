#include "tagfont/pipeline/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tagfont/common/errors.hpp"
#include "tagfont/common/hash.hpp"

namespace tagfont::recognizer {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrainOptions, epochs, batch_size, samples_per_font, lr_backbone, lr_head,
                                   lr_multiplier, final_lr_fraction, seed, val_glyphs)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FontClassifierOptions, max_epochs, patience, batch_size, samples_per_font,
                                   lr_backbone, lr_head, lr_multiplier, seed, holdout_glyphs)
}  // namespace tagfont::recognizer

namespace tagfont::genfeat {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Stage2Options, max_phase_a_epochs, converge_tol, converge_window, smoothing,
                                   phase_b_epochs, batch_size, samples_per_font, lr_gan, lr_backbone, lr_head,
                                   lr_multiplier, gan_adam_beta1, seed, probe_pairs_per_font)
}  // namespace tagfont::genfeat

namespace tagfont::pipeline {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CorpusSection, n_fonts, seed, min_count, preset, image_size)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(QuerySection, top_k, subsets_per_font, min_query_size, max_query_size,
                                   amt_groups)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EvalSection, split, variants)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ServeSection, host, port)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ReconstructSection, font, glyph, cross_glyph, k)

using nlohmann::json;

namespace {

const std::vector<std::string> kVariants = {"basic", "gan", "attention", "full", "oracle"};

json without(json j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) j.erase(k);
  return j;
}

// Re-adds the derived fields a component parser expects, then parses it.
template <typename T>
T component(const json& section, json extra, const char* name) {
  extra.update(section);
  try {
    return T::from_json(extra.dump());
  } catch (const FormatError& e) {
    throw ConfigError(std::string(name) + ": " + e.what());
  }
}

bool same_kind(const json& have, const json& want) {
  if (have.is_number_integer()) return want.is_number_integer();
  if (have.is_number()) return want.is_number();
  return have.type() == want.type();
}

// Every key of `user` must exist in `ref` with a compatible type.
void check_keys(const json& ref, const json& user, const std::string& path) {
  for (const auto& [k, v] : user.items()) {
    const std::string p = path.empty() ? k : path + "." + k;
    if (!ref.contains(k)) throw ConfigError("unknown config key '" + p + "'");
    const auto& r = ref.at(k);
    if (r.is_object()) {
      if (!v.is_object()) throw ConfigError("config key '" + p + "' must be an object");
      check_keys(r, v, p);
    } else if (!same_kind(r, v)) {
      throw ConfigError("config key '" + p + "' expects " + std::string(r.type_name()) + ", got " +
                        v.type_name() + " " + v.dump());
    }
  }
}

json parse_doc(const std::string& text, const std::string& what) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ConfigError(what + ": top level must be an object");
    j.erase("derived");
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

}  // namespace

void PipelineConfig::derive() {
  backbone.seed = seed;
  stage1.seed = seed + 1;
  font_classifier.seed = seed + 2;
  gan.seed = seed + 3;
  stage2.seed = seed + 4;
  attention.seed = seed + 5;
  retrieval.seed = seed + 6;
  backbone.input_size = corpus.image_size;
  gan.image_size = corpus.image_size;
  gan.feature_dim = backbone.feature_dim;
}

void PipelineConfig::validate() const {
  if (out.empty()) throw ConfigError("out must not be empty");
  if (corpus.n_fonts < 10) throw ConfigError("corpus.n_fonts must be >= 10");
  if (corpus.min_count < 1) throw ConfigError("corpus.min_count must be >= 1");
  if (corpus.image_size < 16) throw ConfigError("corpus.image_size must be >= 16");
  corpus::StyleDistribution::preset(corpus.preset);
  if (queries.top_k < 1 || queries.subsets_per_font < 0 || queries.amt_groups < 0) {
    throw ConfigError("queries: top_k must be positive, subsets_per_font and amt_groups non-negative");
  }
  if (queries.min_query_size < 2 || queries.max_query_size < queries.min_query_size) {
    throw ConfigError("queries: need 2 <= min_query_size <= max_query_size");
  }
  backbone.validate();
  gan.validate();
  attention.validate();
  retrieval.validate();
  auto glyphs_ok = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return corpus::is_glyph(c); });
  };
  if (stage1.epochs < 0 || stage1.batch_size <= 0 || stage1.samples_per_font <= 0 || !glyphs_ok(stage1.val_glyphs)) {
    throw ConfigError("stage1: epochs >= 0, positive batch_size and samples_per_font, val_glyphs from a-z/A-Z");
  }
  if (font_classifier.max_epochs < 1 || font_classifier.patience < 1 || font_classifier.batch_size <= 0 ||
      !glyphs_ok(font_classifier.holdout_glyphs)) {
    throw ConfigError("font_classifier: positive max_epochs, patience and batch_size; holdout_glyphs from a-z/A-Z");
  }
  if (stage2.max_phase_a_epochs < 0 || stage2.phase_b_epochs < 0 || stage2.batch_size <= 0 ||
      stage2.converge_window < 1 || !(stage2.smoothing > 0 && stage2.smoothing <= 1)) {
    throw ConfigError("stage2: non-negative epochs, positive batch_size and converge_window, smoothing in (0, 1]");
  }
  if (eval.split != "val" && eval.split != "test") throw ConfigError("eval.split must be val or test");
  if (eval.variants.empty()) throw ConfigError("eval.variants must not be empty");
  for (const auto& v : eval.variants) {
    if (std::find(kVariants.begin(), kVariants.end(), v) == kVariants.end()) {
      throw ConfigError("eval.variants: unknown variant '" + v + "' (basic|gan|attention|full|oracle)");
    }
  }
  if (serve.port < 0 || serve.port > 65535) throw ConfigError("serve.port out of range");
  if (reconstruct.glyph.size() != 1 || !corpus::is_glyph(reconstruct.glyph[0]) ||
      reconstruct.cross_glyph.size() != 1 || !corpus::is_glyph(reconstruct.cross_glyph[0])) {
    throw ConfigError("reconstruct.glyph and reconstruct.cross_glyph must be single letters");
  }
  if (reconstruct.k < 0 || reconstruct.k > backbone.feature_dim) {
    throw ConfigError("reconstruct.k must lie in [0, backbone.feature_dim]");
  }
}

corpus::CorpusOptions PipelineConfig::corpus_options() const {
  corpus::CorpusOptions o;
  o.n_fonts = corpus.n_fonts;
  o.seed = corpus.seed;
  o.min_count = corpus.min_count;
  o.preset = corpus.preset;
  o.styles = corpus::StyleDistribution::preset(corpus.preset);
  return o;
}

corpus::QueryOptions PipelineConfig::query_options(corpus::Split split) const {
  corpus::QueryOptions o;
  o.top_k = queries.top_k;
  o.subsets_per_font = queries.subsets_per_font;
  o.min_query_size = queries.min_query_size;
  o.max_query_size = queries.max_query_size;
  o.split = split;
  return o;
}

std::string PipelineConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["out"] = out;
  j["corpus"] = corpus;
  j["queries"] = queries;
  j["backbone"] = without(json::parse(backbone.to_json()), {"seed", "input_size"});
  j["stage1"] = without(json(stage1), {"seed"});
  j["font_classifier"] = without(json(font_classifier), {"seed"});
  j["gan"] = without(json::parse(gan.to_json()), {"seed", "image_size", "feature_dim"});
  j["stage2"] = without(json(stage2), {"seed"});
  j["attention"] = without(json::parse(attention.to_json()), {"seed"});
  j["retrieval"] = without(json::parse(retrieval.to_json()), {"seed"});
  j["eval"] = eval;
  j["serve"] = serve;
  j["reconstruct"] = reconstruct;
  return j.dump(2);
}

std::string PipelineConfig::resolved_json() const {
  json j = json::parse(to_json());
  j["derived"] = {{"seeds",
                   {{"backbone", backbone.seed},
                    {"stage1", stage1.seed},
                    {"font_classifier", font_classifier.seed},
                    {"gan", gan.seed},
                    {"stage2", stage2.seed},
                    {"attention", attention.seed},
                    {"retrieval", retrieval.seed},
                    {"queries", query_seed()}}},
                  {"image_size", corpus.image_size},
                  {"feature_dim", backbone.feature_dim}};
  return j.dump(2);
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  const json defaults = json::parse(PipelineConfig{}.to_json());
  const json user = parse_doc(text, "config");
  check_keys(defaults, user, "");
  json d = defaults;
  d.merge_patch(user);

  PipelineConfig c;
  try {
    c.seed = d.at("seed").get<std::uint64_t>();
    c.out = d.at("out").get<std::string>();
    c.corpus = d.at("corpus").get<CorpusSection>();
    c.queries = d.at("queries").get<QuerySection>();
    c.eval = d.at("eval").get<EvalSection>();
    c.serve = d.at("serve").get<ServeSection>();
    c.reconstruct = d.at("reconstruct").get<ReconstructSection>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const json seed0 = {{"seed", 0}};
  c.backbone = component<recognizer::BackboneConfig>(d["backbone"], {{"seed", 0}, {"input_size", c.corpus.image_size}},
                                                     "backbone");
  c.gan = component<genfeat::GanConfig>(
      d["gan"], {{"seed", 0}, {"image_size", c.corpus.image_size}, {"feature_dim", c.backbone.feature_dim}}, "gan");
  c.attention = component<attention::AttentionConfig>(d["attention"], seed0, "attention");
  c.retrieval = component<retrieval::RetrievalConfig>(d["retrieval"], seed0, "retrieval");
  auto with_seed = [&](const char* key) {
    json j = d[key];
    j["seed"] = 0;
    return j;
  };
  try {
    c.stage1 = with_seed("stage1").get<recognizer::TrainOptions>();
    c.font_classifier = with_seed("font_classifier").get<recognizer::FontClassifierOptions>();
    c.stage2 = with_seed("stage2").get<genfeat::Stage2Options>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.derive();
  c.validate();
  return c;
}

void apply_override(std::string& json_text, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like key.path=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json doc = json::parse(json_text);
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) throw ConfigError("unknown config key '" + key + "'");
    node = &(*node)[parts[i]];
  }
  if (!node->is_object() || !node->contains(parts.back())) throw ConfigError("unknown config key '" + key + "'");
  json& slot = (*node)[parts.back()];
  if (slot.is_object()) throw ConfigError("override '" + key + "' names a section, not a value");
  if (!same_kind(slot, value)) {
    throw ConfigError("override '" + key + "' expects " + std::string(slot.type_name()) + ", got " + raw);
  }
  slot = value;
  json_text = doc.dump();
}

PipelineConfig resolve_config(const ConfigSources& sources) {
  std::string doc = PipelineConfig{}.to_json();
  if (sources.config_file) {
    std::ifstream in(*sources.config_file);
    if (!in) throw ConfigError("cannot read config file " + *sources.config_file);
    std::stringstream ss;
    ss << in.rdbuf();
    const json user = parse_doc(ss.str(), *sources.config_file);
    json d = json::parse(doc);
    check_keys(d, user, "");
    d.merge_patch(user);
    doc = d.dump();
  }
  if (sources.seed) apply_override(doc, "seed=" + std::to_string(*sources.seed));
  if (sources.out) apply_override(doc, "out=" + json(*sources.out).dump());
  for (const auto& o : sources.overrides) apply_override(doc, o);
  return PipelineConfig::from_json(doc);
}

std::string config_hash(const PipelineConfig& c) { return sha1_hex(c.resolved_json()); }

}  // namespace tagfont::pipeline
