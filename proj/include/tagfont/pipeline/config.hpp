#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tagfont/attention/attention.hpp"
#include "tagfont/corpus/queries.hpp"
#include "tagfont/genfeat/training.hpp"
#include "tagfont/retrieval/retrieval.hpp"

namespace tagfont::pipeline {

struct CorpusSection {
  int n_fonts = 100;
  std::uint64_t seed = 7;
  int min_count = 10;
  std::string preset = "standard";
  int image_size = 64;  // also the backbone and generator input size
};

struct QuerySection {
  int top_k = 300;
  int subsets_per_font = 3;
  int min_query_size = 2;
  int max_query_size = 5;
  int amt_groups = 200;
};

struct EvalSection {
  std::string split = "test";  // val | test
  // Any of basic, gan, attention, full, oracle.
  std::vector<std::string> variants = {"basic", "full"};
};

struct ServeSection {
  std::string host = "127.0.0.1";
  int port = 8080;
};

struct ReconstructSection {
  std::string font;  // empty: first test font
  std::string glyph = "a";
  std::string cross_glyph = "o";
  int k = 0;  // kept feature nodes; 0 means a quarter of the feature size
};

// Every stage's settings. Component seeds are not configured individually:
// they are derived from `seed` so one number pins a whole run. The corpus
// keeps its own seed so training seeds can vary over a fixed corpus.
struct PipelineConfig {
  std::uint64_t seed = 1;
  std::string out = "runs/default";
  CorpusSection corpus;
  QuerySection queries;
  recognizer::BackboneConfig backbone;
  recognizer::TrainOptions stage1;
  recognizer::FontClassifierOptions font_classifier;
  genfeat::GanConfig gan;
  genfeat::Stage2Options stage2;
  attention::AttentionConfig attention;
  retrieval::RetrievalConfig retrieval;
  EvalSection eval;
  ServeSection serve;
  ReconstructSection reconstruct;

  // Copies `seed` and the shared sizes into the component configs.
  void derive();
  void validate() const;  // throws ConfigError

  corpus::CorpusOptions corpus_options() const;
  corpus::QueryOptions query_options(corpus::Split split) const;
  std::uint64_t query_seed() const { return seed + 7; }

  // Settable keys only; the persisted form adds a "derived" section.
  std::string to_json() const;
  std::string resolved_json() const;
  static PipelineConfig from_json(const std::string& text);
};

struct ConfigSources {
  std::optional<std::string> config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> overrides;  // dotted.key=value
};

// Built-in defaults < config file < --seed/--out < overrides. Unknown keys and
// type mismatches raise ConfigError.
PipelineConfig resolve_config(const ConfigSources& sources);

// Applies one dotted.key=value override to a JSON document. The value is
// parsed as JSON when possible and taken as a string otherwise.
void apply_override(std::string& json_text, const std::string& assignment);

std::string config_hash(const PipelineConfig& c);

}  // namespace tagfont::pipeline
