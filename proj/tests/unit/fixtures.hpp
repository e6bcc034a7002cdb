#pragma once

#include <memory>

#include "tagfont/recognizer/training.hpp"

namespace testutil {

using namespace tagfont;

// Ten fonts at 16 px with a tiny backbone and one stage-1 epoch.
struct TinySetup {
  corpus::DatasetManifest m;
  std::unique_ptr<corpus::GlyphStore> store;
  recognizer::TagRecognizer stage1;
  recognizer::TrainOptions tag_options;

  TinySetup() {
    corpus::CorpusOptions co;
    co.n_fonts = 10;
    co.min_count = 1;
    co.seed = 5;
    m = corpus::synthesize_corpus(co);
    store = std::make_unique<corpus::GlyphStore>(m, 16);
    recognizer::BackboneConfig bc;
    bc.input_size = 16;
    bc.feature_dim = 6;
    bc.widths = {3, 4};
    tag_options.epochs = 1;
    tag_options.samples_per_font = 2;
    tag_options.val_glyphs = "aA";
    stage1 = recognizer::train_stage1(m, *store, bc, tag_options).model;
  }

  recognizer::FontClassifier font_classifier(int epochs = 2) {
    recognizer::FontClassifierOptions fo;
    fo.max_epochs = epochs;
    fo.samples_per_font = 2;
    return recognizer::train_font_classifier(m, *store, stage1.config(), fo).model;
  }
};

inline std::vector<tagfont::nn::Scalar> flat(const nn::ParameterList& ps) {
  std::vector<tagfont::nn::Scalar> out;
  for (auto* p : ps) out.insert(out.end(), p->value.values().begin(), p->value.values().end());
  return out;
}

}  // namespace testutil
