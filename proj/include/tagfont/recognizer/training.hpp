#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tagfont/corpus/manifest.hpp"
#include "tagfont/nn/optim.hpp"
#include "tagfont/recognizer/model.hpp"

namespace tagfont::recognizer {

struct TrainOptions {
  int epochs = 30;
  int batch_size = 20;
  int samples_per_font = 4;  // random glyphs drawn per training font per epoch
  double lr_backbone = 5e-4;
  double lr_head = 5e-3;
  double lr_multiplier = 1.0;
  // Cosine decay of both rates over the run down to this fraction; 1 = constant.
  double final_lr_fraction = 0.05;
  std::uint64_t seed = 1;
  // Characters used for the per-epoch validation loss (all 52 is slow).
  std::string val_glyphs = "aegkmrsAEGKMRS";
};

// One row of the training log CSV.
struct EpochLog {
  int epoch = 0;
  std::string split;
  double loss = 0;
  double metric = 0;
};

std::string log_to_csv(const std::vector<EpochLog>& log);
void write_log_csv(const std::vector<EpochLog>& log, const std::string& path);

// Cosine schedule factor for epoch (1-based) out of total.
double cosine_factor(int epoch, int total, double final_fraction);

// Shuffled (font position, glyph index) pairs for one epoch: every font
// appears samples_per_font times with a uniformly drawn glyph.
std::vector<std::pair<int, int>> sample_epoch(int n_fonts, int samples_per_font, nn::Rng& rng);

// [n, N] label matrix for the given fonts.
Tensor label_tensor(const corpus::DatasetManifest& m, const std::vector<std::string>& font_ids);

// One pass of tag-loss training over the train split. Optimizers may be null
// to leave a parameter group untouched. Returns (mean loss, label accuracy).
std::pair<double, double> run_tag_epoch(TagRecognizer& model, corpus::GlyphStore& store,
                                        const TrainOptions& options, nn::Rng& rng,
                                        nn::Adam* backbone_opt, nn::Adam* head_opt,
                                        const std::string& where);

// Mean tag loss and label accuracy over fonts x glyphs, inference mode.
std::pair<double, double> evaluate_tag_loss(TagRecognizer& model, corpus::GlyphStore& store,
                                            const std::vector<std::string>& font_ids,
                                            const std::string& glyphs);

struct Stage1Result {
  TagRecognizer model;
  std::vector<EpochLog> log;
};

// Trains backbone + tag head from scratch. Throws InvalidArgument on an empty
// train split (before any step) and NumericalDivergence on a non-finite loss.
Stage1Result train_stage1(const corpus::DatasetManifest& m, corpus::GlyphStore& store,
                          const BackboneConfig& config, const TrainOptions& options);

struct FontClassifierOptions {
  int max_epochs = 40;
  int patience = 6;
  int batch_size = 20;
  int samples_per_font = 4;
  double lr_backbone = 5e-4;
  double lr_head = 5e-3;
  double lr_multiplier = 1.0;
  std::uint64_t seed = 2;
  // Characters never used for fitting; accuracy on them drives early stopping.
  std::string holdout_glyphs = "hqwHQW";
};

struct FontClassifierResult {
  FontClassifier model;
  std::vector<EpochLog> log;
  double best_holdout_accuracy = 0;
};

FontClassifierResult train_font_classifier(const corpus::DatasetManifest& m,
                                           corpus::GlyphStore& store, const BackboneConfig& config,
                                           const FontClassifierOptions& options);

// Top-1 accuracy of the classifier on (train font, glyph) pairs.
double font_class_accuracy(FontClassifier& model, corpus::GlyphStore& store,
                           const std::string& glyphs);

// Per-glyph rows for a list of fonts; row index = font_pos * glyphs.size() + g.
struct GlyphBank {
  std::vector<std::string> font_ids;
  std::string glyphs;
  Tensor values;  // [fonts * glyphs, K]

  int width() const { return values.dim(1); }
  int n_glyphs() const { return static_cast<int>(glyphs.size()); }
  int row_index(int font_pos, int g) const { return font_pos * n_glyphs() + g; }
  std::span<const Scalar> row(int font_pos, int g) const { return values.slice(row_index(font_pos, g)); }
  int font_pos(const std::string& font_id) const;  // throws on unknown id
};

GlyphBank compute_features(Backbone& backbone, corpus::GlyphStore& store,
                           const std::vector<std::string>& font_ids,
                           const std::string& glyphs = std::string(corpus::kGlyphSet));
GlyphBank compute_font_distributions(FontClassifier& model, corpus::GlyphStore& store,
                                     const std::vector<std::string>& font_ids,
                                     const std::string& glyphs = std::string(corpus::kGlyphSet));
// Per-glyph sigmoid tag probabilities of the unattended model.
GlyphBank compute_tag_probabilities(TagRecognizer& model, corpus::GlyphStore& store,
                                    const std::vector<std::string>& font_ids,
                                    const std::string& glyphs = std::string(corpus::kGlyphSet));

// Mean over the font's glyphs of the per-glyph tag probabilities.
std::vector<Scalar> font_tag_probabilities(TagRecognizer& model, corpus::GlyphStore& store,
                                           const std::string& font_id,
                                           const std::string& glyphs = std::string(corpus::kGlyphSet));
// Font-level means of a per-glyph bank, one row per font.
std::vector<std::vector<Scalar>> font_means(const GlyphBank& bank);

}  // namespace tagfont::recognizer
