#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tagfont/recognizer/training.hpp"

namespace tagfont::attention {

using nn::Scalar;
using nn::Tensor;

struct AttentionConfig {
  int J = 4;  // glyphs whose maps are multiplied in train mode
  double init_mu = 0.0;
  double init_sigma = 5.0;
  int epochs = 20;
  int batch_size = 20;
  int samples_per_font = 4;
  double lr_attention = 5e-3;
  double lr_head = 5e-3;
  double lr_multiplier = 1.0;
  std::uint64_t seed = 5;

  void validate() const;  // throws ConfigError
  std::string to_json() const;
  static AttentionConfig from_json(const std::string& text);
};

// Fully-connected layer from a font-class distribution to a feature-sized map,
// followed by a sigmoid.
class AttentionModule {
 public:
  AttentionModule() = default;
  AttentionModule(int n_classes, int feature_dim);

  void init(nn::Rng& rng, double mu, double sigma);
  // [n, M] distributions -> [n, D] maps in (0, 1)
  Tensor forward(const Tensor& dists);
  // Accumulates parameter gradients from d/d maps.
  void backward(const Tensor& grad_maps);
  void collect(nn::ParameterList& out) { fc_.collect(out); }
  nn::Linear& fc() { return fc_; }
  int n_classes() const { return fc_.in_features(); }
  int feature_dim() const { return fc_.out_features(); }

  void save(nn::Checkpoint& ckpt, const std::string& prefix = "att") const;
  static AttentionModule load(const nn::Checkpoint& ckpt, const std::string& prefix = "att");

 private:
  nn::Linear fc_;
  nn::Sigmoid sigmoid_;
};

using AttentionMap = std::vector<Scalar>;

AttentionMap attention_from_class(std::span<const Scalar> dist, AttentionModule& module);

// Element-wise product; throws InvalidArgument on an empty list or ragged maps.
AttentionMap aggregate_attention(const std::vector<AttentionMap>& maps);

// Tag probabilities of features re-weighted by maps (both [n, D]).
Tensor attended_probabilities(recognizer::TagRecognizer& rec, const Tensor& features,
                              const Tensor& maps);

enum class AttentionMode { kTrain, kTest };

// Per-image tag probabilities with attention. Test mode builds one map per
// image from that image alone (one font-model pass for the batch). Train mode
// treats `images` as glyphs of one font, draws J of them and applies their
// aggregated map to every image; throws InvalidArgument when fewer than J.
Tensor predict_tags_attended(const Tensor& images, recognizer::TagRecognizer& rec,
                             recognizer::FontClassifier& font_model, AttentionModule& module,
                             AttentionMode mode, int J, nn::Rng& rng);

// Tag loss of features [B, D] re-weighted by the product of J maps per row,
// computed from dists [B*J, M] (rows i*J .. i*J+J-1 belong to sample i). With
// accumulate, adds gradients to the module and tag head parameters.
double attention_tag_loss(recognizer::TagRecognizer& rec, AttentionModule& module,
                          const Tensor& features, const Tensor& dists, const Tensor& labels, int J,
                          bool accumulate, Tensor* logits_out = nullptr);

struct Stage3Result {
  recognizer::TagRecognizer model;  // backbone unchanged, tag head retrained
  AttentionModule module;
  std::vector<recognizer::EpochLog> log;
};

// Trains only the attention layer and the tag head on cached features and
// font-class distributions of the train split.
Stage3Result train_stage3(const recognizer::TagRecognizer& stage2,
                          recognizer::FontClassifier& font_model, const corpus::DatasetManifest& m,
                          corpus::GlyphStore& store, const AttentionConfig& config);

// Test-mode per-glyph attended probabilities for the given fonts.
recognizer::GlyphBank compute_attended_probabilities(recognizer::TagRecognizer& rec,
                                                     recognizer::FontClassifier& font_model,
                                                     AttentionModule& module,
                                                     corpus::GlyphStore& store,
                                                     const std::vector<std::string>& font_ids);

// Same, from already computed feature and distribution banks.
recognizer::GlyphBank attended_bank(recognizer::TagRecognizer& rec, AttentionModule& module,
                                    const recognizer::GlyphBank& features,
                                    const recognizer::GlyphBank& dists);

}  // namespace tagfont::attention
