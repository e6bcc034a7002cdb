#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagfont/corpus/glyph.hpp"
#include "tagfont/corpus/tags.hpp"
#include "tagfont/nn/checkpoint.hpp"
#include "tagfont/nn/layers.hpp"

namespace tagfont::recognizer {

using nn::Scalar;
using nn::Tensor;

struct BackboneConfig {
  int input_size = 64;
  int feature_dim = 256;
  std::vector<int> widths = {8, 16, 32};  // one stage per entry, each halves resolution
  int blocks_per_stage = 1;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
  std::string to_json() const;
  static BackboneConfig from_json(const std::string& text);
  bool operator==(const BackboneConfig&) const = default;
};

// Small residual CNN: stride-2 stem, residual stages separated by stride-2
// convs, 1x1 projection to feature_dim, ReLU, global average pooling.
class Backbone {
 public:
  Backbone() = default;
  Backbone(const BackboneConfig& config, const std::string& prefix);

  void init(nn::Rng& rng);
  // [n, 1, S, S] -> [n, D]
  Tensor forward(const Tensor& images);
  // Accumulates parameter gradients. The input gradient is not needed by any
  // stage and is dropped.
  void backward(const Tensor& grad_features);
  void collect(nn::ParameterList& out);
  const BackboneConfig& config() const { return config_; }

 private:
  BackboneConfig config_;
  std::vector<nn::Conv2d> convs_;  // stem, then downsamplers
  std::vector<nn::ReLU> conv_relus_;
  std::vector<std::vector<nn::ResidualBlock>> blocks_;
  nn::Conv2d proj_;
  nn::ReLU proj_relu_;
  nn::GlobalAvgPool pool_;
};

// Network input for glyph rasters: ink = 1 - intensity, so background is 0.
Tensor images_to_tensor(const std::vector<const corpus::GlyphImage*>& images);

// Backbone + N-way sigmoid tag head.
class TagRecognizer {
 public:
  TagRecognizer() = default;
  TagRecognizer(const BackboneConfig& config, const corpus::TagVocabulary& vocabulary);

  void init(nn::Rng& rng);

  Tensor extract_features(const Tensor& images) { return backbone_.forward(images); }
  Tensor tag_logits(const Tensor& features);
  Tensor predict_tags(const Tensor& features);  // probabilities in (0,1)

  Backbone& backbone() { return backbone_; }
  nn::Linear& tag_fc() { return tag_fc_; }
  const nn::Linear& tag_fc() const { return tag_fc_; }
  nn::ParameterList backbone_params();
  nn::ParameterList head_params();

  int n_tags() const { return static_cast<int>(tags_.size()); }
  int feature_dim() const { return backbone_.config().feature_dim; }
  const BackboneConfig& config() const { return backbone_.config(); }
  const std::string& vocab_hash() const { return vocab_hash_; }
  const std::vector<std::string>& tags() const { return tags_; }

  // Writes config, vocabulary hash and parameters under `prefix`.
  void save(nn::Checkpoint& ckpt, const std::string& prefix = "rec") const;
  // Refuses to load when the stored vocabulary hash differs from `vocabulary`.
  static TagRecognizer load(const nn::Checkpoint& ckpt, const corpus::TagVocabulary& vocabulary,
                            const std::string& prefix = "rec");

 private:
  Backbone backbone_;
  nn::Linear tag_fc_;
  std::vector<std::string> tags_;
  std::string vocab_hash_;
};

// Backbone + softmax over the training fonts.
class FontClassifier {
 public:
  FontClassifier() = default;
  FontClassifier(const BackboneConfig& config, std::vector<std::string> font_ids);

  void init(nn::Rng& rng);
  Tensor logits(const Tensor& images);
  Tensor predict(const Tensor& images);  // rows are distributions
  int class_of(const std::string& font_id) const;  // throws on unknown font
  int n_classes() const { return static_cast<int>(font_ids_.size()); }
  const std::vector<std::string>& font_ids() const { return font_ids_; }
  Backbone& backbone() { return backbone_; }
  nn::Linear& fc() { return fc_; }
  nn::ParameterList params();
  // Number of image batches pushed through predict()/logits(); used by tests
  // to check how often the font model runs.
  long forward_calls() const { return forward_calls_; }

  void save(nn::Checkpoint& ckpt, const std::string& prefix = "fontcls") const;
  static FontClassifier load(const nn::Checkpoint& ckpt, const std::string& prefix = "fontcls");

 private:
  Backbone backbone_;
  nn::Linear fc_;
  std::vector<std::string> font_ids_;
  long forward_calls_ = 0;
};

// Probability clamp used inside the tag loss.
inline constexpr Scalar kProbClamp = 1e-7;

// Multi-label binary cross-entropy (negative log-likelihood), summed over tags
// and averaged over the batch. probs and labels are [B, N]; probs must lie in
// [0, 1] and are clamped to [kProbClamp, 1 - kProbClamp].
Scalar tag_loss(const Tensor& probs, const Tensor& labels);
// Same loss from logits; optionally writes d loss / d logits.
Scalar tag_loss_with_logits(const Tensor& logits, const Tensor& labels, Tensor* grad_logits);

Tensor softmax_rows(const Tensor& logits);
// Cross-entropy of one distribution against a class index (clamped log).
Scalar font_class_loss(std::span<const Scalar> dist, int true_class);
// Batch-mean softmax cross-entropy from logits; optionally writes the gradient.
Scalar softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                             Tensor* grad_logits);

// Arithmetic mean of per-glyph probability vectors. Throws on an empty list
// or ragged lengths.
std::vector<Scalar> mean_probabilities(const std::vector<std::vector<Scalar>>& per_glyph);

}  // namespace tagfont::recognizer
