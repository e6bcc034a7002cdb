#include "tagfont/recognizer/model.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "tagfont/common/errors.hpp"

namespace tagfont::recognizer {

using nlohmann::json;

// ---------------------------------------------------------------- config

void BackboneConfig::validate() const {
  if (feature_dim <= 0) throw ConfigError("backbone: feature_dim must be > 0");
  if (widths.empty()) throw ConfigError("backbone: need at least one stage");
  if (blocks_per_stage < 0) throw ConfigError("backbone: blocks_per_stage must be >= 0");
  for (int w : widths)
    if (w <= 0) throw ConfigError("backbone: stage widths must be > 0");
  int s = input_size;
  for (std::size_t i = 0; i < widths.size(); ++i) s = (s + 1) / 2;
  if (input_size < 8 || s < 1) throw ConfigError("backbone: input_size too small for stage count");
}

std::string BackboneConfig::to_json() const {
  json j = {{"input_size", input_size},
            {"feature_dim", feature_dim},
            {"widths", widths},
            {"blocks_per_stage", blocks_per_stage},
            {"seed", seed}};
  return j.dump();
}

BackboneConfig BackboneConfig::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    BackboneConfig c;
    c.input_size = j.at("input_size");
    c.feature_dim = j.at("feature_dim");
    c.widths = j.at("widths").get<std::vector<int>>();
    c.blocks_per_stage = j.at("blocks_per_stage");
    c.seed = j.at("seed");
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("backbone config: ") + e.what());
  }
}

// ---------------------------------------------------------------- backbone

Backbone::Backbone(const BackboneConfig& config, const std::string& prefix) : config_(config) {
  config_.validate();
  const auto& w = config_.widths;
  convs_.emplace_back(prefix + ".stem", 1, w[0], 3, 2, 1);
  for (std::size_t s = 1; s < w.size(); ++s)
    convs_.emplace_back(prefix + ".down" + std::to_string(s), w[s - 1], w[s], 3, 2, 1);
  conv_relus_.resize(convs_.size());
  blocks_.resize(w.size());
  for (std::size_t s = 0; s < w.size(); ++s)
    for (int b = 0; b < config_.blocks_per_stage; ++b)
      blocks_[s].emplace_back(prefix + ".stage" + std::to_string(s) + ".block" + std::to_string(b),
                              w[s]);
  proj_ = nn::Conv2d(prefix + ".proj", w.back(), config_.feature_dim, 1, 1, 0);
}

void Backbone::init(nn::Rng& rng) {
  for (auto& c : convs_) c.init_he(rng);
  for (auto& stage : blocks_)
    for (auto& b : stage) b.init(rng);
  proj_.init_he(rng);
}

Tensor Backbone::forward(const Tensor& images) {
  if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != config_.input_size ||
      images.dim(3) != config_.input_size) {
    throw InvalidArgument("backbone: expected [n, 1, " + std::to_string(config_.input_size) +
                          ", " + std::to_string(config_.input_size) + "] images, got " +
                          images.shape_string());
  }
  Tensor h = images;
  for (std::size_t s = 0; s < convs_.size(); ++s) {
    h = conv_relus_[s].forward(convs_[s].forward(h));
    for (auto& b : blocks_[s]) h = b.forward(h);
  }
  return pool_.forward(proj_relu_.forward(proj_.forward(h)));
}

void Backbone::backward(const Tensor& grad_features) {
  Tensor g = proj_.backward(proj_relu_.backward(pool_.backward(grad_features)));
  for (std::size_t s = convs_.size(); s-- > 0;) {
    for (auto it = blocks_[s].rbegin(); it != blocks_[s].rend(); ++it) g = it->backward(g);
    g = convs_[s].backward(conv_relus_[s].backward(g));
  }
}

void Backbone::collect(nn::ParameterList& out) {
  for (std::size_t s = 0; s < convs_.size(); ++s) {
    convs_[s].collect(out);
    for (auto& b : blocks_[s]) b.collect(out);
  }
  proj_.collect(out);
}

Tensor images_to_tensor(const std::vector<const corpus::GlyphImage*>& images) {
  if (images.empty()) throw InvalidArgument("images_to_tensor: empty batch");
  const int s = images.front()->size;
  Tensor t({static_cast<int>(images.size()), 1, s, s});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->size != s) throw InvalidArgument("images_to_tensor: mixed image sizes");
    auto dst = t.slice(static_cast<int>(i));
    for (std::size_t p = 0; p < dst.size(); ++p) dst[p] = 1.0 - images[i]->pixels[p];
  }
  return t;
}

// ---------------------------------------------------------------- tag recognizer

TagRecognizer::TagRecognizer(const BackboneConfig& config, const corpus::TagVocabulary& vocabulary)
    : backbone_(config, "rec.backbone"),
      tag_fc_("rec.tag_fc", config.feature_dim, static_cast<int>(vocabulary.size())),
      tags_(vocabulary.tags()),
      vocab_hash_(vocabulary.hash()) {
  if (vocabulary.size() == 0) throw InvalidArgument("recognizer: empty vocabulary");
}

void TagRecognizer::init(nn::Rng& rng) {
  backbone_.init(rng);
  tag_fc_.init_he(rng, 1.0);
}

Tensor TagRecognizer::tag_logits(const Tensor& features) {
  if (features.rank() != 2 || features.dim(1) != feature_dim()) {
    throw InvalidArgument("predict_tags: expected [n, " + std::to_string(feature_dim()) +
                          "] features, got " + features.shape_string());
  }
  return tag_fc_.forward(features);
}

Tensor TagRecognizer::predict_tags(const Tensor& features) {
  Tensor p = tag_logits(features);
  for (auto& v : p.values()) v = nn::sigmoid(v);
  return p;
}

nn::ParameterList TagRecognizer::backbone_params() {
  nn::ParameterList out;
  backbone_.collect(out);
  return out;
}

nn::ParameterList TagRecognizer::head_params() {
  nn::ParameterList out;
  tag_fc_.collect(out);
  return out;
}

void TagRecognizer::save(nn::Checkpoint& ckpt, const std::string& prefix) const {
  auto& self = const_cast<TagRecognizer&>(*this);  // collect() hands out mutable pointers
  ckpt.set_text(prefix + ".config", backbone_.config().to_json());
  ckpt.set_text(prefix + ".vocab_hash", vocab_hash_);
  ckpt.set_text(prefix + ".tags", json(tags_).dump());
  nn::ParameterList params = self.backbone_params();
  for (auto* p : self.head_params()) params.push_back(p);
  ckpt.put(params, prefix + "/");
}

TagRecognizer TagRecognizer::load(const nn::Checkpoint& ckpt,
                                  const corpus::TagVocabulary& vocabulary,
                                  const std::string& prefix) {
  if (!ckpt.has_text(prefix + ".config")) {
    throw FormatError("checkpoint has no '" + prefix + "' recognition model");
  }
  const std::string stored = ckpt.text(prefix + ".vocab_hash");
  if (stored != vocabulary.hash()) {
    throw FormatError("vocabulary hash mismatch: checkpoint " + stored + ", manifest " +
                      vocabulary.hash());
  }
  TagRecognizer m(BackboneConfig::from_json(ckpt.text(prefix + ".config")), vocabulary);
  nn::ParameterList params = m.backbone_params();
  for (auto* p : m.head_params()) params.push_back(p);
  ckpt.get(params, prefix + "/");
  return m;
}

// ---------------------------------------------------------------- font classifier

FontClassifier::FontClassifier(const BackboneConfig& config, std::vector<std::string> font_ids)
    : backbone_(config, "fontcls.backbone"),
      fc_("fontcls.fc", config.feature_dim, static_cast<int>(font_ids.size())),
      font_ids_(std::move(font_ids)) {
  if (font_ids_.empty()) throw InvalidArgument("font classifier: no classes");
}

void FontClassifier::init(nn::Rng& rng) {
  backbone_.init(rng);
  fc_.init_he(rng, 1.0);
}

Tensor FontClassifier::logits(const Tensor& images) {
  ++forward_calls_;
  return fc_.forward(backbone_.forward(images));
}

Tensor FontClassifier::predict(const Tensor& images) { return softmax_rows(logits(images)); }

int FontClassifier::class_of(const std::string& font_id) const {
  auto it = std::find(font_ids_.begin(), font_ids_.end(), font_id);
  if (it == font_ids_.end()) throw InvalidArgument("unknown font class '" + font_id + "'");
  return static_cast<int>(it - font_ids_.begin());
}

nn::ParameterList FontClassifier::params() {
  nn::ParameterList out;
  backbone_.collect(out);
  fc_.collect(out);
  return out;
}

void FontClassifier::save(nn::Checkpoint& ckpt, const std::string& prefix) const {
  auto& self = const_cast<FontClassifier&>(*this);
  ckpt.set_text(prefix + ".config", backbone_.config().to_json());
  ckpt.set_text(prefix + ".fonts", json(font_ids_).dump());
  ckpt.put(self.params(), prefix + "/");
}

FontClassifier FontClassifier::load(const nn::Checkpoint& ckpt, const std::string& prefix) {
  if (!ckpt.has_text(prefix + ".config")) {
    throw FormatError("checkpoint has no '" + prefix + "' font classifier");
  }
  FontClassifier m(BackboneConfig::from_json(ckpt.text(prefix + ".config")),
                   json::parse(ckpt.text(prefix + ".fonts")).get<std::vector<std::string>>());
  ckpt.get(m.params(), prefix + "/");
  return m;
}

// ---------------------------------------------------------------- losses

Scalar tag_loss(const Tensor& probs, const Tensor& labels) {
  if (!probs.same_shape(labels) || probs.rank() != 2) {
    throw InvalidArgument("tag_loss: shape mismatch " + probs.shape_string() + " vs " +
                          labels.shape_string());
  }
  Scalar total = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const Scalar p = probs[i];
    if (!(p >= 0 && p <= 1)) throw InvalidArgument("tag_loss: probability outside [0,1]");
    const Scalar pc = std::clamp(p, kProbClamp, 1 - kProbClamp);
    const Scalar y = labels[i];
    total -= y * std::log(pc) + (1 - y) * std::log(1 - pc);
  }
  return total / probs.dim(0);
}

Scalar tag_loss_with_logits(const Tensor& logits, const Tensor& labels, Tensor* grad_logits) {
  if (!logits.same_shape(labels) || logits.rank() != 2) {
    throw InvalidArgument("tag_loss: shape mismatch " + logits.shape_string() + " vs " +
                          labels.shape_string());
  }
  const Scalar inv_b = 1.0 / logits.dim(0);
  if (grad_logits) *grad_logits = Tensor::like(logits);
  Scalar total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const Scalar p = nn::sigmoid(logits[i]);
    const Scalar y = labels[i];
    const bool clamped = p < kProbClamp || p > 1 - kProbClamp;
    const Scalar pc = std::clamp(p, kProbClamp, 1 - kProbClamp);
    total -= y * std::log(pc) + (1 - y) * std::log(1 - pc);
    if (grad_logits) (*grad_logits)[i] = clamped ? 0.0 : (p - y) * inv_b;
  }
  return total * inv_b;
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw InvalidArgument("softmax: expected [n, k]");
  Tensor out = logits;
  const int n = logits.dim(0), k = logits.dim(1);
  for (int i = 0; i < n; ++i) {
    Scalar mx = out.at(i, 0);
    for (int c = 1; c < k; ++c) mx = std::max(mx, out.at(i, c));
    Scalar z = 0;
    for (int c = 0; c < k; ++c) z += (out.at(i, c) = std::exp(out.at(i, c) - mx));
    for (int c = 0; c < k; ++c) out.at(i, c) /= z;
  }
  return out;
}

Scalar font_class_loss(std::span<const Scalar> dist, int true_class) {
  if (true_class < 0 || true_class >= static_cast<int>(dist.size())) {
    throw InvalidArgument("font_class_loss: unknown font class " + std::to_string(true_class));
  }
  return -std::log(std::max(dist[static_cast<std::size_t>(true_class)], kProbClamp));
}

Scalar softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                             Tensor* grad_logits) {
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(targets.size()) != n) throw InvalidArgument("softmax_ce: batch mismatch");
  Tensor p = softmax_rows(logits);
  Scalar total = 0;
  for (int i = 0; i < n; ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= k) throw InvalidArgument("softmax_ce: unknown class");
    // log-softmax directly keeps precision when p underflows
    Scalar mx = logits.at(i, 0);
    for (int c = 1; c < k; ++c) mx = std::max(mx, logits.at(i, c));
    Scalar z = 0;
    for (int c = 0; c < k; ++c) z += std::exp(logits.at(i, c) - mx);
    total += std::log(z) + mx - logits.at(i, t);
  }
  if (grad_logits) {
    *grad_logits = p;
    for (int i = 0; i < n; ++i) {
      (*grad_logits).at(i, targets[static_cast<std::size_t>(i)]) -= 1;
    }
    grad_logits->scale_(1.0 / n);
  }
  return total / n;
}

std::vector<Scalar> mean_probabilities(const std::vector<std::vector<Scalar>>& per_glyph) {
  if (per_glyph.empty()) throw InvalidArgument("mean_probabilities: no glyphs");
  std::vector<Scalar> out(per_glyph.front().size(), 0.0);
  for (const auto& v : per_glyph) {
    if (v.size() != out.size()) throw InvalidArgument("mean_probabilities: ragged input");
    for (std::size_t k = 0; k < v.size(); ++k) out[k] += v[k];
  }
  for (auto& v : out) v /= static_cast<Scalar>(per_glyph.size());
  return out;
}

}  // namespace tagfont::recognizer
