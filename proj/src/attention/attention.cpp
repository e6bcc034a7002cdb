#include "tagfont/attention/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "tagfont/common/errors.hpp"
#include "tagfont/nn/optim.hpp"

namespace tagfont::attention {

using nlohmann::json;
using recognizer::GlyphBank;

void AttentionConfig::validate() const {
  if (J < 1) throw ConfigError("attention: J must be >= 1");
  if (J > corpus::kNumGlyphs) throw ConfigError("attention: J exceeds the glyph count");
  if (init_sigma < 0) throw ConfigError("attention: init_sigma must be >= 0");
  if (epochs < 0 || batch_size <= 0 || samples_per_font <= 0) {
    throw ConfigError("attention: epochs, batch_size and samples_per_font must be positive");
  }
}

std::string AttentionConfig::to_json() const {
  return json{{"J", J},
              {"init_mu", init_mu},
              {"init_sigma", init_sigma},
              {"epochs", epochs},
              {"batch_size", batch_size},
              {"samples_per_font", samples_per_font},
              {"lr_attention", lr_attention},
              {"lr_head", lr_head},
              {"lr_multiplier", lr_multiplier},
              {"seed", seed}}
      .dump();
}

AttentionConfig AttentionConfig::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    AttentionConfig c;
    c.J = j.at("J");
    c.init_mu = j.at("init_mu");
    c.init_sigma = j.at("init_sigma");
    c.epochs = j.at("epochs");
    c.batch_size = j.at("batch_size");
    c.samples_per_font = j.at("samples_per_font");
    c.lr_attention = j.at("lr_attention");
    c.lr_head = j.at("lr_head");
    c.lr_multiplier = j.at("lr_multiplier");
    c.seed = j.at("seed");
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("attention config: ") + e.what());
  }
}

AttentionModule::AttentionModule(int n_classes, int feature_dim)
    : fc_("att.fc", n_classes, feature_dim) {}

void AttentionModule::init(nn::Rng& rng, double mu, double sigma) { fc_.init_normal(rng, mu, sigma); }

Tensor AttentionModule::forward(const Tensor& dists) { return sigmoid_.forward(fc_.forward(dists)); }

void AttentionModule::backward(const Tensor& grad_maps) { fc_.backward(sigmoid_.backward(grad_maps)); }

void AttentionModule::save(nn::Checkpoint& ckpt, const std::string& prefix) const {
  auto& self = const_cast<AttentionModule&>(*this);
  ckpt.set_text(prefix + ".shape", json{{"classes", n_classes()}, {"feature_dim", feature_dim()}}.dump());
  nn::ParameterList params;
  self.collect(params);
  ckpt.put(params, prefix + "/");
}

AttentionModule AttentionModule::load(const nn::Checkpoint& ckpt, const std::string& prefix) {
  if (!ckpt.has_text(prefix + ".shape")) throw FormatError("checkpoint has no attention module");
  const json j = json::parse(ckpt.text(prefix + ".shape"));
  AttentionModule m(j.at("classes").get<int>(), j.at("feature_dim").get<int>());
  nn::ParameterList params;
  m.collect(params);
  ckpt.get(params, prefix + "/");
  return m;
}

AttentionMap attention_from_class(std::span<const Scalar> dist, AttentionModule& module) {
  if (static_cast<int>(dist.size()) != module.n_classes()) {
    throw InvalidArgument("attention: distribution has " + std::to_string(dist.size()) +
                          " classes, module expects " + std::to_string(module.n_classes()));
  }
  Tensor x({1, module.n_classes()});
  std::copy(dist.begin(), dist.end(), x.data());
  const Tensor map = module.forward(x);
  return {map.values().begin(), map.values().end()};
}

AttentionMap aggregate_attention(const std::vector<AttentionMap>& maps) {
  if (maps.empty()) throw InvalidArgument("aggregate_attention: no maps");
  AttentionMap out = maps.front();
  for (std::size_t j = 1; j < maps.size(); ++j) {
    if (maps[j].size() != out.size()) throw InvalidArgument("aggregate_attention: map lengths differ");
    for (std::size_t d = 0; d < out.size(); ++d) out[d] *= maps[j][d];
  }
  return out;
}

Tensor attended_probabilities(recognizer::TagRecognizer& rec, const Tensor& features,
                              const Tensor& maps) {
  if (!features.same_shape(maps)) {
    throw InvalidArgument("attention: map shape " + maps.shape_string() + " differs from features " +
                          features.shape_string());
  }
  Tensor x = features;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= maps[i];
  return rec.predict_tags(x);
}

namespace {

// J distinct indices out of [0, n).
std::vector<int> draw_distinct(int n, int J, nn::Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < J; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(J));
  return idx;
}

void check_dims(recognizer::TagRecognizer& rec, recognizer::FontClassifier& font_model,
                AttentionModule& module) {
  if (module.feature_dim() != rec.feature_dim() || module.n_classes() != font_model.n_classes()) {
    throw ConfigError("attention: module shape [" + std::to_string(module.n_classes()) + " -> " +
                      std::to_string(module.feature_dim()) + "] does not match font classes " +
                      std::to_string(font_model.n_classes()) + " / feature dim " +
                      std::to_string(rec.feature_dim()));
  }
}

}  // namespace

Tensor predict_tags_attended(const Tensor& images, recognizer::TagRecognizer& rec,
                             recognizer::FontClassifier& font_model, AttentionModule& module,
                             AttentionMode mode, int J, nn::Rng& rng) {
  check_dims(rec, font_model, module);
  const Tensor feats = rec.extract_features(images);
  const int n = feats.dim(0);
  if (mode == AttentionMode::kTest) {
    return attended_probabilities(rec, feats, module.forward(font_model.predict(images)));
  }
  if (J < 1 || n < J) {
    throw InvalidArgument("attention: train mode needs at least J=" + std::to_string(J) +
                          " glyphs, got " + std::to_string(n));
  }
  const auto chosen = draw_distinct(n, J, rng);
  Tensor picked({J, images.dim(1), images.dim(2), images.dim(3)});
  for (int j = 0; j < J; ++j) {
    auto src = images.slice(chosen[static_cast<std::size_t>(j)]);
    std::copy(src.begin(), src.end(), picked.slice(j).begin());
  }
  const Tensor maps = module.forward(font_model.predict(picked));
  std::vector<AttentionMap> list;
  for (int j = 0; j < J; ++j) list.emplace_back(maps.slice(j).begin(), maps.slice(j).end());
  const AttentionMap b = aggregate_attention(list);
  Tensor tiled = Tensor::like(feats);
  for (int i = 0; i < n; ++i) std::copy(b.begin(), b.end(), tiled.slice(i).begin());
  return attended_probabilities(rec, feats, tiled);
}

GlyphBank attended_bank(recognizer::TagRecognizer& rec, AttentionModule& module,
                        const GlyphBank& features, const GlyphBank& dists) {
  if (features.values.dim(0) != dists.values.dim(0)) {
    throw InvalidArgument("attention: feature and distribution banks differ in size");
  }
  GlyphBank out{features.font_ids, features.glyphs, {}};
  const Tensor maps = module.forward(dists.values);
  out.values = attended_probabilities(rec, features.values, maps);
  return out;
}

GlyphBank compute_attended_probabilities(recognizer::TagRecognizer& rec,
                                         recognizer::FontClassifier& font_model,
                                         AttentionModule& module, corpus::GlyphStore& store,
                                         const std::vector<std::string>& font_ids) {
  check_dims(rec, font_model, module);
  const GlyphBank feats = recognizer::compute_features(rec.backbone(), store, font_ids);
  const GlyphBank dists = recognizer::compute_font_distributions(font_model, store, font_ids);
  return attended_bank(rec, module, feats, dists);
}

double attention_tag_loss(recognizer::TagRecognizer& rec, AttentionModule& module,
                          const Tensor& features, const Tensor& dists, const Tensor& labels, int J,
                          bool accumulate, Tensor* logits_out) {
  const int B = features.dim(0);
  const int D = features.dim(1);
  if (J < 1 || dists.dim(0) != B * J || labels.dim(0) != B) {
    throw InvalidArgument("attention_tag_loss: expected " + std::to_string(B * J) +
                          " distributions and " + std::to_string(B) + " label rows");
  }
  const Tensor maps = module.forward(dists);  // [B*J, D]
  Tensor x = features;
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < J; ++j)
      for (int d = 0; d < D; ++d) x.at(i, d) *= maps.at(i * J + j, d);
  Tensor grad;
  const Tensor logits = rec.tag_logits(x);
  const double loss = recognizer::tag_loss_with_logits(logits, labels, accumulate ? &grad : nullptr);
  if (logits_out) *logits_out = logits;
  if (!accumulate) return loss;
  const Tensor gx = rec.tag_fc().backward(grad);
  Tensor gmaps({B * J, D});
  for (int i = 0; i < B; ++i)
    for (int d = 0; d < D; ++d) {
      const Scalar gb = gx.at(i, d) * features.at(i, d);
      for (int j = 0; j < J; ++j) {
        Scalar others = 1;
        for (int k = 0; k < J; ++k)
          if (k != j) others *= maps.at(i * J + k, d);
        gmaps.at(i * J + j, d) = gb * others;
      }
    }
  module.backward(gmaps);
  return loss;
}

Stage3Result train_stage3(const recognizer::TagRecognizer& stage2,
                          recognizer::FontClassifier& font_model, const corpus::DatasetManifest& m,
                          corpus::GlyphStore& store, const AttentionConfig& config) {
  config.validate();
  const auto& train = m.splits.train;
  if (train.empty()) throw InvalidArgument("train-stage3: empty train split");
  Stage3Result out{stage2, AttentionModule(font_model.n_classes(), stage2.feature_dim()), {}};
  recognizer::TagRecognizer& model = out.model;
  AttentionModule& att = out.module;
  check_dims(model, font_model, att);
  nn::Rng init_rng(config.seed);
  att.init(init_rng, config.init_mu, config.init_sigma);

  const GlyphBank feats = recognizer::compute_features(model.backbone(), store, train);
  const GlyphBank dists = recognizer::compute_font_distributions(font_model, store, train);
  GlyphBank val_feats, val_dists;
  if (!m.splits.val.empty()) {
    val_feats = recognizer::compute_features(model.backbone(), store, m.splits.val);
    val_dists = recognizer::compute_font_distributions(font_model, store, m.splits.val);
  }
  const Tensor val_labels = [&] {
    std::vector<std::string> ids;
    for (const auto& id : m.splits.val) ids.insert(ids.end(), corpus::kNumGlyphs, id);
    return recognizer::label_tensor(m, ids);
  }();

  nn::ParameterList att_params;
  att.collect(att_params);
  const nn::ParameterList head_params = model.head_params();
  nn::Adam att_opt(att_params, config.lr_attention * config.lr_multiplier);
  nn::Adam head_opt(head_params, config.lr_head * config.lr_multiplier);
  nn::Rng rng(config.seed ^ 0xa77e5eedULL);

  const int D = model.feature_dim();
  const int M = att.n_classes();
  const int J = config.J;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order =
        recognizer::sample_epoch(static_cast<int>(train.size()), config.samples_per_font, rng);
    double loss_sum = 0, acc_sum = 0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      const int B = static_cast<int>(e - b);
      Tensor f({B, D}), c({B * J, M});
      std::vector<std::string> ids;
      for (int i = 0; i < B; ++i) {
        const auto [font, glyph] = order[b + static_cast<std::size_t>(i)];
        ids.push_back(train[static_cast<std::size_t>(font)]);
        auto src = feats.row(font, glyph);
        std::copy(src.begin(), src.end(), f.slice(i).begin());
        const auto set = draw_distinct(corpus::kNumGlyphs, J, rng);
        for (int j = 0; j < J; ++j) {
          auto d = dists.row(font, set[static_cast<std::size_t>(j)]);
          std::copy(d.begin(), d.end(), c.slice(i * J + j).begin());
        }
      }
      const Tensor labels = recognizer::label_tensor(m, ids);
      nn::zero_grads(att_params);
      nn::zero_grads(head_params);
      Tensor logits;
      const double loss = attention_tag_loss(model, att, f, c, labels, J, true, &logits);
      if (!std::isfinite(loss)) {
        throw NumericalDivergence("train-stage3 epoch " + std::to_string(epoch) +
                                  ": non-finite tag loss");
      }
      att_opt.step();
      head_opt.step();

      std::size_t hit = 0;
      for (std::size_t k = 0; k < logits.size(); ++k) hit += (logits[k] > 0) == (labels[k] > 0.5);
      loss_sum += loss;
      acc_sum += static_cast<double>(hit) / static_cast<double>(logits.size());
      ++batches;
    }
    out.log.push_back({epoch, "train", loss_sum / batches, acc_sum / batches});
    if (!m.splits.val.empty()) {
      const GlyphBank probs = attended_bank(model, att, val_feats, val_dists);
      out.log.push_back({epoch, "val", recognizer::tag_loss(probs.values, val_labels), 0.0});
    }
  }
  return out;
}

}  // namespace tagfont::attention
