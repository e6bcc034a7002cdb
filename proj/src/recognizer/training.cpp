#include "tagfont/recognizer/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tagfont/common/errors.hpp"

namespace tagfont::recognizer {

namespace {

std::vector<const corpus::GlyphImage*> gather(corpus::GlyphStore& store,
                                              const std::vector<std::string>& ids,
                                              const std::vector<std::pair<int, int>>& order,
                                              std::size_t begin, std::size_t end,
                                              const std::string& glyphs) {
  std::vector<const corpus::GlyphImage*> out;
  for (std::size_t i = begin; i < end; ++i) {
    const auto [f, g] = order[i];
    out.push_back(&store.glyph(ids[static_cast<std::size_t>(f)], glyphs[static_cast<std::size_t>(g)]));
  }
  return out;
}

double label_accuracy(const Tensor& logits, const Tensor& labels) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) hit += (logits[i] > 0) == (labels[i] > 0.5);
  return static_cast<double>(hit) / static_cast<double>(logits.size());
}

std::string without(const std::string& all, const std::string& drop) {
  std::string out;
  for (char c : all)
    if (drop.find(c) == std::string::npos) out.push_back(c);
  return out;
}

}  // namespace

std::string log_to_csv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch,split,loss,metric\n";
  out.precision(10);
  for (const auto& r : log) out << r.epoch << ',' << r.split << ',' << r.loss << ',' << r.metric << '\n';
  return out.str();
}

void write_log_csv(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out << log_to_csv(log);
}

double cosine_factor(int epoch, int total, double final_fraction) {
  if (total <= 1) return 1.0;
  const double t = static_cast<double>(epoch - 1) / (total - 1);
  return final_fraction + (1 - final_fraction) * 0.5 * (1 + std::cos(t * 3.14159265358979323846));
}

std::vector<std::pair<int, int>> sample_epoch(int n_fonts, int samples_per_font, nn::Rng& rng) {
  std::vector<std::pair<int, int>> order;
  std::uniform_int_distribution<int> glyph(0, corpus::kNumGlyphs - 1);
  for (int f = 0; f < n_fonts; ++f)
    for (int s = 0; s < samples_per_font; ++s) order.emplace_back(f, glyph(rng));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

Tensor label_tensor(const corpus::DatasetManifest& m, const std::vector<std::string>& font_ids) {
  const int n = static_cast<int>(font_ids.size());
  const int k = static_cast<int>(m.vocabulary.size());
  Tensor t({n, k});
  for (int i = 0; i < n; ++i) {
    const auto labels = m.labels(m.font(font_ids[static_cast<std::size_t>(i)]));
    for (int c = 0; c < k; ++c) t.at(i, c) = labels[static_cast<std::size_t>(c)];
  }
  return t;
}

std::pair<double, double> run_tag_epoch(TagRecognizer& model, corpus::GlyphStore& store,
                                        const TrainOptions& options, nn::Rng& rng,
                                        nn::Adam* backbone_opt, nn::Adam* head_opt,
                                        const std::string& where) {
  const auto& m = store.manifest();
  const auto& train = m.splits.train;
  if (train.empty()) throw InvalidArgument(where + ": empty train split");
  const auto order = sample_epoch(static_cast<int>(train.size()), options.samples_per_font, rng);
  const std::string all(corpus::kGlyphSet);
  nn::ParameterList all_params = model.backbone_params();
  for (auto* p : model.head_params()) all_params.push_back(p);

  double loss_sum = 0, acc_sum = 0;
  int batches = 0;
  for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(options.batch_size)) {
    const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(options.batch_size));
    const auto imgs = gather(store, train, order, b, e, all);
    std::vector<std::string> ids;
    for (std::size_t i = b; i < e; ++i) ids.push_back(train[static_cast<std::size_t>(order[i].first)]);
    const Tensor labels = label_tensor(m, ids);

    Tensor feats = model.extract_features(images_to_tensor(imgs));
    Tensor logits = model.tag_logits(feats);
    Tensor grad;
    const double loss = tag_loss_with_logits(logits, labels, &grad);
    if (!std::isfinite(loss)) {
      throw NumericalDivergence(where + ": non-finite tag loss at batch " + std::to_string(batches));
    }
    zero_grads(all_params);
    const Tensor gfeat = model.tag_fc().backward(grad);
    if (backbone_opt) model.backbone().backward(gfeat);
    if (backbone_opt) backbone_opt->step();
    if (head_opt) head_opt->step();
    loss_sum += loss;
    acc_sum += label_accuracy(logits, labels);
    ++batches;
  }
  return {loss_sum / batches, acc_sum / batches};
}

std::pair<double, double> evaluate_tag_loss(TagRecognizer& model, corpus::GlyphStore& store,
                                            const std::vector<std::string>& font_ids,
                                            const std::string& glyphs) {
  if (font_ids.empty() || glyphs.empty()) return {0.0, 0.0};
  double loss = 0, acc = 0;
  for (const auto& id : font_ids) {
    std::vector<const corpus::GlyphImage*> imgs;
    for (char c : glyphs) imgs.push_back(&store.glyph(id, c));
    const Tensor labels = label_tensor(store.manifest(), std::vector<std::string>(imgs.size(), id));
    const Tensor logits = model.tag_logits(model.extract_features(images_to_tensor(imgs)));
    loss += tag_loss_with_logits(logits, labels, nullptr);
    acc += label_accuracy(logits, labels);
  }
  return {loss / static_cast<double>(font_ids.size()), acc / static_cast<double>(font_ids.size())};
}

Stage1Result train_stage1(const corpus::DatasetManifest& m, corpus::GlyphStore& store,
                          const BackboneConfig& config, const TrainOptions& options) {
  if (m.splits.train.empty()) throw InvalidArgument("train-stage1: empty train split");
  if (options.epochs < 0 || options.batch_size <= 0 || options.samples_per_font <= 0) {
    throw ConfigError("train-stage1: epochs, batch_size and samples_per_font must be positive");
  }
  Stage1Result out{TagRecognizer(config, m.vocabulary), {}};
  TagRecognizer& model = out.model;
  nn::Rng init_rng(config.seed);
  model.init(init_rng);
  nn::Adam bb_opt(model.backbone_params(), options.lr_backbone * options.lr_multiplier);
  nn::Adam head_opt(model.head_params(), options.lr_head * options.lr_multiplier);
  nn::Rng rng(options.seed);
  const double lr_bb = options.lr_backbone * options.lr_multiplier;
  const double lr_head = options.lr_head * options.lr_multiplier;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    const double f = cosine_factor(epoch, options.epochs, options.final_lr_fraction);
    bb_opt.set_lr(lr_bb * f);
    head_opt.set_lr(lr_head * f);
    const auto [loss, acc] = run_tag_epoch(model, store, options, rng, &bb_opt, &head_opt,
                                           "train-stage1 epoch " + std::to_string(epoch));
    out.log.push_back({epoch, "train", loss, acc});
    if (!m.splits.val.empty()) {
      const auto [vl, va] = evaluate_tag_loss(model, store, m.splits.val, options.val_glyphs);
      out.log.push_back({epoch, "val", vl, va});
    }
  }
  return out;
}

double font_class_accuracy(FontClassifier& model, corpus::GlyphStore& store,
                           const std::string& glyphs) {
  if (glyphs.empty()) return 0.0;
  std::size_t hit = 0, total = 0;
  for (int f = 0; f < model.n_classes(); ++f) {
    std::vector<const corpus::GlyphImage*> imgs;
    for (char c : glyphs) imgs.push_back(&store.glyph(model.font_ids()[static_cast<std::size_t>(f)], c));
    const Tensor logits = model.logits(images_to_tensor(imgs));
    for (int i = 0; i < logits.dim(0); ++i) {
      int best = 0;
      for (int c = 1; c < logits.dim(1); ++c)
        if (logits.at(i, c) > logits.at(i, best)) best = c;
      hit += best == f;
      ++total;
    }
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

FontClassifierResult train_font_classifier(const corpus::DatasetManifest& m,
                                           corpus::GlyphStore& store, const BackboneConfig& config,
                                           const FontClassifierOptions& options) {
  const auto& train = m.splits.train;
  if (train.empty()) throw InvalidArgument("font classifier: empty train split");
  FontClassifierResult out{FontClassifier(config, train), {}, -1.0};
  FontClassifier& model = out.model;
  nn::Rng init_rng(config.seed ^ 0x5eedf0c7ULL);
  model.init(init_rng);
  nn::ParameterList bb, head;
  model.backbone().collect(bb);
  model.fc().collect(head);
  nn::Adam bb_opt(bb, options.lr_backbone * options.lr_multiplier);
  nn::Adam head_opt(head, options.lr_head * options.lr_multiplier);
  const nn::ParameterList all = model.params();

  const std::string fit = without(std::string(corpus::kGlyphSet), options.holdout_glyphs);
  if (fit.empty()) throw ConfigError("font classifier: every glyph is held out");
  nn::Rng rng(options.seed);
  std::vector<Scalar> best = nn::snapshot(all);
  int stale = 0;
  for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
    std::vector<std::pair<int, int>> order;
    std::uniform_int_distribution<int> glyph(0, static_cast<int>(fit.size()) - 1);
    for (int f = 0; f < static_cast<int>(train.size()); ++f)
      for (int s = 0; s < options.samples_per_font; ++s) order.emplace_back(f, glyph(rng));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(options.batch_size));
      const auto imgs = gather(store, train, order, b, e, fit);
      std::vector<int> targets;
      for (std::size_t i = b; i < e; ++i) targets.push_back(order[i].first);
      Tensor feats = model.backbone().forward(images_to_tensor(imgs));
      Tensor logits = model.fc().forward(feats);
      Tensor grad;
      const double loss = softmax_cross_entropy(logits, targets, &grad);
      if (!std::isfinite(loss)) throw NumericalDivergence("font classifier: non-finite loss");
      zero_grads(all);
      model.backbone().backward(model.fc().backward(grad));
      bb_opt.step();
      head_opt.step();
      loss_sum += loss;
      ++batches;
    }
    const double holdout = options.holdout_glyphs.empty()
                               ? 0.0
                               : font_class_accuracy(model, store, options.holdout_glyphs);
    out.log.push_back({epoch, "train", loss_sum / batches, 0.0});
    out.log.push_back({epoch, "holdout", 0.0, holdout});
    if (holdout > out.best_holdout_accuracy) {
      out.best_holdout_accuracy = holdout;
      best = nn::snapshot(all);
      stale = 0;
    } else if (++stale >= options.patience) {
      break;
    }
  }
  // restore the best snapshot
  std::size_t pos = 0;
  for (auto* p : all)
    for (auto& v : p->value.values()) v = best[pos++];
  return out;
}

int GlyphBank::font_pos(const std::string& font_id) const {
  auto it = std::find(font_ids.begin(), font_ids.end(), font_id);
  if (it == font_ids.end()) throw InvalidArgument("glyph bank: unknown font '" + font_id + "'");
  return static_cast<int>(it - font_ids.begin());
}

namespace {

template <typename Fn>
GlyphBank build_bank(corpus::GlyphStore& store, const std::vector<std::string>& font_ids,
                     const std::string& glyphs, Fn&& per_font) {
  if (glyphs.empty()) throw InvalidArgument("glyph bank: empty glyph list");
  GlyphBank bank{font_ids, glyphs, {}};
  for (std::size_t f = 0; f < font_ids.size(); ++f) {
    std::vector<const corpus::GlyphImage*> imgs;
    for (char c : glyphs) imgs.push_back(&store.glyph(font_ids[f], c));
    const Tensor rows = per_font(images_to_tensor(imgs));
    if (bank.values.empty()) {
      bank.values = Tensor({static_cast<int>(font_ids.size() * glyphs.size()), rows.dim(1)});
    }
    std::copy(rows.values().begin(), rows.values().end(),
              bank.values.slice(bank.row_index(static_cast<int>(f), 0)).begin());
  }
  return bank;
}

}  // namespace

GlyphBank compute_features(Backbone& backbone, corpus::GlyphStore& store,
                           const std::vector<std::string>& font_ids, const std::string& glyphs) {
  return build_bank(store, font_ids, glyphs, [&](const Tensor& x) { return backbone.forward(x); });
}

GlyphBank compute_font_distributions(FontClassifier& model, corpus::GlyphStore& store,
                                     const std::vector<std::string>& font_ids,
                                     const std::string& glyphs) {
  return build_bank(store, font_ids, glyphs, [&](const Tensor& x) { return model.predict(x); });
}

GlyphBank compute_tag_probabilities(TagRecognizer& model, corpus::GlyphStore& store,
                                    const std::vector<std::string>& font_ids,
                                    const std::string& glyphs) {
  return build_bank(store, font_ids, glyphs,
                    [&](const Tensor& x) { return model.predict_tags(model.extract_features(x)); });
}

std::vector<Scalar> font_tag_probabilities(TagRecognizer& model, corpus::GlyphStore& store,
                                           const std::string& font_id, const std::string& glyphs) {
  const GlyphBank bank = compute_tag_probabilities(model, store, {font_id}, glyphs);
  std::vector<std::vector<Scalar>> rows;
  for (int g = 0; g < bank.n_glyphs(); ++g) {
    auto r = bank.row(0, g);
    rows.emplace_back(r.begin(), r.end());
  }
  return mean_probabilities(rows);
}

std::vector<std::vector<Scalar>> font_means(const GlyphBank& bank) {
  std::vector<std::vector<Scalar>> out;
  for (int f = 0; f < static_cast<int>(bank.font_ids.size()); ++f) {
    std::vector<std::vector<Scalar>> rows;
    for (int g = 0; g < bank.n_glyphs(); ++g) {
      auto r = bank.row(f, g);
      rows.emplace_back(r.begin(), r.end());
    }
    out.push_back(mean_probabilities(rows));
  }
  return out;
}

}  // namespace tagfont::recognizer
