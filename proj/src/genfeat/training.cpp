#include "tagfont/genfeat/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tagfont/common/errors.hpp"
#include "tagfont/corpus/png.hpp"
#include "tagfont/nn/optim.hpp"

namespace tagfont::genfeat {

using recognizer::EpochLog;
using recognizer::GlyphBank;

namespace {

struct StepOut {
  GanLosses losses;
  Tensor feature_grad;
};

// One discriminator update followed by one generator update on L_lgan.
StepOut gan_step(GanModel& gan, nn::Adam& g_opt, nn::Adam& d_opt, const Tensor& features,
                 const Tensor& standard, const Tensor& real, nn::Rng& rng) {
  StepOut out;
  const Tensor fake = gan.generator.forward(features, standard, true, rng);

  d_opt.zero_grad();
  const Tensor z_real = gan.discriminator.forward(real, standard);
  Tensor g_real, g_fake;
  const Tensor z_fake = gan.discriminator.forward(fake, standard);
  out.losses.d_loss = discriminator_loss(z_real, z_fake, &g_real, &g_fake);
  gan.discriminator.backward(g_fake);
  gan.discriminator.forward(real, standard);
  gan.discriminator.backward(g_real);
  d_opt.step();

  Tensor g_adv, g_l1;
  const Tensor z_fake2 = gan.discriminator.forward(fake, standard);
  out.losses.g_adv = generator_adv_loss(z_fake2, &g_adv);
  out.losses.l1 = l1_loss(fake, real, &g_l1);
  Tensor g_img = gan.discriminator.backward(g_adv);
  g_img.add_(g_l1, gan.config.lambda_l1);
  g_opt.zero_grad();
  out.feature_grad = gan.generator.backward(g_img);
  g_opt.step();

  if (!std::isfinite(out.losses.d_loss) || !std::isfinite(out.losses.g_adv) ||
      !std::isfinite(out.losses.l1)) {
    throw NumericalDivergence("train-stage2: non-finite GAN loss (d=" +
                              std::to_string(out.losses.d_loss) + ", g=" +
                              std::to_string(out.losses.g_adv) + ")");
  }
  return out;
}

struct PairBatch {
  Tensor standard, real, source;  // source images only filled when requested
  std::vector<int> bank_rows;
};

PairBatch make_batch(corpus::GlyphStore& store, const std::vector<std::string>& ids,
                     const std::vector<PairSample>& pairs, std::size_t b, std::size_t e,
                     bool with_source, int n_glyphs) {
  std::vector<const corpus::GlyphImage*> std_imgs, real_imgs, src_imgs;
  PairBatch out;
  for (std::size_t i = b; i < e; ++i) {
    const auto& p = pairs[i];
    const std::string& id = ids[static_cast<std::size_t>(p.font)];
    const char target = corpus::kGlyphSet[static_cast<std::size_t>(p.target_glyph)];
    std_imgs.push_back(&store.standard(target));
    real_imgs.push_back(&store.glyph(id, target));
    if (with_source) src_imgs.push_back(&store.glyph(id, p.source_glyph));
    out.bank_rows.push_back(p.font * n_glyphs + p.source_glyph);
  }
  out.standard = recognizer::images_to_tensor(std_imgs);
  out.real = recognizer::images_to_tensor(real_imgs);
  if (with_source) out.source = recognizer::images_to_tensor(src_imgs);
  return out;
}

Tensor bank_rows(const GlyphBank& bank, const std::vector<int>& rows) {
  Tensor t({static_cast<int>(rows.size()), bank.width()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = bank.values.slice(rows[i]);
    std::copy(src.begin(), src.end(), t.slice(static_cast<int>(i)).begin());
  }
  return t;
}

}  // namespace

std::vector<PairSample> sample_pairs(int n_fonts, int per_font, nn::Rng& rng) {
  std::uniform_int_distribution<int> glyph(0, corpus::kNumGlyphs - 1);
  std::vector<PairSample> out;
  for (int f = 0; f < n_fonts; ++f)
    for (int s = 0; s < per_font; ++s) {
      const int src = glyph(rng);
      const int tgt = glyph(rng);
      out.push_back({f, src, tgt});
    }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

double probe_l1(GanModel& gan, const GlyphBank& features, corpus::GlyphStore& store,
                const std::vector<PairSample>& pairs) {
  if (pairs.empty()) return 0.0;
  nn::Rng unused(0);
  double total = 0;
  constexpr std::size_t kBatch = 26;
  for (std::size_t b = 0; b < pairs.size(); b += kBatch) {
    const std::size_t e = std::min(pairs.size(), b + kBatch);
    const PairBatch batch = make_batch(store, features.font_ids, pairs, b, e, false, features.n_glyphs());
    const Tensor fake =
        gan.generator.forward(bank_rows(features, batch.bank_rows), batch.standard, false, unused);
    total += l1_loss(fake, batch.real, nullptr) * static_cast<double>(e - b);
  }
  return total / static_cast<double>(pairs.size());
}

Stage2Result train_stage2(const recognizer::TagRecognizer& stage1, const corpus::DatasetManifest& m,
                          corpus::GlyphStore& store, const GanConfig& config,
                          const Stage2Options& options,
                          const recognizer::TrainOptions& tag_options) {
  const auto& train = m.splits.train;
  if (train.empty()) throw InvalidArgument("train-stage2: empty train split");
  config.validate();
  if (config.feature_dim != stage1.feature_dim()) {
    throw ConfigError("train-stage2: GAN feature_dim " + std::to_string(config.feature_dim) +
                      " differs from the recognizer's " + std::to_string(stage1.feature_dim()));
  }
  if (config.image_size != store.image_size() || config.image_size != stage1.config().input_size) {
    throw ConfigError("train-stage2: GAN image_size differs from the glyph size");
  }

  Stage2Result out{stage1, GanModel(config), {}, 0, 0, {}, 0, false};
  recognizer::TagRecognizer& model = out.model;
  GanModel& gan = out.gan;
  nn::Rng init_rng(config.seed);
  gan.init(init_rng);
  nn::ParameterList g_params, d_params;
  gan.generator.collect(g_params);
  gan.discriminator.collect(d_params);
  const double lr_gan = options.lr_gan * options.lr_multiplier;
  nn::Adam g_opt(g_params, lr_gan, options.gan_adam_beta1);
  nn::Adam d_opt(d_params, lr_gan, options.gan_adam_beta1);

  nn::Rng rng(options.seed);
  nn::Rng probe_rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  const int n = static_cast<int>(train.size());
  const auto probes = sample_pairs(n, options.probe_pairs_per_font, probe_rng);
  const std::size_t bs = static_cast<std::size_t>(options.batch_size);

  // ---- phase A: frozen features
  GlyphBank features = recognizer::compute_features(model.backbone(), store, train);
  out.initial_probe_l1 = probe_l1(gan, features, store, probes);
  double smoothed = -1;
  int flat = 0;
  for (int epoch = 1; epoch <= options.max_phase_a_epochs; ++epoch) {
    const auto pairs = sample_pairs(n, options.samples_per_font, rng);
    double l1_sum = 0, d_sum = 0;
    int batches = 0;
    for (std::size_t b = 0; b < pairs.size(); b += bs) {
      const std::size_t e = std::min(pairs.size(), b + bs);
      const PairBatch batch = make_batch(store, train, pairs, b, e, false, features.n_glyphs());
      const StepOut s = gan_step(gan, g_opt, d_opt, bank_rows(features, batch.bank_rows),
                                 batch.standard, batch.real, rng);
      l1_sum += s.losses.l1;
      d_sum += s.losses.d_loss;
      ++batches;
    }
    const double l1 = l1_sum / batches;
    out.phase_a_l1.push_back(l1);
    out.log.push_back({epoch, "phaseA-l1", l1, d_sum / batches});
    out.phase_a_epochs = epoch;
    if (smoothed < 0) {
      smoothed = l1;
      continue;
    }
    const double next = options.smoothing * l1 + (1 - options.smoothing) * smoothed;
    const double gain = (smoothed - next) / std::max(smoothed, 1e-12);
    smoothed = next;
    flat = gain < options.converge_tol ? flat + 1 : 0;
    if (flat >= options.converge_window) {
      out.phase_a_converged = true;
      break;
    }
  }
  out.phase_a_probe_l1 = probe_l1(gan, features, store, probes);

  // ---- phase B: alternating sub-epochs
  nn::Adam bb_opt(model.backbone_params(), options.lr_backbone * options.lr_multiplier);
  nn::Adam head_opt(model.head_params(), options.lr_head * options.lr_multiplier);
  const nn::ParameterList bb_params = model.backbone_params();
  for (int epoch = 1; epoch <= options.phase_b_epochs; ++epoch) {
    const auto pairs = sample_pairs(n, options.samples_per_font, rng);
    double lgan_sum = 0;
    int batches = 0;
    for (std::size_t b = 0; b < pairs.size(); b += bs) {
      const std::size_t e = std::min(pairs.size(), b + bs);
      const PairBatch batch = make_batch(store, train, pairs, b, e, true, corpus::kNumGlyphs);
      const Tensor feats = model.extract_features(batch.source);
      StepOut s = gan_step(gan, g_opt, d_opt, feats, batch.standard, batch.real, rng);
      nn::zero_grads(bb_params);
      s.feature_grad.scale_(config.beta);
      model.backbone().backward(s.feature_grad);
      bb_opt.step();
      lgan_sum += s.losses.lgan(config.lambda_l1);
      ++batches;
    }
    out.log.push_back({epoch, "phaseB-gan", lgan_sum / batches, 0.0});
    const auto [loss, acc] = recognizer::run_tag_epoch(
        model, store, tag_options, rng, &bb_opt, &head_opt,
        "train-stage2 phase B epoch " + std::to_string(epoch));
    out.log.push_back({epoch, "phaseB-tag", loss, acc});
    if (!m.splits.val.empty()) {
      const auto [vl, va] = recognizer::evaluate_tag_loss(model, store, m.splits.val, tag_options.val_glyphs);
      out.log.push_back({epoch, "val", vl, va});
    }
  }
  return out;
}

MaskMode mask_mode_from_string(const std::string& s) {
  if (s == "top") return MaskMode::kTop;
  if (s == "bottom") return MaskMode::kBottom;
  if (s == "cross") return MaskMode::kCross;
  throw InvalidArgument("unknown mask mode '" + s + "' (expected top, bottom or cross)");
}

std::vector<Scalar> mask_feature(std::span<const Scalar> feature, std::span<const Scalar> attention,
                                 int k, MaskMode mode) {
  if (feature.size() != attention.size()) {
    throw InvalidArgument("mask_feature: attention map length differs from feature length");
  }
  if (k < 0 || k > static_cast<int>(feature.size())) {
    throw InvalidArgument("mask_feature: k=" + std::to_string(k) + " out of range [0, " +
                          std::to_string(feature.size()) + "]");
  }
  std::vector<std::size_t> order(feature.size());
  std::iota(order.begin(), order.end(), 0);
  const bool high = mode != MaskMode::kBottom;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return high ? attention[a] > attention[b] : attention[a] < attention[b];
  });
  std::vector<Scalar> out(feature.size(), 0.0);
  for (int i = 0; i < k; ++i) out[order[static_cast<std::size_t>(i)]] = feature[order[static_cast<std::size_t>(i)]];
  return out;
}

corpus::GlyphImage masked_reconstruction(GanModel& gan, std::span<const Scalar> feature,
                                         std::span<const Scalar> attention, int k, MaskMode mode,
                                         corpus::GlyphStore& store, char character) {
  const auto masked = mask_feature(feature, attention, k, mode);
  Tensor f({1, static_cast<int>(masked.size())});
  std::copy(masked.begin(), masked.end(), f.data());
  nn::Rng unused(0);
  const Tensor out = gan.generator.forward(
      f, recognizer::images_to_tensor({&store.standard(character)}), false, unused);
  return to_glyph_image(out, 0, character, "reconstruction");
}

std::string sample_sheet_png(const std::vector<corpus::GlyphImage>& real,
                             const std::vector<corpus::GlyphImage>& generated) {
  if (real.empty() || real.size() != generated.size()) {
    throw InvalidArgument("sample sheet: need matching, nonempty image lists");
  }
  const int s = real.front().size;
  const int w = 2 * s, h = s * static_cast<int>(real.size());
  std::vector<float> px(static_cast<std::size_t>(w) * h, 1.0f);
  for (std::size_t r = 0; r < real.size(); ++r)
    for (int col = 0; col < 2; ++col) {
      const auto& img = col == 0 ? real[r] : generated[r];
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
          px[(static_cast<std::size_t>(r) * s + y) * w + col * s + x] = img.at(y, x);
    }
  return corpus::encode_png_gray(px, w, h);
}

}  // namespace tagfont::genfeat
