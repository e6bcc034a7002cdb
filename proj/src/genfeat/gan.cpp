#include "tagfont/genfeat/gan.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "tagfont/common/errors.hpp"

namespace tagfont::genfeat {

using nlohmann::json;

namespace {

// Kernel and stride of the last discriminator conv so that an in x in map
// becomes grid x grid without padding.
std::pair<int, int> final_kernel(int in, int grid) {
  const int stride = in >= 2 * grid ? 2 : 1;
  return {in - stride * (grid - 1), stride};
}

}  // namespace

// ---------------------------------------------------------------- config

void GanConfig::validate() const {
  if (lambda_l1 < 0) throw ConfigError("gan: lambda_l1 must be >= 0");
  if (beta < 0) throw ConfigError("gan: beta must be >= 0");
  if (patch_grid < 1) throw ConfigError("gan: patch_grid must be >= 1");
  if (dropout_rate < 0 || dropout_rate >= 1) throw ConfigError("gan: dropout_rate must be in [0,1)");
  if (image_size < 4 || image_size % 8 != 0) {
    // the toy 4x4 setup only needs the discriminator
    if (image_size != 4) throw ConfigError("gan: image_size must be a multiple of 8");
  }
  if (gen_widths.size() != 3) throw ConfigError("gan: gen_widths needs three entries");
  if (feature_dim <= 0 || disc_width <= 0) throw ConfigError("gan: widths must be positive");
  if (final_kernel(image_size / 4, patch_grid).first < 1) {
    throw ConfigError("gan: patch_grid " + std::to_string(patch_grid) + " too large for image size " +
                      std::to_string(image_size));
  }
}

std::string GanConfig::to_json() const {
  return json{{"lambda_l1", lambda_l1},   {"beta", beta},
              {"patch_grid", patch_grid}, {"dropout_rate", dropout_rate},
              {"image_size", image_size}, {"feature_dim", feature_dim},
              {"gen_widths", gen_widths}, {"disc_width", disc_width},
              {"seed", seed}}
      .dump();
}

GanConfig GanConfig::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    GanConfig c;
    c.lambda_l1 = j.at("lambda_l1");
    c.beta = j.at("beta");
    c.patch_grid = j.at("patch_grid");
    c.dropout_rate = j.at("dropout_rate");
    c.image_size = j.at("image_size");
    c.feature_dim = j.at("feature_dim");
    c.gen_widths = j.at("gen_widths").get<std::vector<int>>();
    c.disc_width = j.at("disc_width");
    c.seed = j.at("seed");
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("gan config: ") + e.what());
  }
}

// ---------------------------------------------------------------- generator

Generator::Generator(const GanConfig& config)
    : config_(config),
      drop1_(config.dropout_rate),
      drop2_(config.dropout_rate),
      c_e1_(config.gen_widths[0]),
      c_e2_(config.gen_widths[1]),
      c_e3_(config.gen_widths[2]) {
  config_.validate();
  enc1_ = nn::Conv2d("gen.enc1", 1, c_e1_, 4, 2, 1);
  enc2_ = nn::Conv2d("gen.enc2", c_e1_, c_e2_, 4, 2, 1);
  enc3_ = nn::Conv2d("gen.enc3", c_e2_, c_e3_, 4, 2, 1);
  bottleneck_ = nn::Conv2d("gen.bottleneck", c_e3_ + config.feature_dim, c_e3_, 1, 1, 0);
  dec1_ = nn::Conv2d("gen.dec1", c_e3_ + c_e2_, c_e2_, 3, 1, 1);
  dec2_ = nn::Conv2d("gen.dec2", c_e2_ + c_e1_, c_e1_, 3, 1, 1);
  out_ = nn::Conv2d("gen.out", c_e1_ + 1, 1, 3, 1, 1);
}

void Generator::init(nn::Rng& rng) {
  for (auto* c : {&enc1_, &enc2_, &enc3_, &bottleneck_, &dec1_, &dec2_}) c->init_he(rng);
  out_.init_he(rng, 1.0);
}

Tensor Generator::forward(const Tensor& features, const Tensor& standard, bool training,
                          nn::Rng& rng) {
  const int s = config_.image_size;
  if (standard.rank() != 4 || standard.dim(1) != 1 || standard.dim(2) != s || standard.dim(3) != s) {
    throw InvalidArgument("generator: expected standard glyphs [n, 1, " + std::to_string(s) + ", " +
                          std::to_string(s) + "], got " + standard.shape_string());
  }
  if (features.rank() != 2 || features.dim(0) != standard.dim(0) ||
      features.dim(1) != config_.feature_dim) {
    throw InvalidArgument("generator: feature dim mismatch, expected [" +
                          std::to_string(standard.dim(0)) + ", " +
                          std::to_string(config_.feature_dim) + "], got " + features.shape_string());
  }
  const Tensor e1 = act1_.forward(enc1_.forward(standard));
  const Tensor e2 = act2_.forward(enc2_.forward(e1));
  const Tensor e3 = act3_.forward(enc3_.forward(e2));
  const Tensor b = bott_relu_.forward(
      bottleneck_.forward(nn::concat_channels(e3, nn::tile_spatial(features, e3.dim(2), e3.dim(3)))));
  const Tensor d1 = drop1_.forward(
      dec1_relu_.forward(dec1_.forward(nn::concat_channels(up1_.forward(b), e2))), training, rng);
  const Tensor d2 = drop2_.forward(
      dec2_relu_.forward(dec2_.forward(nn::concat_channels(up2_.forward(d1), e1))), training, rng);
  return sigmoid_.forward(out_.forward(nn::concat_channels(up3_.forward(d2), standard)));
}

Tensor Generator::backward(const Tensor& grad_out) {
  Tensor g_up, g_skip;
  nn::split_channels(out_.backward(sigmoid_.backward(grad_out)), c_e1_, g_up, g_skip);
  Tensor g = up3_.backward(g_up);

  nn::split_channels(dec2_.backward(dec2_relu_.backward(drop2_.backward(g))), c_e2_, g_up, g_skip);
  Tensor g_e1 = g_skip;
  g = up2_.backward(g_up);

  nn::split_channels(dec1_.backward(dec1_relu_.backward(drop1_.backward(g))), c_e3_, g_up, g_skip);
  Tensor g_e2 = g_skip;
  g = up1_.backward(g_up);

  Tensor g_e3, g_tiled;
  nn::split_channels(bottleneck_.backward(bott_relu_.backward(g)), c_e3_, g_e3, g_tiled);
  Tensor g_features = nn::untile_spatial(g_tiled);

  g_e2.add_(enc3_.backward(act3_.backward(g_e3)));
  g_e1.add_(enc2_.backward(act2_.backward(g_e2)));
  enc1_.backward(act1_.backward(g_e1));
  return g_features;
}

void Generator::collect(nn::ParameterList& out) {
  for (auto* c : {&enc1_, &enc2_, &enc3_, &bottleneck_, &dec1_, &dec2_, &out_}) c->collect(out);
}

// ---------------------------------------------------------------- discriminator

Discriminator::Discriminator(const GanConfig& config) {
  config.validate();
  const int w = config.disc_width;
  c1_ = nn::Conv2d("disc.c1", 2, w, 4, 2, 1);
  c2_ = nn::Conv2d("disc.c2", w, 2 * w, 4, 2, 1);
  const auto [k, stride] = final_kernel(config.image_size / 4, config.patch_grid);
  c3_ = nn::Conv2d("disc.c3", 2 * w, 1, k, stride, 0);
}

void Discriminator::init(nn::Rng& rng) {
  c1_.init_he(rng);
  c2_.init_he(rng);
  c3_.init_he(rng, 1.0);
}

Tensor Discriminator::forward(const Tensor& candidate, const Tensor& standard) {
  if (!candidate.same_shape(standard) || candidate.rank() != 4 || candidate.dim(1) != 1) {
    throw InvalidArgument("discriminator: shape mismatch " + candidate.shape_string() + " vs " +
                          standard.shape_string());
  }
  const Tensor h = a1_.forward(c1_.forward(nn::concat_channels(candidate, standard)));
  return c3_.forward(a2_.forward(c2_.forward(h)));
}

Tensor Discriminator::backward(const Tensor& grad_logits) {
  const Tensor g = c1_.backward(a1_.backward(c2_.backward(a2_.backward(c3_.backward(grad_logits)))));
  Tensor g_cand, g_std;
  nn::split_channels(g, 1, g_cand, g_std);
  return g_cand;
}

void Discriminator::collect(nn::ParameterList& out) {
  c1_.collect(out);
  c2_.collect(out);
  c3_.collect(out);
}

// ---------------------------------------------------------------- losses

Tensor patch_probabilities(const Tensor& logits) {
  Tensor p = logits;
  for (auto& v : p.values()) v = nn::sigmoid(v);
  return p;
}

GanLosses gan_step_losses(const Tensor& real, const Tensor& fake, const Tensor& d_real,
                          const Tensor& d_fake) {
  if (!real.same_shape(fake)) {
    throw InvalidArgument("gan losses: image shapes differ " + real.shape_string() + " vs " +
                          fake.shape_string());
  }
  if (!d_real.same_shape(d_fake)) throw InvalidArgument("gan losses: patch grid shapes differ");
  constexpr double kTiny = 1e-12;
  GanLosses out;
  for (std::size_t i = 0; i < d_real.size(); ++i) {
    out.d_loss -= std::log(std::max(d_real[i], kTiny)) + std::log(std::max(1 - d_fake[i], kTiny));
    out.g_adv -= std::log(std::max(d_fake[i], kTiny));
  }
  out.d_loss /= static_cast<double>(d_real.size());
  out.g_adv /= static_cast<double>(d_real.size());
  out.l1 = l1_loss(fake, real, nullptr);
  if (!std::isfinite(out.d_loss) || !std::isfinite(out.g_adv) || !std::isfinite(out.l1)) {
    throw NumericalDivergence("gan losses: non-finite value");
  }
  return out;
}

double discriminator_loss(const Tensor& real_logits, const Tensor& fake_logits, Tensor* grad_real,
                          Tensor* grad_fake) {
  if (!real_logits.same_shape(fake_logits)) throw InvalidArgument("discriminator_loss: shape mismatch");
  const double inv = 1.0 / static_cast<double>(real_logits.size());
  if (grad_real) *grad_real = Tensor::like(real_logits);
  if (grad_fake) *grad_fake = Tensor::like(fake_logits);
  double loss = 0;
  for (std::size_t i = 0; i < real_logits.size(); ++i) {
    loss += nn::softplus(-real_logits[i]) + nn::softplus(fake_logits[i]);
    if (grad_real) (*grad_real)[i] = (nn::sigmoid(real_logits[i]) - 1) * inv;
    if (grad_fake) (*grad_fake)[i] = nn::sigmoid(fake_logits[i]) * inv;
  }
  return loss * inv;
}

double generator_adv_loss(const Tensor& fake_logits, Tensor* grad_fake) {
  const double inv = 1.0 / static_cast<double>(fake_logits.size());
  if (grad_fake) *grad_fake = Tensor::like(fake_logits);
  double loss = 0;
  for (std::size_t i = 0; i < fake_logits.size(); ++i) {
    loss += nn::softplus(-fake_logits[i]);
    if (grad_fake) (*grad_fake)[i] = (nn::sigmoid(fake_logits[i]) - 1) * inv;
  }
  return loss * inv;
}

double l1_loss(const Tensor& fake, const Tensor& real, Tensor* grad_fake) {
  if (!fake.same_shape(real)) throw InvalidArgument("l1_loss: shape mismatch");
  const double inv = 1.0 / static_cast<double>(fake.size());
  if (grad_fake) *grad_fake = Tensor::like(fake);
  double loss = 0;
  for (std::size_t i = 0; i < fake.size(); ++i) {
    const double d = fake[i] - real[i];
    loss += std::abs(d);
    if (grad_fake) (*grad_fake)[i] = (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) * inv;
  }
  return loss * inv;
}

// ---------------------------------------------------------------- persistence

void GanModel::save(nn::Checkpoint& ckpt, const std::string& prefix) const {
  auto& self = const_cast<GanModel&>(*this);
  ckpt.set_text(prefix + ".config", config.to_json());
  nn::ParameterList params;
  self.generator.collect(params);
  self.discriminator.collect(params);
  ckpt.put(params, prefix + "/");
}

GanModel GanModel::load(const nn::Checkpoint& ckpt, const std::string& prefix) {
  if (!ckpt.has_text(prefix + ".config")) throw FormatError("checkpoint has no GAN model");
  GanModel m(GanConfig::from_json(ckpt.text(prefix + ".config")));
  nn::ParameterList params;
  m.generator.collect(params);
  m.discriminator.collect(params);
  ckpt.get(params, prefix + "/");
  return m;
}

corpus::GlyphImage to_glyph_image(const Tensor& ink, int n, char character, const std::string& font_id) {
  corpus::GlyphImage img;
  img.size = ink.dim(2);
  img.character = character;
  img.font_id = font_id;
  auto s = ink.slice(n);
  img.pixels.reserve(s.size());
  for (double v : s) img.pixels.push_back(static_cast<float>(std::clamp(1.0 - v, 0.0, 1.0)));
  return img;
}

}  // namespace tagfont::genfeat
