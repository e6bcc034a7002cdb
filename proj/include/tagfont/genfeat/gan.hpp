#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagfont/corpus/glyph.hpp"
#include "tagfont/nn/checkpoint.hpp"
#include "tagfont/nn/layers.hpp"

namespace tagfont::genfeat {

using nn::Scalar;
using nn::Tensor;

struct GanConfig {
  double lambda_l1 = 10.0;
  double beta = 0.04;
  int patch_grid = 14;
  double dropout_rate = 0.5;
  int image_size = 64;
  int feature_dim = 256;
  std::vector<int> gen_widths = {8, 16, 32};  // three encoder levels
  int disc_width = 16;
  std::uint64_t seed = 3;

  void validate() const;  // throws ConfigError
  std::string to_json() const;
  static GanConfig from_json(const std::string& text);
};

// Encoder-decoder with skip connections. The conditioning feature is tiled
// over the bottleneck grid and concatenated with the deepest encoder map.
// Inputs and outputs are in ink space (0 = background).
class Generator {
 public:
  Generator() = default;
  explicit Generator(const GanConfig& config);

  void init(nn::Rng& rng);
  // features [n, D], standard glyphs [n, 1, S, S] -> [n, 1, S, S] in (0, 1).
  // Dropout is active only when training.
  Tensor forward(const Tensor& features, const Tensor& standard, bool training, nn::Rng& rng);
  // Accumulates parameter gradients; returns d/d features.
  Tensor backward(const Tensor& grad_out);
  void collect(nn::ParameterList& out);

 private:
  GanConfig config_;
  nn::Conv2d enc1_, enc2_, enc3_, bottleneck_, dec1_, dec2_, out_;
  nn::LeakyReLU act1_, act2_, act3_;
  nn::ReLU bott_relu_, dec1_relu_, dec2_relu_;
  nn::Dropout drop1_, drop2_;
  nn::Upsample2x up1_, up2_, up3_;
  nn::Sigmoid sigmoid_;
  int c_e1_ = 0, c_e2_ = 0, c_e3_ = 0;
};

// Conditional PatchGAN: three convolutions mapping (candidate, standard) to a
// patch_grid x patch_grid grid of logits.
class Discriminator {
 public:
  Discriminator() = default;
  explicit Discriminator(const GanConfig& config);

  void init(nn::Rng& rng);
  // candidate, standard [n, 1, S, S] -> logits [n, 1, G, G]
  Tensor forward(const Tensor& candidate, const Tensor& standard);
  // Accumulates parameter gradients; returns d/d candidate.
  Tensor backward(const Tensor& grad_logits);
  void collect(nn::ParameterList& out);

 private:
  nn::Conv2d c1_, c2_, c3_;
  nn::LeakyReLU a1_, a2_;
};

// Probability-space view of a patch grid: sigmoid of the logits.
Tensor patch_probabilities(const Tensor& logits);

struct GanLosses {
  double d_loss = 0;  // -[log D(real) + log(1 - D(fake))], patch mean
  double g_adv = 0;   // -log D(fake), patch mean
  double l1 = 0;      // mean |real - fake|
  double lgan(double lambda) const { return g_adv + lambda * l1; }
};

// Losses from discriminator probability grids. Throws NumericalDivergence on
// non-finite values and InvalidArgument on shape mismatch.
GanLosses gan_step_losses(const Tensor& real, const Tensor& fake, const Tensor& d_real,
                          const Tensor& d_fake);

// Logit-space forms with optional gradients.
double discriminator_loss(const Tensor& real_logits, const Tensor& fake_logits,
                          Tensor* grad_real, Tensor* grad_fake);
double generator_adv_loss(const Tensor& fake_logits, Tensor* grad_fake);
double l1_loss(const Tensor& fake, const Tensor& real, Tensor* grad_fake);

struct GanModel {
  GanConfig config;
  Generator generator;
  Discriminator discriminator;

  GanModel() = default;
  explicit GanModel(const GanConfig& c) : config(c), generator(c), discriminator(c) {}
  void init(nn::Rng& rng) {
    generator.init(rng);
    discriminator.init(rng);
  }
  void save(nn::Checkpoint& ckpt, const std::string& prefix = "gan") const;
  static GanModel load(const nn::Checkpoint& ckpt, const std::string& prefix = "gan");
};

// Ink-space tensor -> intensity image.
corpus::GlyphImage to_glyph_image(const Tensor& ink, int n, char character, const std::string& font_id);

}  // namespace tagfont::genfeat
