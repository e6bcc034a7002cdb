#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagfont/corpus/manifest.hpp"
#include "tagfont/genfeat/gan.hpp"
#include "tagfont/recognizer/training.hpp"

namespace tagfont::genfeat {

struct Stage2Options {
  int max_phase_a_epochs = 50;
  // Phase A stops once the smoothed L1 improves by less than converge_tol
  // (relative) for converge_window consecutive epochs.
  double converge_tol = 0.01;
  int converge_window = 3;
  double smoothing = 0.5;  // EMA weight of the newest epoch
  int phase_b_epochs = 4;
  int batch_size = 20;
  int samples_per_font = 4;
  double lr_gan = 2e-3;
  double lr_backbone = 5e-4;
  double lr_head = 5e-3;
  double lr_multiplier = 1.0;
  double gan_adam_beta1 = 0.5;
  std::uint64_t seed = 4;
  // Number of fixed (font, source glyph, target glyph) probes per train font
  // used to measure reconstruction L1 with dropout off.
  int probe_pairs_per_font = 4;
};

// One (source font glyph -> target character) reconstruction example.
struct PairSample {
  int font = 0;          // position in the train split
  int source_glyph = 0;  // glyph whose feature conditions G
  int target_glyph = 0;  // glyph to reconstruct (via the standard font)
};

std::vector<PairSample> sample_pairs(int n_fonts, int per_font, nn::Rng& rng);

struct Stage2Result {
  recognizer::TagRecognizer model;
  GanModel gan;
  std::vector<recognizer::EpochLog> log;
  double initial_probe_l1 = 0;      // before any GAN update
  double phase_a_probe_l1 = 0;      // after phase A
  std::vector<double> phase_a_l1;   // per-epoch mean training L1
  int phase_a_epochs = 0;
  bool phase_a_converged = false;
};

// Phase A trains G and D on frozen features; phase B alternates backbone
// updates driven by beta * L_lgan (tag head frozen) with tag-loss updates of
// backbone + head. max_phase_a_epochs = 0 or phase_b_epochs = 0 skip a phase.
Stage2Result train_stage2(const recognizer::TagRecognizer& stage1, const corpus::DatasetManifest& m,
                          corpus::GlyphStore& store, const GanConfig& config,
                          const Stage2Options& options,
                          const recognizer::TrainOptions& tag_options);

// Mean L1 between G(f_i^j, I_s^t) and I_i^t over probe pairs, dropout off.
double probe_l1(GanModel& gan, const recognizer::GlyphBank& features, corpus::GlyphStore& store,
                const std::vector<PairSample>& pairs);

enum class MaskMode { kTop, kBottom, kCross };
MaskMode mask_mode_from_string(const std::string& s);

// Keeps the k feature nodes with the highest (top, cross) or lowest (bottom)
// attention weight and zeroes the rest. For cross, pass another glyph's map.
std::vector<Scalar> mask_feature(std::span<const Scalar> feature, std::span<const Scalar> attention,
                                 int k, MaskMode mode);

// Regenerates `character` from the masked feature through the standard glyph,
// dropout off.
corpus::GlyphImage masked_reconstruction(GanModel& gan, std::span<const Scalar> feature,
                                         std::span<const Scalar> attention, int k, MaskMode mode,
                                         corpus::GlyphStore& store, char character);

// Grid of (real, generated) pairs, one row per example, as an 8-bit PNG.
std::string sample_sheet_png(const std::vector<corpus::GlyphImage>& real,
                             const std::vector<corpus::GlyphImage>& generated);

}  // namespace tagfont::genfeat
