#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tagfont::corpus {

// The 52 Roman letters, lowercase first. Glyph index j refers to this order.
inline constexpr std::string_view kGlyphSet =
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
inline constexpr int kNumGlyphs = 52;

bool is_glyph(char c);
int glyph_index(char c);  // throws InvalidArgument for unsupported characters

// Style parameters of a synthesized font. Geometry is expressed in em units
// where the glyph box is [0,1]^2.
struct FontParams {
  double weight = 0.3;          // stroke-width, normalized to [0,1]
  double slant_degrees = 0.0;
  bool serif = false;
  double serif_length = 0.0;    // em, only used when serif
  bool rounded = false;
  bool outline = false;
  bool shadow = false;
  double shadow_offset = 0.0;   // em, only used when shadow
  double width_ratio = 1.0;
  bool rough = false;
  double rough_amount = 0.0;    // em, only used when rough
  std::uint64_t noise_seed = 0;

  // Pen width in em for this weight.
  double pen_width() const { return 0.03 + 0.11 * weight; }
  bool operator==(const FontParams&) const = default;
};

// The fixed neutral font used to condition the glyph generator.
FontParams standard_font_params();

// Grayscale raster in [0,1]; 1 is white background, 0 is full ink.
struct GlyphImage {
  int size = 0;
  char character = 0;
  std::string font_id;
  std::vector<float> pixels;  // row-major, size*size

  float at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * size + col]; }
};

// Deterministic anti-aliased rasterization of one glyph.
GlyphImage render_glyph(const FontParams& params, char character, int size,
                        std::string font_id = {});

// Signed distance (em) to the ink region of the glyph before outline/shadow
// styling; negative inside strokes. Exposed for render tests.
double glyph_signed_distance(const FontParams& params, char character, double x, double y);

}  // namespace tagfont::corpus
