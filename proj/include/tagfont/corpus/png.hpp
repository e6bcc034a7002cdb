#pragma once

#include <string>
#include <vector>

#include "tagfont/corpus/glyph.hpp"

namespace tagfont::corpus {

// 8-bit grayscale PNG of a [0,1] image (values are clamped and rounded).
std::string encode_png_gray(const std::vector<float>& pixels, int width, int height);
std::string encode_png(const GlyphImage& img);
void write_png(const GlyphImage& img, const std::string& path);

// Decodes an 8-bit grayscale PNG back to [0,1] values (used by tests).
std::vector<float> decode_png_gray(const std::string& bytes, int& width, int& height);

// `<font_id>_<codepoint>.png`
std::string glyph_filename(const std::string& font_id, char c);

}  // namespace tagfont::corpus
