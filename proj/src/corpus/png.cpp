#include "tagfont/corpus/png.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "tagfont/common/errors.hpp"

namespace tagfont::corpus {

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

void no_flush(png_structp) {}

struct ReadCursor {
  const std::string* bytes;
  std::size_t pos;
};

void read_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(data, cur->bytes->data() + cur->pos, len);
  cur->pos += len;
}

}  // namespace

std::string encode_png_gray(const std::vector<float>& pixels, int width, int height) {
  if (pixels.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidArgument("encode_png_gray: pixel count mismatch");
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw FormatError("png: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  std::string out;
  std::vector<png_byte> rows(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    rows[i] = static_cast<png_byte>(std::lround(std::clamp(pixels[i], 0.0f, 1.0f) * 255.0f));
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("png: encode failed");
  }
  png_set_write_fn(png, &out, append_bytes, no_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < height; ++r) png_write_row(png, rows.data() + static_cast<std::size_t>(r) * width);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::string encode_png(const GlyphImage& img) { return encode_png_gray(img.pixels, img.size, img.size); }

void write_png(const GlyphImage& img, const std::string& path) {
  const std::string bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<float> decode_png_gray(const std::string& bytes, int& width, int& height) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8)) {
    throw FormatError("png: bad signature");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  ReadCursor cur{&bytes, 0};
  std::vector<float> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: decode failed");
  }
  png_set_read_fn(png, &cur, read_bytes);
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: expected 8-bit grayscale");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(width));
  out.reserve(static_cast<std::size_t>(width) * height);
  for (int r = 0; r < height; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (png_byte b : row) out.push_back(static_cast<float>(b) / 255.0f);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

std::string glyph_filename(const std::string& font_id, char c) {
  return font_id + "_" + std::to_string(static_cast<int>(static_cast<unsigned char>(c))) + ".png";
}

}  // namespace tagfont::corpus
