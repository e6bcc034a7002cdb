#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "tagfont/common/errors.hpp"
#include "tagfont/corpus/glyph.hpp"

namespace tagfont::corpus {

namespace {

// Stroke skeletons in em coordinates (y up). Baseline 0.2, x-height 0.52,
// cap height 0.82, ascender 0.85, descender ~0.02.
//   L x0 y0 x1 y1            straight stroke
//   A cx cy rx ry a0 a1      elliptical arc, degrees, counter-clockwise
constexpr std::array<const char*, kNumGlyphs> kSkeletons = {
    // a-z
    "A .48 .36 .15 .16 0 360; L .63 .52 .63 .2",
    "L .35 .85 .35 .2; A .5 .36 .15 .16 0 360",
    "A .52 .36 .16 .16 45 315",
    "A .5 .36 .15 .16 0 360; L .65 .85 .65 .2",
    "L .35 .37 .67 .37; A .51 .36 .16 .16 0 320",
    "A .6 .72 .12 .13 20 180; L .48 .72 .48 .2; L .38 .52 .62 .52",
    "A .5 .36 .15 .16 0 360; L .65 .52 .65 .1; A .5 .1 .15 .08 180 360",
    "L .35 .85 .35 .2; A .5 .4 .15 .12 0 180; L .65 .4 .65 .2",
    "L .5 .52 .5 .2; L .5 .66 .5 .68",
    "L .55 .52 .55 .1; A .42 .1 .13 .08 180 360; L .55 .66 .55 .68",
    "L .36 .85 .36 .2; L .36 .32 .64 .52; L .45 .39 .66 .2",
    "L .5 .85 .5 .2",
    "L .27 .52 .27 .2; A .385 .42 .115 .1 0 180; L .5 .42 .5 .2; "
    "A .615 .42 .115 .1 0 180; L .73 .42 .73 .2",
    "L .35 .52 .35 .2; A .5 .4 .15 .12 0 180; L .65 .4 .65 .2",
    "A .5 .36 .16 .16 0 360",
    "L .35 .52 .35 .0; A .5 .36 .15 .16 0 360",
    "A .5 .36 .15 .16 0 360; L .65 .52 .65 .0",
    "L .38 .52 .38 .2; A .53 .4 .15 .12 60 180",
    "A .5 .445 .13 .075 30 270; A .5 .275 .13 .075 -150 90",
    "L .48 .72 .48 .28; A .58 .28 .1 .08 180 300; L .38 .52 .62 .52",
    "L .35 .52 .35 .32; A .5 .32 .15 .12 180 360; L .65 .52 .65 .2",
    "L .32 .52 .5 .2; L .5 .2 .68 .52",
    "L .24 .52 .37 .2; L .37 .2 .5 .44; L .5 .44 .63 .2; L .63 .2 .76 .52",
    "L .33 .52 .67 .2; L .33 .2 .67 .52",
    "L .32 .52 .5 .2; L .68 .52 .4 .02",
    "L .33 .52 .67 .52; L .67 .52 .33 .2; L .33 .2 .67 .2",
    // A-Z
    "L .3 .2 .5 .82; L .5 .82 .7 .2; L .38 .42 .62 .42",
    "L .32 .2 .32 .82; L .32 .82 .52 .82; A .52 .665 .155 .155 -90 90; "
    "L .32 .51 .54 .51; A .54 .355 .155 .155 -90 90; L .32 .2 .54 .2",
    "A .52 .51 .22 .31 45 315",
    "L .32 .2 .32 .82; L .32 .82 .45 .82; L .32 .2 .45 .2; A .45 .51 .23 .31 -90 90",
    "L .33 .2 .33 .82; L .33 .82 .68 .82; L .33 .51 .62 .51; L .33 .2 .68 .2",
    "L .33 .2 .33 .82; L .33 .82 .68 .82; L .33 .51 .62 .51",
    "A .52 .51 .22 .31 45 340; L .73 .40 .73 .24; L .58 .40 .73 .40",
    "L .3 .2 .3 .82; L .7 .2 .7 .82; L .3 .51 .7 .51",
    "L .5 .2 .5 .82; L .4 .82 .6 .82; L .4 .2 .6 .2",
    "L .62 .82 .62 .35; A .47 .35 .15 .15 180 360",
    "L .32 .2 .32 .82; L .32 .42 .68 .82; L .42 .53 .7 .2",
    "L .33 .2 .33 .82; L .33 .2 .68 .2",
    "L .26 .2 .26 .82; L .26 .82 .5 .4; L .5 .4 .74 .82; L .74 .82 .74 .2",
    "L .3 .2 .3 .82; L .3 .82 .7 .2; L .7 .2 .7 .82",
    "A .5 .51 .22 .31 0 360",
    "L .32 .2 .32 .82; L .32 .82 .52 .82; A .52 .665 .155 .155 -90 90; L .32 .51 .52 .51",
    "A .5 .51 .22 .31 0 360; L .55 .33 .72 .16",
    "L .32 .2 .32 .82; L .32 .82 .52 .82; A .52 .665 .155 .155 -90 90; "
    "L .32 .51 .52 .51; L .5 .51 .7 .2",
    "A .5 .665 .18 .155 30 270; A .5 .355 .18 .155 -150 90",
    "L .28 .82 .72 .82; L .5 .82 .5 .2",
    "L .3 .82 .3 .4; A .5 .4 .2 .2 180 360; L .7 .4 .7 .82",
    "L .28 .82 .5 .2; L .5 .2 .72 .82",
    "L .22 .82 .36 .2; L .36 .2 .5 .6; L .5 .6 .64 .2; L .64 .2 .78 .82",
    "L .3 .82 .7 .2; L .3 .2 .7 .82",
    "L .28 .82 .5 .5; L .72 .82 .5 .5; L .5 .5 .5 .2",
    "L .3 .82 .7 .82; L .7 .82 .3 .2; L .3 .2 .7 .2",
};

constexpr std::array<double, 6> kSerifLevels = {0.0, 0.02, 0.2, 0.52, 0.82, 0.85};
constexpr double kShearCenter = 0.5;
constexpr double kOutlineHalfBand = 0.012;
constexpr double kShadowInk = 0.55;
constexpr double kBallScale = 1.6;  // terminal radius / stroke half-width

struct Segment {
  double ax, ay, bx, by;
  double half_width;
  bool square_a, square_b;
};

struct Primitive {
  bool arc;
  double v[6];
};

std::vector<Primitive> parse_skeleton(const char* text) {
  std::vector<Primitive> prims;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    std::stringstream is(item);
    std::string op;
    is >> op;
    if (op.empty()) continue;
    Primitive p{op == "A", {}};
    const int n = p.arc ? 6 : 4;
    for (int i = 0; i < n; ++i) is >> p.v[i];
    prims.push_back(p);
  }
  return prims;
}

const std::vector<std::vector<Primitive>>& skeletons() {
  static const std::vector<std::vector<Primitive>> table = [] {
    std::vector<std::vector<Primitive>> t;
    for (const char* s : kSkeletons) t.push_back(parse_skeleton(s));
    return t;
  }();
  return table;
}

bool near_serif_level(double y) {
  return std::any_of(kSerifLevels.begin(), kSerifLevels.end(),
                     [y](double l) { return std::abs(y - l) < 0.03; });
}

double segment_distance(const Segment& s, double x, double y);

std::vector<Segment> build_segments(const FontParams& p, char c) {
  const auto& prims = skeletons()[static_cast<std::size_t>(glyph_index(c))];
  const double hw = 0.5 * p.pen_width();
  const bool square = !p.rounded;
  std::vector<Segment> segs;
  std::vector<std::pair<double, double>> ends;  // stroke endpoints, for ball terminals
  std::vector<std::size_t> owner;               // primitive index of each segment
  for (const auto& prim : prims) {
    if (!prim.arc) {
      const double ax = prim.v[0], ay = prim.v[1], bx = prim.v[2], by = prim.v[3];
      segs.push_back({ax, ay, bx, by, hw, square, square});
      ends.emplace_back(ax, ay);
      ends.emplace_back(bx, by);
      if (p.serif && std::abs(bx - ax) < 0.35 * std::abs(by - ay)) {
        for (auto [x, y] : {std::pair{ax, ay}, std::pair{bx, by}}) {
          if (!near_serif_level(y)) continue;
          const double half = 0.5 * p.serif_length;
          segs.push_back({x - half, y, x + half, y, 0.55 * hw, true, true});
        }
      }
      owner.resize(segs.size(), static_cast<std::size_t>(&prim - prims.data()));
      continue;
    }
    const double cx = prim.v[0], cy = prim.v[1], rx = prim.v[2], ry = prim.v[3];
    const double a0 = prim.v[4] * std::numbers::pi / 180.0;
    const double a1 = prim.v[5] * std::numbers::pi / 180.0;
    const int steps = std::max(4, static_cast<int>(std::ceil(std::abs(a1 - a0) / (std::numbers::pi / 12))));
    double px = cx + rx * std::cos(a0), py = cy + ry * std::sin(a0);
    ends.emplace_back(px, py);
    for (int s = 1; s <= steps; ++s) {
      const double a = a0 + (a1 - a0) * s / steps;
      const double qx = cx + rx * std::cos(a), qy = cy + ry * std::sin(a);
      segs.push_back({px, py, qx, qy, hw, square && s == 1, square && s == steps});
      px = qx;
      py = qy;
    }
    ends.emplace_back(px, py);
    owner.resize(segs.size(), static_cast<std::size_t>(&prim - prims.data()));
  }
  // Rounded fonts get ball terminals on stroke ends that do not touch another
  // stroke.
  if (p.rounded) {
    const std::size_t n_strokes = segs.size();
    for (std::size_t e = 0; e < ends.size(); ++e) {
      const auto [ex, ey] = ends[e];
      const std::size_t prim = e / 2;  // two ends per primitive
      bool touching = false;
      for (std::size_t k = 0; k < n_strokes && !touching; ++k) {
        if (owner[k] == prim || segs[k].half_width < hw) continue;
        touching = segment_distance(segs[k], ex, ey) + segs[k].half_width < 0.03;
      }
      if (!touching) segs.push_back({ex, ey, ex, ey, kBallScale * hw, false, false});
    }
  }
  // Slant shears about mid-height; width ratio scales about the centre.
  const double shear = std::tan(p.slant_degrees * std::numbers::pi / 180.0);
  auto xf = [&](double& x, double y) { x = 0.5 + (x - 0.5) * p.width_ratio + (y - kShearCenter) * shear; };
  for (auto& s : segs) {
    xf(s.ax, s.ay);
    xf(s.bx, s.by);
  }
  return segs;
}

double segment_distance(const Segment& s, double x, double y) {
  const double dx = s.bx - s.ax, dy = s.by - s.ay;
  const double len = std::hypot(dx, dy);
  const double px = x - s.ax, py = y - s.ay;
  if (len < 1e-12) return std::hypot(px, py) - s.half_width;
  const double ux = dx / len, uy = dy / len;
  const double along = px * ux + py * uy;
  const double perp = std::abs(px * uy - py * ux);
  double over = 0.0;
  bool sq = false;
  if (along < 0) {
    over = -along;
    sq = s.square_a;
  } else if (along > len) {
    over = along - len;
    sq = s.square_b;
  }
  const double d = sq ? std::max(perp, over) : std::hypot(perp, over);
  return d - s.half_width;
}

double hash_unit(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
  std::uint64_t h = seed ^ (static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ULL) ^
                    (static_cast<std::uint64_t>(iy) * 0xC2B2AE3D27D4EB4FULL);
  h ^= h >> 33;
  h *= 0xFF51AFD7ED558CCDULL;
  h ^= h >> 33;
  h *= 0xC4CEB9FE1A85EC53ULL;
  h ^= h >> 33;
  return static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53);
}

// Bilinear value noise in [0,1).
double value_noise(double x, double y, std::uint64_t seed) {
  constexpr double kFreq = 22.0;
  x *= kFreq;
  y *= kFreq;
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
  const double tx = x - fx, ty = y - fy;
  const double a = hash_unit(ix, iy, seed), b = hash_unit(ix + 1, iy, seed);
  const double c = hash_unit(ix, iy + 1, seed), d = hash_unit(ix + 1, iy + 1, seed);
  return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
}

double union_distance(const std::vector<Segment>& segs, const FontParams& p, double x, double y) {
  double d = 1e9;
  for (const auto& s : segs) d = std::min(d, segment_distance(s, x, y));
  if (p.rough) d += p.rough_amount * 2.0 * (value_noise(x, y, p.noise_seed) - 0.5);
  return d;
}

double coverage(double sdf, double pixel) { return std::clamp(0.5 - sdf / pixel, 0.0, 1.0); }

}  // namespace

bool is_glyph(char c) { return kGlyphSet.find(c) != std::string_view::npos; }

int glyph_index(char c) {
  const auto pos = kGlyphSet.find(c);
  if (pos == std::string_view::npos) {
    throw InvalidArgument(std::string("unsupported character '") + c + "'");
  }
  return static_cast<int>(pos);
}

FontParams standard_font_params() {
  FontParams p;
  p.weight = 0.3;
  return p;
}

double glyph_signed_distance(const FontParams& params, char character, double x, double y) {
  return union_distance(build_segments(params, character), params, x, y);
}

GlyphImage render_glyph(const FontParams& params, char character, int size, std::string font_id) {
  if (size < 8) throw InvalidArgument("render_glyph: size must be >= 8");
  const auto segs = build_segments(params, character);
  GlyphImage img;
  img.size = size;
  img.character = character;
  img.font_id = std::move(font_id);
  img.pixels.resize(static_cast<std::size_t>(size) * size);
  const double pixel = 1.0 / size;
  for (int r = 0; r < size; ++r) {
    const double y = 1.0 - (r + 0.5) * pixel;
    for (int c = 0; c < size; ++c) {
      const double x = (c + 0.5) * pixel;
      const double sdf = union_distance(segs, params, x, y);
      double ink = params.outline
                       ? coverage(std::abs(sdf) - kOutlineHalfBand, pixel)
                       : coverage(sdf, pixel);
      if (params.shadow) {
        const double off = params.shadow_offset;
        const double shadow = coverage(union_distance(segs, params, x - off, y + off), pixel);
        ink = std::max(ink, kShadowInk * shadow);
      }
      img.pixels[static_cast<std::size_t>(r) * size + c] = static_cast<float>(1.0 - ink);
    }
  }
  return img;
}

}  // namespace tagfont::corpus
