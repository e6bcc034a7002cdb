#include "doctest.h"

#include <algorithm>
#include <set>

#include "tagfont/common/errors.hpp"
#include "tagfont/corpus/manifest.hpp"
#include "tagfont/corpus/png.hpp"
#include "tagfont/corpus/queries.hpp"

using namespace tagfont;
using namespace tagfont::corpus;

namespace {

std::vector<std::string> tags_of(const NormalizedTags& n, std::size_t font) { return n.font_tags[font]; }

// Hand-built manifest: every font is in the test split, tags given directly.
DatasetManifest toy_manifest(const std::vector<std::pair<std::string, std::vector<std::string>>>& fonts) {
  std::map<std::string, int> freq;
  for (const auto& [id, tags] : fonts)
    for (const auto& t : tags) ++freq[t];
  std::vector<std::string> vt;
  std::vector<int> vf;
  for (const auto& [t, f] : freq) {
    vt.push_back(t);
    vf.push_back(f);
  }
  DatasetManifest m;
  m.vocabulary = TagVocabulary(vt, vf);
  for (const auto& [id, tags] : fonts) {
    FontRecord r;
    r.font_id = id;
    r.tags = tags;
    std::sort(r.tags.begin(), r.tags.end());
    m.fonts.push_back(r);
    m.splits.test.push_back(id);
  }
  m.reindex();
  return m;
}

}  // namespace

TEST_CASE("tag normalization examples") {
  const auto n = normalize_tags({{"Sans Serif"}, {"kids"}}, 1);
  CHECK(tags_of(n, 0) == std::vector<std::string>{"sans-serif"});
  CHECK(tags_of(n, 1) == std::vector<std::string>{"kid"});

  // nine fonts carry "rare", ten carry "common"
  std::vector<std::vector<std::string>> raw(10, {"common"});
  for (int i = 0; i < 9; ++i) raw[i].push_back("rare");
  const auto f = normalize_tags(raw, 10);
  CHECK(f.vocabulary.tags() == std::vector<std::string>{"common"});
  CHECK(f.vocabulary.frequency_of(0) == 10);

  const auto cased = normalize_tags({{"bold"}, {"Bold"}, {"BOLD"}}, 1);
  REQUIRE(cased.vocabulary.size() == 1);
  CHECK(cased.vocabulary.tag(0) == "bold");
  CHECK(cased.vocabulary.frequency_of(0) == 3);
  const auto once = normalize_tags({{"bold", "Bold", "BOLD"}}, 1);
  CHECK(once.vocabulary.frequency_of(0) == 1);
  CHECK(tags_of(once, 0) == std::vector<std::string>{"bold"});
}

TEST_CASE("tag normalization edge cases") {
  CHECK_THROWS_AS(normalize_tags({{"a"}, {"b"}}, 5), ConfigError);

  const auto n = normalize_tags({{"serif"}, {"serif"}, {"oddity"}}, 2);
  CHECK(n.dropped == std::vector<std::size_t>{2});
  CHECK(n.font_tags[2].empty());

  // frequency only over the counted (training) fonts
  const auto masked = normalize_tags({{"serif"}, {"serif"}, {"serif"}}, 2, {true, true, false});
  CHECK_THROWS_AS(normalize_tags({{"serif"}, {"serif"}}, 3, {true, false}), ConfigError);
  CHECK(masked.vocabulary.frequency_of(0) == 2);

  const auto& rules = TagRules::builtin();
  for (const std::string raw : {"Sans Serif", "kids", "Handwritten  Script", "BOLD", "stories", "glass"}) {
    const auto once = rules.normalize(raw);
    CHECK(rules.normalize(once) == once);
  }
}

TEST_CASE("glyph rendering") {
  const FontParams neutral = standard_font_params();
  const auto a = render_glyph(neutral, 'A', 128);
  CHECK(a.size == 128);
  CHECK(a.pixels.size() == 128u * 128u);
  const auto [lo, hi] = std::minmax_element(a.pixels.begin(), a.pixels.end());
  CHECK(*lo >= 0.0f);
  CHECK(*hi <= 1.0f);
  CHECK(*lo < 0.5f);  // some ink
  CHECK(render_glyph(neutral, 'A', 128).pixels == a.pixels);

  // outlined O: the ring's stroke centre line stays light, its edges are dark
  FontParams p = neutral;
  p.weight = 0.9;
  p.outline = true;
  const int S = 128;
  const auto o = render_glyph(p, 'O', S);
  double interior = 0, boundary = 0;
  int ni = 0, nb = 0;
  for (int r = 0; r < S; ++r) {
    for (int c = 0; c < S; ++c) {
      const double x = (c + 0.5) / S, y = 1.0 - (r + 0.5) / S;
      const double d = glyph_signed_distance(p, 'O', x, y);
      const double half = p.pen_width() / 2;
      if (d < -0.6 * half) {
        interior += o.at(r, c);
        ++ni;
      } else if (std::abs(d) < 1.0 / S) {
        boundary += o.at(r, c);
        ++nb;
      }
    }
  }
  REQUIRE(ni > 0);
  REQUIRE(nb > 0);
  CHECK(interior / ni > boundary / nb + 0.2);

  CHECK_THROWS_AS(render_glyph(neutral, '7', 32), InvalidArgument);
  CHECK_THROWS_AS(glyph_index('?'), InvalidArgument);
  CHECK(glyph_index('a') == 0);
  CHECK(glyph_index('Z') == 51);
}

TEST_CASE("corpus synthesis") {
  CorpusOptions o;
  o.n_fonts = 100;
  o.seed = 7;
  const auto m = synthesize_corpus(o);
  CHECK(m.splits.train.size() == 80);
  CHECK(m.splits.val.size() == 10);
  CHECK(m.splits.test.size() == 10);
  CHECK(manifest_to_json(synthesize_corpus(o)) == manifest_to_json(m));

  for (const auto& f : m.fonts) {
    if (f.params.weight > kBoldThreshold) CHECK(m.has_tag(f, "bold"));
    if (std::abs(f.params.slant_degrees) > kItalicThreshold && m.vocabulary.contains("italic"))
      CHECK(m.has_tag(f, "italic"));
    CHECK(!f.tags.empty());
    CHECK(std::is_sorted(f.tags.begin(), f.tags.end(), [&](const auto& a, const auto& b) {
      return *m.vocabulary.index_of(a) < *m.vocabulary.index_of(b);
    }));
  }
  // vocabulary frequency counts training fonts only
  for (std::size_t i = 0; i < m.vocabulary.size(); ++i) {
    int n = 0;
    for (const auto& id : m.splits.train) n += m.has_tag(m.font(id), m.vocabulary.tag(i));
    CHECK(n == m.vocabulary.frequency_of(i));
    CHECK(n >= o.min_count);
  }

  o.seed = 8;
  CHECK(manifest_to_json(synthesize_corpus(o)) != manifest_to_json(m));
  o.n_fonts = 9;
  CHECK_THROWS_AS(synthesize_corpus(o), InvalidArgument);
  CHECK_THROWS_AS(m.font("nope"), InvalidArgument);
}

TEST_CASE("manifest round trip") {
  CorpusOptions o;
  o.n_fonts = 30;
  o.min_count = 3;
  const auto m = synthesize_corpus(o);
  const std::string text = manifest_to_json(m);
  const auto back = manifest_from_json(text);
  CHECK(manifest_to_json(back) == text);
  CHECK(back.vocabulary.hash() == m.vocabulary.hash());
  CHECK(back.fonts.front().params == m.fonts.front().params);
  CHECK_THROWS_AS(manifest_from_json("{oops"), FormatError);

  const TagVocabulary a({"bold", "serif"}, {3, 4}), b({"bold", "serif"}, {9, 9}), c({"serif", "bold"}, {4, 3});
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
}

TEST_CASE("query sets") {
  const auto m = toy_manifest({{"f0", {"bold", "serif"}},
                               {"f1", {"bold", "serif", "round"}},
                               {"f2", {"bold", "round"}},
                               {"f3", {"bold", "round"}},
                               {"f4", {"serif"}}});
  const auto qs = build_query_sets(m, 11);

  // single-full covers each tag with its exact positives
  REQUIRE(qs.single_full.queries.size() == 3);
  for (const auto& q : qs.single_full.queries) CHECK(q.positives == matching_fonts(m, m.splits.test, q.tags));
  CHECK(matching_fonts(m, m.splits.test, {"bold", "serif"}) == std::vector<std::string>{"f0", "f1"});

  std::set<std::vector<std::string>> seen;
  for (const auto& q : qs.multi.queries) {
    CHECK(q.tags.size() >= 2);
    CHECK(seen.insert(q.tags).second);  // no repeats
    // brute-force positives over the toy manifest
    std::vector<std::string> brute;
    for (const auto& f : m.fonts) {
      if (std::all_of(q.tags.begin(), q.tags.end(),
                      [&](const auto& t) { return std::count(f.tags.begin(), f.tags.end(), t) > 0; }))
        brute.push_back(f.font_id);
    }
    CHECK(q.positives == brute);
  }
  // f0 and f2/f3 have two tags: their only possible query is the full pair
  const std::vector<std::string> bs = {"bold", "serif"}, br = {"bold", "round"};
  CHECK(seen.count(bs) == 1);
  CHECK(seen.count(br) == 1);
  for (const auto& q : qs.multi.queries) {
    if (q.tags == br) CHECK(q.positives == std::vector<std::string>{"f1", "f2", "f3"});
  }

  // single-top: K clamps to the vocabulary and follows frequency order
  QueryOptions top1;
  top1.top_k = 1;
  const auto t1 = build_query_sets(m, 11, top1);
  REQUIRE(t1.single_top.queries.size() == 1);
  CHECK(t1.single_top.queries[0].tags == std::vector<std::string>{"bold"});
  CHECK(build_query_sets(m, 11).single_top.queries.size() == 3);

  const auto back = query_set_from_jsonl(query_set_to_jsonl(qs.multi));
  CHECK(back.kind == QueryKind::kMulti);
  CHECK(back.queries.size() == qs.multi.queries.size());
  CHECK(query_set_to_jsonl(build_query_sets(m, 11).multi) == query_set_to_jsonl(qs.multi));
}

TEST_CASE("synthesized multi-tag queries are subsets of a font's tags") {
  CorpusOptions o;
  o.n_fonts = 60;
  o.min_count = 3;
  const auto m = synthesize_corpus(o);
  const auto qs = build_query_sets(m, 2);
  CHECK(!qs.multi.queries.empty());
  for (const auto& q : qs.multi.queries) {
    CHECK(q.tags.size() >= 2);
    CHECK(q.tags.size() <= 5);
    CHECK(!q.positives.empty());
  }
}

TEST_CASE("evaluation groups") {
  auto font = [](const std::string& id, double weight) {
    FontRecord r;
    r.font_id = id;
    r.params.weight = weight;
    r.tags = {"bold"};
    return r;
  };
  DatasetManifest m = toy_manifest({{"w90", {"bold"}}, {"w50", {"bold"}}, {"w45", {"bold"}}, {"plain", {"serif"}}});
  m.fonts[0] = font("w90", 0.9);
  m.fonts[1] = font("w50", 0.5);
  m.fonts[2] = font("w45", 0.45);
  m.reindex();
  const auto g = make_group(m, "bold", {"w50", "w90", "w45"});
  CHECK(g.ground_truth == "w90");
  CHECK_THROWS_AS(make_group(m, "bold", {"w50", "w90", "plain"}), InvalidArgument);
  CHECK_THROWS_AS(make_group(m, "bold", {"w50", "w90"}), InvalidArgument);

  CorpusOptions o;
  o.n_fonts = 100;
  const auto big = synthesize_corpus(o);
  const auto a = build_amt_groups(big, 40, 3);
  const auto b = build_amt_groups(big, 40, 3);
  CHECK(!a.groups.empty());
  CHECK(groups_to_jsonl(a.groups) == groups_to_jsonl(b.groups));
  CHECK(groups_to_jsonl(groups_from_jsonl(groups_to_jsonl(a.groups))) == groups_to_jsonl(a.groups));
  for (const auto& grp : a.groups) {
    CHECK(grp.candidates.size() == 3);
    for (const auto& id : grp.candidates) CHECK(big.has_tag(big.font(id), grp.tag));
  }
}

TEST_CASE("png encoding") {
  const auto img = render_glyph(standard_font_params(), 'g', 40, "font_001");
  int w = 0, h = 0;
  const auto px = decode_png_gray(encode_png(img), w, h);
  CHECK(w == 40);
  CHECK(h == 40);
  for (std::size_t i = 0; i < px.size(); ++i) CHECK(std::abs(px[i] - img.pixels[i]) <= 0.5 / 255 + 1e-6);
  CHECK(glyph_filename("font_001", 'g') == "font_001_103.png");
  CHECK_THROWS_AS(decode_png_gray("not a png", w, h), FormatError);
}
