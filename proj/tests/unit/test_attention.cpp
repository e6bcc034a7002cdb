#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "tagfont/attention/attention.hpp"
#include "tagfont/common/errors.hpp"
#include "test_util.hpp"

using namespace tagfont;
using attention::AttentionMap;
using nn::Scalar;
using nn::Tensor;

namespace {

std::vector<Scalar> random_distribution(int m, std::mt19937_64& rng) {
  std::vector<Scalar> d(static_cast<std::size_t>(m));
  std::exponential_distribution<Scalar> e(1.0);
  Scalar sum = 0;
  for (auto& v : d) sum += (v = e(rng));
  for (auto& v : d) v /= sum;
  return d;
}

}  // namespace

TEST_CASE("attention maps from class distributions") {
  attention::AttentionModule zero(5, 7);
  const auto half = attention::attention_from_class(std::vector<Scalar>(5, 0.2), zero);
  CHECK(half == AttentionMap(7, 0.5));

  nn::Rng rng(1);
  std::mt19937_64 data(2);
  attention::AttentionModule mod(5, 7);
  mod.init(rng, 0.0, 5.0);
  for (int t = 0; t < 1000; ++t) {
    for (Scalar v : attention::attention_from_class(random_distribution(5, data), mod)) {
      CHECK((v > 0 && v < 1));
    }
  }
  CHECK_THROWS_AS(attention::attention_from_class(std::vector<Scalar>(4, 0.25), mod), InvalidArgument);
}

TEST_CASE("aggregated maps") {
  const AttentionMap a = {0.5, 0.5, 0.5};
  CHECK(attention::aggregate_attention({a}) == a);
  CHECK(attention::aggregate_attention({a, a}) == AttentionMap{0.25, 0.25, 0.25});
  CHECK_THROWS_AS(attention::aggregate_attention({}), InvalidArgument);
  CHECK_THROWS_AS(attention::aggregate_attention({a, {0.5}}), InvalidArgument);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<Scalar> u(1e-3, 1 - 1e-3);
  for (int t = 0; t < 50; ++t) {
    std::vector<AttentionMap> maps(5, AttentionMap(6));
    for (auto& m : maps)
      for (auto& v : m) v = u(rng);
    const auto all = attention::aggregate_attention(maps);
    auto shuffled = maps;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto perm = attention::aggregate_attention(shuffled);
    const auto fewer = attention::aggregate_attention({maps.begin(), maps.begin() + 4});
    for (std::size_t d = 0; d < 6; ++d) {
      CHECK(perm[d] == doctest::Approx(all[d]).epsilon(1e-12));
      CHECK(all[d] <= fewer[d]);
      CHECK((all[d] > 0 && all[d] < 1));
      Scalar lo = 1;
      for (const auto& m : maps) lo = std::min(lo, m[d]);
      CHECK(all[d] <= lo);
    }
  }
}

TEST_CASE("attention loss gradients") {
  std::mt19937_64 data(4);
  nn::Rng rng(5);
  corpus::TagVocabulary vocab({"a", "b", "c"}, {1, 1, 1});
  recognizer::BackboneConfig bc;
  bc.input_size = 8;
  bc.feature_dim = 4;
  bc.widths = {2};
  recognizer::TagRecognizer rec(bc, vocab);
  rec.init(rng);
  attention::AttentionModule mod(3, 4);
  mod.init(rng, 0.0, 1.0);
  const int B = 2, J = 3;
  Tensor f = testutil::random_tensor({B, 4}, data);
  Tensor c({B * J, 3});
  for (int r = 0; r < B * J; ++r) {
    const auto d = random_distribution(3, data);
    std::copy(d.begin(), d.end(), c.slice(r).begin());
  }
  Tensor labels({B, 3});
  labels[0] = labels[4] = labels[5] = 1;

  nn::ParameterList params;
  mod.collect(params);
  for (auto* p : rec.head_params()) params.push_back(p);
  nn::zero_grads(params);
  attention::attention_tag_loss(rec, mod, f, c, labels, J, true);
  const double h = 1e-6;
  for (auto* p : params)
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const Scalar keep = p->value[i];
      p->value[i] = keep + h;
      const double fp = attention::attention_tag_loss(rec, mod, f, c, labels, J, false);
      p->value[i] = keep - h;
      const double fm = attention::attention_tag_loss(rec, mod, f, c, labels, J, false);
      p->value[i] = keep;
      CHECK(testutil::rel_err(p->grad[i], (fp - fm) / (2 * h)) < 1e-4);
    }
  CHECK_THROWS_AS(attention::attention_tag_loss(rec, mod, f, c, labels, 2, false), InvalidArgument);
}

TEST_CASE("attended prediction modes") {
  testutil::TinySetup t;
  auto font_model = t.font_classifier(1);
  auto& rec = t.stage1;
  attention::AttentionModule mod(font_model.n_classes(), rec.feature_dim());
  nn::Rng rng(6);
  mod.init(rng, 0.0, 5.0);

  std::vector<const corpus::GlyphImage*> imgs;
  for (char ch : std::string("abcdE")) imgs.push_back(&t.store->glyph(t.m.splits.train[0], ch));
  const Tensor x = recognizer::images_to_tensor(imgs);
  const Tensor feats = rec.extract_features(x);

  // Forced all-ones map reproduces the unattended model.
  const Tensor plain = rec.predict_tags(feats);
  const Tensor ones = attention::attended_probabilities(rec, feats, Tensor::like(feats, 1.0));
  for (std::size_t i = 0; i < plain.size(); ++i) CHECK(plain[i] == ones[i]);

  const long before = font_model.forward_calls();
  const Tensor test_probs =
      attention::predict_tags_attended(x, rec, font_model, mod, attention::AttentionMode::kTest, 4, rng);
  CHECK(font_model.forward_calls() == before + 1);
  for (auto v : test_probs.values()) CHECK((v > 0 && v < 1));

  // With exactly J glyphs the train-mode map uses all of them in any order.
  const Tensor four = recognizer::images_to_tensor({imgs.begin(), imgs.begin() + 4});
  const Tensor reversed = recognizer::images_to_tensor({imgs[3], imgs[2], imgs[1], imgs[0]});
  const Tensor p1 =
      attention::predict_tags_attended(four, rec, font_model, mod, attention::AttentionMode::kTrain, 4, rng);
  const Tensor p2 = attention::predict_tags_attended(reversed, rec, font_model, mod,
                                                     attention::AttentionMode::kTrain, 4, rng);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < p1.dim(1); ++k) CHECK(p1.at(i, k) == doctest::Approx(p2.at(3 - i, k)).epsilon(1e-12));

  const Tensor three = recognizer::images_to_tensor({imgs.begin(), imgs.begin() + 3});
  CHECK_THROWS_AS(attention::predict_tags_attended(three, rec, font_model, mod,
                                                   attention::AttentionMode::kTrain, 4, rng),
                  InvalidArgument);
}

TEST_CASE("stage 3 trains only the attention layer and tag head") {
  testutil::TinySetup t;
  auto font_model = t.font_classifier(1);
  const auto font_before = testutil::flat(font_model.params());
  attention::AttentionConfig cfg;
  cfg.epochs = 2;
  cfg.samples_per_font = 2;
  auto r = attention::train_stage3(t.stage1, font_model, t.m, *t.store, cfg);
  CHECK(testutil::flat(r.model.backbone_params()) == testutil::flat(t.stage1.backbone_params()));
  CHECK(testutil::flat(r.model.head_params()) != testutil::flat(t.stage1.head_params()));
  CHECK(testutil::flat(font_model.params()) == font_before);

  auto again = attention::train_stage3(t.stage1, font_model, t.m, *t.store, cfg);
  nn::ParameterList a, b;
  r.module.collect(a);
  again.module.collect(b);
  CHECK(testutil::flat(a) == testutil::flat(b));

  nn::Checkpoint ck;
  r.module.save(ck);
  auto loaded = attention::AttentionModule::load(nn::Checkpoint::deserialize(ck.serialize()));
  nn::ParameterList c;
  loaded.collect(c);
  CHECK(testutil::flat(c) == testutil::flat(a));

  const auto bank = attention::compute_attended_probabilities(r.model, font_model, r.module, *t.store,
                                                              t.m.splits.test);
  CHECK(bank.values.dim(0) == static_cast<int>(t.m.splits.test.size()) * corpus::kNumGlyphs);
  for (auto v : bank.values.values()) CHECK((v > 0 && v < 1));

  cfg.J = 0;
  CHECK_THROWS_AS(attention::train_stage3(t.stage1, font_model, t.m, *t.store, cfg), ConfigError);
}
