#include "tagfont/retrieval/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "tagfont/nn/optim.hpp"

namespace tagfont::retrieval {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
  return out;
}

}  // namespace

UnknownTagError::UnknownTagError(std::vector<std::string> tags)
    : InvalidArgument("unknown tags: " + join(tags)), tags_(std::move(tags)) {}

void RetrievalConfig::validate() const {
  if (!(alpha > 0) || !(epsilon > 0) || !(gamma > 0)) {
    throw ConfigError("retrieval: alpha, epsilon and gamma must be > 0");
  }
  if (min_query_size < 1 || max_query_size < min_query_size) {
    throw ConfigError("retrieval: need 1 <= min_query_size <= max_query_size");
  }
  if (epochs < 0 || triplets_per_epoch <= 0 || batch_size <= 0 || max_retries <= 0) {
    throw ConfigError("retrieval: epochs, triplets_per_epoch, batch_size and max_retries must be positive");
  }
}

std::string RetrievalConfig::to_json() const {
  return json{{"alpha", alpha},
              {"epsilon", epsilon},
              {"gamma", gamma},
              {"min_query_size", min_query_size},
              {"max_query_size", max_query_size},
              {"layer2_mu", layer2_mu},
              {"layer2_sigma", layer2_sigma},
              {"epochs", epochs},
              {"triplets_per_epoch", triplets_per_epoch},
              {"batch_size", batch_size},
              {"lr", lr},
              {"lr_multiplier", lr_multiplier},
              {"max_retries", max_retries},
              {"seed", seed}}
      .dump();
}

RetrievalConfig RetrievalConfig::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    RetrievalConfig c;
    c.alpha = j.at("alpha");
    c.epsilon = j.at("epsilon");
    c.gamma = j.at("gamma");
    c.min_query_size = j.at("min_query_size");
    c.max_query_size = j.at("max_query_size");
    c.layer2_mu = j.at("layer2_mu");
    c.layer2_sigma = j.at("layer2_sigma");
    c.epochs = j.at("epochs");
    c.triplets_per_epoch = j.at("triplets_per_epoch");
    c.batch_size = j.at("batch_size");
    c.lr = j.at("lr");
    c.lr_multiplier = j.at("lr_multiplier");
    c.max_retries = j.at("max_retries");
    c.seed = j.at("seed");
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("retrieval config: ") + e.what());
  }
}

int QueryVector::popcount() const {
  return static_cast<int>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

QueryVector encode_query(const std::vector<std::string>& tags, const corpus::TagVocabulary& vocab) {
  if (tags.empty()) throw InvalidArgument("empty query");
  QueryVector q;
  q.bits.assign(vocab.size(), 0);
  std::vector<std::string> unknown;
  for (const auto& t : std::set<std::string>(tags.begin(), tags.end())) {
    if (auto i = vocab.index_of(t)) {
      q.bits[*i] = 1;
      q.tags.push_back(t);
    } else {
      unknown.push_back(t);
    }
  }
  if (!unknown.empty()) throw UnknownTagError(unknown);
  return q;
}

// ---------------------------------------------------------------- head

AffinityHead::AffinityHead(int n_tags, double alpha, double epsilon)
    : alpha_(alpha), epsilon_(epsilon), l1_("ret.l1", n_tags, n_tags), l2_("ret.l2", n_tags, 1) {}

void AffinityHead::init(nn::Rng& rng, double mu, double sigma) {
  l1_.weight().value.fill(0);
  for (int i = 0; i < n_tags(); ++i) l1_.weight().value.at(i, i) = 1;
  l1_.bias().value.fill(0);
  l2_.init_normal(rng, mu, sigma);
}

Tensor AffinityHead::forward(const Tensor& probs, const Tensor& masks) {
  if (!probs.same_shape(masks) || probs.rank() != 2 || probs.dim(1) != n_tags()) {
    throw InvalidArgument("affinity: expected probs and masks [B, " + std::to_string(n_tags()) +
                          "], got " + probs.shape_string() + " and " + masks.shape_string());
  }
  masks_ = masks;
  masked_ = probs;
  Tensor act = probs;
  for (std::size_t i = 0; i < act.size(); ++i) {
    masked_[i] = probs[i] * masks[i];
    act[i] = power_activation(masked_[i], alpha_, epsilon_);
  }
  return sigmoid_.forward(l2_.forward(relu_.forward(l1_.forward(act))));
}

Tensor AffinityHead::backward(const Tensor& grad_scores) {
  Tensor g = l1_.backward(relu_.backward(l2_.backward(sigmoid_.backward(grad_scores))));
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] *= alpha_ * std::pow(masked_[i] + epsilon_, alpha_ - 1) * masks_[i];
  }
  return g;
}

Tensor AffinityHead::score(const Tensor& probs, const Tensor& masks) const {
  if (!probs.same_shape(masks) || probs.rank() != 2 || probs.dim(1) != n_tags()) {
    throw InvalidArgument("affinity: expected probs and masks [B, " + std::to_string(n_tags()) +
                          "], got " + probs.shape_string() + " and " + masks.shape_string());
  }
  const int b = probs.dim(0), n = n_tags();
  const Tensor& w1 = l1_.weight().value;
  const Tensor& w2 = l2_.weight().value;
  Tensor out({b, 1});
  std::vector<Scalar> act(static_cast<std::size_t>(n));
  for (int r = 0; r < b; ++r) {
    for (int k = 0; k < n; ++k) {
      act[static_cast<std::size_t>(k)] = power_activation(probs.at(r, k) * masks.at(r, k), alpha_, epsilon_);
    }
    Scalar z = l2_.bias().value[0];
    for (int i = 0; i < n; ++i) {
      Scalar h = l1_.bias().value[static_cast<std::size_t>(i)];
      for (int k = 0; k < n; ++k) h += w1.at(i, k) * act[static_cast<std::size_t>(k)];
      z += w2.at(0, i) * std::max<Scalar>(h, 0);
    }
    out[static_cast<std::size_t>(r)] = nn::sigmoid(z);
  }
  return out;
}

void AffinityHead::collect(nn::ParameterList& out) {
  l1_.collect(out);
  l2_.collect(out);
}

void AffinityHead::save(nn::Checkpoint& ckpt, const std::string& prefix) const {
  auto& self = const_cast<AffinityHead&>(*this);
  ckpt.set_text(prefix + ".head",
                json{{"n_tags", n_tags()}, {"alpha", alpha_}, {"epsilon", epsilon_}}.dump());
  nn::ParameterList params;
  self.collect(params);
  ckpt.put(params, prefix + "/");
}

AffinityHead AffinityHead::load(const nn::Checkpoint& ckpt, const std::string& prefix) {
  if (!ckpt.has_text(prefix + ".head")) throw FormatError("checkpoint has no retrieval head");
  const json j = json::parse(ckpt.text(prefix + ".head"));
  AffinityHead h(j.at("n_tags").get<int>(), j.at("alpha").get<double>(), j.at("epsilon").get<double>());
  nn::ParameterList params;
  h.collect(params);
  ckpt.get(params, prefix + "/");
  return h;
}

double affinity(std::span<const Scalar> probs, const QueryVector& query, const AffinityHead& head) {
  if (static_cast<int>(probs.size()) != head.n_tags() || query.bits.size() != probs.size()) {
    throw InvalidArgument("affinity: dimension mismatch (probs " + std::to_string(probs.size()) +
                          ", query " + std::to_string(query.bits.size()) + ", head " +
                          std::to_string(head.n_tags()) + ")");
  }
  const int n = head.n_tags();
  Tensor p({1, n}), mk({1, n});
  for (int i = 0; i < n; ++i) {
    p[static_cast<std::size_t>(i)] = probs[static_cast<std::size_t>(i)];
    mk[static_cast<std::size_t>(i)] = query.bits[static_cast<std::size_t>(i)];
  }
  return head.score(p, mk)[0];
}

double ranking_loss(double s_pos, double s_neg, double gamma) {
  return nn::softplus(gamma * (s_neg - s_pos));
}

double ranking_loss_grad_pos(double s_pos, double s_neg, double gamma) {
  return -gamma * nn::sigmoid(gamma * (s_neg - s_pos));
}

// ---------------------------------------------------------------- triplets

namespace {

bool has_all(const corpus::DatasetManifest& m, const corpus::FontRecord& f,
             const std::vector<std::string>& tags) {
  return std::all_of(tags.begin(), tags.end(), [&](const std::string& t) { return m.has_tag(f, t); });
}

}  // namespace

bool is_valid_triplet(const corpus::DatasetManifest& m, const Triplet& t) {
  const auto* pos = m.find(t.positive);
  const auto* neg = m.find(t.negative);
  if (!pos || !neg || t.query.tags.empty()) return false;
  return has_all(m, *pos, t.query.tags) && !has_all(m, *neg, t.query.tags);
}

std::vector<Triplet> sample_triplets(const corpus::DatasetManifest& m, int count, nn::Rng& rng,
                                     const RetrievalConfig& config) {
  std::vector<const corpus::FontRecord*> pool, all;
  for (const auto& id : m.splits.train) {
    const auto& f = m.font(id);
    all.push_back(&f);
    if (static_cast<int>(f.tags.size()) >= config.min_query_size) pool.push_back(&f);
  }
  if (pool.empty()) {
    throw InvalidArgument("sample_triplets: no train font has " + std::to_string(config.min_query_size) +
                          " or more tags");
  }
  std::uniform_int_distribution<std::size_t> pick_pos(0, pool.size() - 1);
  std::uniform_int_distribution<int> pick_size(config.min_query_size, config.max_query_size);
  std::vector<Triplet> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<const corpus::FontRecord*> negatives;
  for (int i = 0; i < count; ++i) {
    bool done = false;
    for (int attempt = 0; attempt < config.max_retries && !done; ++attempt) {
      const auto* pos = pool[pick_pos(rng)];
      const int size = std::min(pick_size(rng), static_cast<int>(pos->tags.size()));
      std::vector<std::string> tags = pos->tags;
      std::shuffle(tags.begin(), tags.end(), rng);
      tags.resize(static_cast<std::size_t>(size));
      std::sort(tags.begin(), tags.end());
      negatives.clear();
      for (const auto* f : all)
        if (!has_all(m, *f, tags)) negatives.push_back(f);
      if (negatives.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick_neg(0, negatives.size() - 1);
      Triplet t{encode_query(tags, m.vocabulary), pos->font_id, negatives[pick_neg(rng)]->font_id};
      out.push_back(std::move(t));
      done = true;
    }
    if (!done) {
      throw InvalidArgument("sample_triplets: no valid negative found after " +
                            std::to_string(config.max_retries) + " attempts");
    }
  }
  return out;
}

// ---------------------------------------------------------------- training

Stage4Result train_stage4(const recognizer::GlyphBank& train_probs, const corpus::DatasetManifest& m,
                          const RetrievalConfig& config) {
  config.validate();
  const int n = static_cast<int>(m.vocabulary.size());
  if (train_probs.width() != n) {
    throw ConfigError("train-stage4: probability bank has " + std::to_string(train_probs.width()) +
                      " tags, vocabulary has " + std::to_string(n));
  }
  Stage4Result out{AffinityHead(n, config.alpha, config.epsilon), {}};
  AffinityHead& head = out.head;
  nn::Rng init_rng(config.seed);
  head.init(init_rng, config.layer2_mu, config.layer2_sigma);
  nn::ParameterList params;
  head.collect(params);
  nn::Adam opt(params, config.lr * config.lr_multiplier);
  nn::Rng rng(config.seed ^ 0x7e7a11edULL);
  std::uniform_int_distribution<int> glyph(0, train_probs.n_glyphs() - 1);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto triplets = sample_triplets(m, config.triplets_per_epoch, rng, config);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < triplets.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e = std::min(triplets.size(), b + static_cast<std::size_t>(config.batch_size));
      const int B = static_cast<int>(e - b);
      Tensor probs({2 * B, n}), masks({2 * B, n});
      for (int i = 0; i < B; ++i) {
        const Triplet& t = triplets[b + static_cast<std::size_t>(i)];
        auto pos = train_probs.row(train_probs.font_pos(t.positive), glyph(rng));
        auto neg = train_probs.row(train_probs.font_pos(t.negative), glyph(rng));
        std::copy(pos.begin(), pos.end(), probs.slice(i).begin());
        std::copy(neg.begin(), neg.end(), probs.slice(B + i).begin());
        for (int k = 0; k < n; ++k) {
          masks.at(i, k) = masks.at(B + i, k) = t.query.bits[static_cast<std::size_t>(k)];
        }
      }
      const Tensor s = head.forward(probs, masks);
      Tensor g({2 * B, 1});
      double loss = 0;
      for (int i = 0; i < B; ++i) {
        const double sp = s[static_cast<std::size_t>(i)], sn = s[static_cast<std::size_t>(B + i)];
        loss += ranking_loss(sp, sn, config.gamma);
        const double gp = ranking_loss_grad_pos(sp, sn, config.gamma) / B;
        g[static_cast<std::size_t>(i)] = gp;
        g[static_cast<std::size_t>(B + i)] = -gp;
        correct += sp > sn;
      }
      if (!std::isfinite(loss)) throw NumericalDivergence("train-stage4: non-finite ranking loss");
      nn::zero_grads(params);
      head.backward(g);
      opt.step();
      loss_sum += loss;
    }
    out.log.push_back({epoch, "train", loss_sum / static_cast<double>(triplets.size()),
                       static_cast<double>(correct) / static_cast<double>(triplets.size())});
  }
  return out;
}

// ---------------------------------------------------------------- scoring

std::vector<Ranked> rank(const std::vector<std::string>& font_ids, const std::vector<double>& scores) {
  if (font_ids.size() != scores.size()) throw InvalidArgument("rank: ids and scores differ in length");
  std::vector<Ranked> out;
  for (std::size_t i = 0; i < font_ids.size(); ++i) out.push_back({font_ids[i], scores[i]});
  std::sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.font_id < b.font_id;
  });
  return out;
}

std::vector<double> score_fonts(const recognizer::GlyphBank& probs, const QueryVector& query,
                                const AffinityHead& head) {
  const int n = probs.width();
  if (static_cast<int>(query.bits.size()) != n) throw InvalidArgument("score_fonts: query length mismatch");
  const int fonts = static_cast<int>(probs.font_ids.size());
  const int G = probs.n_glyphs();
  std::vector<double> out(static_cast<std::size_t>(fonts), 0.0);
  if (query.popcount() == 1) {
    const auto k = static_cast<int>(std::find(query.bits.begin(), query.bits.end(), 1) - query.bits.begin());
    for (int f = 0; f < fonts; ++f) {
      double s = 0;
      for (int g = 0; g < G; ++g) s += probs.values.at(probs.row_index(f, g), k);
      out[static_cast<std::size_t>(f)] = s / G;
    }
    return out;
  }
  Tensor masks = Tensor::like(probs.values);
  for (int r = 0; r < masks.dim(0); ++r)
    for (int k = 0; k < n; ++k) masks.at(r, k) = query.bits[static_cast<std::size_t>(k)];
  const Tensor s = head.score(probs.values, masks);
  for (int f = 0; f < fonts; ++f) {
    double sum = 0;
    for (int g = 0; g < G; ++g) sum += s[static_cast<std::size_t>(probs.row_index(f, g))];
    out[static_cast<std::size_t>(f)] = sum / G;
  }
  return out;
}

std::vector<double> product_scores(const recognizer::GlyphBank& probs, const QueryVector& query) {
  if (static_cast<int>(query.bits.size()) != probs.width()) {
    throw InvalidArgument("product_scores: query length mismatch");
  }
  const auto means = recognizer::font_means(probs);
  std::vector<double> out;
  for (const auto& p : means) {
    double s = 1;
    for (std::size_t k = 0; k < p.size(); ++k)
      if (query.bits[k]) s *= p[k];
    out.push_back(s);
  }
  return out;
}

}  // namespace tagfont::retrieval
