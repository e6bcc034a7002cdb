#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tagfont/common/errors.hpp"
#include "tagfont/recognizer/training.hpp"

namespace tagfont::retrieval {

using nn::Scalar;
using nn::Tensor;

// Query naming tags outside the vocabulary.
class UnknownTagError : public InvalidArgument {
 public:
  explicit UnknownTagError(std::vector<std::string> tags);
  const std::vector<std::string>& tags() const { return tags_; }

 private:
  std::vector<std::string> tags_;
};

struct RetrievalConfig {
  double alpha = 0.1;
  double epsilon = 1e-6;
  double gamma = 100.0;
  int min_query_size = 2;
  int max_query_size = 5;
  double layer2_mu = 1.0;
  double layer2_sigma = 0.02;
  int epochs = 10;
  int triplets_per_epoch = 2000;
  int batch_size = 20;
  double lr = 5e-3;
  double lr_multiplier = 1.0;
  int max_retries = 100;
  std::uint64_t seed = 6;

  void validate() const;  // throws ConfigError
  std::string to_json() const;
  static RetrievalConfig from_json(const std::string& text);
};

struct QueryVector {
  std::vector<std::uint8_t> bits;
  std::vector<std::string> tags;  // sorted, unique
  int popcount() const;
};

// Throws UnknownTagError listing every tag not in the vocabulary, and
// InvalidArgument on an empty query.
QueryVector encode_query(const std::vector<std::string>& tags, const corpus::TagVocabulary& vocab);

inline double power_activation(double x, double alpha, double epsilon) {
  return std::pow(x + epsilon, alpha);
}

// mask -> power activation -> Linear(N, N) + ReLU -> Linear(N, 1) -> sigmoid
class AffinityHead {
 public:
  AffinityHead() = default;
  AffinityHead(int n_tags, double alpha, double epsilon);

  // First layer = identity, zero biases, second layer weights ~ N(mu, sigma).
  void init(nn::Rng& rng, double mu, double sigma);
  // probs and masks [B, N] -> scores [B, 1] in (0, 1)
  Tensor forward(const Tensor& probs, const Tensor& masks);
  // Accumulates parameter gradients; returns d/d probs.
  Tensor backward(const Tensor& grad_scores);
  // Same scores as forward() without touching the training caches; safe to
  // call concurrently.
  Tensor score(const Tensor& probs, const Tensor& masks) const;
  void collect(nn::ParameterList& out);
  int n_tags() const { return l1_.in_features(); }
  double alpha() const { return alpha_; }
  double epsilon() const { return epsilon_; }

  void save(nn::Checkpoint& ckpt, const std::string& prefix = "ret") const;
  static AffinityHead load(const nn::Checkpoint& ckpt, const std::string& prefix = "ret");

 private:
  double alpha_ = 0.1, epsilon_ = 1e-6;
  nn::Linear l1_, l2_;
  nn::ReLU relu_;
  nn::Sigmoid sigmoid_;
  Tensor masked_, masks_;
};

double affinity(std::span<const Scalar> probs, const QueryVector& query, const AffinityHead& head);

// log(1 + exp(gamma * (s_neg - s_pos))), overflow-safe.
double ranking_loss(double s_pos, double s_neg, double gamma);
// d loss / d s_pos (d / d s_neg is the negation).
double ranking_loss_grad_pos(double s_pos, double s_neg, double gamma);

struct Triplet {
  QueryVector query;
  std::string positive;
  std::string negative;
};

bool is_valid_triplet(const corpus::DatasetManifest& m, const Triplet& t);

// Draws `count` triplets from the train split. Query size is uniform on
// [min, max] clamped to the positive font's tag count; the negative is
// uniform over train fonts missing at least one query tag.
std::vector<Triplet> sample_triplets(const corpus::DatasetManifest& m, int count, nn::Rng& rng,
                                     const RetrievalConfig& config);

struct Stage4Result {
  AffinityHead head;
  std::vector<recognizer::EpochLog> log;
};

// Trains the head on per-glyph tag probabilities of the train fonts. Each
// triplet pairs a random glyph of the positive with one of the negative.
Stage4Result train_stage4(const recognizer::GlyphBank& train_probs, const corpus::DatasetManifest& m,
                          const RetrievalConfig& config);

// ---- scoring

struct Ranked {
  std::string font_id;
  double score = 0;
};

// Descending score, ties by ascending font_id.
std::vector<Ranked> rank(const std::vector<std::string>& font_ids, const std::vector<double>& scores);

// Font scores for one query from a per-glyph probability bank. Single-tag
// queries use the mean probability of that tag; longer queries the mean head
// score over glyphs.
std::vector<double> score_fonts(const recognizer::GlyphBank& probs, const QueryVector& query,
                                const AffinityHead& head);

// Baseline: product over query tags of the font-level mean probabilities.
std::vector<double> product_scores(const recognizer::GlyphBank& probs, const QueryVector& query);

}  // namespace tagfont::retrieval
