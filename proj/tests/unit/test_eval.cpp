#include "doctest.h"

#include <cmath>
#include <random>

#include "tagfont/common/errors.hpp"
#include "tagfont/eval/metrics.hpp"

using namespace tagfont;
using eval::RankingResult;

namespace {

RankingResult by_relevance(const std::vector<int>& rel) {
  RankingResult r;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "f%02zu", i);
    r.ranking.push_back({id, 1.0 - 0.01 * static_cast<double>(i)});
    if (rel[i]) r.positives.push_back(id);
  }
  return r;
}

// Precision at every relevant cut, each recounted from scratch.
double brute_ap(const std::vector<int>& rel) {
  double sum = 0;
  int h = 0;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    if (!rel[k]) continue;
    int hits = 0;
    for (std::size_t j = 0; j <= k; ++j) hits += rel[j];
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    ++h;
  }
  return sum / h;
}

double brute_ndcg(std::vector<int> rel) {
  auto dcg = [](const std::vector<int>& r) {
    double s = 0;
    for (std::size_t p = 1; p <= r.size(); ++p) s += (std::pow(2.0, r[p - 1]) - 1) / std::log2(p + 1.0);
    return s;
  };
  const double d = dcg(rel);
  std::sort(rel.rbegin(), rel.rend());
  return d / dcg(rel);
}

}  // namespace

TEST_CASE("hand-computed metric fixtures") {
  CHECK(eval::average_precision(by_relevance({1, 0, 1, 0, 0, 0, 0, 0, 0, 0})) ==
        doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(eval::ndcg(by_relevance({1, 0, 1})) ==
        doctest::Approx(1.5 / (1 + 1 / std::log2(3.0))).epsilon(1e-12));
  CHECK(eval::ndcg(by_relevance({1, 0, 1})) == doctest::Approx(0.9198).epsilon(1e-4));
  CHECK(eval::average_precision(by_relevance({1, 1, 0, 0})) == 1.0);
  CHECK(eval::ndcg(by_relevance({1, 1, 1, 0})) == 1.0);
  CHECK_THROWS_AS(eval::average_precision(by_relevance({0, 0})), InvalidArgument);
}

TEST_CASE("metrics match brute force on random rankings") {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 100; ++t) {
    const int n = std::uniform_int_distribution<int>(1, 20)(rng);
    std::vector<int> rel(static_cast<std::size_t>(n));
    for (auto& v : rel) v = std::bernoulli_distribution(0.3)(rng);
    rel[std::uniform_int_distribution<std::size_t>(0, rel.size() - 1)(rng)] = 1;
    const auto r = by_relevance(rel);
    const double ap = eval::average_precision(r), nd = eval::ndcg(r);
    CHECK(std::abs(ap - brute_ap(rel)) < 1e-9);
    CHECK(std::abs(nd - brute_ndcg(rel)) < 1e-9);
    CHECK((ap >= 0 && ap <= 1 && nd >= 0 && nd <= 1));
    bool ideal = true;
    for (std::size_t i = 1; i < rel.size(); ++i) ideal = ideal && !(rel[i] && !rel[i - 1]);
    CHECK((ap == 1.0) == ideal);
    CHECK((std::abs(nd - 1.0) < 1e-12) == ideal);

    // positive order and score shifts leave the metrics unchanged
    auto shuffled = r;
    std::shuffle(shuffled.positives.begin(), shuffled.positives.end(), rng);
    for (auto& e : shuffled.ranking) e.score += 3.0;
    CHECK(eval::average_precision(shuffled) == ap);
    CHECK(eval::ndcg(shuffled) == nd);
  }
}

namespace {

corpus::DatasetManifest toy_manifest() {
  corpus::DatasetManifest m;
  m.vocabulary = corpus::TagVocabulary({"bold", "round", "serif"}, {2, 2, 2});
  m.fonts = {{"a", {}, {}, {"bold"}}, {"b", {}, {}, {"bold", "round"}}, {"c", {}, {}, {"serif"}},
             {"d", {}, {}, {"round", "serif"}}};
  m.splits.test = {"a", "b", "c", "d"};
  m.reindex();
  return m;
}

}  // namespace

TEST_CASE("query set evaluation") {
  const auto m = toy_manifest();
  const auto& ids = m.splits.test;
  corpus::QuerySet qs;
  qs.kind = corpus::QueryKind::kMulti;
  qs.queries = {{{"bold"}, {"a", "b"}}, {{"round", "serif"}, {"d"}}, {{"bold", "serif"}, {}}};

  eval::Scorer oracle = [&](const retrieval::QueryVector& q) {
    std::vector<double> s;
    for (const auto& id : ids) {
      bool all = true;
      for (const auto& t : q.tags) all = all && m.has_tag(m.font(id), t);
      s.push_back(all ? 1.0 : 0.0);
    }
    return s;
  };
  const auto rep = eval::evaluate_query_set(qs, oracle, m, ids);
  CHECK(rep.queries.size() == 2);
  CHECK(rep.skipped.size() == 1);
  CHECK(rep.map == 1.0);
  CHECK(rep.mean_ndcg == 1.0);

  eval::Scorer constant = [&](const retrieval::QueryVector&) { return std::vector<double>(ids.size(), 0.5); };
  const auto c1 = eval::evaluate_query_set(qs, constant, m, ids);
  const auto c2 = eval::evaluate_query_set(qs, constant, m, ids);
  // ties fall back to font_id order: a, b, c, d
  CHECK(c1.queries[0].ap == 1.0);
  CHECK(c1.queries[1].ap == 0.25);
  CHECK(c1.map == c2.map);

  eval::Scorer broken = [&](const retrieval::QueryVector&) {
    std::vector<double> s(ids.size(), 0.1);
    s[2] = std::nan("");
    return s;
  };
  try {
    eval::evaluate_query_set(qs, broken, m, ids);
    FAIL("expected failure");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("font c") != std::string::npos);
  }

  eval::MetricReport report{"oracle", {rep}, eval::AmtReport{1.0, 1.0, 3}};
  const std::string j = report.to_json();
  CHECK(j.find("\"map\": 1.0") != std::string::npos);
  CHECK(report.to_table().find("100.00") != std::string::npos);
  CHECK(report.per_query_csv().find("multi,round|serif,1,1,1") != std::string::npos);
  CHECK(&report.set(corpus::QueryKind::kMulti) == &report.sets[0]);
  CHECK_THROWS_AS(report.set(corpus::QueryKind::kSingleTop), InvalidArgument);
}

TEST_CASE("amt accuracy and average rank") {
  std::vector<corpus::EvaluationGroup> groups = {{"bold", {"x", "y", "z"}, "y"},
                                                 {"bold", {"x", "y", "z"}, "x"}};
  auto fixed = [](std::vector<double> s) {
    return [s](const std::string&, const std::vector<std::string>&) { return s; };
  };
  auto r = eval::amt_eval(groups, fixed({0.1, 0.9, 0.5}));
  CHECK(r.accuracy == 0.5);
  CHECK(r.average_rank == 2.0);  // ranks 1 and 3
  r = eval::amt_eval({groups[0]}, fixed({0.9, 0.9, 0.1}));
  CHECK(r.accuracy == 0.0);
  CHECK(r.average_rank == 1.5);
  r = eval::amt_eval({groups[0]}, fixed({0.5, 0.5, 0.5}));
  CHECK(r.average_rank == 2.0);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<corpus::EvaluationGroup> many(10000, groups[0]);
  auto random = [&](const std::string&, const std::vector<std::string>&) {
    return std::vector<double>{u(rng), u(rng), u(rng)};
  };
  r = eval::amt_eval(many, random);
  CHECK(std::abs(r.accuracy - 1.0 / 3.0) < 0.02);
  CHECK(std::abs(r.average_rank - 2.0) < 0.03);
}
