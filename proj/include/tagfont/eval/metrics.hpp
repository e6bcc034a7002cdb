#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tagfont/corpus/queries.hpp"
#include "tagfont/retrieval/retrieval.hpp"

namespace tagfont::eval {

struct RankingResult {
  std::vector<std::string> query;
  std::vector<retrieval::Ranked> ranking;  // descending score, ties by font_id
  std::vector<std::string> positives;
};

// Both throw InvalidArgument when no positive appears in the ranking.
double average_precision(const RankingResult& r);
double ndcg(const RankingResult& r);

// Per-font scores for one query, aligned with the evaluated font list.
using Scorer = std::function<std::vector<double>(const retrieval::QueryVector&)>;

struct QueryResult {
  std::vector<std::string> tags;
  int n_positives = 0;
  double ap = 0;
  double ndcg = 0;
};

struct QuerySetReport {
  corpus::QueryKind kind = corpus::QueryKind::kSingleFull;
  std::vector<QueryResult> queries;
  double map = 0;
  double mean_ndcg = 0;
  // Queries without a positive among the evaluated fonts; excluded from means.
  std::vector<std::vector<std::string>> skipped;
};

// Ranks `font_ids` for every query. Throws InvalidArgument naming the query
// and font when the scorer returns a non-finite score or the wrong count.
QuerySetReport evaluate_query_set(const corpus::QuerySet& qs, const Scorer& scorer,
                                  const corpus::DatasetManifest& m,
                                  const std::vector<std::string>& font_ids);

// ---- forced-choice groups

// Scores of the candidates of one group for its tag.
using GroupScorer =
    std::function<std::vector<double>(const std::string& tag, const std::vector<std::string>& candidates)>;

struct AmtReport {
  double accuracy = 0;
  double average_rank = 0;
  int n_groups = 0;
};

// A tie at the top counts as a miss; a tied ground truth takes the mean of
// the tied ranks.
AmtReport amt_eval(const std::vector<corpus::EvaluationGroup>& groups, const GroupScorer& scorer);

// Scores candidates by how strongly their generating parameters express the tag.
GroupScorer parameter_oracle_scorer(const corpus::DatasetManifest& m);

// ---- report

struct MetricReport {
  std::string model;
  std::vector<QuerySetReport> sets;
  std::optional<AmtReport> amt;

  const QuerySetReport& set(corpus::QueryKind kind) const;  // throws if absent
  std::string to_json() const;
  std::string to_table() const;
  // One row per query: kind,tags,n_positives,ap,ndcg
  std::string per_query_csv() const;
};

}  // namespace tagfont::eval
