#include "tagfont/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tagfont/common/errors.hpp"

namespace tagfont::eval {

using nlohmann::json;

namespace {

std::string join_tags(const std::vector<std::string>& tags, char sep) {
  std::string out;
  for (const auto& t : tags) {
    if (!out.empty()) out.push_back(sep);
    out += t;
  }
  return out;
}

std::vector<bool> relevance(const RankingResult& r) {
  const std::set<std::string> pos(r.positives.begin(), r.positives.end());
  std::vector<bool> rel;
  bool any = false;
  for (const auto& e : r.ranking) {
    rel.push_back(pos.count(e.font_id) != 0);
    any = any || rel.back();
  }
  if (!any) {
    throw InvalidArgument("query {" + join_tags(r.query, ',') + "} has no positive in the ranking");
  }
  return rel;
}

}  // namespace

double average_precision(const RankingResult& r) {
  const auto rel = relevance(r);
  double sum = 0;
  int h = 0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (!rel[i]) continue;
    ++h;
    sum += static_cast<double>(h) / static_cast<double>(i + 1);
  }
  return sum / h;
}

double ndcg(const RankingResult& r) {
  const auto rel = relevance(r);
  double dcg = 0, idcg = 0;
  int h = 0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (rel[i]) {
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
      ++h;
    }
  }
  for (int i = 0; i < h; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

QuerySetReport evaluate_query_set(const corpus::QuerySet& qs, const Scorer& scorer,
                                  const corpus::DatasetManifest& m,
                                  const std::vector<std::string>& font_ids) {
  QuerySetReport rep;
  rep.kind = qs.kind;
  const std::set<std::string> universe(font_ids.begin(), font_ids.end());
  for (const auto& q : qs.queries) {
    std::vector<std::string> pos;
    for (const auto& p : q.positives)
      if (universe.count(p)) pos.push_back(p);
    if (pos.empty()) {
      rep.skipped.push_back(q.tags);
      continue;
    }
    const auto qv = retrieval::encode_query(q.tags, m.vocabulary);
    const auto scores = scorer(qv);
    if (scores.size() != font_ids.size()) {
      throw InvalidArgument("scorer returned " + std::to_string(scores.size()) + " scores for " +
                            std::to_string(font_ids.size()) + " fonts (query {" +
                            join_tags(q.tags, ',') + "})");
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!std::isfinite(scores[i])) {
        throw InvalidArgument("scorer failed on query {" + join_tags(q.tags, ',') + "}, font " +
                              font_ids[i]);
      }
    }
    RankingResult r{q.tags, retrieval::rank(font_ids, scores), pos};
    rep.queries.push_back({q.tags, static_cast<int>(pos.size()), average_precision(r), ndcg(r)});
  }
  for (const auto& r : rep.queries) {
    rep.map += r.ap;
    rep.mean_ndcg += r.ndcg;
  }
  if (!rep.queries.empty()) {
    rep.map /= static_cast<double>(rep.queries.size());
    rep.mean_ndcg /= static_cast<double>(rep.queries.size());
  }
  return rep;
}

AmtReport amt_eval(const std::vector<corpus::EvaluationGroup>& groups, const GroupScorer& scorer) {
  AmtReport rep;
  double hits = 0, ranks = 0;
  for (const auto& g : groups) {
    if (g.candidates.size() != 3) throw InvalidArgument("amt group for '" + g.tag + "' needs 3 candidates");
    const auto gt = std::find(g.candidates.begin(), g.candidates.end(), g.ground_truth);
    if (gt == g.candidates.end()) {
      throw InvalidArgument("amt group for '" + g.tag + "': ground truth is not a candidate");
    }
    const auto scores = scorer(g.tag, g.candidates);
    if (scores.size() != 3) throw InvalidArgument("amt scorer must return 3 scores");
    const double s = scores[static_cast<std::size_t>(gt - g.candidates.begin())];
    int above = 0, tied = 0;
    for (double o : scores) {
      above += o > s;
      tied += o == s;
    }
    tied -= 1;  // the ground truth itself
    hits += above == 0 && tied == 0;
    ranks += above + 1 + tied / 2.0;
  }
  rep.n_groups = static_cast<int>(groups.size());
  if (rep.n_groups > 0) {
    rep.accuracy = hits / rep.n_groups;
    rep.average_rank = ranks / rep.n_groups;
  }
  return rep;
}

GroupScorer parameter_oracle_scorer(const corpus::DatasetManifest& m) {
  return [&m](const std::string& tag, const std::vector<std::string>& candidates) {
    std::vector<double> out;
    for (const auto& id : candidates) {
      const auto s = corpus::tag_strength(m.font(id).params, tag);
      if (!s) throw InvalidArgument("no parameter oracle for tag '" + tag + "'");
      out.push_back(*s);
    }
    return out;
  };
}

const QuerySetReport& MetricReport::set(corpus::QueryKind kind) const {
  for (const auto& s : sets)
    if (s.kind == kind) return s;
  throw InvalidArgument("metric report has no " + corpus::to_string(kind) + " results");
}

std::string MetricReport::to_json() const {
  json j;
  j["model"] = model;
  json js = json::array();
  for (const auto& s : sets) {
    json q = json::array();
    for (const auto& r : s.queries) {
      q.push_back({{"tags", r.tags}, {"n_positives", r.n_positives}, {"ap", r.ap}, {"ndcg", r.ndcg}});
    }
    js.push_back({{"kind", corpus::to_string(s.kind)},
                  {"map", s.map},
                  {"mean_ndcg", s.mean_ndcg},
                  {"n_queries", s.queries.size()},
                  {"skipped_zero_positive", s.skipped},
                  {"queries", q}});
  }
  j["query_sets"] = js;
  if (amt) {
    j["amt"] = {{"accuracy", amt->accuracy}, {"average_rank", amt->average_rank}, {"n_groups", amt->n_groups}};
  }
  return j.dump(2);
}

std::string MetricReport::to_table() const {
  std::ostringstream out;
  out << "model: " << model << "\n";
  if (!sets.empty()) {
    out << std::left << std::setw(14) << "query set" << std::right << std::setw(10) << "mAP" << std::setw(10)
        << "nDCG" << std::setw(9) << "queries" << std::setw(9) << "skipped" << "\n";
  }
  out << std::fixed << std::setprecision(2);
  for (const auto& s : sets) {
    out << std::left << std::setw(14) << corpus::to_string(s.kind) << std::right << std::setw(10)
        << 100 * s.map << std::setw(10) << 100 * s.mean_ndcg << std::setw(9) << s.queries.size()
        << std::setw(9) << s.skipped.size() << "\n";
  }
  if (amt) {
    out << "amt accuracy " << 100 * amt->accuracy << "  average rank " << std::setprecision(3)
        << amt->average_rank << "  groups " << amt->n_groups << "\n";
  }
  return out.str();
}

std::string MetricReport::per_query_csv() const {
  std::ostringstream out;
  out << "kind,tags,n_positives,ap,ndcg\n";
  out.precision(10);
  for (const auto& s : sets)
    for (const auto& r : s.queries) {
      out << corpus::to_string(s.kind) << ',' << join_tags(r.tags, '|') << ',' << r.n_positives << ','
          << r.ap << ',' << r.ndcg << '\n';
    }
  return out.str();
}

}  // namespace tagfont::eval
