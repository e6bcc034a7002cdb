#include "tagfont/corpus/queries.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tagfont/common/errors.hpp"

namespace tagfont::corpus {

using nlohmann::json;

std::string to_string(QueryKind k) {
  switch (k) {
    case QueryKind::kSingleFull: return "single-full";
    case QueryKind::kSingleTop: return "single-top";
    case QueryKind::kMulti: return "multi";
  }
  return "?";
}

QueryKind query_kind_from_string(const std::string& s) {
  if (s == "single-full") return QueryKind::kSingleFull;
  if (s == "single-top") return QueryKind::kSingleTop;
  if (s == "multi") return QueryKind::kMulti;
  throw FormatError("unknown query kind '" + s + "'");
}

std::vector<std::string> matching_fonts(const DatasetManifest& m,
                                        const std::vector<std::string>& ids,
                                        const std::vector<std::string>& query) {
  std::vector<std::string> out;
  for (const auto& id : ids) {
    const FontRecord& f = m.font(id);
    if (std::all_of(query.begin(), query.end(),
                    [&](const std::string& t) { return m.has_tag(f, t); }))
      out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

QuerySets build_query_sets(const DatasetManifest& m, std::uint64_t seed,
                           const QueryOptions& options) {
  const auto& ids = m.splits.of(options.split);
  if (ids.empty()) throw InvalidArgument("build_query_sets: evaluated split is empty");

  QuerySets out;
  out.single_full.kind = QueryKind::kSingleFull;
  out.single_top.kind = QueryKind::kSingleTop;
  out.multi.kind = QueryKind::kMulti;

  for (const auto& tag : m.vocabulary.tags()) {
    auto pos = matching_fonts(m, ids, {tag});
    if (pos.empty()) continue;  // not a test tag
    out.single_full.queries.push_back({{tag}, std::move(pos)});
  }

  const auto order = m.vocabulary.by_frequency();
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(options.top_k), order.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::string& tag = m.vocabulary.tag(order[i]);
    auto pos = matching_fonts(m, ids, {tag});
    if (pos.empty()) {
      out.single_top.skipped.push_back({tag});
      continue;
    }
    out.single_top.queries.push_back({{tag}, std::move(pos)});
  }

  std::mt19937_64 rng(seed);
  std::set<std::vector<std::string>> seen;
  for (const auto& id : ids) {
    const auto& tags = m.font(id).tags;
    if (static_cast<int>(tags.size()) < options.min_query_size) continue;
    for (int s = 0; s < options.subsets_per_font; ++s) {
      std::uniform_int_distribution<int> size_dist(options.min_query_size, options.max_query_size);
      const int size = std::min(size_dist(rng), static_cast<int>(tags.size()));
      std::vector<std::string> pool = tags;
      std::shuffle(pool.begin(), pool.end(), rng);
      std::vector<std::string> q(pool.begin(), pool.begin() + size);
      std::sort(q.begin(), q.end());
      if (!seen.insert(q).second) continue;
      auto pos = matching_fonts(m, ids, q);
      out.multi.queries.push_back({std::move(q), std::move(pos)});
    }
  }
  return out;
}

std::string query_set_to_jsonl(const QuerySet& qs) {
  std::string out;
  for (const auto& q : qs.queries) {
    json j = {{"kind", to_string(qs.kind)}, {"tags", q.tags}, {"positives", q.positives}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

QuerySet query_set_from_jsonl(const std::string& text) {
  QuerySet qs;
  std::stringstream ss(text);
  std::string line;
  bool first = true;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const QueryKind kind = query_kind_from_string(j.at("kind"));
      if (first) {
        qs.kind = kind;
        first = false;
      } else if (kind != qs.kind) {
        throw FormatError("query set mixes kinds");
      }
      qs.queries.push_back({j.at("tags").get<std::vector<std::string>>(),
                            j.at("positives").get<std::vector<std::string>>()});
    } catch (const json::exception& e) {
      throw FormatError(std::string("query set: ") + e.what());
    }
  }
  return qs;
}

void save_query_set(const QuerySet& qs, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out << query_set_to_jsonl(qs);
}

QuerySet load_query_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return query_set_from_jsonl(ss.str());
}

EvaluationGroup make_group(const DatasetManifest& m, const std::string& tag,
                           const std::vector<std::string>& candidates) {
  if (candidates.size() != 3) throw InvalidArgument("evaluation group needs exactly 3 candidates");
  std::set<std::string> uniq(candidates.begin(), candidates.end());
  if (uniq.size() != 3) throw InvalidArgument("evaluation group candidates must be distinct");
  std::vector<double> strength;
  for (const auto& id : candidates) {
    const FontRecord& f = m.font(id);
    if (!m.has_tag(f, tag)) {
      throw InvalidArgument("evaluation group: candidate '" + id + "' is not labeled '" + tag + "'");
    }
    auto s = tag_strength(f.params, tag);
    if (!s) throw InvalidArgument("evaluation group: tag '" + tag + "' has no parameter oracle");
    strength.push_back(*s);
  }
  std::vector<std::size_t> order = {0, 1, 2};
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return strength[a] > strength[b]; });
  if (strength[order[0]] - strength[order[1]] < 1e-9) {
    throw InvalidArgument("evaluation group: oracle tie for tag '" + tag + "'");
  }
  return {tag, candidates, candidates[order[0]]};
}

AmtGroups build_amt_groups(const DatasetManifest& m, int n_groups, std::uint64_t seed, int top_k,
                           Split split) {
  AmtGroups out;
  const auto& ids = m.splits.of(split);
  std::vector<std::pair<std::string, std::vector<std::string>>> eligible;
  const auto order = m.vocabulary.by_frequency();
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_k), order.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::string& tag = m.vocabulary.tag(order[i]);
    auto fonts = matching_fonts(m, ids, {tag});
    if (fonts.size() < 3 || !tag_strength(FontParams{}, tag)) {
      out.skipped_tags.push_back(tag);
      continue;
    }
    eligible.emplace_back(tag, std::move(fonts));
  }
  if (eligible.empty() || n_groups <= 0) return out;

  std::mt19937_64 rng(seed);
  constexpr int kMaxAttempts = 20;
  for (int g = 0; g < n_groups; ++g) {
    const auto& [tag, fonts] = eligible[static_cast<std::size_t>(g) % eligible.size()];
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      std::vector<std::string> pool = fonts;
      std::shuffle(pool.begin(), pool.end(), rng);
      std::vector<std::string> cand(pool.begin(), pool.begin() + 3);
      try {
        out.groups.push_back(make_group(m, tag, cand));
        break;
      } catch (const InvalidArgument&) {
        // oracle tie; draw another triple
      }
    }
  }
  return out;
}

std::string groups_to_jsonl(const std::vector<EvaluationGroup>& groups) {
  std::string out;
  for (const auto& g : groups) {
    json j = {{"tag", g.tag}, {"candidates", g.candidates}, {"ground_truth", g.ground_truth}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<EvaluationGroup> groups_from_jsonl(const std::string& text) {
  std::vector<EvaluationGroup> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("tag"), j.at("candidates").get<std::vector<std::string>>(),
                     j.at("ground_truth")});
    } catch (const json::exception& e) {
      throw FormatError(std::string("groups: ") + e.what());
    }
  }
  return out;
}

}  // namespace tagfont::corpus
