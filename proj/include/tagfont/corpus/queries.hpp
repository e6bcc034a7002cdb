#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagfont/corpus/manifest.hpp"

namespace tagfont::corpus {

enum class QueryKind { kSingleFull, kSingleTop, kMulti };

std::string to_string(QueryKind k);
QueryKind query_kind_from_string(const std::string& s);

struct Query {
  std::vector<std::string> tags;       // sorted
  std::vector<std::string> positives;  // sorted font ids from the evaluated split
};

struct QuerySet {
  QueryKind kind = QueryKind::kSingleFull;
  std::vector<Query> queries;
  // Candidate queries dropped because no font in the split matches them.
  std::vector<std::vector<std::string>> skipped;
};

struct QuerySets {
  QuerySet single_full;
  QuerySet single_top;
  QuerySet multi;
};

struct QueryOptions {
  int top_k = 300;
  int subsets_per_font = 3;
  int min_query_size = 2;
  int max_query_size = 5;
  Split split = Split::kTest;
};

// Fonts of `ids` labeled with every tag of `query`, sorted.
std::vector<std::string> matching_fonts(const DatasetManifest& m,
                                        const std::vector<std::string>& ids,
                                        const std::vector<std::string>& query);

QuerySets build_query_sets(const DatasetManifest& m, std::uint64_t seed,
                           const QueryOptions& options = {});

// One JSON object per line: {"kind", "tags", "positives"}.
std::string query_set_to_jsonl(const QuerySet& qs);
QuerySet query_set_from_jsonl(const std::string& text);
void save_query_set(const QuerySet& qs, const std::string& path);
QuerySet load_query_set(const std::string& path);

// Three-candidate forced-choice instance for one tag.
struct EvaluationGroup {
  std::string tag;
  std::vector<std::string> candidates;  // exactly 3, all labeled with tag
  std::string ground_truth;
};

// Validates the candidates and picks the ground truth with the synthesizer's
// parameter oracle (tag_strength). Throws InvalidArgument when a candidate is
// unlabeled, the group size is wrong, the tag has no oracle, or the oracle
// cannot separate the top candidate.
EvaluationGroup make_group(const DatasetManifest& m, const std::string& tag,
                           const std::vector<std::string>& candidates);

struct AmtGroups {
  std::vector<EvaluationGroup> groups;
  std::vector<std::string> skipped_tags;  // fewer than 3 labeled fonts or no oracle
};

AmtGroups build_amt_groups(const DatasetManifest& m, int n_groups, std::uint64_t seed,
                           int top_k = 300, Split split = Split::kTest);

std::string groups_to_jsonl(const std::vector<EvaluationGroup>& groups);
std::vector<EvaluationGroup> groups_from_jsonl(const std::string& text);

}  // namespace tagfont::corpus
