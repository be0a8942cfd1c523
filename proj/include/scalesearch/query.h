#pragma once

// Query language and execution over a ReadSnapshot.
//
//   query   := or
//   or      := and ("OR" and)*
//   and     := primary ("AND" primary)*
//   primary := "(" or ")" | field ":" value | field ":" "[" value "TO" value "]"
//
// Values are bare words or double-quoted strings; "*" is an open numeric
// bound. Text terms are tokenized (several tokens become an AND), keyword
// terms match exactly, and field:value on an in-place field is the range
// [value TO value]. Candidates come from set algebra over postings and
// forward-array range filters; Term leaves are scored with BM25, Range
// leaves only filter.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "scalesearch/memindex.h"
#include "scalesearch/schema.h"

namespace scalesearch {

struct QueryNode {
  enum class Kind { kTerm, kAnd, kOr, kRange };

  Kind kind = Kind::kOr;
  std::string field;
  std::string term;
  Value lo, hi;
  std::vector<QueryNode> children;

  static QueryNode Term(std::string field, std::string term);
  static QueryNode Range(std::string field, Value lo, Value hi);
  static QueryNode And(std::vector<QueryNode> children);
  static QueryNode Or(std::vector<QueryNode> children);

  std::string ToString() const;
  friend bool operator==(const QueryNode&, const QueryNode&) = default;
};

// Throws kSyntax (with the byte offset), kUnknownField, kFieldMisuse
// (Range on a segment-path field, or any leaf on a field that is neither
// indexed nor in-place), kTypeMismatch (bad range bound).
QueryNode ParseQuery(std::string_view text, const IndexSchema& schema);

struct Hit {
  std::string key;
  Ordinal ordinal = 0;
  double score = 0;
  uint32_t shard = 0;

  friend bool operator==(const Hit&, const Hit&) = default;
};

// (score desc, key asc).
bool HitBefore(const Hit& a, const Hit& b);

inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;

// Throws kDomain unless tf >= 0, 1 <= df <= N, doc_len > 0, avg_len > 0.
double Bm25Score(double tf, double df, double n, double doc_len, double avg_len);

// Unscored candidate set, tombstones removed.
DocIdSet Evaluate(const ReadSnapshot& snapshot, const QueryNode& query);

// Top-k hits. Read-only; counts one query execution for the current node.
// Throws kInvalidArgument when k == 0.
std::vector<Hit> Execute(const ReadSnapshot& snapshot, const QueryNode& query, size_t k, uint32_t shard = 0);

// Merges per-shard top-k lists into one.
std::vector<Hit> MergeHits(const std::vector<std::vector<Hit>>& per_shard, size_t k);

}  // namespace scalesearch
