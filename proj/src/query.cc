#include "scalesearch/query.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "scalesearch/error.h"
#include "scalesearch/instrument.h"
#include "scalesearch/tokenizer.h"

namespace scalesearch {

QueryNode QueryNode::Term(std::string field, std::string term) {
  QueryNode n;
  n.kind = Kind::kTerm;
  n.field = std::move(field);
  n.term = std::move(term);
  return n;
}

QueryNode QueryNode::Range(std::string field, Value lo, Value hi) {
  QueryNode n;
  n.kind = Kind::kRange;
  n.field = std::move(field);
  n.lo = std::move(lo);
  n.hi = std::move(hi);
  return n;
}

QueryNode QueryNode::And(std::vector<QueryNode> children) {
  QueryNode n;
  n.kind = Kind::kAnd;
  n.children = std::move(children);
  return n;
}

QueryNode QueryNode::Or(std::vector<QueryNode> children) {
  QueryNode n;
  n.kind = Kind::kOr;
  n.children = std::move(children);
  return n;
}

std::string QueryNode::ToString() const {
  switch (kind) {
    case Kind::kTerm: return "Term(" + field + ":" + term + ")";
    case Kind::kRange: return "Range(" + field + ":" + ValueToString(lo) + ".." + ValueToString(hi) + ")";
    case Kind::kAnd:
    case Kind::kOr: {
      std::string s = kind == Kind::kAnd ? "And(" : "Or(";
      for (size_t i = 0; i < children.size(); ++i) {
        if (i > 0) s += ", ";
        s += children[i].ToString();
      }
      return s + ")";
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct Token {
  enum class Type { kWord, kQuoted, kLParen, kRParen, kLBracket, kRBracket, kColon, kEnd };
  Type type;
  std::string text;
  size_t pos;
};

[[noreturn]] void SyntaxError(size_t pos, const std::string& what) {
  throw Error(ErrorCode::kSyntax, what + " at offset " + std::to_string(pos));
}

std::vector<Token> Lex(std::string_view s) {
  std::vector<Token> out;
  size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    const size_t start = i;
    switch (c) {
      case '(': out.push_back({Token::Type::kLParen, "(", i++}); continue;
      case ')': out.push_back({Token::Type::kRParen, ")", i++}); continue;
      case '[': out.push_back({Token::Type::kLBracket, "[", i++}); continue;
      case ']': out.push_back({Token::Type::kRBracket, "]", i++}); continue;
      case ':': out.push_back({Token::Type::kColon, ":", i++}); continue;
      case '"': {
        std::string text;
        ++i;
        while (i < s.size() && s[i] != '"') {
          if (s[i] == '\\' && i + 1 < s.size()) ++i;
          text.push_back(s[i++]);
        }
        if (i == s.size()) SyntaxError(start, "unterminated quoted string");
        ++i;
        out.push_back({Token::Type::kQuoted, std::move(text), start});
        continue;
      }
      default: break;
    }
    while (i < s.size() && std::string_view(" \t\n\r()[]:\"").find(s[i]) == std::string_view::npos) ++i;
    out.push_back({Token::Type::kWord, std::string(s.substr(start, i - start)), start});
  }
  out.push_back({Token::Type::kEnd, "", s.size()});
  return out;
}

class Parser {
 public:
  Parser(std::string_view text, const IndexSchema& schema) : tokens_(Lex(text)), schema_(schema) {}

  QueryNode Parse() {
    QueryNode q = ParseOr();
    if (Peek().type != Token::Type::kEnd) SyntaxError(Peek().pos, "unexpected \"" + Peek().text + "\"");
    return q;
  }

 private:
  const Token& Peek() const { return tokens_[pos_]; }
  const Token& Next() { return tokens_[pos_++]; }
  bool IsKeyword(std::string_view kw) const { return Peek().type == Token::Type::kWord && Peek().text == kw; }

  const Token& Expect(Token::Type type, std::string_view what) {
    if (Peek().type != type) SyntaxError(Peek().pos, "expected " + std::string(what));
    return Next();
  }

  QueryNode ParseOr() {
    std::vector<QueryNode> parts{ParseAnd()};
    while (IsKeyword("OR")) {
      Next();
      parts.push_back(ParseAnd());
    }
    return parts.size() == 1 ? std::move(parts.front()) : QueryNode::Or(std::move(parts));
  }

  QueryNode ParseAnd() {
    std::vector<QueryNode> parts{ParsePrimary()};
    while (IsKeyword("AND")) {
      Next();
      parts.push_back(ParsePrimary());
    }
    return parts.size() == 1 ? std::move(parts.front()) : QueryNode::And(std::move(parts));
  }

  QueryNode ParsePrimary() {
    if (Peek().type == Token::Type::kLParen) {
      Next();
      QueryNode inner = ParseOr();
      Expect(Token::Type::kRParen, "\")\"");
      return inner;
    }
    const Token& field_tok = Peek();
    if (field_tok.type != Token::Type::kWord || field_tok.text == "AND" || field_tok.text == "OR") {
      SyntaxError(field_tok.pos, field_tok.type == Token::Type::kEnd ? "unexpected end of query" : "expected field name");
    }
    Next();
    Expect(Token::Type::kColon, "\":\" after field name");
    const FieldSpec& spec = schema_.Field(field_tok.text);
    if (Peek().type == Token::Type::kLBracket) {
      Next();
      const Token& lo = ExpectValue();
      if (!IsKeyword("TO")) SyntaxError(Peek().pos, "expected TO");
      Next();
      const Token& hi = ExpectValue();
      Expect(Token::Type::kRBracket, "\"]\"");
      if (spec.path != UpdatePath::kInPlace) {
        throw Error(ErrorCode::kFieldMisuse, "range on segment-path field \"" + spec.name + "\"");
      }
      return QueryNode::Range(spec.name, Bound(spec, lo, true), Bound(spec, hi, false));
    }
    const Token& value = ExpectValue();
    if (spec.path == UpdatePath::kInPlace) {
      Value v = Bound(spec, value, true);
      return QueryNode::Range(spec.name, v, v);
    }
    if (!spec.indexed()) {
      throw Error(ErrorCode::kFieldMisuse, "\"" + spec.name + "\" is neither indexed nor in-place");
    }
    if (spec.kind == FieldKind::kKeyword) return QueryNode::Term(spec.name, value.text);
    std::vector<QueryNode> terms;
    for (std::string& t : Tokenize(value.text)) terms.push_back(QueryNode::Term(spec.name, std::move(t)));
    if (terms.size() == 1) return std::move(terms.front());
    if (terms.empty()) return QueryNode::Or({});
    return QueryNode::And(std::move(terms));
  }

  const Token& ExpectValue() {
    if (Peek().type != Token::Type::kWord && Peek().type != Token::Type::kQuoted) {
      SyntaxError(Peek().pos, "expected a value");
    }
    return Next();
  }

  static Value Bound(const FieldSpec& spec, const Token& tok, bool lower) {
    const std::string& s = tok.text;
    const bool open = tok.type == Token::Type::kWord && s == "*";
    auto mismatch = [&] {
      throw Error(ErrorCode::kTypeMismatch, "bad value \"" + s + "\" for field \"" + spec.name + "\" at offset " +
                                                std::to_string(tok.pos));
    };
    switch (spec.kind) {
      case FieldKind::kInt64: {
        if (open) return lower ? std::numeric_limits<int64_t>::min() + 1 : std::numeric_limits<int64_t>::max();
        int64_t i = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
        if (ec == std::errc() && p == s.data() + s.size()) return i;
        return ParseDouble(s, mismatch);
      }
      case FieldKind::kFloat64:
        if (open) return lower ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        return ParseDouble(s, mismatch);
      case FieldKind::kKeyword:
      case FieldKind::kText:
        return s;
    }
    return s;
  }

  template <typename F>
  static Value ParseDouble(const std::string& s, F&& mismatch) {
    if (s.empty()) mismatch();
    size_t used = 0;
    double d = 0;
    try {
      d = std::stod(s, &used);
    } catch (const std::exception&) {
      mismatch();
    }
    if (used != s.size()) mismatch();
    return d;
  }

  std::vector<Token> tokens_;
  size_t pos_ = 0;
  const IndexSchema& schema_;
};

}  // namespace

QueryNode ParseQuery(std::string_view text, const IndexSchema& schema) { return Parser(text, schema).Parse(); }

// ---------------------------------------------------------------------------
// Execution

bool HitBefore(const Hit& a, const Hit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.key < b.key;
}

double Bm25Score(double tf, double df, double n, double doc_len, double avg_len) {
  if (!(tf >= 0) || !(df >= 1) || !(df <= n) || !(doc_len > 0) || !(avg_len > 0)) {
    throw Error(ErrorCode::kDomain, "bm25 arguments out of domain");
  }
  if (tf == 0) return 0;
  const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  return idf * tf * (kBm25K1 + 1) / (tf + kBm25K1 * (1 - kBm25B + kBm25B * doc_len / avg_len));
}

namespace {

DocIdSet EvaluateNode(const ReadSnapshot& snap, const QueryNode& q) {
  switch (q.kind) {
    case QueryNode::Kind::kTerm:
      return snap.Postings(q.field, q.term);
    case QueryNode::Kind::kRange:
      return snap.forward().RangeFilter(q.field, q.lo, q.hi);
    case QueryNode::Kind::kAnd: {
      if (q.children.empty()) return {};
      DocIdSet acc = EvaluateNode(snap, q.children.front());
      for (size_t i = 1; i < q.children.size() && !acc.empty(); ++i) acc = Intersect(acc, EvaluateNode(snap, q.children[i]));
      return acc;
    }
    case QueryNode::Kind::kOr: {
      DocIdSet acc;
      for (const QueryNode& c : q.children) acc = Union(acc, EvaluateNode(snap, c));
      return acc;
    }
  }
  return {};
}

void CollectTerms(const QueryNode& q, std::vector<const QueryNode*>& out) {
  if (q.kind == QueryNode::Kind::kTerm) out.push_back(&q);
  for (const QueryNode& c : q.children) CollectTerms(c, out);
}

}  // namespace

DocIdSet Evaluate(const ReadSnapshot& snapshot, const QueryNode& query) {
  return Difference(EvaluateNode(snapshot, query), snapshot.tombstones());
}

std::vector<Hit> Execute(const ReadSnapshot& snapshot, const QueryNode& query, size_t k, uint32_t shard) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "limit must be at least 1");
  if (NodeCounters* node = CurrentNode()) node->query_executions.fetch_add(1, std::memory_order_relaxed);
  const DocIdSet candidates = Evaluate(snapshot, query);
  if (candidates.empty()) return {};

  std::unordered_map<Ordinal, double> scores;
  std::vector<const QueryNode*> terms;
  CollectTerms(query, terms);
  const double n = static_cast<double>(snapshot.live_docs());
  for (const QueryNode* t : terms) {
    const std::vector<Posting> postings = snapshot.LivePostings(t->field, t->term);
    if (postings.empty()) continue;
    const FieldId field = snapshot.schema().IdOf(t->field);
    const bool text = snapshot.schema().FieldAt(field).kind == FieldKind::kText;
    const double df = static_cast<double>(postings.size());
    const double avg_len = text ? static_cast<double>(snapshot.live_length_sum(field)) / n : 1.0;
    for (const Posting& p : postings) {
      if (!candidates.Contains(p.ordinal)) continue;
      const double doc_len = text ? snapshot.FieldLength(field, p.ordinal) : 1.0;
      scores[p.ordinal] += Bm25Score(p.tf, df, n, doc_len, avg_len);
    }
  }

  std::vector<Hit> hits;
  hits.reserve(candidates.Cardinality());
  candidates.ForEach([&](Ordinal o) {
    const std::string* key = snapshot.KeyOf(o);
    if (key == nullptr) return;
    auto it = scores.find(o);
    hits.push_back(Hit{*key, o, it == scores.end() ? 0.0 : it->second, shard});
  });
  const size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), HitBefore);
  hits.resize(keep);
  return hits;
}

std::vector<Hit> MergeHits(const std::vector<std::vector<Hit>>& per_shard, size_t k) {
  std::vector<Hit> all;
  for (const auto& hits : per_shard) all.insert(all.end(), hits.begin(), hits.end());
  const size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), HitBefore);
  all.resize(keep);
  return all;
}

}  // namespace scalesearch
