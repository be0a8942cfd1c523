#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracle.h"
#include "scalesearch/error.h"
#include "scalesearch/instrument.h"
#include "scalesearch/memindex.h"
#include "scalesearch/query.h"

namespace scalesearch {
namespace {

using oracle::CorpusSchema;

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

std::string Parsed(std::string_view q) { return ParseQuery(q, *CorpusSchema()).ToString(); }

Document Doc(const std::string& key, const std::string& title) {
  Document d;
  d.fields = {{"id", key}, {"kind", std::string("doc")}, {"title", title}};
  return d;
}

SegmentView Segment(uint64_t id, const std::vector<Document>& docs) {
  SegmentBuffer b(CorpusSchema());
  for (const auto& d : docs) b.Add(d);
  return SegmentView::Open(b.Seal(id), CorpusSchema());
}

std::vector<std::string> KeysOf(const std::vector<Hit>& hits) {
  std::vector<std::string> out;
  for (const Hit& h : hits) out.push_back(h.key);
  return out;
}

TEST(ParseQuery, Examples) {
  EXPECT_EQ(Parsed("title:shoe"), "Term(title:shoe)");
  EXPECT_EQ(Parsed("title:\"Red Shoe\""), "And(Term(title:red), Term(title:shoe))");
  EXPECT_EQ(Parsed("color:Red"), "Term(color:Red)");
  EXPECT_EQ(Parsed("title:a AND title:b OR color:c"), "Or(And(Term(title:a), Term(title:b)), Term(color:c))");
  EXPECT_EQ(Parsed("title:a AND (title:b OR color:c)"), "And(Term(title:a), Or(Term(title:b), Term(color:c)))");
  EXPECT_EQ(Parsed("price:[1 TO 2.5]"), "Range(price:1.0..2.5)");
  EXPECT_EQ(Parsed("stock:3"), "Range(stock:3..3)");
  EXPECT_EQ(Parsed("tag:\"a b\""), "Range(tag:\"a b\"..\"a b\")");
  const QueryNode open = ParseQuery("price:[* TO 5]", *CorpusSchema());
  EXPECT_EQ(open.lo, Value(-std::numeric_limits<double>::infinity()));
  EXPECT_EQ(open.hi, Value(5.0));
  EXPECT_EQ(ParseQuery("title:\"!!\"", *CorpusSchema()), QueryNode::Or({}));
}

TEST(ParseQuery, Errors) {
  const IndexSchema& s = *CorpusSchema();
  for (const char* q : {"", "title", "title:", "(title:a", "title:a)", "title:a AND", "AND title:a", "title:\"open",
                        "price:[1 2]", "price:[1 TO 2", "title:a title:b", ":x"}) {
    try {
      ParseQuery(q, s);
      ADD_FAILURE() << q;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kSyntax) << q;
      EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << q;
    }
  }
  EXPECT_EQ(CodeOf([&] { ParseQuery("nope:x", s); }), ErrorCode::kUnknownField);
  EXPECT_EQ(CodeOf([&] { ParseQuery("title:[a TO b]", s); }), ErrorCode::kFieldMisuse);
  EXPECT_EQ(CodeOf([&] { ParseQuery("version:3", s); }), ErrorCode::kFieldMisuse);
  EXPECT_EQ(CodeOf([&] { ParseQuery("price:[cheap TO 3]", s); }), ErrorCode::kTypeMismatch);
  EXPECT_EQ(CodeOf([&] { ParseQuery("stock:1x", s); }), ErrorCode::kTypeMismatch);
}

TEST(ParseQuery, SyntaxErrorNamesTheOffset) {
  try {
    ParseQuery("title:a AND )", *CorpusSchema());
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("offset 12"), std::string::npos) << e.what();
  }
}

TEST(Bm25, HandComputedValues) {
  // tf=1, df=N=1, doc_len == avg_len: tf part is 2.2 / 2.2, so the score is idf.
  EXPECT_DOUBLE_EQ(Bm25Score(1, 1, 1, 3, 3), std::log(4.0 / 3.0));
  // idf = ln(1 + 9.5/1.5); norm = 1.2 * (0.25 + 0.75 * 2) = 2.1.
  EXPECT_NEAR(Bm25Score(2, 1, 10, 10, 5), std::log(22.0 / 3.0) * 4.4 / 4.1, 1e-15);
  EXPECT_EQ(Bm25Score(0, 3, 10, 4, 4), 0.0);
  // df == N keeps a positive idf.
  EXPECT_GT(Bm25Score(1, 10, 10, 1, 1), 0.0);
}

TEST(Bm25, DomainErrors) {
  EXPECT_EQ(CodeOf([] { Bm25Score(-1, 1, 1, 1, 1); }), ErrorCode::kDomain);
  EXPECT_EQ(CodeOf([] { Bm25Score(1, 0, 1, 1, 1); }), ErrorCode::kDomain);
  EXPECT_EQ(CodeOf([] { Bm25Score(1, 2, 1, 1, 1); }), ErrorCode::kDomain);
  EXPECT_EQ(CodeOf([] { Bm25Score(1, 1, 1, 0, 1); }), ErrorCode::kDomain);
  EXPECT_EQ(CodeOf([] { Bm25Score(1, 1, 1, 1, 0); }), ErrorCode::kDomain);
  EXPECT_EQ(CodeOf([] { Bm25Score(std::nan(""), 1, 1, 1, 1); }), ErrorCode::kDomain);
}

TEST(Bm25, MatchesReferenceAndIsMonotone) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 2000; ++i) {
    const double n = 1 + std::floor(u(rng) * 1000);
    const double df = 1 + std::floor(u(rng) * n);
    const double tf = std::floor(u(rng) * 20);
    const double len = 1 + std::floor(u(rng) * 50);
    const double avg = 0.5 + u(rng) * 40;
    const double s = Bm25Score(tf, df, n, len, avg);
    const double ref = oracle::Bm25Reference(tf, df, n, len, avg);
    ASSERT_LE(std::abs(s - ref), 1e-12 * std::max(1.0, std::abs(ref)));
    ASSERT_LT(s, Bm25Score(tf + 1, df, n, len, avg));
    ASSERT_LE(s, Bm25Score(tf, df, n, len, avg + 1));
    if (tf > 0) {
      ASSERT_GT(s, Bm25Score(tf, df, n, len + 1, avg));
      if (df < n) ASSERT_GT(s, Bm25Score(tf, df + 1, n, len, avg));
    }
  }
}

TEST(Execute, RanksByBm25ThenKey) {
  MemIndex idx(CorpusSchema());
  idx.Incorporate(Segment(1, {Doc("a", "red shoe"), Doc("b", "red red boot"), Doc("c", "blue sock"),
                              Doc("d", "shoe red")}));
  const auto snap = idx.snapshot();
  const auto hits = Execute(*snap, ParseQuery("title:red", *CorpusSchema()), 10);
  EXPECT_EQ(KeysOf(hits), (std::vector<std::string>{"b", "a", "d"}));
  // N=4, df=3, lengths 2,3,2,2 so avg 9/4.
  const double avg = 9.0 / 4.0;
  EXPECT_DOUBLE_EQ(hits[0].score, oracle::Bm25Reference(2, 3, 4, 3, avg));
  EXPECT_DOUBLE_EQ(hits[1].score, oracle::Bm25Reference(1, 3, 4, 2, avg));
  EXPECT_EQ(hits[1].score, hits[2].score);

  EXPECT_EQ(KeysOf(Execute(*snap, ParseQuery("title:red", *CorpusSchema()), 1)), std::vector<std::string>{"b"});
  EXPECT_TRUE(Execute(*snap, ParseQuery("title:nothing", *CorpusSchema()), 5).empty());
  EXPECT_EQ(CodeOf([&] { Execute(*snap, ParseQuery("title:red", *CorpusSchema()), 0); }),
            ErrorCode::kInvalidArgument);
}

TEST(Execute, RangeLeavesFilterWithoutScoring) {
  MemIndex idx(CorpusSchema());
  idx.Incorporate(Segment(1, {Doc("a", "red"), Doc("b", "red"), Doc("c", "blue")}));
  idx.forward().SetValue("price", *idx.OrdinalOf("a"), 5.0);
  idx.forward().SetValue("price", *idx.OrdinalOf("c"), 6.0);
  const auto snap = idx.Publish();
  const auto all = Execute(*snap, ParseQuery("price:[0 TO 10]", *CorpusSchema()), 10);
  EXPECT_EQ(KeysOf(all), (std::vector<std::string>{"a", "c"}));
  for (const Hit& h : all) EXPECT_EQ(h.score, 0.0);
  const auto both = Execute(*snap, ParseQuery("title:red AND price:[0 TO 10]", *CorpusSchema()), 10);
  ASSERT_EQ(KeysOf(both), std::vector<std::string>{"a"});
  EXPECT_DOUBLE_EQ(both[0].score, Execute(*snap, ParseQuery("title:red", *CorpusSchema()), 10)[0].score);
}

TEST(Execute, CountsOneExecutionAndIsDeterministic) {
  MemIndex idx(CorpusSchema());
  idx.Incorporate(Segment(1, {Doc("a", "x y"), Doc("b", "x"), Doc("c", "y")}));
  const auto snap = idx.snapshot();
  const QueryNode q = ParseQuery("title:x OR title:y", *CorpusSchema());
  NodeCounters counters("search-0");
  std::vector<Hit> first;
  {
    NodeScope scope(&counters);
    first = Execute(*snap, q, 10);
    for (int i = 0; i < 9; ++i) EXPECT_EQ(Execute(*snap, q, 10), first);
  }
  EXPECT_EQ(counters.query_executions.load(), 10u);
  EXPECT_EQ(counters.store_puts.load(), 0u);
  EXPECT_EQ(first.front().key, "a");
}

TEST(MergeHits, GlobalTopK) {
  const std::vector<std::vector<Hit>> shards = {{{"b", 0, 3.0, 0}, {"a", 1, 1.0, 0}}, {{"c", 0, 3.0, 1}, {"d", 1, 2.0, 1}}};
  EXPECT_EQ(KeysOf(MergeHits(shards, 3)), (std::vector<std::string>{"b", "c", "d"}));
  EXPECT_EQ(MergeHits(shards, 10).size(), 4u);
}

// Full-scan oracle over random corpora: candidate sets equal the model and
// each score equals the sum of independently computed BM25 terms.
struct Model {
  oracle::CorpusModel corpus;
  std::map<std::string, std::map<std::string, uint32_t>> tf;  // "field\x1fterm" -> key -> tf
  std::map<std::string, std::map<std::string, uint64_t>> len;  // field -> key -> tokens

  void Put(const Document& d) {
    const std::string key = std::get<std::string>(d.fields.at("id"));
    for (auto& [ft, per_key] : tf) per_key.erase(key);
    for (const char* field : {"title", "body"}) {
      uint64_t n = 0;
      if (auto it = d.fields.find(field); it != d.fields.end()) {
        for (const auto& t : oracle::NaiveTokenize(std::get<std::string>(it->second))) {
          ++tf[std::string(field) + '\x1f' + t][key];
          ++n;
        }
      }
      len[field][key] = n;
    }
    for (const char* field : {"color", "kind"}) {
      if (auto it = d.fields.find(field); it != d.fields.end()) {
        tf[std::string(field) + '\x1f' + std::get<std::string>(it->second)][key] = 1;
      }
    }
    corpus.Put(d);
  }

  double Score(const std::string& key, const QueryNode& q) const {
    if (q.kind == QueryNode::Kind::kRange) return 0;
    if (q.kind != QueryNode::Kind::kTerm) {
      double s = 0;
      for (const QueryNode& c : q.children) s += Score(key, c);
      return s;
    }
    auto it = tf.find(q.field + '\x1f' + q.term);
    if (it == tf.end() || it->second.empty() || !it->second.count(key)) return 0;
    const double n = static_cast<double>(corpus.docs().size());
    const bool text = q.field == "title" || q.field == "body";
    double doc_len = 1, avg = 1;
    if (text) {
      uint64_t sum = 0;
      for (const auto& [k, l] : len.at(q.field)) sum += l;
      avg = static_cast<double>(sum) / n;
      doc_len = static_cast<double>(len.at(q.field).at(key));
    }
    return oracle::Bm25Reference(it->second.at(key), static_cast<double>(it->second.size()), n, doc_len, avg);
  }
};

TEST(Execute, RandomCorporaMatchFullScanAndReferenceScores) {
  std::mt19937_64 rng(41);
  for (int round = 0; round < 40; ++round) {
    MemIndexOptions opts;
    opts.policy = static_cast<MergePolicy>(rng() % 3);
    opts.unit_docs = 1 + rng() % 16;
    MemIndex idx(CorpusSchema(), opts);
    Model model;
    const int keys = 5 + static_cast<int>(rng() % 200);
    const int segments = 1 + static_cast<int>(rng() % 6);
    for (int s = 1; s <= segments; ++s) {
      std::map<std::string, Document> batch;
      const int docs = 1 + static_cast<int>(rng() % 80);
      for (int i = 0; i < docs; ++i) {
        const std::string key = "k" + std::to_string(rng() % keys);
        batch[key] = oracle::RandomDoc(rng, key, s);
      }
      std::vector<Document> list;
      for (auto& [k, d] : batch) {
        model.Put(d);
        list.push_back(d);
      }
      idx.Incorporate(Segment(s, list));
      const int updates = static_cast<int>(rng() % 30);
      for (int u = 0; u < updates; ++u) {
        const auto& docs_now = model.corpus.docs();
        auto it = std::next(docs_now.begin(), static_cast<long>(rng() % docs_now.size()));
        const std::string field = std::vector<std::string>{"price", "stock", "tag", "label"}[rng() % 4];
        const Value v = oracle::RandomInPlaceValue(rng, field);
        idx.forward().SetValue(field, *idx.OrdinalOf(it->first), v);
        model.corpus.Set(it->first, field, v);
      }
      idx.Publish();
    }
    const auto snap = idx.snapshot();
    ASSERT_EQ(snap->live_docs(), model.corpus.docs().size());
    for (int qi = 0; qi < 30; ++qi) {
      const QueryNode q = oracle::RandomQuery(rng);
      const std::set<std::string> expect = model.corpus.Evaluate(q);
      const auto hits = Execute(*snap, q, 100000);
      ASSERT_EQ(hits.size(), expect.size()) << q.ToString();
      for (size_t i = 0; i < hits.size(); ++i) {
        ASSERT_TRUE(expect.count(hits[i].key)) << q.ToString();
        const double ref = model.Score(hits[i].key, q);
        ASSERT_LE(std::abs(hits[i].score - ref), 1e-12 * std::max(1.0, ref)) << q.ToString() << " " << hits[i].key;
        if (i > 0) ASSERT_TRUE(HitBefore(hits[i - 1], hits[i]));
      }
    }
  }
}

TEST(Execute, InPlaceWritesAreVisibleOnlyAfterPublish) {
  MemIndex idx(CorpusSchema());
  idx.Incorporate(Segment(1, {Doc("a", "x")}));
  const auto before = idx.snapshot();
  idx.forward().SetValue("price", *idx.OrdinalOf("a"), 9.0);
  const QueryNode q = ParseQuery("price:9", *CorpusSchema());
  EXPECT_TRUE(Execute(*before, q, 1).empty());
  const auto after = idx.Publish();
  EXPECT_EQ(Execute(*after, q, 1).size(), 1u);
  EXPECT_TRUE(Execute(*before, q, 1).empty());
}

}  // namespace
}  // namespace scalesearch
