#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "oracle.h"
#include "scalesearch/error.h"
#include "scalesearch/instrument.h"
#include "scalesearch/segment.h"
#include "scalesearch/tokenizer.h"

namespace scalesearch {
namespace {

using oracle::CorpusSchema;

Document Doc(std::initializer_list<std::pair<const std::string, Value>> fields) {
  Document d;
  for (const auto& [k, v] : fields) d.fields.emplace(k, v);
  return d;
}

// (field, term) -> local id -> positions, built with the naive tokenizer.
using NaiveIndex = std::map<std::pair<std::string, std::string>, std::map<uint32_t, std::vector<uint32_t>>>;

NaiveIndex BuildNaive(const IndexSchema& schema, const std::vector<Document>& docs) {
  NaiveIndex idx;
  for (uint32_t i = 0; i < docs.size(); ++i) {
    for (const auto& [name, value] : docs[i].fields) {
      const FieldSpec& f = schema.Field(name);
      if (!f.indexed()) continue;
      const std::string& s = std::get<std::string>(value);
      if (f.kind == FieldKind::kKeyword) {
        idx[{name, s}][i].push_back(0);
      } else {
        const auto toks = oracle::NaiveTokenize(s);
        for (uint32_t p = 0; p < toks.size(); ++p) idx[{name, toks[p]}][i].push_back(p);
      }
    }
  }
  return idx;
}

void ExpectMatchesNaive(const TermPostings& got, const std::map<uint32_t, std::vector<uint32_t>>& want) {
  std::vector<uint32_t> ids;
  std::vector<uint32_t> tfs, positions;
  for (const auto& [id, pos] : want) {
    ids.push_back(id);
    tfs.push_back(static_cast<uint32_t>(pos.size()));
    positions.insert(positions.end(), pos.begin(), pos.end());
  }
  EXPECT_EQ(got.docs.ToVector(), ids);
  EXPECT_EQ(got.tfs, tfs);
  EXPECT_EQ(got.positions, positions);
}

std::vector<Document> RandomCorpus(std::mt19937_64& rng, size_t n) {
  std::vector<Document> docs;
  for (size_t i = 0; i < n; ++i) docs.push_back(oracle::RandomDoc(rng, "k" + std::to_string(i), int64_t(i)));
  return docs;
}

std::string SealCorpus(const std::vector<Document>& docs, uint64_t id, SealStats* stats = nullptr) {
  SegmentBuffer b(CorpusSchema());
  for (const auto& d : docs) b.Add(d);
  return b.Seal(id, stats);
}

TEST(WriterAdd, PostingsWithPositions) {
  SegmentBuffer b(CorpusSchema());
  EXPECT_EQ(b.Add(Doc({{"id", std::string("p1")}, {"title", std::string("red Red shoe")}})), 0u);
  const TermPostings* red = b.Postings("title", "red");
  ASSERT_NE(red, nullptr);
  EXPECT_EQ(red->docs.ToVector(), std::vector<Ordinal>{0});
  EXPECT_EQ(red->tfs, std::vector<uint32_t>{2});
  EXPECT_EQ(red->positions, (std::vector<uint32_t>{0, 1}));
  const TermPostings* shoe = b.Postings("title", "shoe");
  ASSERT_NE(shoe, nullptr);
  EXPECT_EQ(shoe->tfs, std::vector<uint32_t>{1});
  EXPECT_EQ(shoe->positions, std::vector<uint32_t>{2});
  EXPECT_EQ(b.Postings("title", "Red"), nullptr);
}

TEST(WriterAdd, EmptyTitleAndArrivalOrder) {
  SegmentBuffer b(CorpusSchema());
  EXPECT_EQ(b.Add(Doc({{"id", std::string("a")}, {"title", std::string("")}})), 0u);
  EXPECT_EQ(b.Add(Doc({{"id", std::string("b")}, {"title", std::string("x")}})), 1u);
  EXPECT_EQ(b.Postings("title", ""), nullptr);
  EXPECT_EQ(b.Postings("title", "x")->docs.ToVector(), std::vector<Ordinal>{1});
}

TEST(WriterAdd, FootprintNeverShrinks) {
  std::mt19937_64 rng(2);
  SegmentBuffer b(CorpusSchema());
  uint64_t last = b.footprint();
  for (const auto& d : RandomCorpus(rng, 300)) {
    b.Add(d);
    ASSERT_GE(b.footprint(), last);
    last = b.footprint();
  }
  EXPECT_GT(last, 0u);
}

TEST(Seal, OneDocRoundTrip) {
  const std::string bytes = SealCorpus({Doc({{"id", std::string("p1")}, {"title", std::string("red shoe")}})}, 7);
  const SegmentView v = SegmentView::Open(bytes, CorpusSchema(), 3);
  EXPECT_EQ(v.doc_count(), 1u);
  EXPECT_EQ(v.segment_id(), 7u);
  EXPECT_EQ(v.shard_id(), 3u);
  EXPECT_EQ(v.Lookup("title", "shoe")->docs.ToVector(), std::vector<Ordinal>{0});
  EXPECT_EQ(v.Lookup("title", "boot"), nullptr);
  EXPECT_EQ(v.Key(0), "p1");
}

TEST(Seal, EmptyAndTwiceAreErrors) {
  SegmentBuffer empty(CorpusSchema());
  try {
    empty.Seal(1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyBuffer);
  }
  SegmentBuffer b(CorpusSchema());
  b.Add(Doc({{"id", std::string("a")}}));
  b.Seal(1);
  EXPECT_TRUE(b.sealed());
  try {
    b.Seal(2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBufferConsumed);
  }
  EXPECT_THROW(b.Add(Doc({{"id", std::string("b")}})), Error);
}

TEST(Seal, SinglePassOverPostings) {
  std::mt19937_64 rng(3);
  const auto docs = RandomCorpus(rng, 500);
  SegmentBuffer b(CorpusSchema());
  for (const auto& d : docs) b.Add(d);
  const size_t terms = BuildNaive(*CorpusSchema(), docs).size();
  SealStats stats;
  NodeCounters node("w");
  {
    NodeScope scope(&node);
    b.Seal(1, &stats);
  }
  EXPECT_EQ(stats.postings_visited, terms);
  EXPECT_EQ(stats.terms_written, terms);
  EXPECT_EQ(node.segment_writer_invocations.load(), 1u);
}

TEST(Seal, RoundTripReproducesEverything) {
  std::mt19937_64 rng(4);
  const auto schema = CorpusSchema();
  for (size_t n : {1u, 2u, 200u, 3000u, 10000u}) {
    const auto docs = RandomCorpus(rng, n);
    SegmentBuffer b(schema);
    for (const auto& d : docs) b.Add(d);
    std::map<std::pair<FieldId, std::string>, TermPostings> in_buffer;
    const NaiveIndex naive = BuildNaive(*schema, docs);
    for (const auto& [key, want] : naive) {
      const TermPostings* p = b.Postings(key.first, key.second);
      ASSERT_NE(p, nullptr);
      ExpectMatchesNaive(*p, want);
      in_buffer[{schema->IdOf(key.first), key.second}] = *p;
    }
    const SegmentView v = SegmentView::Open(b.Seal(n), schema);
    ASSERT_EQ(v.doc_count(), n);
    ASSERT_EQ(v.terms().size(), in_buffer.size());
    size_t i = 0;
    for (const auto& [key, postings] : in_buffer) {
      const SegmentTerm& t = v.terms()[i++];
      ASSERT_EQ(t.field, key.first);
      ASSERT_EQ(t.term, key.second);
      ASSERT_EQ(t.postings, postings);
      ASSERT_EQ(*v.Lookup(schema->FieldAt(key.first).name, key.second), postings);
      ASSERT_LT(postings.docs.Max().value(), n);
    }
    for (uint32_t local = 0; local < n; ++local) {
      const Document& d = docs[local];
      ASSERT_EQ(v.StoredDocument(local), d);
      ASSERT_EQ(v.Key(local), std::get<std::string>(d.fields.at("id")));
      for (const FieldSpec& f : schema->fields()) {
        const auto got = v.DocValue(f.name, local);
        const Value* want = d.Find(f.name);
        if (f.kind == FieldKind::kText) {
          const uint32_t len = want ? static_cast<uint32_t>(oracle::NaiveTokenize(std::get<std::string>(*want)).size()) : 0;
          ASSERT_EQ(v.FieldLength(schema->IdOf(f.name), local), len);
          continue;
        }
        if (want == nullptr) {
          ASSERT_FALSE(got.has_value()) << f.name;
        } else {
          ASSERT_TRUE(got.has_value()) << f.name;
          ASSERT_EQ(*got, *want) << f.name;
        }
      }
    }
  }
}

TEST(Open, EveryFlippedBitIsCaught) {
  std::mt19937_64 rng(5);
  const std::string bytes = SealCorpus(RandomCorpus(rng, 6), 1);
  for (size_t bit = 0; bit < bytes.size() * 8; ++bit) {
    std::string bad = bytes;
    bad[bit / 8] = static_cast<char>(bad[bit / 8] ^ (1 << (bit % 8)));
    try {
      SegmentView::Open(bad, CorpusSchema());
      FAIL() << "bit " << bit << " went unnoticed";
    } catch (const Error& e) {
      const ErrorCode c = e.code();
      ASSERT_TRUE(c == ErrorCode::kChecksumMismatch || c == ErrorCode::kBadMagic) << bit;
      if (bit >= 32) ASSERT_EQ(c, ErrorCode::kChecksumMismatch) << bit;
    }
  }
}

TEST(Open, BadMagicTruncationAndVersion) {
  const std::string bytes = SealCorpus({Doc({{"id", std::string("a")}})}, 1);
  std::string wrong = bytes;
  wrong[0] = 'X';
  try {
    SegmentView::Open(wrong, CorpusSchema());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBadMagic);
  }
  EXPECT_THROW(SegmentView::Open(bytes.substr(0, 10), CorpusSchema()), Error);
  EXPECT_THROW(SegmentView::Open("", CorpusSchema()), Error);

  // A future version with a valid checksum is rejected by version.
  std::string future = bytes.substr(0, bytes.size() - 4);
  future[4] = 2;
  const uint32_t crc = Crc32(future);
  future.append(reinterpret_cast<const char*>(&crc), 4);
  try {
    SegmentView::Open(future, CorpusSchema());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupportedVersion);
  }
}

TEST(Lookup, NonIndexedAndUnknownFields) {
  const SegmentView v = SegmentView::Open(SealCorpus({Doc({{"id", std::string("a")}})}, 1), CorpusSchema());
  for (const char* f : {"price", "version", "tag"}) {
    try {
      v.Lookup(f, "1");
      FAIL() << f;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kNonIndexedField) << f;
    }
  }
  EXPECT_THROW(v.Lookup("nope", "x"), Error);
}

TEST(Lookup, HundredRandomCorporaAgreeWithNaiveMap) {
  std::mt19937_64 rng(6);
  const auto schema = CorpusSchema();
  for (int c = 0; c < 100; ++c) {
    const auto docs = RandomCorpus(rng, std::uniform_int_distribution<size_t>(1, 120)(rng));
    const SegmentView v = SegmentView::Open(SealCorpus(docs, c + 1), schema);
    const NaiveIndex naive = BuildNaive(*schema, docs);
    for (const auto& [key, want] : naive) {
      const TermPostings* p = v.Lookup(key.first, key.second);
      ASSERT_NE(p, nullptr);
      ExpectMatchesNaive(*p, want);
    }
    for (const auto& w : oracle::Words()) {
      const auto lower = oracle::NaiveTokenize(w).at(0);
      const bool present = naive.count({"body", lower}) > 0;
      ASSERT_EQ(v.Lookup("body", lower) != nullptr, present);
      // Repeated lookups are stable.
      if (present) ASSERT_EQ(*v.Lookup("body", lower), *v.Lookup("body", lower));
    }
    ASSERT_EQ(v.Lookup("title", "nosuchterm"), nullptr);
  }
}

TEST(SegmentKeys, ZeroPaddedAndParsed) {
  const std::string k = SegmentObjectKey(3, 42);
  EXPECT_EQ(k, SegmentPrefix(3) + "00000000000000000042.sseg");
  EXPECT_EQ(SegmentIdFromKey(k), 42u);
  EXPECT_LT(SegmentObjectKey(0, 9), SegmentObjectKey(0, 10));
  EXPECT_EQ(SegmentIdFromKey("shards/0/segments/abc.sseg"), std::nullopt);
  EXPECT_EQ(SegmentIdFromKey("shards/0/segments/00000000000000000042.tmp"), std::nullopt);
}

TEST(Crc32, KnownVector) { EXPECT_EQ(Crc32("123456789"), 0xCBF43926u); }

}  // namespace
}  // namespace scalesearch
