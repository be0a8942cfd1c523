#include <gtest/gtest.h>

#include <bit>
#include <map>
#include <random>

#include "oracle.h"
#include "scalesearch/error.h"
#include "scalesearch/instrument.h"
#include "scalesearch/memindex.h"

namespace scalesearch {
namespace {

using oracle::CorpusSchema;

Document Doc(const std::string& key, const std::string& title) {
  Document d;
  d.fields = {{"id", key}, {"kind", std::string("doc")}};
  if (!title.empty()) d.fields.emplace("title", title);
  return d;
}

SegmentView Segment(uint64_t id, const std::vector<Document>& docs) {
  SegmentBuffer b(CorpusSchema());
  for (const auto& d : docs) b.Add(d);
  return SegmentView::Open(b.Seal(id), CorpusSchema());
}

std::set<std::string> KeysOf(const ReadSnapshot& snap, const DocIdSet& set) {
  std::set<std::string> out;
  set.ForEach([&](Ordinal o) { out.insert(*snap.KeyOf(o)); });
  return out;
}

TEST(LevelForSize, BinaryLevels) {
  EXPECT_EQ(LevelForSize(1, 1), 0);
  EXPECT_EQ(LevelForSize(2, 1), 1);
  EXPECT_EQ(LevelForSize(3, 1), 1);
  EXPECT_EQ(LevelForSize(1024, 1), 10);
  EXPECT_EQ(LevelForSize(1000, 1024), 0);
  EXPECT_EQ(LevelForSize(2048, 1024), 1);
}

TEST(PlanMerges, Examples) {
  EXPECT_EQ(PlanMerges({1, 1}, 1, MergePolicy::kLogarithmic), (std::vector<MergeAction>{{0, 1}}));
  EXPECT_TRUE(PlanMerges({4, 2, 1}, 1, MergePolicy::kLogarithmic).empty());
  EXPECT_EQ(PlanMerges({4, 2, 1, 1}, 1, MergePolicy::kLogarithmic),
            (std::vector<MergeAction>{{2, 3}, {1, 2}, {0, 1}}));
  EXPECT_TRUE(PlanMerges({1, 1, 1}, 1, MergePolicy::kNoMerge).empty());
  EXPECT_EQ(PlanMerges({5, 1}, 1, MergePolicy::kImmediate), (std::vector<MergeAction>{{0, 1}}));
  EXPECT_TRUE(PlanMerges({5}, 1, MergePolicy::kImmediate).empty());
  EXPECT_EQ(PlanMerges({4, 2, 1, 1}, 1, MergePolicy::kLogarithmic), PlanMerges({4, 2, 1, 1}, 1, MergePolicy::kLogarithmic));
}

// Pen-and-paper binary counter: inserting the i-th unit merges the trailing
// ones of i-1, copying 2 + 4 + ... documents.
uint64_t CounterMergeVolume(uint64_t n) {
  uint64_t volume = 0;
  for (uint64_t i = 0; i < n; ++i) {
    uint64_t carry = 1;
    for (uint64_t bits = i; bits & 1; bits >>= 1) {
      carry *= 2;
      volume += carry;
    }
  }
  return volume;
}

TEST(PlanMerges, CounterVolumeMatchesNLogN) {
  for (uint64_t k = 0; k <= 12; ++k) {
    const uint64_t n = uint64_t{1} << k;
    std::vector<uint64_t> sizes;
    uint64_t volume = 0;
    for (uint64_t i = 0; i < n; ++i) {
      sizes.push_back(1);
      for (const MergeAction& m : PlanMerges(sizes, 1, MergePolicy::kLogarithmic)) {
        sizes[m.first] += sizes[m.second];
        volume += sizes[m.first];
        sizes.erase(sizes.begin() + static_cast<std::ptrdiff_t>(m.second));
      }
      ASSERT_LE(sizes.size(), static_cast<size_t>(std::bit_width(i + 1)));
    }
    EXPECT_EQ(volume, n * k);
    EXPECT_EQ(volume, CounterMergeVolume(n));
    EXPECT_EQ(sizes.size(), 1u);
  }
}

TEST(Incorporate, IntoEmptyIndex) {
  MemIndex idx(CorpusSchema());
  EXPECT_EQ(idx.snapshot()->live_docs(), 0u);
  const auto snap = idx.Incorporate(Segment(1, {Doc("a", "red shoe")}));
  EXPECT_EQ(idx.subindex_count(), 1u);
  EXPECT_TRUE(snap->tombstones().empty());
  EXPECT_EQ(snap->live_docs(), 1u);
  EXPECT_EQ(KeysOf(*snap, snap->Postings("title", "shoe")), std::set<std::string>{"a"});
}

TEST(Incorporate, LatestVersionWins) {
  MemIndex idx(CorpusSchema());
  idx.Incorporate(Segment(1, {Doc("p1", "red shoe"), Doc("p2", "red boot")}));
  const Ordinal v1 = *idx.OrdinalOf("p1");
  const auto snap = idx.Incorporate(Segment(2, {Doc("p1", "blue shoe")}));
  EXPECT_TRUE(snap->tombstones().Contains(v1));
  EXPECT_FALSE(snap->IsLive(v1));
  EXPECT_EQ(KeysOf(*snap, snap->Postings("title", "red")), std::set<std::string>{"p2"});
  EXPECT_EQ(KeysOf(*snap, snap->Postings("title", "blue")), std::set<std::string>{"p1"});
  EXPECT_EQ(snap->live_docs(), 2u);
  EXPECT_EQ(idx.key_map().at("p1").segment_id, 2u);
  EXPECT_EQ(idx.key_map().size(), 2u);
}

TEST(Incorporate, OutOfOrderSegment) {
  MemIndex idx(CorpusSchema());
  idx.Incorporate(Segment(5, {Doc("a", "x")}));
  for (uint64_t id : {uint64_t{5}, uint64_t{4}}) {
    try {
      idx.Incorporate(Segment(id, {Doc("b", "y")}));
      FAIL() << id;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kOutOfOrderSegment);
    }
  }
  EXPECT_EQ(idx.snapshot()->live_docs(), 1u);
}

TEST(Incorporate, SixteenUnitSegmentsCollapseToOne) {
  MemIndexOptions opts;
  opts.unit_docs = 1;
  MemIndex idx(CorpusSchema(), opts);
  for (uint64_t i = 1; i <= 16; ++i) {
    idx.Incorporate(Segment(i, {Doc("k" + std::to_string(i), "w")}));
    ASSERT_LE(idx.subindex_count(), static_cast<size_t>(std::bit_width(i)));
  }
  EXPECT_EQ(idx.subindex_count(), 1u);
  EXPECT_EQ(idx.merge_stats().merge_volume_docs, 16u * 4);
  EXPECT_EQ(idx.snapshot()->live_docs(), 16u);
}

TEST(Incorporate, PoliciesOverManySegments) {
  for (MergePolicy p : {MergePolicy::kImmediate, MergePolicy::kNoMerge, MergePolicy::kLogarithmic}) {
    MemIndexOptions opts;
    opts.unit_docs = 1;
    opts.policy = p;
    MemIndex idx(CorpusSchema(), opts);
    const uint64_t n = 64;
    for (uint64_t i = 1; i <= n; ++i) idx.Incorporate(Segment(i, {Doc("k" + std::to_string(i), "w")}));
    const auto& ms = idx.merge_stats();
    switch (p) {
      case MergePolicy::kImmediate:
        EXPECT_EQ(ms.merge_volume_docs, n * (n + 1) / 2);
        EXPECT_EQ(idx.subindex_count(), 1u);
        break;
      case MergePolicy::kNoMerge:
        EXPECT_EQ(ms.merge_volume_docs, 0u);
        EXPECT_EQ(idx.subindex_count(), n);
        break;
      case MergePolicy::kLogarithmic:
        EXPECT_EQ(ms.merge_volume_docs, n * 6);
        EXPECT_EQ(idx.subindex_count(), 1u);
        break;
    }
    EXPECT_EQ(idx.snapshot()->Postings("title", "w").Cardinality(), n);
  }
}

TEST(Incorporate, NoFileOrStoreWrites) {
  NodeCounters node("search");
  MemIndex idx(CorpusSchema());
  std::vector<SegmentView> views;
  for (uint64_t i = 1; i <= 20; ++i) views.push_back(Segment(i, {Doc("k" + std::to_string(i % 7), "w z")}));
  const uint64_t files = ProcessFileWrites();
  {
    NodeScope scope(&node);
    for (const auto& v : views) idx.Incorporate(v);
  }
  EXPECT_EQ(ProcessFileWrites(), files);
  EXPECT_EQ(node.store_puts.load(), 0u);
  EXPECT_EQ(node.segment_writer_invocations.load(), 0u);
}

TEST(Incorporate, KeyRangeFilterExcludesForeignKeys) {
  MemIndexOptions opts;
  opts.key_range = KeyRange{"b", std::string("d")};
  MemIndex idx(CorpusSchema(), opts);
  const auto snap = idx.Incorporate(Segment(1, {Doc("a", "w"), Doc("b", "w"), Doc("c", "w"), Doc("d", "w")}));
  EXPECT_EQ(KeysOf(*snap, snap->Postings("title", "w")), (std::set<std::string>{"b", "c"}));
  EXPECT_EQ(snap->live_docs(), 2u);
}

TEST(SubIndexMerge, Examples) {
  const SegmentView a = Segment(1, {Doc("x", "shoe")});
  const SegmentView b = Segment(2, {Doc("y", "shoe boot")});
  const auto sa = SubIndex::FromSegment(a, 0, 1);
  const auto sb = SubIndex::FromSegment(b, 100, 1);
  const auto m = SubIndex::Merge(*sa, *sb, 1);
  const FieldId title = CorpusSchema()->IdOf("title");
  EXPECT_EQ(m->Lookup(title, "shoe")->docs.ToVector(), (std::vector<Ordinal>{0, 100}));
  EXPECT_EQ(m->Lookup(title, "boot")->docs.ToVector(), std::vector<Ordinal>{100});
  EXPECT_EQ(m->doc_count(), 2u);
  EXPECT_EQ(m->level(), 1);
  EXPECT_LE(m->Footprint(), sa->Footprint() + sb->Footprint());
  EXPECT_EQ(m->blocks().size(), 2u);
}

TEST(SubIndexMerge, RandomPairsEqualPerTermUnion) {
  std::mt19937_64 rng(12);
  const auto schema = CorpusSchema();
  for (int round = 0; round < 40; ++round) {
    std::vector<Document> da, db;
    for (int i = 0, n = 1 + int(rng() % 80); i < n; ++i) da.push_back(oracle::RandomDoc(rng, "a" + std::to_string(i), 1));
    for (int i = 0, n = 1 + int(rng() % 80); i < n; ++i) db.push_back(oracle::RandomDoc(rng, "b" + std::to_string(i), 1));
    const SegmentView va = Segment(1, da), vb = Segment(2, db);
    const auto sa = SubIndex::FromSegment(va, 0, 1);
    const auto sb = SubIndex::FromSegment(vb, static_cast<Ordinal>(da.size()), 1);
    const auto m = SubIndex::Merge(*sa, *sb, 1);
    std::set<std::pair<FieldId, std::string>> keys;
    for (const auto& t : sa->terms()) keys.insert(t.first);
    for (const auto& t : sb->terms()) keys.insert(t.first);
    ASSERT_EQ(m->terms().size(), keys.size());
    for (size_t i = 1; i < m->terms().size(); ++i) ASSERT_LT(m->terms()[i - 1].first, m->terms()[i].first);
    for (const auto& k : keys) {
      const TermPostings* pa = sa->Lookup(k.first, k.second);
      const TermPostings* pb = sb->Lookup(k.first, k.second);
      const TermPostings* pm = m->Lookup(k.first, k.second);
      ASSERT_NE(pm, nullptr);
      const DocIdSet want = Union(pa ? pa->docs : DocIdSet{}, pb ? pb->docs : DocIdSet{});
      ASSERT_EQ(pm->docs, want);
      std::vector<uint32_t> tfs;
      if (pa) tfs.insert(tfs.end(), pa->tfs.begin(), pa->tfs.end());
      if (pb) tfs.insert(tfs.end(), pb->tfs.begin(), pb->tfs.end());
      ASSERT_EQ(pm->tfs, tfs);
    }
  }
}

// Naive postings of the latest version per key.
struct NaiveCorpus {
  std::map<std::string, Document> latest;

  std::map<std::string, uint32_t> Postings(const std::string& field, const std::string& term) const {
    std::map<std::string, uint32_t> out;
    for (const auto& [k, d] : latest) {
      const Value* v = d.Find(field);
      if (!v) continue;
      const std::string& s = std::get<std::string>(*v);
      uint32_t tf = 0;
      if (field == "color" || field == "kind" || field == "id") {
        tf = s == term;
      } else {
        for (const auto& t : oracle::NaiveTokenize(s)) tf += t == term;
      }
      if (tf) out[k] = tf;
    }
    return out;
  }
};

TEST(Postings, RandomCorporaAcrossSegmentBoundaries) {
  std::mt19937_64 rng(13);
  const auto schema = CorpusSchema();
  for (int corpus = 0; corpus < 100; ++corpus) {
    MemIndexOptions opts;
    opts.unit_docs = 1 + rng() % 8;
    opts.policy = static_cast<MergePolicy>(rng() % 3);
    MemIndex idx(schema, opts);
    NaiveCorpus naive;
    const int docs = 1 + int(rng() % 300);
    const int key_space = 1 + int(rng() % 200);
    std::vector<Document> pending;
    uint64_t seg = 0;
    auto flush = [&] {
      if (pending.empty()) return;
      // Within one segment the later copy of a key wins too.
      idx.Incorporate(Segment(++seg, pending));
      for (const auto& d : pending) naive.latest[std::get<std::string>(d.fields.at("id"))] = d;
      pending.clear();
    };
    for (int i = 0; i < docs; ++i) {
      pending.push_back(oracle::RandomDoc(rng, "k" + std::to_string(rng() % key_space), i));
      if (rng() % 10 == 0) flush();
    }
    flush();
    const auto snap = idx.snapshot();
    ASSERT_EQ(snap->live_docs(), naive.latest.size());
    ASSERT_LE(idx.subindex_count(), opts.policy == MergePolicy::kNoMerge ? seg : std::bit_width(uint64_t(docs)) + 0u);
    for (const char* field : {"title", "body"}) {
      uint64_t sum = 0;
      for (const auto& [k, d] : naive.latest) {
        if (const Value* v = d.Find(field)) sum += oracle::NaiveTokenize(std::get<std::string>(*v)).size();
      }
      ASSERT_EQ(snap->live_length_sum(schema->IdOf(field)), sum) << field;
    }
    std::vector<std::pair<std::string, std::string>> probes = {{"kind", "doc"}, {"title", "nosuch"}};
    for (const auto& w : oracle::Words()) {
      const std::string t = oracle::NaiveTokenize(w)[0];
      probes.push_back({"title", t});
      probes.push_back({"body", t});
    }
    for (const auto& c : oracle::Colors()) probes.push_back({"color", c});
    for (const auto& [field, term] : probes) {
      const auto want = naive.Postings(field, term);
      std::map<std::string, uint32_t> got;
      for (const Posting& p : snap->LivePostings(field, term)) got[*snap->KeyOf(p.ordinal)] = p.tf;
      ASSERT_EQ(got, want) << field << ":" << term;
      ASSERT_EQ(snap->Postings(field, term).Cardinality(), want.size());
    }
    for (const auto& [k, d] : naive.latest) {
      const auto ord = idx.OrdinalOf(k);
      ASSERT_TRUE(ord.has_value());
      ASSERT_EQ(*snap->StoredJson(*ord), DocumentToJson(d).dump());
    }
  }
}

TEST(Postings, UnknownAndNonIndexedFields) {
  MemIndex idx(CorpusSchema());
  idx.Incorporate(Segment(1, {Doc("a", "x")}));
  const auto snap = idx.snapshot();
  EXPECT_THROW(snap->Postings("nope", "x"), Error);
  try {
    snap->Postings("price", "1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonIndexedField);
  }
}

TEST(Snapshot, IsolationAndSequence) {
  MemIndex idx(CorpusSchema());
  const auto s0 = idx.snapshot();
  const auto s1 = idx.Incorporate(Segment(1, {Doc("a", "red")}));
  const auto s2 = idx.Incorporate(Segment(2, {Doc("a", "blue"), Doc("b", "red")}));
  EXPECT_LT(s0->sequence(), s1->sequence());
  EXPECT_LT(s1->sequence(), s2->sequence());
  EXPECT_EQ(s0->live_docs(), 0u);
  EXPECT_EQ(KeysOf(*s1, s1->Postings("title", "red")), std::set<std::string>{"a"});
  EXPECT_TRUE(s1->Postings("title", "blue").empty());
  EXPECT_EQ(KeysOf(*s2, s2->Postings("title", "red")), std::set<std::string>{"b"});
  EXPECT_EQ(KeysOf(*s2, s2->Postings("title", "blue")), std::set<std::string>{"a"});

  idx.forward().SetValue("price", *idx.OrdinalOf("b"), 4.0);
  const auto s3 = idx.Publish();
  EXPECT_GT(s3->sequence(), s2->sequence());
  EXPECT_EQ(s3->forward().RangeFilter("price", 4.0, 4.0).Cardinality(), 1u);
  EXPECT_EQ(s2->forward().RangeFilter("price", 4.0, 4.0).Cardinality(), 0u);
}

TEST(Footprint, ConstantMonotoneAndAdditive) {
  MemIndex idx(CorpusSchema());
  const FootprintBreakdown empty = idx.Footprint();
  EXPECT_EQ(empty.base, MemIndex::kBaseFootprint);
  EXPECT_EQ(empty.subindexes, 0u);
  EXPECT_EQ(empty.total(), MemIndex(CorpusSchema()).Footprint().total());
  std::mt19937_64 rng(3);
  uint64_t last = idx.Footprint().total();
  for (uint64_t i = 1; i <= 40; ++i) {
    std::vector<Document> docs;
    for (int j = 0; j < 25; ++j) docs.push_back(oracle::RandomDoc(rng, "k" + std::to_string(rng() % 500), 1));
    idx.Incorporate(Segment(i, docs));
    const FootprintBreakdown f = idx.Footprint();
    ASSERT_GE(f.total(), last);
    last = f.total();
    uint64_t subs = 0;
    for (const auto& s : idx.snapshot()->subindexes()) subs += s->Footprint();
    ASSERT_EQ(f.subindexes, subs);
    ASSERT_EQ(f.forward, idx.forward().Footprint());
    ASSERT_EQ(f.base, MemIndex::kBaseFootprint);
    ASSERT_EQ(f.total(), f.base + f.subindexes + f.forward + f.key_map + f.tombstones);
  }
}

}  // namespace
}  // namespace scalesearch
