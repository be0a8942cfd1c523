#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <unordered_set>

#include "oracle.h"
#include "scalesearch/bytes.h"
#include "scalesearch/doc_id_set.h"
#include "scalesearch/error.h"

namespace scalesearch {
namespace {

void ExpectWellFormed(const DocIdSet& s) {
  int prev_key = -1;
  for (const auto& c : s.chunks()) {
    EXPECT_GT(static_cast<int>(c.key), prev_key);
    prev_key = c.key;
    EXPECT_FALSE(c.container.empty());
    if (c.container.kind() == ContainerKind::kArray) EXPECT_LE(c.container.cardinality(), kMaxArrayCardinality);
    if (c.container.kind() == ContainerKind::kRun) {
      const auto& runs = c.container.runs();
      for (size_t i = 1; i < runs.size(); ++i) EXPECT_GT(uint32_t{runs[i].start}, runs[i - 1].end() + 1);
    }
    EXPECT_EQ(c.container.ToVector().size(), c.container.cardinality());
  }
  int64_t last = -1;
  bool increasing = true;
  s.ForEach([&](Ordinal v) {
    increasing = increasing && static_cast<int64_t>(v) > last;
    last = v;
  });
  EXPECT_TRUE(increasing);
}

DocIdSet Build(const std::vector<uint32_t>& v) { return DocIdSet::FromSorted(v); }

TEST(ChooseKind, Examples) {
  EXPECT_EQ(ChooseKind(10, 10), ContainerKind::kArray);
  EXPECT_EQ(ChooseKind(65536, 1), ContainerKind::kRun);
  EXPECT_EQ(ChooseKind(30000, 15000), ContainerKind::kBitmap);
}

TEST(ChooseKind, AgreesWithByteCostOracle) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20000; ++i) {
    const uint32_t card = std::uniform_int_distribution<uint32_t>(1, 65536)(rng);
    const uint32_t runs = std::uniform_int_distribution<uint32_t>(1, std::min<uint32_t>(card, 32768))(rng);
    ASSERT_EQ(ChooseKind(card, runs), oracle::CheapestKind(card, runs)) << card << " " << runs;
  }
  for (uint32_t card : {4095u, 4096u, 4097u}) {
    for (uint32_t runs : {1u, 1000u, 2047u, 2048u, 2049u, 4095u}) {
      if (runs <= card) EXPECT_EQ(ChooseKind(card, runs), oracle::CheapestKind(card, runs)) << card << " " << runs;
    }
  }
}

TEST(DocIdSet, AddExamples) {
  DocIdSet s;
  EXPECT_TRUE(s.Add(7));
  EXPECT_EQ(s.ToVector(), std::vector<Ordinal>{7});
  EXPECT_EQ(s.chunks().at(0).container.kind(), ContainerKind::kArray);
  EXPECT_FALSE(s.Add(7));
  EXPECT_EQ(s.ToVector(), std::vector<Ordinal>{7});
}

// A contiguous 0..4096 is a single run and stays a run container, so the
// array -> bitmap promotion is exercised with values that never form runs.
TEST(DocIdSet, ArrayPromotesToBitmapAt4097) {
  DocIdSet s;
  for (uint32_t i = 0; i < 4096; ++i) {
    s.Add(i * 2);
    ASSERT_EQ(s.chunks().at(0).container.kind(), ContainerKind::kArray) << i;
  }
  s.Add(4096 * 2);
  EXPECT_EQ(s.chunks().at(0).container.cardinality(), 4097u);
  EXPECT_EQ(s.chunks().at(0).container.kind(), ContainerKind::kBitmap);
  EXPECT_TRUE(s.Remove(0));
  EXPECT_EQ(s.chunks().at(0).container.kind(), ContainerKind::kArray);

  DocIdSet contiguous;
  for (uint32_t i = 0; i <= 4096; ++i) contiguous.Add(i);
  EXPECT_EQ(contiguous.chunks().at(0).container.kind(), ContainerKind::kRun);
  EXPECT_EQ(contiguous.Cardinality(), 4097u);
}

TEST(DocIdSet, KindReplaysThresholdRule) {
  std::mt19937_64 rng(5);
  DocIdSet s;
  std::set<uint32_t> model;
  for (int i = 0; i < 30000; ++i) {
    const uint32_t v = std::uniform_int_distribution<uint32_t>(0, 65535)(rng) & ~1u;
    s.Add(v);
    model.insert(v);
    if (i % 97 == 0) {
      const std::vector<uint32_t> sorted(model.begin(), model.end());
      ASSERT_EQ(s.chunks().at(0).container.kind(), oracle::CheapestKind(sorted.size(), oracle::CountRuns(sorted)));
    }
  }
}

TEST(DocIdSet, SetOperationExamples) {
  EXPECT_EQ(Intersect({1, 2, 3}, {2, 3, 4}).ToVector(), (std::vector<Ordinal>{2, 3}));
  std::mt19937_64 rng(3);
  const DocIdSet x = Build(oracle::RandomOrdinals(rng, 0.3, 200000, true));
  EXPECT_EQ(Union(x, DocIdSet{}), x);
  EXPECT_EQ(Union(DocIdSet{}, x), x);
  EXPECT_EQ(Difference(x, DocIdSet{}), x);
  EXPECT_TRUE(Intersect(x, DocIdSet{}).empty());
}

TEST(DocIdSet, ThousandRandomPairsMatchHashSetAlgebra) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> density(0.001, 0.9);
  std::uniform_int_distribution<uint32_t> span(1, 3 * 65536);
  for (int pair = 0; pair < 1000; ++pair) {
    const auto av = oracle::RandomOrdinals(rng, density(rng), span(rng), pair % 2 == 0);
    const auto bv = oracle::RandomOrdinals(rng, density(rng), span(rng), pair % 3 == 0);
    const std::unordered_set<uint32_t> hb(bv.begin(), bv.end());
    std::vector<uint32_t> inter, diff;
    for (uint32_t v : av) (hb.count(v) ? inter : diff).push_back(v);
    std::unordered_set<uint32_t> hu;
    hu.reserve(av.size() + bv.size());
    hu.insert(av.begin(), av.end());
    hu.insert(bv.begin(), bv.end());
    std::vector<uint32_t> uni(hu.begin(), hu.end());
    std::sort(uni.begin(), uni.end());

    const DocIdSet a = Build(av), b = Build(bv);
    const DocIdSet i = Intersect(a, b), u = Union(a, b), d = Difference(a, b);
    ASSERT_EQ(i.ToVector(), inter) << pair;
    ASSERT_EQ(u.ToVector(), uni) << pair;
    ASSERT_EQ(d.ToVector(), diff) << pair;
    ASSERT_LE(i.Cardinality(), std::min(a.Cardinality(), b.Cardinality()));
    ASSERT_EQ(u.Cardinality(), a.Cardinality() + b.Cardinality() - i.Cardinality());
    ExpectWellFormed(i);
    ExpectWellFormed(u);
    ExpectWellFormed(d);
    for (const DocIdSet* s : {&i, &u, &d}) ASSERT_EQ(DocIdSet::Deserialize(s->Serialize()), *s);
  }
}

TEST(DocIdSet, RepresentationIndependence) {
  std::mt19937_64 rng(77);
  for (int round = 0; round < 24; ++round) {
    const auto av = oracle::RandomOrdinals(rng, 0.05 + 0.035 * round, 140000, round % 2 == 0);
    const auto bv = oracle::RandomOrdinals(rng, 0.5, 140000, true);
    const DocIdSet a = Build(av), b = Build(bv);
    const auto expect_i = Intersect(a, b).ToVector(), expect_u = Union(a, b).ToVector(),
               expect_d = Difference(a, b).ToVector();
    for (ContainerKind ka : {ContainerKind::kArray, ContainerKind::kBitmap, ContainerKind::kRun}) {
      for (ContainerKind kb : {ContainerKind::kArray, ContainerKind::kBitmap, ContainerKind::kRun}) {
        DocIdSet ca = a, cb = b;
        ca.ConvertAll(ka);
        cb.ConvertAll(kb);
        ASSERT_EQ(ca.ToVector(), a.ToVector());
        ASSERT_EQ(Intersect(ca, cb).ToVector(), expect_i);
        ASSERT_EQ(Union(ca, cb).ToVector(), expect_u);
        ASSERT_EQ(Difference(ca, cb).ToVector(), expect_d);
        for (uint32_t probe : {0u, 1u, 65535u, 65536u, 100000u}) {
          ASSERT_EQ(ca.Contains(probe), a.Contains(probe));
          ASSERT_EQ(ca.Rank(probe), a.Rank(probe));
        }
      }
    }
  }
}

TEST(DocIdSet, RankAndMax) {
  const DocIdSet s{3, 9, 70000, 70001};
  EXPECT_EQ(s.Rank(2), 0u);
  EXPECT_EQ(s.Rank(3), 1u);
  EXPECT_EQ(s.Rank(69999), 2u);
  EXPECT_EQ(s.Rank(1u << 31), 4u);
  EXPECT_EQ(s.Max(), 70001u);
  EXPECT_EQ(DocIdSet{}.Max(), std::nullopt);
}

TEST(DocIdSet, RemoveDropsEmptyChunks) {
  DocIdSet s{5, 65536 + 5};
  EXPECT_TRUE(s.Remove(5));
  EXPECT_FALSE(s.Remove(5));
  ASSERT_EQ(s.chunks().size(), 1u);
  EXPECT_EQ(s.chunks()[0].key, 1);
  ExpectWellFormed(s);
}

TEST(Serialize, EmptySetIsHeaderOnly) {
  const std::string bytes = DocIdSet{}.Serialize();
  EXPECT_EQ(bytes.size(), 4u);
  EXPECT_TRUE(DocIdSet::Deserialize(bytes).empty());
}

TEST(Serialize, RoundTripOfHundredThousandRandomIds) {
  std::mt19937_64 rng(99);
  std::set<uint32_t> ids;
  while (ids.size() < 100000) ids.insert(static_cast<uint32_t>(rng()));
  const std::vector<uint32_t> sorted(ids.begin(), ids.end());
  const DocIdSet s = Build(sorted);
  const DocIdSet back = DocIdSet::Deserialize(s.Serialize());
  EXPECT_EQ(back, s);
  EXPECT_EQ(back.ToVector(), sorted);
}

TEST(Serialize, RoundTripAllKinds) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    DocIdSet s = Build(oracle::RandomOrdinals(rng, std::uniform_real_distribution<double>(0.001, 0.95)(rng),
                                              std::uniform_int_distribution<uint32_t>(1, 300000)(rng), i % 2 == 0));
    ASSERT_EQ(DocIdSet::Deserialize(s.Serialize()), s);
  }
}

TEST(Serialize, TruncatedInputIsCorruptPayload) {
  std::mt19937_64 rng(4);
  const std::string bytes = Build(oracle::RandomOrdinals(rng, 0.2, 200000, true)).Serialize();
  for (size_t cut : {size_t{0}, size_t{2}, size_t{5}, bytes.size() / 2, bytes.size() - 1}) {
    try {
      DocIdSet::Deserialize(std::string_view(bytes).substr(0, cut));
      ADD_FAILURE() << "accepted " << cut << " bytes";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kCorruptPayload) << cut;
      EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
    }
  }
}

TEST(Serialize, RejectsTrailingBytesAndBadKind) {
  std::string bytes = DocIdSet{1, 2, 3}.Serialize();
  EXPECT_THROW(DocIdSet::Deserialize(bytes + "x"), Error);
  bytes[6] = 9;  // kind byte of the first chunk
  EXPECT_THROW(DocIdSet::Deserialize(bytes), Error);
}

}  // namespace
}  // namespace scalesearch
