#pragma once

// Independent reference implementations the tests compare against. Nothing
// here calls into the code under test except for plain data types.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "scalesearch/doc_id_set.h"
#include "scalesearch/error.h"
#include "scalesearch/query.h"
#include "scalesearch/schema.h"
#include "scalesearch/store.h"

namespace oracle {

using scalesearch::Document;
using scalesearch::QueryNode;
using scalesearch::Value;

// Character-class tokenizer written without the library's helpers.
inline std::vector<std::string> NaiveTokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    const bool keep = c >= 0x80 || std::isalnum(c);
    if (keep) {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Cheapest container by byte cost; ties go array, then bitmap, then run.
inline scalesearch::ContainerKind CheapestKind(uint64_t cardinality, uint64_t runs) {
  const uint64_t inf = std::numeric_limits<uint64_t>::max();
  const uint64_t array_cost = cardinality <= 4096 ? 2 * cardinality : inf;
  const uint64_t bitmap_cost = 8192;
  const uint64_t run_cost = 4 * runs + 4;
  if (array_cost <= bitmap_cost && array_cost <= run_cost) return scalesearch::ContainerKind::kArray;
  if (bitmap_cost <= run_cost) return scalesearch::ContainerKind::kBitmap;
  return scalesearch::ContainerKind::kRun;
}

inline uint64_t CountRuns(const std::vector<uint32_t>& sorted) {
  uint64_t runs = 0;
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (i == 0 || sorted[i] != sorted[i - 1] + 1) ++runs;
  }
  return runs;
}

inline std::set<uint32_t> ToSet(const scalesearch::DocIdSet& s) {
  std::set<uint32_t> out;
  s.ForEach([&](uint32_t v) { out.insert(v); });
  return out;
}

// Random ordinals with the given density over [0, span), clustered into a
// few chunks so that all three container kinds appear.
inline std::vector<uint32_t> RandomOrdinals(std::mt19937_64& rng, double density, uint32_t span, bool runs) {
  std::vector<uint32_t> out;
  std::bernoulli_distribution coin(density);
  if (!runs) {
    for (uint32_t v = 0; v < span; ++v) {
      if (coin(rng)) out.push_back(v);
    }
    return out;
  }
  std::uniform_int_distribution<uint32_t> len(1, 400);
  for (uint32_t v = 0; v < span;) {
    const uint32_t n = len(rng);
    if (coin(rng)) {
      for (uint32_t i = 0; i < n && v + i < span; ++i) out.push_back(v + i);
    }
    v += n;
  }
  return out;
}

inline double Bm25Reference(double tf, double df, double n, double doc_len, double avg_len) {
  const double k1 = 1.2, b = 0.75;
  if (tf == 0) return 0;
  const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  const double norm = k1 * (1.0 - b + b * (doc_len / avg_len));
  return idf * (tf * (k1 + 1.0)) / (tf + norm);
}

// ---------------------------------------------------------------------------
// Corpus model

// Fields: id (pk), title/body text, color keyword, version int64 (segment),
// price float64 fast_search, stock int64, tag keyword fast_search, label
// keyword (all in-place).
inline std::shared_ptr<const scalesearch::IndexSchema> CorpusSchema() {
  static const auto schema = std::make_shared<const scalesearch::IndexSchema>(scalesearch::IndexSchema::Parse(R"({
    "index": "corpus", "primary_key": "id",
    "families": [
      {"name": "cf_text", "freshness_sla_ms": 60000, "path": "segment"},
      {"name": "cf_realtime", "freshness_sla_ms": 1000, "path": "in-place"}],
    "fields": [
      {"name": "id", "kind": "keyword", "family": "cf_text"},
      {"name": "title", "kind": "text", "family": "cf_text"},
      {"name": "body", "kind": "text", "family": "cf_text"},
      {"name": "color", "kind": "keyword", "family": "cf_text"},
      {"name": "kind", "kind": "keyword", "family": "cf_text"},
      {"name": "version", "kind": "int64", "family": "cf_text"},
      {"name": "price", "kind": "float64", "family": "cf_realtime", "fast_search": true},
      {"name": "stock", "kind": "int64", "family": "cf_realtime"},
      {"name": "tag", "kind": "keyword", "family": "cf_realtime", "fast_search": true},
      {"name": "label", "kind": "keyword", "family": "cf_realtime"}]})"));
  return schema;
}

inline const std::vector<std::string>& Words() {
  static const std::vector<std::string> w = {"red",  "blue",  "shoe", "boot", "sock", "lace", "sole", "heel",
                                             "run",  "walk",  "trail", "road", "soft", "hard", "warm", "cool",
                                             "wide", "slim",  "kid",  "Men",  "WOMEN", "x1",  "x2",   "zip"};
  return w;
}
inline const std::vector<std::string>& Colors() {
  static const std::vector<std::string> c = {"black", "white", "green", "navy", "tan"};
  return c;
}
inline const std::vector<std::string>& Tags() {
  static const std::vector<std::string> t = {"t0", "t1", "t2", "t3", "t4", "t5"};
  return t;
}

inline std::string RandomText(std::mt19937_64& rng, size_t max_words) {
  std::uniform_int_distribution<size_t> n(0, max_words);
  std::uniform_int_distribution<size_t> w(0, Words().size() - 1);
  std::uniform_int_distribution<int> sep(0, 4);
  std::string s;
  const size_t count = n(rng);
  for (size_t i = 0; i < count; ++i) {
    if (i) s += sep(rng) == 0 ? ", " : " ";
    s += Words()[w(rng)];
  }
  return s;
}

// Optional fields are left out at random so missing values get exercised.
inline Document RandomDoc(std::mt19937_64& rng, const std::string& key, int64_t version) {
  std::bernoulli_distribution present(0.85);
  Document d;
  d.fields.emplace("id", key);
  d.fields.emplace("kind", "doc");
  d.fields.emplace("version", version);
  if (present(rng)) d.fields.emplace("title", RandomText(rng, 6));
  if (present(rng)) d.fields.emplace("body", RandomText(rng, 14));
  if (present(rng)) d.fields.emplace("color", Colors()[std::uniform_int_distribution<size_t>(0, 4)(rng)]);
  if (present(rng)) d.fields.emplace("price", std::round(std::uniform_real_distribution<double>(0, 100)(rng) * 4) / 4);
  if (present(rng)) d.fields.emplace("stock", std::uniform_int_distribution<int64_t>(-5, 50)(rng));
  if (present(rng)) d.fields.emplace("tag", Tags()[std::uniform_int_distribution<size_t>(0, 5)(rng)]);
  if (present(rng)) d.fields.emplace("label", Tags()[std::uniform_int_distribution<size_t>(0, 5)(rng)]);
  return d;
}

inline Value RandomInPlaceValue(std::mt19937_64& rng, const std::string& field) {
  if (field == "price") return std::round(std::uniform_real_distribution<double>(0, 100)(rng) * 4) / 4;
  if (field == "stock") return std::uniform_int_distribution<int64_t>(-5, 50)(rng);
  return Tags()[std::uniform_int_distribution<size_t>(0, 5)(rng)];
}

inline QueryNode RandomLeaf(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 6);
  auto word = [&] { return Words()[std::uniform_int_distribution<size_t>(0, Words().size() - 1)(rng)]; };
  auto lower = [](std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  switch (pick(rng)) {
    case 0: return QueryNode::Term("title", lower(word()));
    case 1: return QueryNode::Term("body", lower(word()));
    case 2: return QueryNode::Term("color", Colors()[std::uniform_int_distribution<size_t>(0, 4)(rng)]);
    case 3: {
      double a = std::uniform_real_distribution<double>(-5, 105)(rng);
      double b = std::uniform_real_distribution<double>(-5, 105)(rng);
      if (a > b) std::swap(a, b);
      return QueryNode::Range("price", a, b);
    }
    case 4: {
      int64_t a = std::uniform_int_distribution<int64_t>(-8, 55)(rng);
      int64_t b = std::uniform_int_distribution<int64_t>(-8, 55)(rng);
      if (a > b) std::swap(a, b);
      return QueryNode::Range("stock", a, b);
    }
    case 5: {
      std::string a = Tags()[std::uniform_int_distribution<size_t>(0, 5)(rng)];
      std::string b = Tags()[std::uniform_int_distribution<size_t>(0, 5)(rng)];
      if (a > b) std::swap(a, b);
      return QueryNode::Range("tag", a, b);
    }
    default: {
      const std::string t = Tags()[std::uniform_int_distribution<size_t>(0, 5)(rng)];
      return QueryNode::Range("label", t, t);
    }
  }
}

inline QueryNode RandomQuery(std::mt19937_64& rng, int depth = 3) {
  std::uniform_int_distribution<int> shape(0, depth <= 0 ? 0 : 3);
  const int s = shape(rng);
  if (s <= 1) return RandomLeaf(rng);
  std::vector<QueryNode> kids;
  const int n = std::uniform_int_distribution<int>(1, 3)(rng);
  for (int i = 0; i < n; ++i) kids.push_back(RandomQuery(rng, depth - 1));
  return s == 2 ? QueryNode::And(std::move(kids)) : QueryNode::Or(std::move(kids));
}

// Latest full document per key plus the last in-place value per (key,
// field). The in-place value, once published, outlives later document
// bodies for that key.
class CorpusModel {
 public:
  void Put(const Document& d) { docs_[std::get<std::string>(d.fields.at("id"))] = d; }
  void Set(const std::string& key, const std::string& field, const Value& v) { overrides_[key][field] = v; }

  const std::map<std::string, Document>& docs() const { return docs_; }

  std::optional<Value> Effective(const std::string& key, const std::string& field) const {
    if (auto k = overrides_.find(key); k != overrides_.end()) {
      if (auto f = k->second.find(field); f != k->second.end()) return f->second;
    }
    const Document& d = docs_.at(key);
    if (auto it = d.fields.find(field); it != d.fields.end()) return it->second;
    return std::nullopt;
  }

  bool Matches(const std::string& key, const QueryNode& q) const {
    switch (q.kind) {
      case QueryNode::Kind::kAnd:
        if (q.children.empty()) return false;
        return std::all_of(q.children.begin(), q.children.end(), [&](const QueryNode& c) { return Matches(key, c); });
      case QueryNode::Kind::kOr:
        return std::any_of(q.children.begin(), q.children.end(), [&](const QueryNode& c) { return Matches(key, c); });
      case QueryNode::Kind::kTerm: {
        const Document& d = docs_.at(key);
        auto it = d.fields.find(q.field);
        if (it == d.fields.end()) return false;
        const std::string& s = std::get<std::string>(it->second);
        if (q.field == "color" || q.field == "kind" || q.field == "id") return s == q.term;
        const auto toks = NaiveTokenize(s);
        return std::find(toks.begin(), toks.end(), q.term) != toks.end();
      }
      case QueryNode::Kind::kRange: {
        const std::optional<Value> v = Effective(key, q.field);
        if (!v) return false;
        if (const auto* s = std::get_if<std::string>(&*v)) {
          return std::get<std::string>(q.lo) <= *s && *s <= std::get<std::string>(q.hi);
        }
        const double x = std::holds_alternative<double>(*v) ? std::get<double>(*v)
                                                            : static_cast<double>(std::get<int64_t>(*v));
        auto num = [](const Value& b) {
          return std::holds_alternative<double>(b) ? std::get<double>(b) : static_cast<double>(std::get<int64_t>(b));
        };
        return num(q.lo) <= x && x <= num(q.hi);
      }
    }
    return false;
  }

  std::set<std::string> Evaluate(const QueryNode& q) const {
    std::set<std::string> out;
    for (const auto& [key, doc] : docs_) {
      if (Matches(key, q)) out.insert(key);
    }
    return out;
  }

 private:
  std::map<std::string, Document> docs_;
  std::map<std::string, std::map<std::string, Value>> overrides_;
};

// ---------------------------------------------------------------------------
// Fault injection

// Fails a seeded fraction of puts with kIOError, either before anything is
// stored or after the object became visible (a lost acknowledgement).
class FaultyStore : public scalesearch::ObjectStore {
 public:
  FaultyStore(uint64_t seed, double fail_before, double fail_after)
      : rng_(seed), fail_before_(fail_before), fail_after_(fail_after) {}

  void Put(std::string_view key, std::string_view bytes) override {
    std::unique_lock lock(mu_);
    const double roll = std::uniform_real_distribution<double>(0, 1)(rng_);
    const bool armed = enabled_;
    lock.unlock();
    if (armed && roll < fail_before_) {
      ++failed_before_;
      throw scalesearch::Error(scalesearch::ErrorCode::kIOError, "injected failure before put");
    }
    inner_.Put(key, bytes);
    if (armed && roll < fail_before_ + fail_after_) {
      ++failed_after_;
      throw scalesearch::Error(scalesearch::ErrorCode::kIOError, "injected failure after put");
    }
  }
  std::string Get(std::string_view key) const override { return inner_.Get(key); }
  std::vector<std::string> List(std::string_view prefix, std::string_view after) const override {
    return inner_.List(prefix, after);
  }
  bool Exists(std::string_view key) const override { return inner_.Exists(key); }

  void set_enabled(bool on) {
    std::lock_guard lock(mu_);
    enabled_ = on;
  }
  uint64_t failed_before() const { return failed_before_; }
  uint64_t failed_after() const { return failed_after_; }

 private:
  scalesearch::MemoryObjectStore inner_;
  mutable std::mutex mu_;
  std::mt19937_64 rng_;
  double fail_before_, fail_after_;
  bool enabled_ = true;
  std::atomic<uint64_t> failed_before_{0}, failed_after_{0};
};

}  // namespace oracle
