#include "scalesearch/workload.h"

#include <cmath>
#include <cstdio>

namespace scalesearch {

using nlohmann::json;

namespace {

uint64_t SplitMix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string TextFieldName(size_t i) {
  if (i == 0) return "title";
  if (i == 1) return "description";
  return "text_" + std::to_string(i);
}

std::string AttrName(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "attr_%02zu", i);
  return buf;
}

// Pronounceable words from a fixed syllable table; independent of the seed
// so every generator shares one vocabulary.
std::vector<std::string> BuildVocabulary(size_t n) {
  static const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static const char* kVowels[] = {"a", "e", "i", "o", "u"};
  std::vector<std::string> words;
  words.reserve(n);
  for (uint64_t i = 0; words.size() < n; ++i) {
    std::string w;
    uint64_t x = i;
    do {
      w += kOnsets[x % 14];
      x /= 14;
      w += kVowels[x % 5];
      x /= 5;
    } while (x > 0);
    words.push_back(std::move(w));
  }
  return words;
}

std::vector<double> ZipfWeights(size_t n) {
  std::vector<double> w(n);
  for (size_t i = 0; i < n; ++i) w[i] = 1.0 / static_cast<double>(i + 1);
  return w;
}

}  // namespace

std::shared_ptr<const IndexSchema> ProductSchema(const WorkloadShape& shape) {
  json fields = json::array();
  fields.push_back({{"name", "id"}, {"kind", "keyword"}, {"family", "cf_text"}});
  for (size_t i = 0; i < shape.text_fields; ++i) {
    fields.push_back({{"name", TextFieldName(i)}, {"kind", "text"}, {"family", "cf_text"}});
  }
  fields.push_back({{"name", "brand"}, {"kind", "keyword"}, {"family", "cf_text"}});
  fields.push_back({{"name", "category"}, {"kind", "keyword"}, {"family", "cf_text"}});
  fields.push_back({{"name", "price"}, {"kind", "float64"}, {"family", "cf_realtime"}, {"fast_search", true}});
  fields.push_back({{"name", "stock"}, {"kind", "int64"}, {"family", "cf_realtime"}});
  fields.push_back({{"name", "rank_score"}, {"kind", "float64"}, {"family", "cf_realtime"}});
  fields.push_back({{"name", "tags"}, {"kind", "keyword"}, {"family", "cf_realtime"}, {"fast_search", true}});
  for (size_t i = 0; i < shape.scalar_attrs; ++i) {
    fields.push_back({{"name", AttrName(i)}, {"kind", i % 2 == 0 ? "int64" : "float64"}, {"family", "cf_text"}});
  }
  const json doc = {
      {"index", "products"},
      {"primary_key", "id"},
      {"families",
       {{{"name", "cf_text"}, {"freshness_sla_ms", 60000}, {"path", "segment"}},
        {{"name", "cf_realtime"}, {"freshness_sla_ms", 1000}, {"path", "in-place"}}}},
      {"fields", fields},
  };
  return std::make_shared<const IndexSchema>(IndexSchema::FromJson(doc));
}

ProductGenerator::ProductGenerator(std::shared_ptr<const IndexSchema> schema, uint64_t seed, WorkloadShape shape)
    : schema_(std::move(schema)),
      shape_(shape),
      seed_(seed),
      rng_(SplitMix(seed)),
      vocabulary_(BuildVocabulary(shape.vocabulary)) {
  const std::vector<double> w = ZipfWeights(vocabulary_.size());
  zipf_ = std::discrete_distribution<size_t>(w.begin(), w.end());
}

std::string ProductGenerator::Key(uint64_t i) const {
  char buf[24];
  std::snprintf(buf, sizeof buf, "p%016llx", static_cast<unsigned long long>(SplitMix(seed_ * 0x100000001b3ULL + i)));
  return buf;
}

std::string ProductGenerator::Word() { return vocabulary_[zipf_(rng_)]; }

std::string ProductGenerator::Sentence(size_t min_words, size_t max_words) {
  const size_t n = std::uniform_int_distribution<size_t>(min_words, max_words)(rng_);
  std::string s;
  for (size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += Word();
  }
  return s;
}

Document ProductGenerator::Next() { return Make(Key(next_++)); }

Document ProductGenerator::Make(const std::string& key) {
  std::uniform_int_distribution<int64_t> ints(0, 999999);
  std::uniform_int_distribution<int64_t> cents(0, 999999);
  Document d;
  d.fields.emplace("id", key);
  for (size_t i = 0; i < shape_.text_fields; ++i) {
    const size_t lo = i == 0 ? 4 : i == 1 ? 12 : 2;
    const size_t hi = i == 0 ? 8 : i == 1 ? 24 : 5;
    d.fields.emplace(TextFieldName(i), Sentence(lo, hi));
  }
  d.fields.emplace("brand", "brand" + std::to_string(std::uniform_int_distribution<int>(0, 49)(rng_)));
  d.fields.emplace("category", "cat" + std::to_string(std::uniform_int_distribution<int>(0, 19)(rng_)));
  d.fields.emplace("price", static_cast<double>(cents(rng_)) / 100.0);
  d.fields.emplace("stock", std::uniform_int_distribution<int64_t>(0, 500)(rng_));
  d.fields.emplace("rank_score", std::uniform_real_distribution<double>(0.0, 1.0)(rng_));
  d.fields.emplace("tags", "tag" + std::to_string(std::uniform_int_distribution<int>(0, 9)(rng_)));
  for (size_t i = 0; i < shape_.scalar_attrs; ++i) {
    if (i % 2 == 0) {
      d.fields.emplace(AttrName(i), ints(rng_));
    } else {
      d.fields.emplace(AttrName(i), static_cast<double>(cents(rng_)) / 100.0);
    }
  }
  return d;
}

uint64_t RawBytes(const Document& doc) { return DocumentToJson(doc).dump().size(); }

}  // namespace scalesearch
