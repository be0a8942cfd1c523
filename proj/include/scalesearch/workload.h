#pragma once

// Seeded synthetic product catalogue used by the benches and the CLI.
// Documents carry a handful of text fields and many scalar attributes, a
// few of which (price, stock, rank_score, tags) take the in-place path.

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "scalesearch/schema.h"

namespace scalesearch {

struct WorkloadShape {
  size_t text_fields = 10;    // title, description, text_2 ...
  size_t scalar_attrs = 94;   // attr_00 ..., alternating int64 / float64
  size_t vocabulary = 2000;
};

// Index "products", primary key "id".
std::shared_ptr<const IndexSchema> ProductSchema(const WorkloadShape& shape = {});

class ProductGenerator {
 public:
  ProductGenerator(std::shared_ptr<const IndexSchema> schema, uint64_t seed, WorkloadShape shape = {});

  // A new document with a fresh key.
  Document Next();
  // A document for `key` with freshly drawn content.
  Document Make(const std::string& key);

  std::string Key(uint64_t i) const;
  std::string Word();
  std::string Sentence(size_t min_words, size_t max_words);
  std::mt19937_64& rng() { return rng_; }

 private:
  std::shared_ptr<const IndexSchema> schema_;
  WorkloadShape shape_;
  uint64_t seed_;
  std::mt19937_64 rng_;
  std::vector<std::string> vocabulary_;
  std::discrete_distribution<size_t> zipf_;
  uint64_t next_ = 0;
};

// Compact JSON size of a document; the denominator of write amplification.
uint64_t RawBytes(const Document& doc);

}  // namespace scalesearch
