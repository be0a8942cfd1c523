#pragma once

// Segment writer and reader. A SegmentBuffer accumulates postings for
// incoming documents in memory and seals them in one pass into an immutable,
// self-describing byte image; SegmentView parses such an image.
//
// Layout (little-endian):
//   "SSEG" u16 version u64 segment_id u32 doc_count
//   section table: 5 x (u64 offset, u64 length) for term-dict, postings,
//     positions, docvalues, stored
//   term-dict: u32 count, entries sorted by (field_id, term bytes):
//     u16 field_id, u16 term_len, term bytes, u64 postings offset
//   postings: per term, serialized DocIdSet, u32 tf per doc, u64 offset of
//     the term's block in the positions section
//   positions: per term, per doc, tf delta-encoded u32 positions
//   docvalues: u16 column count; per column u16 field_id, u8 type, for enum
//     columns a u32-counted dictionary of u32-length strings, then doc_count
//     fixed-width entries (i64 / f64 / u32 enum ref / u32 token count)
//   stored: per doc, u32 length + compact JSON document
//   trailer: u32 CRC-32 of every preceding byte

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scalesearch/doc_id_set.h"
#include "scalesearch/schema.h"

namespace scalesearch {

inline constexpr char kSegmentMagic[4] = {'S', 'S', 'E', 'G'};
inline constexpr uint16_t kSegmentVersion = 1;

inline constexpr int64_t kMissingInt64 = std::numeric_limits<int64_t>::min();
inline constexpr uint32_t kMissingEnum = std::numeric_limits<uint32_t>::max();
double MissingFloat64();

// Orders (field, term) pairs whose term is a string or string_view.
struct TermKeyLess {
  using is_transparent = void;
  template <typename A, typename B>
  bool operator()(const A& a, const B& b) const {
    if (a.first != b.first) return a.first < b.first;
    return std::string_view(a.second) < std::string_view(b.second);
  }
};

struct TermPostings {
  DocIdSet docs;
  std::vector<uint32_t> tfs;        // one per member of docs, in order
  std::vector<uint32_t> positions;  // absolute positions, tfs[i] per doc

  friend bool operator==(const TermPostings&, const TermPostings&) = default;
};

enum class ColumnType : uint8_t { kInt64 = 0, kFloat64 = 1, kEnum = 2, kLength = 3 };

// One fixed-width doc-values column of a segment.
struct DocValuesColumn {
  FieldId field = 0;
  ColumnType type = ColumnType::kInt64;
  std::vector<int64_t> ints;
  std::vector<double> floats;
  std::vector<uint32_t> refs;  // enum refs or token counts
  std::vector<std::string> dictionary;

  // nullopt for the missing sentinel; kLength columns report int64 counts.
  std::optional<Value> Get(uint32_t local) const;
};

struct SealStats {
  uint64_t postings_visited = 0;  // entries touched while writing postings
  uint64_t terms_written = 0;
  uint64_t bytes = 0;
};

class SegmentBuffer {
 public:
  explicit SegmentBuffer(std::shared_ptr<const IndexSchema> schema);

  // Appends one document and returns its local id.
  uint32_t Add(const Document& doc);

  // Serializes and consumes the buffer. Throws kEmptyBuffer when nothing was
  // added and kBufferConsumed on a second call.
  std::string Seal(uint64_t segment_id, SealStats* stats = nullptr);

  uint32_t doc_count() const { return static_cast<uint32_t>(docs_.size()); }
  uint64_t footprint() const { return footprint_; }
  bool sealed() const { return sealed_; }
  const IndexSchema& schema() const { return *schema_; }

  // In-memory postings for (field, term), nullptr when absent.
  const TermPostings* Postings(std::string_view field, std::string_view term) const;

 private:
  std::shared_ptr<const IndexSchema> schema_;
  std::map<std::pair<FieldId, std::string>, TermPostings, TermKeyLess> postings_;
  std::vector<Document> docs_;
  std::vector<std::vector<uint32_t>> lengths_;  // per field id, text fields only
  uint64_t footprint_ = 0;
  bool sealed_ = false;
};

struct SegmentTerm {
  FieldId field;
  std::string term;
  TermPostings postings;
};

class SegmentView {
 public:
  // Verifies magic, checksum and version, then parses every section.
  static SegmentView Open(std::string_view bytes, std::shared_ptr<const IndexSchema> schema,
                          uint32_t shard_id = 0);

  uint64_t segment_id() const { return segment_id_; }
  uint32_t shard_id() const { return shard_id_; }
  uint32_t doc_count() const { return doc_count_; }
  uint32_t checksum() const { return checksum_; }
  const IndexSchema& schema() const { return *schema_; }
  const std::shared_ptr<const IndexSchema>& schema_ptr() const { return schema_; }

  // Binary search over the term dictionary. Throws kUnknownField or
  // kNonIndexedField.
  const TermPostings* Lookup(std::string_view field, std::string_view term) const;

  const std::vector<SegmentTerm>& terms() const { return terms_; }
  const std::vector<DocValuesColumn>& columns() const { return columns_; }
  const DocValuesColumn* Column(FieldId field) const;

  std::optional<Value> DocValue(std::string_view field, uint32_t local) const;
  // Token count of a text field for one document.
  uint32_t FieldLength(FieldId field, uint32_t local) const;
  const std::string& Key(uint32_t local) const { return keys_.at(local); }
  const std::string& StoredJson(uint32_t local) const { return stored_.at(local); }
  Document StoredDocument(uint32_t local) const;

 private:
  SegmentView() = default;

  std::shared_ptr<const IndexSchema> schema_;
  uint64_t segment_id_ = 0;
  uint32_t shard_id_ = 0;
  uint32_t doc_count_ = 0;
  uint32_t checksum_ = 0;
  std::vector<SegmentTerm> terms_;
  std::vector<DocValuesColumn> columns_;
  std::vector<std::string> stored_;
  std::vector<std::string> keys_;
};

// Object-store key for a segment: shards/<shard>/segments/<id:020d>.sseg
std::string SegmentObjectKey(uint32_t shard_id, uint64_t segment_id);
std::string SegmentPrefix(uint32_t shard_id);
// Parses the segment id out of a key produced by SegmentObjectKey.
std::optional<uint64_t> SegmentIdFromKey(std::string_view key);

uint32_t Crc32(std::string_view bytes);

}  // namespace scalesearch
