#include "scalesearch/segment.h"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "scalesearch/bytes.h"
#include "scalesearch/error.h"
#include "scalesearch/instrument.h"
#include "scalesearch/tokenizer.h"

namespace scalesearch {

namespace {

constexpr size_t kSectionCount = 5;
enum Section { kTermDict = 0, kPostings = 1, kPositions = 2, kDocValues = 3, kStored = 4 };
constexpr size_t kHeaderBytes = 4 + 2 + 8 + 4;
constexpr size_t kTableBytes = kSectionCount * 16;
constexpr size_t kTrailerBytes = 4;
constexpr size_t kMaxTermBytes = 0xFFFF;

void CountWriterInvocation() {
  if (NodeCounters* node = CurrentNode()) node->segment_writer_invocations.fetch_add(1, std::memory_order_relaxed);
}

ColumnType ColumnTypeFor(FieldKind kind) {
  switch (kind) {
    case FieldKind::kInt64: return ColumnType::kInt64;
    case FieldKind::kFloat64: return ColumnType::kFloat64;
    case FieldKind::kKeyword: return ColumnType::kEnum;
    case FieldKind::kText: return ColumnType::kLength;
  }
  return ColumnType::kInt64;
}

}  // namespace

double MissingFloat64() { return std::numeric_limits<double>::quiet_NaN(); }

uint32_t Crc32(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large inputs in pieces.
  while (!bytes.empty()) {
    const size_t n = std::min<size_t>(bytes.size(), 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(n));
    bytes.remove_prefix(n);
  }
  return static_cast<uint32_t>(crc);
}

std::optional<Value> DocValuesColumn::Get(uint32_t local) const {
  switch (type) {
    case ColumnType::kInt64:
      if (ints.at(local) == kMissingInt64) return std::nullopt;
      return ints[local];
    case ColumnType::kFloat64:
      if (std::isnan(floats.at(local))) return std::nullopt;
      return floats[local];
    case ColumnType::kEnum:
      if (refs.at(local) == kMissingEnum) return std::nullopt;
      return dictionary.at(refs[local]);
    case ColumnType::kLength:
      return static_cast<int64_t>(refs.at(local));
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// SegmentBuffer

SegmentBuffer::SegmentBuffer(std::shared_ptr<const IndexSchema> schema)
    : schema_(std::move(schema)), lengths_(schema_->fields().size()) {}

uint32_t SegmentBuffer::Add(const Document& doc) {
  if (sealed_) throw Error(ErrorCode::kBufferConsumed, "buffer already sealed");
  CountWriterInvocation();
  PrimaryKeyOf(*schema_, doc);
  for (const auto& [name, value] : doc.fields) schema_->ValidateUpdate(name, value);

  const uint32_t local = doc_count();
  auto post = [&](FieldId field, std::string term, uint32_t position) {
    if (term.size() > kMaxTermBytes) {
      throw Error(ErrorCode::kInvalidArgument, "term longer than 65535 bytes in field " + schema_->FieldAt(field).name);
    }
    auto it = postings_.find(std::pair<FieldId, std::string_view>(field, term));
    if (it == postings_.end()) {
      footprint_ += term.size() + 64;
      it = postings_.emplace(std::make_pair(field, std::move(term)), TermPostings{}).first;
    }
    TermPostings& p = it->second;
    if (p.docs.empty() || *p.docs.Max() != local) {
      p.docs.Add(local);
      p.tfs.push_back(0);
      footprint_ += 6;
    }
    p.tfs.back()++;
    p.positions.push_back(position);
    footprint_ += 4;
  };

  for (const auto& [name, value] : doc.fields) {
    const FieldId id = schema_->IdOf(name);
    const FieldSpec& spec = schema_->FieldAt(id);
    if (!spec.indexed()) continue;
    const std::string& text = std::get<std::string>(value);
    if (spec.kind == FieldKind::kKeyword) {
      post(id, text, 0);
      continue;
    }
    std::vector<std::string> tokens = Tokenize(text);
    auto& lengths = lengths_[id];
    lengths.resize(local + 1, 0);
    lengths[local] = static_cast<uint32_t>(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) post(id, std::move(tokens[i]), static_cast<uint32_t>(i));
  }
  docs_.push_back(doc);
  footprint_ += 64 + 16 * doc.fields.size();
  for (const auto& [name, value] : doc.fields) {
    if (const auto* s = std::get_if<std::string>(&value)) footprint_ += name.size() + s->size();
  }
  return local;
}

std::string SegmentBuffer::Seal(uint64_t segment_id, SealStats* stats) {
  if (sealed_) throw Error(ErrorCode::kBufferConsumed, "buffer already sealed");
  if (docs_.empty()) throw Error(ErrorCode::kEmptyBuffer, "cannot seal a buffer without documents");
  CountWriterInvocation();
  SealStats local_stats;
  const uint32_t doc_count = this->doc_count();

  std::array<std::string, kSectionCount> sections;
  ByteWriter dict(&sections[kTermDict]);
  ByteWriter post(&sections[kPostings]);
  ByteWriter pos(&sections[kPositions]);

  // Single pass over the sorted postings map feeds three sections at once.
  dict.U32(static_cast<uint32_t>(postings_.size()));
  for (const auto& [key, p] : postings_) {
    ++local_stats.postings_visited;
    dict.U16(key.first);
    dict.U16(static_cast<uint16_t>(key.second.size()));
    dict.Bytes(key.second);
    dict.U64(post.size());
    p.docs.Serialize(&sections[kPostings]);
    for (uint32_t tf : p.tfs) post.U32(tf);
    post.U64(pos.size());
    size_t at = 0;
    for (uint32_t tf : p.tfs) {
      uint32_t prev = 0;
      for (uint32_t j = 0; j < tf; ++j, ++at) {
        pos.U32(p.positions[at] - prev);
        prev = p.positions[at];
      }
    }
    ++local_stats.terms_written;
  }

  ByteWriter dv(&sections[kDocValues]);
  std::vector<FieldId> column_fields;
  for (FieldId id = 0; id < schema_->fields().size(); ++id) column_fields.push_back(id);
  dv.U16(static_cast<uint16_t>(column_fields.size()));
  for (FieldId id : column_fields) {
    const FieldSpec& spec = schema_->FieldAt(id);
    const ColumnType type = ColumnTypeFor(spec.kind);
    dv.U16(id);
    dv.U8(static_cast<uint8_t>(type));
    switch (type) {
      case ColumnType::kInt64:
        for (const Document& d : docs_) {
          const Value* v = d.Find(spec.name);
          dv.I64(v ? std::get<int64_t>(*v) : kMissingInt64);
        }
        break;
      case ColumnType::kFloat64:
        for (const Document& d : docs_) {
          const Value* v = d.Find(spec.name);
          double x = MissingFloat64();
          if (v != nullptr) x = std::holds_alternative<double>(*v) ? std::get<double>(*v) : std::get<int64_t>(*v);
          dv.F64(x);
        }
        break;
      case ColumnType::kEnum: {
        std::map<std::string_view, uint32_t> ids;
        std::vector<std::string_view> dictionary;
        std::vector<uint32_t> refs(doc_count, kMissingEnum);
        for (uint32_t i = 0; i < doc_count; ++i) {
          const Value* v = docs_[i].Find(spec.name);
          if (v == nullptr) continue;
          const std::string& s = std::get<std::string>(*v);
          auto [it, inserted] = ids.emplace(s, static_cast<uint32_t>(dictionary.size()));
          if (inserted) dictionary.push_back(s);
          refs[i] = it->second;
        }
        dv.U32(static_cast<uint32_t>(dictionary.size()));
        for (std::string_view s : dictionary) {
          dv.U32(static_cast<uint32_t>(s.size()));
          dv.Bytes(s);
        }
        for (uint32_t r : refs) dv.U32(r);
        break;
      }
      case ColumnType::kLength: {
        std::vector<uint32_t>& lengths = lengths_[id];
        lengths.resize(doc_count, 0);
        for (uint32_t n : lengths) dv.U32(n);
        break;
      }
    }
  }

  ByteWriter stored(&sections[kStored]);
  for (const Document& d : docs_) {
    const std::string record = DocumentToJson(d).dump();
    stored.U32(static_cast<uint32_t>(record.size()));
    stored.Bytes(record);
  }

  std::string out;
  size_t total = kHeaderBytes + kTableBytes + kTrailerBytes;
  for (const auto& s : sections) total += s.size();
  out.reserve(total);
  ByteWriter w(&out);
  w.Raw(kSegmentMagic, 4);
  w.U16(kSegmentVersion);
  w.U64(segment_id);
  w.U32(doc_count);
  uint64_t offset = kHeaderBytes + kTableBytes;
  for (const auto& s : sections) {
    w.U64(offset);
    w.U64(s.size());
    offset += s.size();
  }
  for (const auto& s : sections) w.Bytes(s);
  w.U32(Crc32(out));

  postings_.clear();
  docs_.clear();
  lengths_.clear();
  sealed_ = true;
  local_stats.bytes = out.size();
  if (stats != nullptr) *stats = local_stats;
  return out;
}

const TermPostings* SegmentBuffer::Postings(std::string_view field, std::string_view term) const {
  const FieldId id = schema_->IdOf(field);
  auto it = postings_.find(std::pair<FieldId, std::string_view>(id, term));
  return it == postings_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// SegmentView

SegmentView SegmentView::Open(std::string_view bytes, std::shared_ptr<const IndexSchema> schema, uint32_t shard_id) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kSegmentMagic, 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "segment does not start with SSEG");
  }
  if (bytes.size() < kHeaderBytes + kTableBytes + kTrailerBytes) {
    throw Error(ErrorCode::kCorruptPayload, "segment shorter than its fixed header");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - kTrailerBytes);
  uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + body.size(), 4);
  const uint32_t actual_crc = Crc32(body);
  if (stored_crc != actual_crc) {
    throw Error(ErrorCode::kChecksumMismatch, "stored crc " + std::to_string(stored_crc) + " computed " +
                                                  std::to_string(actual_crc));
  }

  ByteReader header(body);
  header.Skip(4);
  const uint16_t version = header.U16();
  if (version != kSegmentVersion) {
    throw Error(ErrorCode::kUnsupportedVersion, "segment version " + std::to_string(version));
  }

  SegmentView view;
  view.schema_ = std::move(schema);
  view.shard_id_ = shard_id;
  view.checksum_ = stored_crc;
  view.segment_id_ = header.U64();
  view.doc_count_ = header.U32();
  const IndexSchema& s = *view.schema_;

  std::array<std::pair<uint64_t, uint64_t>, kSectionCount> table;
  for (auto& entry : table) {
    entry.first = header.U64();
    entry.second = header.U64();
    if (entry.first > body.size() || entry.second > body.size() - entry.first) {
      header.Fail("section out of bounds");
    }
  }
  auto section = [&](Section which) {
    return ByteReader(body.substr(table[which].first, table[which].second), table[which].first);
  };
  const std::string_view postings_bytes = body.substr(table[kPostings].first, table[kPostings].second);
  const std::string_view positions_bytes = body.substr(table[kPositions].first, table[kPositions].second);

  ByteReader dict = section(kTermDict);
  const uint32_t term_count = dict.U32();
  view.terms_.reserve(term_count);
  for (uint32_t t = 0; t < term_count; ++t) {
    SegmentTerm term;
    term.field = dict.U16();
    if (term.field >= s.fields().size() || !s.FieldAt(term.field).indexed()) {
      dict.Fail("term dictionary references non-indexed field " + std::to_string(term.field));
    }
    const uint16_t len = dict.U16();
    term.term = std::string(dict.Bytes(len));
    const uint64_t postings_offset = dict.U64();
    if (!view.terms_.empty()) {
      const SegmentTerm& prev = view.terms_.back();
      if (std::tie(prev.field, prev.term) >= std::tie(term.field, term.term)) dict.Fail("term dictionary not sorted");
    }
    if (postings_offset > postings_bytes.size()) dict.Fail("postings offset out of bounds");

    ByteReader pr(postings_bytes.substr(postings_offset), table[kPostings].first + postings_offset);
    term.postings.docs = DocIdSet::Deserialize(pr);
    const uint64_t card = term.postings.docs.Cardinality();
    if (card == 0) pr.Fail("empty postings list");
    if (*term.postings.docs.Max() >= view.doc_count_) pr.Fail("posting beyond doc_count");
    term.postings.tfs.resize(card);
    uint64_t total_positions = 0;
    for (auto& tf : term.postings.tfs) {
      tf = pr.U32();
      if (tf == 0) pr.Fail("zero term frequency");
      total_positions += tf;
    }
    const uint64_t positions_offset = pr.U64();
    if (positions_offset > positions_bytes.size() || total_positions > (positions_bytes.size() - positions_offset) / 4) {
      pr.Fail("positions block out of bounds");
    }
    ByteReader posr(positions_bytes.substr(positions_offset), table[kPositions].first + positions_offset);
    term.postings.positions.reserve(total_positions);
    for (uint32_t tf : term.postings.tfs) {
      uint32_t prev = 0;
      for (uint32_t j = 0; j < tf; ++j) {
        prev += posr.U32();
        term.postings.positions.push_back(prev);
      }
    }
    view.terms_.push_back(std::move(term));
  }

  ByteReader dv = section(kDocValues);
  const uint16_t column_count = dv.U16();
  for (uint16_t c = 0; c < column_count; ++c) {
    DocValuesColumn col;
    col.field = dv.U16();
    if (col.field >= s.fields().size()) dv.Fail("doc values for unknown field " + std::to_string(col.field));
    const uint8_t type = dv.U8();
    if (type != static_cast<uint8_t>(ColumnTypeFor(s.FieldAt(col.field).kind))) dv.Fail("doc values type mismatch");
    col.type = static_cast<ColumnType>(type);
    const uint32_t n = view.doc_count_;
    switch (col.type) {
      case ColumnType::kInt64:
        col.ints.resize(n);
        for (auto& v : col.ints) v = dv.I64();
        break;
      case ColumnType::kFloat64:
        col.floats.resize(n);
        for (auto& v : col.floats) v = dv.F64();
        break;
      case ColumnType::kEnum: {
        const uint32_t dict_size = dv.U32();
        if (dict_size > dv.remaining() / 4) dv.Fail("enum dictionary larger than section");
        col.dictionary.reserve(dict_size);
        for (uint32_t i = 0; i < dict_size; ++i) col.dictionary.emplace_back(dv.Bytes(dv.U32()));
        col.refs.resize(n);
        for (auto& r : col.refs) {
          r = dv.U32();
          if (r != kMissingEnum && r >= dict_size) dv.Fail("enum ref out of range");
        }
        break;
      }
      case ColumnType::kLength:
        col.refs.resize(n);
        for (auto& r : col.refs) r = dv.U32();
        break;
    }
    view.columns_.push_back(std::move(col));
  }

  ByteReader st = section(kStored);
  view.stored_.reserve(view.doc_count_);
  for (uint32_t i = 0; i < view.doc_count_; ++i) view.stored_.emplace_back(st.Bytes(st.U32()));

  const DocValuesColumn* keys = view.Column(s.IdOf(s.primary_key_field()));
  if (keys == nullptr) throw Error(ErrorCode::kMissingColumn, "segment lacks the primary key column");
  view.keys_.reserve(view.doc_count_);
  for (uint32_t i = 0; i < view.doc_count_; ++i) {
    if (keys->refs[i] == kMissingEnum) throw Error(ErrorCode::kCorruptPayload, "document without primary key");
    view.keys_.push_back(keys->dictionary[keys->refs[i]]);
  }
  return view;
}

const TermPostings* SegmentView::Lookup(std::string_view field, std::string_view term) const {
  const FieldId id = schema_->IdOf(field);
  if (!schema_->FieldAt(id).indexed()) {
    throw Error(ErrorCode::kNonIndexedField, "\"" + std::string(field) + "\" has no postings");
  }
  auto it = std::lower_bound(terms_.begin(), terms_.end(), std::pair<FieldId, std::string_view>(id, term),
                             [](const SegmentTerm& t, const std::pair<FieldId, std::string_view>& k) {
                               return std::tie(t.field, t.term) < std::tie(k.first, k.second);
                             });
  if (it == terms_.end() || it->field != id || it->term != term) return nullptr;
  return &it->postings;
}

const DocValuesColumn* SegmentView::Column(FieldId field) const {
  for (const DocValuesColumn& c : columns_) {
    if (c.field == field) return &c;
  }
  return nullptr;
}

std::optional<Value> SegmentView::DocValue(std::string_view field, uint32_t local) const {
  const DocValuesColumn* col = Column(schema_->IdOf(field));
  if (col == nullptr) throw Error(ErrorCode::kMissingColumn, "\"" + std::string(field) + "\"");
  return col->Get(local);
}

uint32_t SegmentView::FieldLength(FieldId field, uint32_t local) const {
  const DocValuesColumn* col = Column(field);
  if (col == nullptr || col->type != ColumnType::kLength) return 0;
  return col->refs.at(local);
}

Document SegmentView::StoredDocument(uint32_t local) const {
  return DocumentFromJson(*schema_, nlohmann::json::parse(stored_.at(local)));
}

std::string SegmentPrefix(uint32_t shard_id) { return "shards/" + std::to_string(shard_id) + "/segments/"; }

std::string SegmentObjectKey(uint32_t shard_id, uint64_t segment_id) {
  char id[32];
  std::snprintf(id, sizeof(id), "%020llu", static_cast<unsigned long long>(segment_id));
  return SegmentPrefix(shard_id) + id + ".sseg";
}

std::optional<uint64_t> SegmentIdFromKey(std::string_view key) {
  constexpr std::string_view kSuffix = ".sseg";
  const size_t slash = key.rfind('/');
  if (slash == std::string_view::npos || key.size() < slash + 1 + 20 + kSuffix.size()) return std::nullopt;
  std::string_view name = key.substr(slash + 1);
  if (name.size() != 20 + kSuffix.size() || name.substr(20) != kSuffix) return std::nullopt;
  uint64_t id = 0;
  for (char c : name.substr(0, 20)) {
    if (c < '0' || c > '9') return std::nullopt;
    id = id * 10 + static_cast<uint64_t>(c - '0');
  }
  return id;
}

}  // namespace scalesearch
