#pragma once

// The search node's in-memory inverted index. Downloaded segments become
// level-0 sub-indexes with a fresh ordinal range; sub-indexes are merged in
// RAM under the configured policy, superseded versions of a primary key are
// tombstoned, and every change is published as an immutable ReadSnapshot.

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scalesearch/doc_id_set.h"
#include "scalesearch/forward.h"
#include "scalesearch/schema.h"
#include "scalesearch/segment.h"

namespace scalesearch {

enum class MergePolicy { kLogarithmic, kImmediate, kNoMerge };

std::string_view MergePolicyName(MergePolicy policy);
std::optional<MergePolicy> ParseMergePolicy(std::string_view name);

// Level of a sub-index holding `docs` documents: floor(log2(docs / unit)),
// with everything below 2*unit at level 0.
int LevelForSize(uint64_t docs, uint64_t unit);

// Merge of the entries at `first` and `second`; the result replaces `first`
// and `second` is removed.
struct MergeAction {
  size_t first;
  size_t second;
  friend bool operator==(const MergeAction&, const MergeAction&) = default;
};

// Cascade of merges to run after the newest sub-index (last element of
// `sizes`, in documents) was appended. Logarithmic: binary-counter
// discipline, two sub-indexes on one level merge into the next. Immediate:
// everything collapses into one. NoMerge: nothing. Deterministic.
std::vector<MergeAction> PlanMerges(std::vector<uint64_t> sizes, uint64_t unit, MergePolicy policy);

// Half-open primary-key range [lo, hi); hi == nullopt means unbounded.
struct KeyRange {
  std::string lo;
  std::optional<std::string> hi;

  bool Contains(std::string_view key) const { return key >= lo && (!hi || key < *hi); }
  friend bool operator==(const KeyRange&, const KeyRange&) = default;
};

// Per-document data of one incorporated segment.
struct DocBlock {
  uint64_t segment_id = 0;
  Ordinal base = 0;
  uint32_t doc_count = 0;
  std::vector<std::string> keys;
  std::vector<std::string> stored;
  std::vector<std::vector<uint32_t>> lengths;  // per field id; empty for non-text
};

class SubIndex {
 public:
  // Postings are shared so merges copy untouched terms by pointer.
  using Term = std::pair<std::pair<FieldId, std::string>, std::shared_ptr<const TermPostings>>;

  static std::shared_ptr<const SubIndex> FromSegment(const SegmentView& view, Ordinal base, uint64_t unit);
  // Heap-merge of two sorted term lists; ordinals are kept as-is.
  static std::shared_ptr<const SubIndex> Merge(const SubIndex& a, const SubIndex& b, uint64_t unit);

  int level() const { return level_; }
  uint64_t doc_count() const { return doc_count_; }
  const std::vector<Term>& terms() const { return terms_; }
  const std::vector<std::shared_ptr<const DocBlock>>& blocks() const { return blocks_; }
  const TermPostings* Lookup(FieldId field, std::string_view term) const;
  // Accounted bytes: fixed at segment load and additive under merges.
  uint64_t Footprint() const { return footprint_; }

 private:
  int level_ = 0;
  uint64_t doc_count_ = 0;
  uint64_t footprint_ = 0;
  std::vector<Term> terms_;
  std::vector<std::shared_ptr<const DocBlock>> blocks_;  // ordered by base
};

struct Posting {
  Ordinal ordinal;
  uint32_t tf;
};

class ReadSnapshot {
 public:
  uint64_t sequence() const { return sequence_; }
  const IndexSchema& schema() const { return *schema_; }
  const std::vector<std::shared_ptr<const SubIndex>>& subindexes() const { return subindexes_; }
  const DocIdSet& tombstones() const { return *tombstones_; }
  const ForwardView& forward() const { return *forward_; }

  // Union across sub-indexes minus tombstones. Throws kUnknownField or
  // kNonIndexedField.
  DocIdSet Postings(std::string_view field, std::string_view term) const;
  // Same documents with term frequencies, ordered by ordinal.
  std::vector<Posting> LivePostings(std::string_view field, std::string_view term) const;

  bool IsLive(Ordinal ordinal) const;
  const DocBlock* BlockFor(Ordinal ordinal) const;
  const std::string* KeyOf(Ordinal ordinal) const;
  const std::string* StoredJson(Ordinal ordinal) const;
  uint32_t FieldLength(FieldId field, Ordinal ordinal) const;

  // Live documents and their summed token counts per field id.
  uint64_t live_docs() const { return live_docs_; }
  uint64_t live_length_sum(FieldId field) const { return live_length_sums_.at(field); }

  // All live ordinals (for full scans).
  DocIdSet LiveOrdinals() const;

 private:
  friend class MemIndex;

  uint64_t sequence_ = 0;
  std::shared_ptr<const IndexSchema> schema_;
  std::vector<std::shared_ptr<const SubIndex>> subindexes_;
  std::shared_ptr<const DocIdSet> tombstones_;
  std::shared_ptr<const ForwardView> forward_;
  std::vector<std::pair<Ordinal, const DocBlock*>> block_index_;  // sorted by base
  uint64_t live_docs_ = 0;
  std::vector<uint64_t> live_length_sums_;
};

struct MemIndexOptions {
  MergePolicy policy = MergePolicy::kLogarithmic;
  uint64_t unit_docs = 1024;
  // Documents whose key falls outside are excluded when a segment loads.
  std::optional<KeyRange> key_range;
};

struct MergeStats {
  uint64_t merges = 0;
  uint64_t merge_volume_docs = 0;  // documents written into merged sub-indexes
  uint64_t max_subindexes = 0;
  uint64_t incorporated_segments = 0;
  uint64_t incorporated_docs = 0;
};

struct FootprintBreakdown {
  uint64_t base = 0;
  uint64_t subindexes = 0;
  uint64_t forward = 0;
  uint64_t key_map = 0;
  uint64_t tombstones = 0;
  uint64_t total() const { return base + subindexes + forward + key_map + tombstones; }
};

class MemIndex {
 public:
  static constexpr uint64_t kBaseFootprint = 4096;

  struct KeyEntry {
    Ordinal ordinal;
    uint64_t segment_id;
  };

  explicit MemIndex(std::shared_ptr<const IndexSchema> schema, MemIndexOptions options = {});

  // Loads a segment as a new sub-index, tombstones older versions of its
  // keys, runs the merge policy and publishes. Throws kOutOfOrderSegment
  // unless segment ids strictly increase.
  std::shared_ptr<const ReadSnapshot> Incorporate(const SegmentView& view);

  // Publishes the current state (e.g. after in-place writes).
  std::shared_ptr<const ReadSnapshot> Publish();
  std::shared_ptr<const ReadSnapshot> snapshot() const;

  ForwardStore& forward() { return *forward_; }
  const ForwardStore& forward() const { return *forward_; }

  // Writer-side lookups.
  std::optional<Ordinal> OrdinalOf(std::string_view key) const;
  const std::unordered_map<std::string, KeyEntry>& key_map() const { return key_map_; }
  std::vector<std::string> LiveKeys() const;

  std::optional<uint64_t> last_segment_id() const { return last_segment_id_; }
  size_t subindex_count() const { return subindexes_.size(); }
  const MergeStats& merge_stats() const { return merge_stats_; }
  const MemIndexOptions& options() const { return options_; }
  const IndexSchema& schema() const { return *schema_; }

  FootprintBreakdown Footprint() const;

 private:
  void Tombstone(Ordinal ordinal, bool was_live);
  void ApplyMerges();

  std::shared_ptr<const IndexSchema> schema_;
  MemIndexOptions options_;
  std::shared_ptr<ForwardStore> forward_;
  std::vector<std::shared_ptr<const SubIndex>> subindexes_;
  std::shared_ptr<DocIdSet> tombstones_;
  std::unordered_map<std::string, KeyEntry> key_map_;
  uint64_t key_map_bytes_ = 0;
  std::optional<uint64_t> last_segment_id_;
  uint64_t next_base_ = 0;
  uint64_t live_docs_ = 0;
  std::vector<uint64_t> live_length_sums_;
  std::vector<const DocBlock*> blocks_by_base_;
  MergeStats merge_stats_;
  uint64_t sequence_ = 0;

  mutable std::mutex publish_mu_;
  std::shared_ptr<const ReadSnapshot> published_;
};

}  // namespace scalesearch
