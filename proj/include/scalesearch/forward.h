#pragma once

// In-place attribute storage: one RAM array per in-place field, indexed by
// document ordinal, written in O(1). Keyword values go through an EnumStore
// and the arrays hold 32-bit references. Fields declared fast_search also
// keep an ordered value -> DocIdSet map that is copied on write when a
// published view still references it.

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "scalesearch/doc_id_set.h"
#include "scalesearch/schema.h"

namespace scalesearch {

class SegmentView;

// Deduplicating string table with dense ids in first-intern order.
class EnumStore {
 public:
  uint32_t Intern(std::string_view s);
  std::optional<uint32_t> Find(std::string_view s) const;
  // Throws kInvalidArgument for an id never handed out.
  std::string Resolve(uint32_t id) const;
  uint32_t size() const;
  uint64_t Footprint() const;

 private:
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, uint32_t> ids_;
  std::vector<std::string> strings_;
  uint64_t bytes_ = 0;
};

// Dense array of 64-bit slots with atomic whole-slot reads and writes.
// Storage is chunked so growth never moves existing slots.
class ForwardArray {
 public:
  explicit ForwardArray(uint64_t missing_bits);
  ~ForwardArray();
  ForwardArray(const ForwardArray&) = delete;
  ForwardArray& operator=(const ForwardArray&) = delete;

  void EnsureCapacity(uint64_t slots);
  uint64_t capacity() const { return capacity_.load(std::memory_order_acquire); }

  uint64_t Load(Ordinal ordinal) const;
  void Store(Ordinal ordinal, uint64_t bits);

 private:
  static constexpr unsigned kChunkBits = 16;
  static constexpr uint64_t kChunkSlots = uint64_t{1} << kChunkBits;
  static constexpr uint64_t kMaxChunks = uint64_t{1} << (32 - kChunkBits);

  uint64_t missing_bits_;
  std::unique_ptr<std::atomic<std::atomic<uint64_t>*>[]> chunks_;
  std::atomic<uint64_t> capacity_{0};
};

template <typename K>
using ValueTree = std::map<K, DocIdSet>;

using FrozenTree = std::variant<std::monostate, std::shared_ptr<const ValueTree<int64_t>>,
                                std::shared_ptr<const ValueTree<double>>,
                                std::shared_ptr<const ValueTree<std::string>>>;

// Work counters used to check the O(1) write path.
struct ForwardStats {
  std::atomic<uint64_t> slot_writes{0};
  std::atomic<uint64_t> slot_reads{0};
  std::atomic<uint64_t> scanned_slots{0};
  std::atomic<uint64_t> tree_updates{0};
};

class ForwardStore;

// What a read snapshot sees: the live arrays (whole-slot atomic reads) plus
// the fast_search trees as they were when the view was frozen.
class ForwardView {
 public:
  // Ordinals with lo <= value <= hi. Uses the frozen tree for fast_search
  // fields and a linear scan otherwise; NaN and missing never match.
  DocIdSet RangeFilter(std::string_view field, const Value& lo, const Value& hi) const;
  // Always scans the array.
  DocIdSet RangeFilterScan(std::string_view field, const Value& lo, const Value& hi) const;

  std::optional<Value> GetValue(std::string_view field, Ordinal ordinal) const;
  uint64_t capacity() const { return capacity_; }
  const FrozenTree& tree(FieldId field) const { return trees_.at(field); }

 private:
  friend class ForwardStore;
  std::shared_ptr<const ForwardStore> store_;
  std::vector<FrozenTree> trees_;  // indexed by field id
  uint64_t capacity_ = 0;
};

class ForwardStore : public std::enable_shared_from_this<ForwardStore> {
 public:
  explicit ForwardStore(std::shared_ptr<const IndexSchema> schema);

  // Grows every array to hold ordinals [0, end).
  void EnsureCapacity(uint64_t end);
  uint64_t capacity() const;

  // Throws kUnknownField, kFieldMisuse (field not in-place), kTypeMismatch,
  // kOrdinalOutOfRange.
  void SetValue(std::string_view field, Ordinal ordinal, const Value& value);
  std::optional<Value> GetValue(std::string_view field, Ordinal ordinal) const;

  // Copies doc values of every in-place field into [base, base+doc_count).
  // Throws kMissingColumn.
  void InitFromSegment(const SegmentView& view, Ordinal base);

  // Copies every value that arrived through SetValue for `from` onto `to`.
  void CarryOver(Ordinal from, Ordinal to);

  std::shared_ptr<const ForwardView> Freeze() const;

  const EnumStore& enums(std::string_view field) const;
  const ForwardStats& stats() const { return stats_; }
  const IndexSchema& schema() const { return *schema_; }
  uint64_t Footprint() const;

  // Rebuilds a fast_search tree from the array; used to check coherence.
  FrozenTree RebuildTree(FieldId field) const;

 private:
  friend class ForwardView;

  struct Field {
    FieldId id = 0;
    const FieldSpec* spec = nullptr;
    std::unique_ptr<ForwardArray> array;
    std::unique_ptr<EnumStore> enums;
    std::variant<std::monostate, std::shared_ptr<ValueTree<int64_t>>, std::shared_ptr<ValueTree<double>>,
                 std::shared_ptr<ValueTree<std::string>>>
        tree;
    DocIdSet written;  // ordinals set through the in-place path
  };

  Field& InPlaceField(std::string_view name);
  const Field& InPlaceField(std::string_view name) const;
  void WriteSlot(Field& f, Ordinal ordinal, const Value& value);
  std::optional<Value> Decode(const Field& f, uint64_t bits) const;

  std::shared_ptr<const IndexSchema> schema_;
  std::vector<Field> fields_;          // in-place fields only
  std::vector<int> field_index_;       // field id -> index into fields_, or -1
  uint64_t capacity_ = 0;
  mutable ForwardStats stats_;
};

}  // namespace scalesearch
