#pragma once

// Compressed sets of 32-bit document ordinals. The ordinal space is split on
// the high 16 bits into chunks; each chunk holds its low 16 bits in one of
// three containers (sorted array, 65536-bit bitmap, run list), whichever is
// smallest for its contents.

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scalesearch/bytes.h"

namespace scalesearch {

using Ordinal = uint32_t;

enum class ContainerKind : uint8_t { kArray = 0, kBitmap = 1, kRun = 2 };

inline constexpr uint32_t kMaxArrayCardinality = 4096;
inline constexpr size_t kBitmapWords = 1024;
inline constexpr size_t kBitmapBytes = kBitmapWords * 8;

// Picks the cheapest representation for a container holding `cardinality`
// values that form `run_count` maximal runs. Runs cost 4 bytes each plus a
// 4-byte header, arrays 2 bytes per value, bitmaps a flat 8 KiB.
ContainerKind ChooseKind(uint32_t cardinality, uint32_t run_count);

// Inclusive run [start, start + length_minus_1].
struct Run {
  uint16_t start;
  uint16_t length_minus_1;

  uint32_t end() const { return uint32_t{start} + length_minus_1; }
  friend bool operator==(const Run&, const Run&) = default;
};

class Container {
 public:
  Container() = default;

  // Both factories return normalized containers.
  static Container FromSorted(std::span<const uint16_t> values);
  static Container FromWords(std::span<const uint64_t, kBitmapWords> words);

  ContainerKind kind() const { return kind_; }
  uint32_t cardinality() const { return cardinality_; }
  uint32_t run_count() const { return run_count_; }
  bool empty() const { return cardinality_ == 0; }

  bool Contains(uint16_t v) const;
  // Return true when membership changed. Both re-select the kind afterwards.
  bool Add(uint16_t v);
  bool Remove(uint16_t v);

  // Number of members <= v.
  uint32_t Rank(uint16_t v) const;
  uint16_t Max() const;

  // Re-selects the representation via ChooseKind.
  void Normalize();
  // Forces a representation regardless of cost; membership is unchanged.
  void ConvertTo(ContainerKind kind);

  // ORs the members into a 1024-word bitmap.
  void FillWords(std::span<uint64_t, kBitmapWords> words) const;
  std::vector<uint16_t> ToVector() const;

  template <typename F>
  void ForEach(F&& f) const {
    switch (kind_) {
      case ContainerKind::kArray:
        for (uint16_t v : array_) f(v);
        break;
      case ContainerKind::kBitmap:
        for (size_t w = 0; w < kBitmapWords; ++w) {
          uint64_t bits = bitmap_[w];
          while (bits != 0) {
            int t = __builtin_ctzll(bits);
            f(static_cast<uint16_t>(w * 64 + t));
            bits &= bits - 1;
          }
        }
        break;
      case ContainerKind::kRun:
        for (const Run& r : runs_) {
          for (uint32_t v = r.start; v <= r.end(); ++v) f(static_cast<uint16_t>(v));
        }
        break;
    }
  }

  size_t PayloadBytes() const;

  const std::vector<uint16_t>& array() const { return array_; }
  const std::vector<uint64_t>& bitmap() const { return bitmap_; }
  const std::vector<Run>& runs() const { return runs_; }

  void SerializePayload(ByteWriter& w) const;
  // Reads the payload for a chunk whose header declared `kind` and
  // `cardinality`; validates every container invariant.
  static Container DeserializePayload(ByteReader& r, uint8_t kind, uint32_t cardinality);

 private:
  bool ArrayContains(uint16_t v) const;
  bool RunContains(uint16_t v) const;
  void RecountRuns();

  ContainerKind kind_ = ContainerKind::kArray;
  uint32_t cardinality_ = 0;
  uint32_t run_count_ = 0;
  std::vector<uint16_t> array_;
  std::vector<uint64_t> bitmap_;
  std::vector<Run> runs_;
};

class DocIdSet {
 public:
  struct Chunk {
    uint16_t key;
    Container container;
  };

  DocIdSet() = default;
  DocIdSet(std::initializer_list<Ordinal> docs);
  // `docs` must be strictly increasing.
  static DocIdSet FromSorted(std::span<const Ordinal> docs);

  bool Add(Ordinal doc);
  bool Remove(Ordinal doc);
  bool Contains(Ordinal doc) const;

  uint64_t Cardinality() const;
  bool empty() const { return chunks_.empty(); }
  // Number of members <= doc.
  uint64_t Rank(Ordinal doc) const;
  std::optional<Ordinal> Max() const;

  template <typename F>
  void ForEach(F&& f) const {
    for (const Chunk& c : chunks_) {
      const Ordinal high = Ordinal{c.key} << 16;
      c.container.ForEach([&](uint16_t low) { f(high | low); });
    }
  }

  std::vector<Ordinal> ToVector() const;

  // Approximate resident bytes: per-chunk header plus container payload.
  size_t SizeInBytes() const;

  // Forces every container into `kind`; used to check that results do not
  // depend on representation.
  void ConvertAll(ContainerKind kind);

  const std::vector<Chunk>& chunks() const { return chunks_; }

  // Layout: u32 chunk_count, then per chunk u16 key, u8 kind,
  // u16 cardinality-1 and the container payload.
  void Serialize(std::string* out) const;
  std::string Serialize() const;
  static DocIdSet Deserialize(ByteReader& r);
  // Rejects trailing bytes.
  static DocIdSet Deserialize(std::string_view bytes);

  friend bool operator==(const DocIdSet& a, const DocIdSet& b);

 private:
  friend DocIdSet Intersect(const DocIdSet& a, const DocIdSet& b);
  friend DocIdSet Union(const DocIdSet& a, const DocIdSet& b);
  friend DocIdSet Difference(const DocIdSet& a, const DocIdSet& b);

  std::vector<Chunk>::iterator LowerBound(uint16_t key);
  std::vector<Chunk>::const_iterator Find(uint16_t key) const;

  std::vector<Chunk> chunks_;
};

DocIdSet Intersect(const DocIdSet& a, const DocIdSet& b);
DocIdSet Union(const DocIdSet& a, const DocIdSet& b);
// Members of a that are not in b.
DocIdSet Difference(const DocIdSet& a, const DocIdSet& b);

}  // namespace scalesearch
