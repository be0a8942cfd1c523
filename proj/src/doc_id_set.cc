#include "scalesearch/doc_id_set.h"

#include <algorithm>
#include <array>
#include <bit>
#include <iterator>

namespace scalesearch {

ContainerKind ChooseKind(uint32_t cardinality, uint32_t run_count) {
  const uint64_t run_bytes = 4ull * run_count + 4;
  const uint64_t array_bytes = 2ull * cardinality;
  if (run_bytes < std::min<uint64_t>(array_bytes, kBitmapBytes)) return ContainerKind::kRun;
  if (cardinality <= kMaxArrayCardinality) return ContainerKind::kArray;
  return ContainerKind::kBitmap;
}

namespace {

using Words = std::array<uint64_t, kBitmapWords>;

uint32_t CountRunsInWords(std::span<const uint64_t, kBitmapWords> words) {
  uint32_t runs = 0;
  uint64_t carry = 0;  // top bit of the previous word
  for (uint64_t w : words) {
    // A run starts at every set bit whose predecessor is clear.
    runs += std::popcount(w & ~((w << 1) | carry));
    carry = w >> 63;
  }
  return runs;
}

std::vector<Run> RunsFromSorted(std::span<const uint16_t> values) {
  std::vector<Run> runs;
  for (size_t i = 0; i < values.size();) {
    size_t j = i;
    while (j + 1 < values.size() && values[j + 1] == values[j] + 1) ++j;
    runs.push_back({values[i], static_cast<uint16_t>(values[j] - values[i])});
    i = j + 1;
  }
  return runs;
}

}  // namespace

// ---------------------------------------------------------------------------
// Container

Container Container::FromSorted(std::span<const uint16_t> values) {
  Container c;
  c.array_.assign(values.begin(), values.end());
  c.cardinality_ = static_cast<uint32_t>(values.size());
  c.RecountRuns();
  c.Normalize();
  return c;
}

Container Container::FromWords(std::span<const uint64_t, kBitmapWords> words) {
  Container c;
  c.kind_ = ContainerKind::kBitmap;
  c.bitmap_.assign(words.begin(), words.end());
  uint32_t card = 0;
  for (uint64_t w : words) card += std::popcount(w);
  c.cardinality_ = card;
  c.run_count_ = CountRunsInWords(words);
  c.Normalize();
  return c;
}

bool Container::ArrayContains(uint16_t v) const {
  return std::binary_search(array_.begin(), array_.end(), v);
}

bool Container::RunContains(uint16_t v) const {
  auto it = std::upper_bound(runs_.begin(), runs_.end(), v,
                             [](uint16_t x, const Run& r) { return x < r.start; });
  if (it == runs_.begin()) return false;
  --it;
  return v <= it->end();
}

bool Container::Contains(uint16_t v) const {
  switch (kind_) {
    case ContainerKind::kArray: return ArrayContains(v);
    case ContainerKind::kBitmap: return (bitmap_[v >> 6] >> (v & 63)) & 1;
    case ContainerKind::kRun: return RunContains(v);
  }
  return false;
}

bool Container::Add(uint16_t v) {
  if (Contains(v)) return false;
  const bool left = v > 0 && Contains(static_cast<uint16_t>(v - 1));
  const bool right = v < 0xFFFF && Contains(static_cast<uint16_t>(v + 1));
  switch (kind_) {
    case ContainerKind::kArray:
      array_.insert(std::lower_bound(array_.begin(), array_.end(), v), v);
      break;
    case ContainerKind::kBitmap:
      bitmap_[v >> 6] |= uint64_t{1} << (v & 63);
      break;
    case ContainerKind::kRun: {
      auto next = std::upper_bound(runs_.begin(), runs_.end(), v,
                                   [](uint16_t x, const Run& r) { return x < r.start; });
      if (left && right) {
        auto prev = next - 1;
        prev->length_minus_1 = static_cast<uint16_t>(next->end() - prev->start);
        runs_.erase(next);
      } else if (left) {
        (next - 1)->length_minus_1++;
      } else if (right) {
        next->start = v;
        next->length_minus_1++;
      } else {
        runs_.insert(next, Run{v, 0});
      }
      break;
    }
  }
  ++cardinality_;
  run_count_ = run_count_ + 1 - left - right;
  Normalize();
  return true;
}

bool Container::Remove(uint16_t v) {
  if (!Contains(v)) return false;
  const bool left = v > 0 && Contains(static_cast<uint16_t>(v - 1));
  const bool right = v < 0xFFFF && Contains(static_cast<uint16_t>(v + 1));
  switch (kind_) {
    case ContainerKind::kArray:
      array_.erase(std::lower_bound(array_.begin(), array_.end(), v));
      break;
    case ContainerKind::kBitmap:
      bitmap_[v >> 6] &= ~(uint64_t{1} << (v & 63));
      break;
    case ContainerKind::kRun: {
      auto it = std::upper_bound(runs_.begin(), runs_.end(), v,
                                 [](uint16_t x, const Run& r) { return x < r.start; }) - 1;
      const uint32_t end = it->end();
      if (!left && !right) {
        runs_.erase(it);
      } else if (!left) {
        it->start = static_cast<uint16_t>(v + 1);
        it->length_minus_1--;
      } else if (!right) {
        it->length_minus_1--;
      } else {
        it->length_minus_1 = static_cast<uint16_t>(v - 1 - it->start);
        runs_.insert(it + 1, Run{static_cast<uint16_t>(v + 1), static_cast<uint16_t>(end - v - 1)});
      }
      break;
    }
  }
  --cardinality_;
  run_count_ = run_count_ + left + right - 1;
  Normalize();
  return true;
}

uint32_t Container::Rank(uint16_t v) const {
  switch (kind_) {
    case ContainerKind::kArray:
      return static_cast<uint32_t>(std::upper_bound(array_.begin(), array_.end(), v) - array_.begin());
    case ContainerKind::kBitmap: {
      uint32_t rank = 0;
      const size_t word = v >> 6;
      for (size_t w = 0; w < word; ++w) rank += std::popcount(bitmap_[w]);
      const unsigned bit = v & 63;
      const uint64_t mask = bit == 63 ? ~uint64_t{0} : ((uint64_t{1} << (bit + 1)) - 1);
      return rank + std::popcount(bitmap_[word] & mask);
    }
    case ContainerKind::kRun: {
      uint32_t rank = 0;
      for (const Run& r : runs_) {
        if (r.start > v) break;
        rank += std::min<uint32_t>(r.end(), v) - r.start + 1;
      }
      return rank;
    }
  }
  return 0;
}

uint16_t Container::Max() const {
  switch (kind_) {
    case ContainerKind::kArray: return array_.back();
    case ContainerKind::kRun: return static_cast<uint16_t>(runs_.back().end());
    case ContainerKind::kBitmap:
      for (size_t w = kBitmapWords; w-- > 0;) {
        if (bitmap_[w] != 0) return static_cast<uint16_t>(w * 64 + 63 - std::countl_zero(bitmap_[w]));
      }
  }
  return 0;
}

void Container::RecountRuns() {
  switch (kind_) {
    case ContainerKind::kArray: {
      uint32_t runs = 0;
      for (size_t i = 0; i < array_.size(); ++i) {
        if (i == 0 || array_[i] != array_[i - 1] + 1) ++runs;
      }
      run_count_ = runs;
      break;
    }
    case ContainerKind::kBitmap:
      run_count_ = CountRunsInWords(std::span<const uint64_t, kBitmapWords>(bitmap_.data(), kBitmapWords));
      break;
    case ContainerKind::kRun:
      run_count_ = static_cast<uint32_t>(runs_.size());
      break;
  }
}

void Container::Normalize() {
  if (cardinality_ == 0) {
    ConvertTo(ContainerKind::kArray);
    return;
  }
  ConvertTo(ChooseKind(cardinality_, run_count_));
}

void Container::ConvertTo(ContainerKind kind) {
  if (kind == kind_) return;
  std::vector<uint16_t> values = ToVector();
  array_.clear();
  bitmap_.clear();
  runs_.clear();
  kind_ = kind;
  switch (kind) {
    case ContainerKind::kArray:
      array_ = std::move(values);
      break;
    case ContainerKind::kBitmap:
      bitmap_.assign(kBitmapWords, 0);
      for (uint16_t v : values) bitmap_[v >> 6] |= uint64_t{1} << (v & 63);
      break;
    case ContainerKind::kRun:
      runs_ = RunsFromSorted(values);
      break;
  }
  array_.shrink_to_fit();
  runs_.shrink_to_fit();
}

void Container::FillWords(std::span<uint64_t, kBitmapWords> words) const {
  switch (kind_) {
    case ContainerKind::kBitmap:
      for (size_t i = 0; i < kBitmapWords; ++i) words[i] |= bitmap_[i];
      break;
    case ContainerKind::kArray:
      for (uint16_t v : array_) words[v >> 6] |= uint64_t{1} << (v & 63);
      break;
    case ContainerKind::kRun:
      for (const Run& r : runs_) {
        uint32_t lo = r.start;
        const uint32_t hi = r.end();
        while (lo <= hi) {
          const uint32_t word = lo >> 6;
          const uint32_t first = lo & 63;
          const uint32_t last = std::min<uint32_t>(63, first + (hi - lo));
          const uint64_t span_bits = last - first + 1;
          const uint64_t mask = span_bits == 64 ? ~uint64_t{0} : (((uint64_t{1} << span_bits) - 1) << first);
          words[word] |= mask;
          lo += last - first + 1;
        }
      }
      break;
  }
}

std::vector<uint16_t> Container::ToVector() const {
  if (kind_ == ContainerKind::kArray) return array_;
  std::vector<uint16_t> out;
  out.reserve(cardinality_);
  ForEach([&](uint16_t v) { out.push_back(v); });
  return out;
}

size_t Container::PayloadBytes() const {
  switch (kind_) {
    case ContainerKind::kArray: return 2 * array_.size();
    case ContainerKind::kBitmap: return kBitmapBytes;
    case ContainerKind::kRun: return 2 + 4 * runs_.size();
  }
  return 0;
}

void Container::SerializePayload(ByteWriter& w) const {
  switch (kind_) {
    case ContainerKind::kArray:
      w.Raw(array_.data(), array_.size() * sizeof(uint16_t));
      break;
    case ContainerKind::kBitmap:
      w.Raw(bitmap_.data(), kBitmapBytes);
      break;
    case ContainerKind::kRun:
      w.U16(static_cast<uint16_t>(runs_.size()));
      for (const Run& r : runs_) {
        w.U16(r.start);
        w.U16(r.length_minus_1);
      }
      break;
  }
}

Container Container::DeserializePayload(ByteReader& r, uint8_t kind, uint32_t cardinality) {
  Container c;
  switch (kind) {
    case static_cast<uint8_t>(ContainerKind::kArray): {
      if (cardinality > kMaxArrayCardinality) r.Fail("array container above 4096 values");
      std::string_view raw = r.Bytes(2 * size_t{cardinality});
      c.array_.resize(cardinality);
      std::memcpy(c.array_.data(), raw.data(), raw.size());
      for (size_t i = 1; i < c.array_.size(); ++i) {
        if (c.array_[i] <= c.array_[i - 1]) r.Fail("array container not strictly increasing");
      }
      c.kind_ = ContainerKind::kArray;
      break;
    }
    case static_cast<uint8_t>(ContainerKind::kBitmap): {
      std::string_view raw = r.Bytes(kBitmapBytes);
      c.bitmap_.resize(kBitmapWords);
      std::memcpy(c.bitmap_.data(), raw.data(), raw.size());
      uint32_t card = 0;
      for (uint64_t w : c.bitmap_) card += std::popcount(w);
      if (card != cardinality) r.Fail("bitmap cardinality mismatch");
      c.kind_ = ContainerKind::kBitmap;
      break;
    }
    case static_cast<uint8_t>(ContainerKind::kRun): {
      const uint16_t n = r.U16();
      if (n == 0) r.Fail("run container without runs");
      c.runs_.reserve(n);
      uint64_t card = 0;
      for (uint16_t i = 0; i < n; ++i) {
        Run run{r.U16(), r.U16()};
        if (run.end() > 0xFFFF) r.Fail("run past 65535");
        if (!c.runs_.empty() && run.start <= c.runs_.back().end() + 1) {
          r.Fail("runs overlap or touch");
        }
        card += run.length_minus_1 + 1u;
        c.runs_.push_back(run);
      }
      if (card != cardinality) r.Fail("run cardinality mismatch");
      c.kind_ = ContainerKind::kRun;
      break;
    }
    default:
      r.Fail("unknown container kind " + std::to_string(kind));
  }
  c.cardinality_ = cardinality;
  c.RecountRuns();
  return c;
}

// ---------------------------------------------------------------------------
// DocIdSet

DocIdSet::DocIdSet(std::initializer_list<Ordinal> docs) {
  for (Ordinal d : docs) Add(d);
}

DocIdSet DocIdSet::FromSorted(std::span<const Ordinal> docs) {
  DocIdSet set;
  std::vector<uint16_t> lows;
  for (size_t i = 0; i < docs.size();) {
    const uint16_t key = static_cast<uint16_t>(docs[i] >> 16);
    lows.clear();
    while (i < docs.size() && (docs[i] >> 16) == key) {
      lows.push_back(static_cast<uint16_t>(docs[i] & 0xFFFF));
      ++i;
    }
    set.chunks_.push_back({key, Container::FromSorted(lows)});
  }
  return set;
}

std::vector<DocIdSet::Chunk>::iterator DocIdSet::LowerBound(uint16_t key) {
  return std::lower_bound(chunks_.begin(), chunks_.end(), key,
                          [](const Chunk& c, uint16_t k) { return c.key < k; });
}

std::vector<DocIdSet::Chunk>::const_iterator DocIdSet::Find(uint16_t key) const {
  auto it = std::lower_bound(chunks_.begin(), chunks_.end(), key,
                             [](const Chunk& c, uint16_t k) { return c.key < k; });
  return (it != chunks_.end() && it->key == key) ? it : chunks_.end();
}

bool DocIdSet::Add(Ordinal doc) {
  const uint16_t key = static_cast<uint16_t>(doc >> 16);
  auto it = LowerBound(key);
  if (it == chunks_.end() || it->key != key) it = chunks_.insert(it, Chunk{key, Container{}});
  return it->container.Add(static_cast<uint16_t>(doc & 0xFFFF));
}

bool DocIdSet::Remove(Ordinal doc) {
  const uint16_t key = static_cast<uint16_t>(doc >> 16);
  auto it = LowerBound(key);
  if (it == chunks_.end() || it->key != key) return false;
  const bool removed = it->container.Remove(static_cast<uint16_t>(doc & 0xFFFF));
  if (it->container.empty()) chunks_.erase(it);
  return removed;
}

bool DocIdSet::Contains(Ordinal doc) const {
  auto it = Find(static_cast<uint16_t>(doc >> 16));
  return it != chunks_.end() && it->container.Contains(static_cast<uint16_t>(doc & 0xFFFF));
}

uint64_t DocIdSet::Cardinality() const {
  uint64_t n = 0;
  for (const Chunk& c : chunks_) n += c.container.cardinality();
  return n;
}

uint64_t DocIdSet::Rank(Ordinal doc) const {
  const uint16_t key = static_cast<uint16_t>(doc >> 16);
  uint64_t rank = 0;
  for (const Chunk& c : chunks_) {
    if (c.key < key) {
      rank += c.container.cardinality();
    } else {
      if (c.key == key) rank += c.container.Rank(static_cast<uint16_t>(doc & 0xFFFF));
      break;
    }
  }
  return rank;
}

std::optional<Ordinal> DocIdSet::Max() const {
  if (chunks_.empty()) return std::nullopt;
  const Chunk& last = chunks_.back();
  return (Ordinal{last.key} << 16) | last.container.Max();
}

std::vector<Ordinal> DocIdSet::ToVector() const {
  std::vector<Ordinal> out;
  out.reserve(Cardinality());
  ForEach([&](Ordinal d) { out.push_back(d); });
  return out;
}

size_t DocIdSet::SizeInBytes() const {
  size_t bytes = 4;
  for (const Chunk& c : chunks_) bytes += 5 + c.container.PayloadBytes();
  return bytes;
}

void DocIdSet::ConvertAll(ContainerKind kind) {
  for (Chunk& c : chunks_) c.container.ConvertTo(kind);
}

void DocIdSet::Serialize(std::string* out) const {
  ByteWriter w(out);
  w.U32(static_cast<uint32_t>(chunks_.size()));
  for (const Chunk& c : chunks_) {
    w.U16(c.key);
    w.U8(static_cast<uint8_t>(c.container.kind()));
    w.U16(static_cast<uint16_t>(c.container.cardinality() - 1));
    c.container.SerializePayload(w);
  }
}

std::string DocIdSet::Serialize() const {
  std::string out;
  Serialize(&out);
  return out;
}

DocIdSet DocIdSet::Deserialize(ByteReader& r) {
  DocIdSet set;
  const uint32_t n = r.U32();
  if (n > 65536) r.Fail("chunk count " + std::to_string(n) + " exceeds key space");
  set.chunks_.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    const uint16_t key = r.U16();
    if (!set.chunks_.empty() && key <= set.chunks_.back().key) r.Fail("chunk keys not increasing");
    const uint8_t kind = r.U8();
    const uint32_t cardinality = uint32_t{r.U16()} + 1;
    set.chunks_.push_back({key, Container::DeserializePayload(r, kind, cardinality)});
  }
  return set;
}

DocIdSet DocIdSet::Deserialize(std::string_view bytes) {
  ByteReader r(bytes);
  DocIdSet set = Deserialize(r);
  if (!r.done()) r.Fail("trailing bytes after doc id set");
  return set;
}

bool operator==(const DocIdSet& a, const DocIdSet& b) {
  if (a.chunks_.size() != b.chunks_.size()) return false;
  for (size_t i = 0; i < a.chunks_.size(); ++i) {
    const Container& ca = a.chunks_[i].container;
    const Container& cb = b.chunks_[i].container;
    if (a.chunks_[i].key != b.chunks_[i].key || ca.cardinality() != cb.cardinality()) return false;
    if (ca.ToVector() != cb.ToVector()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Set algebra. Array/array pairs use sorted merges, array/other pairs filter
// the array through Contains, everything else goes through bitmap words.

namespace {

enum class SetOp { kIntersect, kUnion, kDifference };

Container CombineContainers(const Container& a, const Container& b, SetOp op) {
  const bool a_array = a.kind() == ContainerKind::kArray;
  const bool b_array = b.kind() == ContainerKind::kArray;
  std::vector<uint16_t> out;
  if (a_array && b_array) {
    const auto& x = a.array();
    const auto& y = b.array();
    switch (op) {
      case SetOp::kIntersect:
        std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
        break;
      case SetOp::kUnion:
        std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
        break;
      case SetOp::kDifference:
        std::set_difference(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
        break;
    }
    return Container::FromSorted(out);
  }
  if (op == SetOp::kIntersect && (a_array || b_array)) {
    const Container& arr = a_array ? a : b;
    const Container& other = a_array ? b : a;
    for (uint16_t v : arr.array()) {
      if (other.Contains(v)) out.push_back(v);
    }
    return Container::FromSorted(out);
  }
  if (op == SetOp::kDifference && a_array) {
    for (uint16_t v : a.array()) {
      if (!b.Contains(v)) out.push_back(v);
    }
    return Container::FromSorted(out);
  }
  Words wa{};
  Words wb{};
  a.FillWords(wa);
  b.FillWords(wb);
  for (size_t i = 0; i < kBitmapWords; ++i) {
    switch (op) {
      case SetOp::kIntersect: wa[i] &= wb[i]; break;
      case SetOp::kUnion: wa[i] |= wb[i]; break;
      case SetOp::kDifference: wa[i] &= ~wb[i]; break;
    }
  }
  return Container::FromWords(wa);
}

Container Normalized(Container c) {
  c.Normalize();
  return c;
}

}  // namespace

DocIdSet Intersect(const DocIdSet& a, const DocIdSet& b) {
  DocIdSet out;
  size_t i = 0, j = 0;
  while (i < a.chunks_.size() && j < b.chunks_.size()) {
    const auto& ca = a.chunks_[i];
    const auto& cb = b.chunks_[j];
    if (ca.key < cb.key) {
      ++i;
    } else if (cb.key < ca.key) {
      ++j;
    } else {
      Container c = CombineContainers(ca.container, cb.container, SetOp::kIntersect);
      if (!c.empty()) out.chunks_.push_back({ca.key, std::move(c)});
      ++i;
      ++j;
    }
  }
  return out;
}

DocIdSet Union(const DocIdSet& a, const DocIdSet& b) {
  DocIdSet out;
  out.chunks_.reserve(a.chunks_.size() + b.chunks_.size());
  size_t i = 0, j = 0;
  while (i < a.chunks_.size() || j < b.chunks_.size()) {
    if (j == b.chunks_.size() || (i < a.chunks_.size() && a.chunks_[i].key < b.chunks_[j].key)) {
      out.chunks_.push_back({a.chunks_[i].key, Normalized(a.chunks_[i].container)});
      ++i;
    } else if (i == a.chunks_.size() || b.chunks_[j].key < a.chunks_[i].key) {
      out.chunks_.push_back({b.chunks_[j].key, Normalized(b.chunks_[j].container)});
      ++j;
    } else {
      out.chunks_.push_back(
          {a.chunks_[i].key, CombineContainers(a.chunks_[i].container, b.chunks_[j].container, SetOp::kUnion)});
      ++i;
      ++j;
    }
  }
  return out;
}

DocIdSet Difference(const DocIdSet& a, const DocIdSet& b) {
  DocIdSet out;
  size_t j = 0;
  for (const auto& ca : a.chunks_) {
    while (j < b.chunks_.size() && b.chunks_[j].key < ca.key) ++j;
    if (j < b.chunks_.size() && b.chunks_[j].key == ca.key) {
      Container c = CombineContainers(ca.container, b.chunks_[j].container, SetOp::kDifference);
      if (!c.empty()) out.chunks_.push_back({ca.key, std::move(c)});
    } else {
      out.chunks_.push_back({ca.key, Normalized(ca.container)});
    }
  }
  return out;
}

}  // namespace scalesearch
