#include "scalesearch/forward.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>

#include "scalesearch/error.h"
#include "scalesearch/segment.h"

namespace scalesearch {

// ---------------------------------------------------------------------------
// EnumStore

uint32_t EnumStore::Intern(std::string_view s) {
  {
    std::shared_lock lock(mu_);
    if (auto it = ids_.find(std::string(s)); it != ids_.end()) return it->second;
  }
  std::unique_lock lock(mu_);
  auto [it, inserted] = ids_.emplace(std::string(s), static_cast<uint32_t>(strings_.size()));
  if (inserted) {
    if (strings_.size() >= kMissingEnum) throw Error(ErrorCode::kInvalidArgument, "enum store full");
    strings_.emplace_back(s);
    bytes_ += 2 * s.size() + 64;
  }
  return it->second;
}

std::optional<uint32_t> EnumStore::Find(std::string_view s) const {
  std::shared_lock lock(mu_);
  auto it = ids_.find(std::string(s));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::string EnumStore::Resolve(uint32_t id) const {
  std::shared_lock lock(mu_);
  if (id >= strings_.size()) throw Error(ErrorCode::kInvalidArgument, "enum id " + std::to_string(id));
  return strings_[id];
}

uint32_t EnumStore::size() const {
  std::shared_lock lock(mu_);
  return static_cast<uint32_t>(strings_.size());
}

uint64_t EnumStore::Footprint() const {
  std::shared_lock lock(mu_);
  return bytes_;
}

// ---------------------------------------------------------------------------
// ForwardArray

ForwardArray::ForwardArray(uint64_t missing_bits)
    : missing_bits_(missing_bits), chunks_(new std::atomic<std::atomic<uint64_t>*>[kMaxChunks]) {
  for (uint64_t i = 0; i < kMaxChunks; ++i) chunks_[i].store(nullptr, std::memory_order_relaxed);
}

ForwardArray::~ForwardArray() {
  for (uint64_t i = 0; i < kMaxChunks; ++i) delete[] chunks_[i].load(std::memory_order_relaxed);
}

void ForwardArray::EnsureCapacity(uint64_t slots) {
  if (slots <= capacity()) return;
  if (slots > kMaxChunks * kChunkSlots) throw Error(ErrorCode::kOrdinalOutOfRange, "ordinal space exhausted");
  const uint64_t chunks_needed = (slots + kChunkSlots - 1) >> kChunkBits;
  for (uint64_t c = 0; c < chunks_needed; ++c) {
    if (chunks_[c].load(std::memory_order_relaxed) != nullptr) continue;
    auto* chunk = new std::atomic<uint64_t>[kChunkSlots];
    for (uint64_t i = 0; i < kChunkSlots; ++i) chunk[i].store(missing_bits_, std::memory_order_relaxed);
    chunks_[c].store(chunk, std::memory_order_release);
  }
  capacity_.store(slots, std::memory_order_release);
}

uint64_t ForwardArray::Load(Ordinal ordinal) const {
  if (ordinal >= capacity()) return missing_bits_;
  const auto* chunk = chunks_[ordinal >> kChunkBits].load(std::memory_order_acquire);
  return chunk[ordinal & (kChunkSlots - 1)].load(std::memory_order_acquire);
}

void ForwardArray::Store(Ordinal ordinal, uint64_t bits) {
  if (ordinal >= capacity()) {
    throw Error(ErrorCode::kOrdinalOutOfRange, "ordinal " + std::to_string(ordinal) + " beyond capacity " +
                                                   std::to_string(capacity()));
  }
  auto* chunk = chunks_[ordinal >> kChunkBits].load(std::memory_order_relaxed);
  chunk[ordinal & (kChunkSlots - 1)].store(bits, std::memory_order_release);
}

// ---------------------------------------------------------------------------
// ForwardStore

namespace {

uint64_t MissingBits(FieldKind kind) {
  switch (kind) {
    case FieldKind::kInt64: return std::bit_cast<uint64_t>(kMissingInt64);
    case FieldKind::kFloat64: return std::bit_cast<uint64_t>(MissingFloat64());
    default: return kMissingEnum;
  }
}

template <typename K>
std::shared_ptr<ValueTree<K>>& Unshare(std::shared_ptr<ValueTree<K>>& tree) {
  // A published view may still hold this tree; give the writer its own copy.
  if (tree.use_count() > 1) tree = std::make_shared<ValueTree<K>>(*tree);
  return tree;
}

template <typename K>
void TreeMove(std::shared_ptr<ValueTree<K>>& tree, const std::optional<K>& old_key, const std::optional<K>& new_key,
              Ordinal ordinal) {
  auto& t = *Unshare(tree);
  if (old_key) {
    auto it = t.find(*old_key);
    if (it != t.end()) {
      it->second.Remove(ordinal);
      if (it->second.empty()) t.erase(it);
    }
  }
  if (new_key) t[*new_key].Add(ordinal);
}

template <typename K>
DocIdSet CollectRange(const ValueTree<K>& tree, const K& lo, const K& hi) {
  std::vector<Ordinal> ordinals;
  for (auto it = tree.lower_bound(lo); it != tree.end() && !(hi < it->first); ++it) {
    it->second.ForEach([&](Ordinal o) { ordinals.push_back(o); });
  }
  std::sort(ordinals.begin(), ordinals.end());
  return DocIdSet::FromSorted(ordinals);
}

int64_t IntBound(const Value& v, bool lower) {
  if (const auto* i = std::get_if<int64_t>(&v)) return *i;
  if (const auto* d = std::get_if<double>(&v)) {
    const double r = lower ? std::ceil(*d) : std::floor(*d);
    if (r <= -9.2e18) return std::numeric_limits<int64_t>::min() + 1;
    if (r >= 9.2e18) return std::numeric_limits<int64_t>::max();
    return static_cast<int64_t>(r);
  }
  throw Error(ErrorCode::kTypeMismatch, "numeric bound expected, got " + ValueToString(v));
}

double FloatBound(const Value& v) {
  if (const auto* i = std::get_if<int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw Error(ErrorCode::kTypeMismatch, "numeric bound expected, got " + ValueToString(v));
}

const std::string& StringBound(const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw Error(ErrorCode::kTypeMismatch, "string bound expected, got " + ValueToString(v));
}

}  // namespace

ForwardStore::ForwardStore(std::shared_ptr<const IndexSchema> schema)
    : schema_(std::move(schema)), field_index_(schema_->fields().size(), -1) {
  for (FieldId id = 0; id < schema_->fields().size(); ++id) {
    const FieldSpec& spec = schema_->FieldAt(id);
    if (spec.path != UpdatePath::kInPlace) continue;
    Field f;
    f.id = id;
    f.spec = &spec;
    f.array = std::make_unique<ForwardArray>(MissingBits(spec.kind));
    if (spec.kind == FieldKind::kKeyword) f.enums = std::make_unique<EnumStore>();
    if (spec.fast_search) {
      switch (spec.kind) {
        case FieldKind::kInt64: f.tree = std::make_shared<ValueTree<int64_t>>(); break;
        case FieldKind::kFloat64: f.tree = std::make_shared<ValueTree<double>>(); break;
        case FieldKind::kKeyword: f.tree = std::make_shared<ValueTree<std::string>>(); break;
        case FieldKind::kText: break;
      }
    }
    field_index_[id] = static_cast<int>(fields_.size());
    fields_.push_back(std::move(f));
  }
}

void ForwardStore::EnsureCapacity(uint64_t end) {
  if (end <= capacity_) return;
  for (Field& f : fields_) f.array->EnsureCapacity(end);
  capacity_ = end;
}

uint64_t ForwardStore::capacity() const { return capacity_; }

ForwardStore::Field& ForwardStore::InPlaceField(std::string_view name) {
  const FieldId id = schema_->IdOf(name);
  if (field_index_[id] < 0) {
    throw Error(ErrorCode::kFieldMisuse, "\"" + std::string(name) + "\" is not an in-place field");
  }
  return fields_[field_index_[id]];
}

const ForwardStore::Field& ForwardStore::InPlaceField(std::string_view name) const {
  return const_cast<ForwardStore*>(this)->InPlaceField(name);
}

std::optional<Value> ForwardStore::Decode(const Field& f, uint64_t bits) const {
  switch (f.spec->kind) {
    case FieldKind::kInt64: {
      const auto v = std::bit_cast<int64_t>(bits);
      if (v == kMissingInt64) return std::nullopt;
      return v;
    }
    case FieldKind::kFloat64: {
      const auto v = std::bit_cast<double>(bits);
      if (std::isnan(v)) return std::nullopt;
      return v;
    }
    case FieldKind::kKeyword: {
      const auto id = static_cast<uint32_t>(bits);
      if (id == kMissingEnum) return std::nullopt;
      return f.enums->Resolve(id);
    }
    case FieldKind::kText: break;
  }
  return std::nullopt;
}

void ForwardStore::WriteSlot(Field& f, Ordinal ordinal, const Value& value) {
  if (ordinal >= f.array->capacity()) {
    throw Error(ErrorCode::kOrdinalOutOfRange, "ordinal " + std::to_string(ordinal) + " beyond allocated space " +
                                                   std::to_string(f.array->capacity()));
  }
  const bool has_tree = !std::holds_alternative<std::monostate>(f.tree);
  const uint64_t old_bits = has_tree ? f.array->Load(ordinal) : 0;
  uint64_t bits = 0;
  switch (f.spec->kind) {
    case FieldKind::kInt64: {
      const int64_t v = std::get<int64_t>(value);
      bits = std::bit_cast<uint64_t>(v);
      if (has_tree) {
        const auto old = std::bit_cast<int64_t>(old_bits);
        TreeMove<int64_t>(std::get<std::shared_ptr<ValueTree<int64_t>>>(f.tree),
                          old == kMissingInt64 ? std::nullopt : std::optional<int64_t>(old),
                          v == kMissingInt64 ? std::nullopt : std::optional<int64_t>(v), ordinal);
      }
      break;
    }
    case FieldKind::kFloat64: {
      const double v = std::holds_alternative<double>(value) ? std::get<double>(value)
                                                             : static_cast<double>(std::get<int64_t>(value));
      bits = std::bit_cast<uint64_t>(v);
      if (has_tree) {
        const auto old = std::bit_cast<double>(old_bits);
        TreeMove<double>(std::get<std::shared_ptr<ValueTree<double>>>(f.tree),
                         std::isnan(old) ? std::nullopt : std::optional<double>(old),
                         std::isnan(v) ? std::nullopt : std::optional<double>(v), ordinal);
      }
      break;
    }
    case FieldKind::kKeyword: {
      const std::string& s = std::get<std::string>(value);
      bits = f.enums->Intern(s);
      if (has_tree) {
        const auto old = static_cast<uint32_t>(old_bits);
        TreeMove<std::string>(std::get<std::shared_ptr<ValueTree<std::string>>>(f.tree),
                              old == kMissingEnum ? std::nullopt : std::optional<std::string>(f.enums->Resolve(old)),
                              s, ordinal);
      }
      break;
    }
    case FieldKind::kText:
      break;
  }
  if (has_tree) stats_.tree_updates.fetch_add(1, std::memory_order_relaxed);
  f.array->Store(ordinal, bits);
  stats_.slot_writes.fetch_add(1, std::memory_order_relaxed);
}

void ForwardStore::SetValue(std::string_view field, Ordinal ordinal, const Value& value) {
  Field& f = InPlaceField(field);
  schema_->ValidateUpdate(field, value);
  WriteSlot(f, ordinal, value);
  f.written.Add(ordinal);
}

std::optional<Value> ForwardStore::GetValue(std::string_view field, Ordinal ordinal) const {
  const Field& f = InPlaceField(field);
  stats_.slot_reads.fetch_add(1, std::memory_order_relaxed);
  return Decode(f, f.array->Load(ordinal));
}

void ForwardStore::InitFromSegment(const SegmentView& view, Ordinal base) {
  EnsureCapacity(uint64_t{base} + view.doc_count());
  for (Field& f : fields_) {
    const DocValuesColumn* col = view.Column(f.id);
    if (col == nullptr) {
      throw Error(ErrorCode::kMissingColumn, "segment " + std::to_string(view.segment_id()) + " lacks doc values for \"" +
                                                 f.spec->name + "\"");
    }
    for (uint32_t local = 0; local < view.doc_count(); ++local) {
      std::optional<Value> v = col->Get(local);
      if (v) WriteSlot(f, base + local, *v);
    }
  }
}

void ForwardStore::CarryOver(Ordinal from, Ordinal to) {
  for (Field& f : fields_) {
    if (!f.written.Contains(from)) continue;
    std::optional<Value> v = Decode(f, f.array->Load(from));
    if (v) {
      WriteSlot(f, to, *v);
      f.written.Add(to);
    }
  }
}

std::shared_ptr<const ForwardView> ForwardStore::Freeze() const {
  auto view = std::make_shared<ForwardView>();
  view->store_ = shared_from_this();
  view->capacity_ = capacity_;
  view->trees_.resize(schema_->fields().size());
  for (const Field& f : fields_) {
    std::visit(
        [&](const auto& tree) {
          using T = std::decay_t<decltype(tree)>;
          if constexpr (!std::is_same_v<T, std::monostate>) {
            view->trees_[f.id] = std::shared_ptr<const typename T::element_type>(tree);
          }
        },
        f.tree);
  }
  return view;
}

const EnumStore& ForwardStore::enums(std::string_view field) const {
  const Field& f = InPlaceField(field);
  if (!f.enums) throw Error(ErrorCode::kTypeMismatch, "\"" + std::string(field) + "\" is not a keyword field");
  return *f.enums;
}

uint64_t ForwardStore::Footprint() const {
  uint64_t bytes = 0;
  for (const Field& f : fields_) {
    bytes += 8 * f.array->capacity() + f.written.SizeInBytes();
    if (f.enums) bytes += f.enums->Footprint();
    std::visit(
        [&](const auto& tree) {
          using T = std::decay_t<decltype(tree)>;
          if constexpr (!std::is_same_v<T, std::monostate>) {
            for (const auto& [key, set] : *tree) {
              bytes += 48 + set.SizeInBytes();
              if constexpr (std::is_same_v<typename T::element_type, ValueTree<std::string>>) bytes += key.size();
            }
          }
        },
        f.tree);
  }
  return bytes;
}

FrozenTree ForwardStore::RebuildTree(FieldId field) const {
  if (field_index_.at(field) < 0) return std::monostate{};
  const Field& f = fields_[field_index_[field]];
  if (!f.spec->fast_search) return std::monostate{};
  auto build = [&](auto tree) {
    for (Ordinal o = 0; o < capacity_; ++o) {
      std::optional<Value> v = Decode(f, f.array->Load(o));
      if (!v) continue;
      using K = typename decltype(tree)::element_type::key_type;
      if constexpr (std::is_same_v<K, double>) {
        const double d = std::holds_alternative<double>(*v) ? std::get<double>(*v) : std::get<int64_t>(*v);
        (*tree)[d].Add(o);
      } else {
        (*tree)[std::get<K>(*v)].Add(o);
      }
    }
    return FrozenTree(std::shared_ptr<const typename decltype(tree)::element_type>(tree));
  };
  switch (f.spec->kind) {
    case FieldKind::kInt64: return build(std::make_shared<ValueTree<int64_t>>());
    case FieldKind::kFloat64: return build(std::make_shared<ValueTree<double>>());
    case FieldKind::kKeyword: return build(std::make_shared<ValueTree<std::string>>());
    case FieldKind::kText: break;
  }
  return std::monostate{};
}

// ---------------------------------------------------------------------------
// ForwardView

std::optional<Value> ForwardView::GetValue(std::string_view field, Ordinal ordinal) const {
  return store_->GetValue(field, ordinal);
}

DocIdSet ForwardView::RangeFilter(std::string_view field, const Value& lo, const Value& hi) const {
  const ForwardStore::Field& f = store_->InPlaceField(field);
  const FrozenTree& frozen = trees_.at(f.id);
  if (std::holds_alternative<std::monostate>(frozen)) return RangeFilterScan(field, lo, hi);
  switch (f.spec->kind) {
    case FieldKind::kInt64: {
      const int64_t l = IntBound(lo, true), h = IntBound(hi, false);
      if (l > h) return {};
      return CollectRange(*std::get<std::shared_ptr<const ValueTree<int64_t>>>(frozen), l, h);
    }
    case FieldKind::kFloat64: {
      const double l = FloatBound(lo), h = FloatBound(hi);
      if (!(l <= h)) return {};
      return CollectRange(*std::get<std::shared_ptr<const ValueTree<double>>>(frozen), l, h);
    }
    case FieldKind::kKeyword: {
      const std::string& l = StringBound(lo);
      const std::string& h = StringBound(hi);
      if (h < l) return {};
      return CollectRange(*std::get<std::shared_ptr<const ValueTree<std::string>>>(frozen), l, h);
    }
    case FieldKind::kText: break;
  }
  return {};
}

DocIdSet ForwardView::RangeFilterScan(std::string_view field, const Value& lo, const Value& hi) const {
  const ForwardStore::Field& f = store_->InPlaceField(field);
  const ForwardArray& array = *f.array;
  std::vector<Ordinal> out;
  const uint64_t n = capacity_;
  store_->stats_.scanned_slots.fetch_add(n, std::memory_order_relaxed);
  switch (f.spec->kind) {
    case FieldKind::kInt64: {
      const int64_t l = IntBound(lo, true), h = IntBound(hi, false);
      if (l > h) return {};
      for (Ordinal o = 0; o < n; ++o) {
        const auto v = std::bit_cast<int64_t>(array.Load(o));
        if (v != kMissingInt64 && l <= v && v <= h) out.push_back(o);
      }
      break;
    }
    case FieldKind::kFloat64: {
      const double l = FloatBound(lo), h = FloatBound(hi);
      if (!(l <= h)) return {};
      for (Ordinal o = 0; o < n; ++o) {
        const auto v = std::bit_cast<double>(array.Load(o));
        if (l <= v && v <= h) out.push_back(o);  // false for NaN
      }
      break;
    }
    case FieldKind::kKeyword: {
      const std::string& l = StringBound(lo);
      const std::string& h = StringBound(hi);
      if (h < l) return {};
      const uint32_t dict = f.enums->size();
      std::vector<bool> match(dict);
      for (uint32_t id = 0; id < dict; ++id) {
        const std::string s = f.enums->Resolve(id);
        match[id] = l <= s && s <= h;
      }
      for (Ordinal o = 0; o < n; ++o) {
        const auto id = static_cast<uint32_t>(array.Load(o));
        if (id < dict && match[id]) out.push_back(o);
      }
      break;
    }
    case FieldKind::kText: break;
  }
  return DocIdSet::FromSorted(out);
}

}  // namespace scalesearch
