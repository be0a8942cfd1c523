#include "scalesearch/memindex.h"

#include <algorithm>
#include <bit>
#include <iterator>
#include <limits>

#include "scalesearch/error.h"

namespace scalesearch {

std::string_view MergePolicyName(MergePolicy policy) {
  switch (policy) {
    case MergePolicy::kLogarithmic: return "logarithmic";
    case MergePolicy::kImmediate: return "immediate";
    case MergePolicy::kNoMerge: return "none";
  }
  return "?";
}

std::optional<MergePolicy> ParseMergePolicy(std::string_view name) {
  if (name == "logarithmic") return MergePolicy::kLogarithmic;
  if (name == "immediate") return MergePolicy::kImmediate;
  if (name == "none") return MergePolicy::kNoMerge;
  return std::nullopt;
}

int LevelForSize(uint64_t docs, uint64_t unit) {
  if (unit == 0) throw Error(ErrorCode::kInvalidArgument, "merge unit must be positive");
  const uint64_t q = docs / unit;
  if (q < 2) return 0;
  return std::bit_width(q) - 1;
}

std::vector<MergeAction> PlanMerges(std::vector<uint64_t> sizes, uint64_t unit, MergePolicy policy) {
  std::vector<MergeAction> plan;
  auto apply = [&](size_t i, size_t j) {
    plan.push_back({i, j});
    sizes[i] += sizes[j];
    sizes.erase(sizes.begin() + static_cast<std::ptrdiff_t>(j));
  };
  switch (policy) {
    case MergePolicy::kNoMerge:
      break;
    case MergePolicy::kImmediate:
      while (sizes.size() > 1) apply(0, 1);
      break;
    case MergePolicy::kLogarithmic:
      // Newest-first: the highest j with an equal-level partner, paired with
      // the nearest such i below it. Terminates with all levels distinct.
      for (;;) {
        bool merged = false;
        for (size_t j = sizes.size(); j-- > 1 && !merged;) {
          const int lj = LevelForSize(sizes[j], unit);
          for (size_t i = j; i-- > 0;) {
            if (LevelForSize(sizes[i], unit) == lj) {
              apply(i, j);
              merged = true;
              break;
            }
          }
        }
        if (!merged) break;
      }
      break;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// SubIndex

namespace {

uint64_t TermFootprint(const std::string& term, const TermPostings& p) {
  return 32 + term.size() + p.docs.SizeInBytes() + 4 * p.tfs.size() + 4 * p.positions.size();
}

bool TermLess(const SubIndex::Term& a, const SubIndex::Term& b) { return TermKeyLess{}(a.first, b.first); }

TermPostings MergePostings(const TermPostings& a, const TermPostings& b) {
  const std::vector<Ordinal> da = a.docs.ToVector();
  const std::vector<Ordinal> db = b.docs.ToVector();
  TermPostings out;
  out.docs = Union(a.docs, b.docs);
  out.tfs.reserve(da.size() + db.size());
  out.positions.reserve(a.positions.size() + b.positions.size());
  size_t i = 0, j = 0, pa = 0, pb = 0;
  while (i < da.size() || j < db.size()) {
    const bool take_a = j == db.size() || (i < da.size() && da[i] < db[j]);
    const TermPostings& src = take_a ? a : b;
    size_t& idx = take_a ? i : j;
    size_t& pos = take_a ? pa : pb;
    const uint32_t tf = src.tfs[idx];
    out.tfs.push_back(tf);
    out.positions.insert(out.positions.end(), src.positions.begin() + static_cast<std::ptrdiff_t>(pos),
                         src.positions.begin() + static_cast<std::ptrdiff_t>(pos + tf));
    pos += tf;
    ++idx;
  }
  return out;
}

}  // namespace

std::shared_ptr<const SubIndex> SubIndex::FromSegment(const SegmentView& view, Ordinal base, uint64_t unit) {
  auto sub = std::make_shared<SubIndex>();
  sub->doc_count_ = view.doc_count();
  sub->level_ = LevelForSize(sub->doc_count_, unit);
  sub->terms_.reserve(view.terms().size());
  for (const SegmentTerm& t : view.terms()) {
    TermPostings p;
    std::vector<Ordinal> docs = t.postings.docs.ToVector();
    for (Ordinal& d : docs) d += base;
    p.docs = DocIdSet::FromSorted(docs);
    p.tfs = t.postings.tfs;
    p.positions = t.postings.positions;
    sub->footprint_ += TermFootprint(t.term, p);
    sub->terms_.push_back({{t.field, t.term}, std::make_shared<const TermPostings>(std::move(p))});
  }

  auto block = std::make_shared<DocBlock>();
  block->segment_id = view.segment_id();
  block->base = base;
  block->doc_count = view.doc_count();
  const auto& fields = view.schema().fields();
  block->lengths.resize(fields.size());
  for (uint32_t local = 0; local < view.doc_count(); ++local) {
    block->keys.push_back(view.Key(local));
    block->stored.push_back(view.StoredJson(local));
    sub->footprint_ += 32 + block->keys.back().size() + block->stored.back().size();
  }
  for (FieldId id = 0; id < fields.size(); ++id) {
    if (fields[id].kind != FieldKind::kText || fields[id].path != UpdatePath::kSegment) continue;
    auto& lengths = block->lengths[id];
    lengths.reserve(view.doc_count());
    for (uint32_t local = 0; local < view.doc_count(); ++local) lengths.push_back(view.FieldLength(id, local));
    sub->footprint_ += 4 * lengths.size();
  }
  sub->blocks_.push_back(std::move(block));
  return sub;
}

std::shared_ptr<const SubIndex> SubIndex::Merge(const SubIndex& a, const SubIndex& b, uint64_t unit) {
  auto sub = std::make_shared<SubIndex>();
  sub->doc_count_ = a.doc_count_ + b.doc_count_;
  sub->level_ = LevelForSize(sub->doc_count_, unit);
  sub->footprint_ = a.footprint_ + b.footprint_;
  sub->terms_.reserve(a.terms_.size() + b.terms_.size());
  auto ia = a.terms_.begin(), ib = b.terms_.begin();
  while (ia != a.terms_.end() || ib != b.terms_.end()) {
    if (ib == b.terms_.end() || (ia != a.terms_.end() && TermLess(*ia, *ib))) {
      sub->terms_.push_back(*ia++);
    } else if (ia == a.terms_.end() || TermLess(*ib, *ia)) {
      sub->terms_.push_back(*ib++);
    } else {
      auto merged = std::make_shared<const TermPostings>(MergePostings(*ia->second, *ib->second));
      sub->terms_.push_back({ia->first, std::move(merged)});
      ++ia;
      ++ib;
    }
  }
  sub->blocks_.reserve(a.blocks_.size() + b.blocks_.size());
  std::merge(a.blocks_.begin(), a.blocks_.end(), b.blocks_.begin(), b.blocks_.end(), std::back_inserter(sub->blocks_),
             [](const auto& x, const auto& y) { return x->base < y->base; });
  return sub;
}

const TermPostings* SubIndex::Lookup(FieldId field, std::string_view term) const {
  const std::pair<FieldId, std::string_view> key{field, term};
  auto it = std::lower_bound(terms_.begin(), terms_.end(), key,
                             [](const Term& t, const auto& k) { return TermKeyLess{}(t.first, k); });
  if (it == terms_.end() || it->first.first != field || it->first.second != term) return nullptr;
  return it->second.get();
}

// ---------------------------------------------------------------------------
// ReadSnapshot

namespace {

FieldId IndexedFieldId(const IndexSchema& schema, std::string_view field) {
  const FieldSpec& spec = schema.Field(field);
  if (!spec.indexed()) {
    throw Error(ErrorCode::kNonIndexedField, "\"" + std::string(field) + "\" has no inverted index");
  }
  return schema.IdOf(field);
}

}  // namespace

DocIdSet ReadSnapshot::Postings(std::string_view field, std::string_view term) const {
  const FieldId id = IndexedFieldId(*schema_, field);
  DocIdSet out;
  for (const auto& sub : subindexes_) {
    if (const TermPostings* p = sub->Lookup(id, term)) out = Union(out, p->docs);
  }
  return Difference(out, *tombstones_);
}

std::vector<Posting> ReadSnapshot::LivePostings(std::string_view field, std::string_view term) const {
  const FieldId id = IndexedFieldId(*schema_, field);
  std::vector<Posting> out;
  for (const auto& sub : subindexes_) {
    const TermPostings* p = sub->Lookup(id, term);
    if (p == nullptr) continue;
    size_t i = 0;
    p->docs.ForEach([&](Ordinal o) {
      if (!tombstones_->Contains(o)) out.push_back({o, p->tfs[i]});
      ++i;
    });
  }
  std::sort(out.begin(), out.end(), [](const Posting& a, const Posting& b) { return a.ordinal < b.ordinal; });
  return out;
}

const DocBlock* ReadSnapshot::BlockFor(Ordinal ordinal) const {
  auto it = std::upper_bound(block_index_.begin(), block_index_.end(), ordinal,
                             [](Ordinal o, const auto& entry) { return o < entry.first; });
  if (it == block_index_.begin()) return nullptr;
  const DocBlock* block = std::prev(it)->second;
  if (ordinal - block->base >= block->doc_count) return nullptr;
  return block;
}

bool ReadSnapshot::IsLive(Ordinal ordinal) const {
  return BlockFor(ordinal) != nullptr && !tombstones_->Contains(ordinal);
}

const std::string* ReadSnapshot::KeyOf(Ordinal ordinal) const {
  const DocBlock* block = BlockFor(ordinal);
  return block ? &block->keys[ordinal - block->base] : nullptr;
}

const std::string* ReadSnapshot::StoredJson(Ordinal ordinal) const {
  const DocBlock* block = BlockFor(ordinal);
  return block ? &block->stored[ordinal - block->base] : nullptr;
}

uint32_t ReadSnapshot::FieldLength(FieldId field, Ordinal ordinal) const {
  const DocBlock* block = BlockFor(ordinal);
  if (block == nullptr || field >= block->lengths.size() || block->lengths[field].empty()) return 0;
  return block->lengths[field][ordinal - block->base];
}

DocIdSet ReadSnapshot::LiveOrdinals() const {
  std::vector<Ordinal> all;
  all.reserve(live_docs_);
  for (const auto& [base, block] : block_index_) {
    for (uint32_t i = 0; i < block->doc_count; ++i) {
      if (!tombstones_->Contains(base + i)) all.push_back(base + i);
    }
  }
  return DocIdSet::FromSorted(all);
}

// ---------------------------------------------------------------------------
// MemIndex

MemIndex::MemIndex(std::shared_ptr<const IndexSchema> schema, MemIndexOptions options)
    : schema_(std::move(schema)),
      options_(std::move(options)),
      forward_(std::make_shared<ForwardStore>(schema_)),
      tombstones_(std::make_shared<DocIdSet>()),
      live_length_sums_(schema_->fields().size(), 0) {
  if (options_.unit_docs == 0) throw Error(ErrorCode::kInvalidArgument, "merge unit must be positive");
  Publish();
}

void MemIndex::Tombstone(Ordinal ordinal, bool was_live) {
  if (tombstones_.use_count() > 1) tombstones_ = std::make_shared<DocIdSet>(*tombstones_);
  tombstones_->Add(ordinal);
  if (!was_live) return;
  --live_docs_;
  auto it = std::upper_bound(blocks_by_base_.begin(), blocks_by_base_.end(), ordinal,
                             [](Ordinal o, const DocBlock* b) { return o < b->base; });
  const DocBlock* block = *std::prev(it);
  for (size_t f = 0; f < block->lengths.size(); ++f) {
    if (!block->lengths[f].empty()) live_length_sums_[f] -= block->lengths[f][ordinal - block->base];
  }
}

std::shared_ptr<const ReadSnapshot> MemIndex::Incorporate(const SegmentView& view) {
  if (last_segment_id_ && view.segment_id() <= *last_segment_id_) {
    throw Error(ErrorCode::kOutOfOrderSegment, "segment " + std::to_string(view.segment_id()) +
                                                   " does not follow " + std::to_string(*last_segment_id_));
  }
  if (next_base_ + view.doc_count() > std::numeric_limits<Ordinal>::max()) {
    throw Error(ErrorCode::kOrdinalOutOfRange, "ordinal space exhausted");
  }
  const auto base = static_cast<Ordinal>(next_base_);
  forward_->InitFromSegment(view, base);
  auto sub = SubIndex::FromSegment(view, base, options_.unit_docs);
  const DocBlock* block = sub->blocks().front().get();
  blocks_by_base_.push_back(block);
  next_base_ += view.doc_count();
  last_segment_id_ = view.segment_id();

  for (uint32_t local = 0; local < view.doc_count(); ++local) {
    const Ordinal ordinal = base + local;
    const std::string& key = block->keys[local];
    if (options_.key_range && !options_.key_range->Contains(key)) {
      Tombstone(ordinal, false);
      continue;
    }
    auto [it, inserted] = key_map_.try_emplace(key, KeyEntry{ordinal, view.segment_id()});
    if (inserted) {
      key_map_bytes_ += 48 + key.size();
    } else {
      const Ordinal old = it->second.ordinal;
      Tombstone(old, true);
      forward_->CarryOver(old, ordinal);
      it->second = KeyEntry{ordinal, view.segment_id()};
    }
    ++live_docs_;
    for (size_t f = 0; f < block->lengths.size(); ++f) {
      if (!block->lengths[f].empty()) live_length_sums_[f] += block->lengths[f][local];
    }
  }

  subindexes_.push_back(std::move(sub));
  merge_stats_.max_subindexes = std::max<uint64_t>(merge_stats_.max_subindexes, subindexes_.size());
  ++merge_stats_.incorporated_segments;
  merge_stats_.incorporated_docs += view.doc_count();
  ApplyMerges();
  return Publish();
}

void MemIndex::ApplyMerges() {
  std::vector<uint64_t> sizes;
  sizes.reserve(subindexes_.size());
  for (const auto& s : subindexes_) sizes.push_back(s->doc_count());
  for (const MergeAction& m : PlanMerges(sizes, options_.unit_docs, options_.policy)) {
    auto merged = SubIndex::Merge(*subindexes_[m.first], *subindexes_[m.second], options_.unit_docs);
    if (options_.policy != MergePolicy::kImmediate) merge_stats_.merge_volume_docs += merged->doc_count();
    ++merge_stats_.merges;
    subindexes_[m.first] = std::move(merged);
    subindexes_.erase(subindexes_.begin() + static_cast<std::ptrdiff_t>(m.second));
  }
  // Immediate rebuilds the whole index on every flush, including the first.
  if (options_.policy == MergePolicy::kImmediate) merge_stats_.merge_volume_docs += subindexes_.front()->doc_count();
}

std::shared_ptr<const ReadSnapshot> MemIndex::Publish() {
  auto snap = std::make_shared<ReadSnapshot>();
  snap->sequence_ = ++sequence_;
  snap->schema_ = schema_;
  snap->subindexes_ = subindexes_;
  snap->tombstones_ = tombstones_;
  snap->forward_ = forward_->Freeze();
  snap->block_index_.reserve(blocks_by_base_.size());
  for (const DocBlock* b : blocks_by_base_) snap->block_index_.emplace_back(b->base, b);
  snap->live_docs_ = live_docs_;
  snap->live_length_sums_ = live_length_sums_;
  std::lock_guard lock(publish_mu_);
  published_ = snap;
  return snap;
}

std::shared_ptr<const ReadSnapshot> MemIndex::snapshot() const {
  std::lock_guard lock(publish_mu_);
  return published_;
}

std::optional<Ordinal> MemIndex::OrdinalOf(std::string_view key) const {
  auto it = key_map_.find(std::string(key));
  if (it == key_map_.end()) return std::nullopt;
  return it->second.ordinal;
}

std::vector<std::string> MemIndex::LiveKeys() const {
  std::vector<std::string> keys;
  keys.reserve(key_map_.size());
  for (const auto& [key, entry] : key_map_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  return keys;
}

FootprintBreakdown MemIndex::Footprint() const {
  FootprintBreakdown f;
  f.base = kBaseFootprint;
  for (const auto& s : subindexes_) f.subindexes += s->Footprint();
  f.forward = forward_->Footprint();
  f.key_map = key_map_bytes_;
  f.tombstones = tombstones_->SizeInBytes();
  return f;
}

}  // namespace scalesearch
