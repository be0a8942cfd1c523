#include "scalesearch/cluster.h"

#include <algorithm>
#include <fstream>

#include "scalesearch/error.h"

namespace scalesearch {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// ClusterConfig

namespace {

const nlohmann::json* Lookup(const nlohmann::json& j, std::string_view dotted) {
  if (auto it = j.find(std::string(dotted)); it != j.end()) return &*it;
  const size_t dot = dotted.find('.');
  if (dot == std::string_view::npos) return nullptr;
  auto it = j.find(std::string(dotted.substr(0, dot)));
  if (it == j.end() || !it->is_object()) return nullptr;
  return Lookup(*it, dotted.substr(dot + 1));
}

template <typename T>
void Read(const nlohmann::json& j, std::string_view key, T& out) {
  const nlohmann::json* v = Lookup(j, key);
  if (v == nullptr) return;
  try {
    out = v->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "config key \"" + std::string(key) + "\" has the wrong type");
  }
}

}  // namespace

ClusterConfig ClusterConfig::FromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be a JSON object");
  ClusterConfig c;
  Read(j, "refresh.max_docs", c.refresh_max_docs);
  Read(j, "refresh.max_bytes", c.refresh_max_bytes);
  Read(j, "refresh.max_age_ms", c.refresh_max_age_ms);
  Read(j, "poll.interval_ms", c.poll_interval_ms);
  Read(j, "poll.realtime_interval_ms", c.realtime_poll_interval_ms);
  Read(j, "split.threshold_bytes", c.split_threshold_bytes);
  Read(j, "realtime.unknown_key_buffer", c.unknown_key_buffer);
  Read(j, "merge.unit_docs", c.merge_unit_docs);
  Read(j, "store.root", c.store_root);
  Read(j, "log.root", c.log_root);
  std::string policy;
  Read(j, "merge.policy", policy);
  if (!policy.empty()) {
    auto p = ParseMergePolicy(policy);
    if (!p) throw Error(ErrorCode::kInvalidArgument, "unknown merge policy \"" + policy + "\"");
    c.merge_policy = *p;
  }
  if (c.refresh_max_docs == 0 || c.merge_unit_docs == 0 || c.poll_interval_ms < 0 || c.refresh_max_age_ms < 0) {
    throw Error(ErrorCode::kInvalidArgument, "config values out of range");
  }
  return c;
}

nlohmann::json ClusterConfig::ToJson() const {
  return {{"refresh.max_docs", refresh_max_docs},
          {"refresh.max_bytes", refresh_max_bytes},
          {"refresh.max_age_ms", refresh_max_age_ms},
          {"poll.interval_ms", poll_interval_ms},
          {"poll.realtime_interval_ms", realtime_poll_interval_ms},
          {"split.threshold_bytes", split_threshold_bytes},
          {"realtime.unknown_key_buffer", unknown_key_buffer},
          {"merge.policy", std::string(MergePolicyName(merge_policy))},
          {"merge.unit_docs", merge_unit_docs},
          {"store.root", store_root},
          {"log.root", log_root}};
}

std::string_view NodeRoleName(NodeRole role) { return role == NodeRole::kWrite ? "write" : "search"; }

// ---------------------------------------------------------------------------
// ClusterMeta

void ClusterMeta::RegisterNode(std::string id, NodeRole role, int64_t now_ms) {
  std::lock_guard lock(mu_);
  NodeInfo& n = nodes_[id];
  n.id = std::move(id);
  n.role = role;
  n.alive = true;
  n.last_heartbeat_ms = now_ms;
}

void ClusterMeta::Heartbeat(std::string_view id, int64_t now_ms) {
  std::lock_guard lock(mu_);
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::kNotFound, "unknown node \"" + std::string(id) + "\"");
  it->second.last_heartbeat_ms = now_ms;
  it->second.alive = true;
}

void ClusterMeta::MarkDead(std::string_view id) {
  std::lock_guard lock(mu_);
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::kNotFound, "unknown node \"" + std::string(id) + "\"");
  it->second.alive = false;
}

std::vector<NodeInfo> ClusterMeta::nodes() const {
  std::lock_guard lock(mu_);
  std::vector<NodeInfo> out;
  for (const auto& [id, n] : nodes_) out.push_back(n);
  return out;
}

const NodeInfo* ClusterMeta::FindNode(std::string_view id) const {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : &it->second;
}

void ClusterMeta::Bootstrap(const std::vector<std::string>& boundaries, const std::vector<std::string>& write_nodes,
                            const std::vector<std::string>& search_nodes) {
  if (write_nodes.empty() || search_nodes.empty()) {
    throw Error(ErrorCode::kAssignmentFailure, "bootstrap needs at least one write and one search node");
  }
  for (size_t i = 0; i < boundaries.size(); ++i) {
    if (boundaries[i].empty() || (i > 0 && boundaries[i] <= boundaries[i - 1])) {
      throw Error(ErrorCode::kConstraintViolation, "shard boundaries must be non-empty and strictly increasing");
    }
  }
  std::lock_guard lock(mu_);
  shards_.clear();
  pending_.clear();
  next_shard_id_ = 0;
  for (size_t i = 0; i <= boundaries.size(); ++i) {
    ShardDescriptor d;
    d.shard_id = next_shard_id_++;
    d.range.lo = i == 0 ? std::string() : boundaries[i - 1];
    if (i < boundaries.size()) d.range.hi = boundaries[i];
    d.write_node = write_nodes[i % write_nodes.size()];
    d.search_nodes = {search_nodes[i % search_nodes.size()]};
    for (const std::string& id : {d.write_node, d.search_nodes.front()}) {
      if (!nodes_.contains(id)) {
        NodeInfo n;
        n.id = id;
        n.role = id == d.write_node ? NodeRole::kWrite : NodeRole::kSearch;
        nodes_.emplace(id, n);
      }
    }
    shards_.emplace(d.shard_id, std::move(d));
  }
  CheckPartitionLocked();
}

uint32_t ClusterMeta::Route(std::string_view key) const {
  if (key.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot route an empty key");
  std::lock_guard lock(mu_);
  for (const auto& [id, s] : shards_) {
    if (!s.retired && s.range.Contains(key)) return id;
  }
  throw Error(ErrorCode::kConstraintViolation, "no shard covers key \"" + std::string(key) + "\"");
}

uint32_t RouteDocument(const ClusterMeta& meta, std::string_view key) { return meta.Route(key); }

std::optional<ShardDescriptor> ClusterMeta::Shard(uint32_t id) const {
  std::lock_guard lock(mu_);
  auto it = shards_.find(id);
  if (it == shards_.end()) return std::nullopt;
  return it->second;
}

std::vector<ShardDescriptor> ClusterMeta::ActiveShards() const {
  std::lock_guard lock(mu_);
  std::vector<ShardDescriptor> out;
  for (const auto& [id, s] : shards_) {
    if (!s.retired) out.push_back(s);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.range.lo < b.range.lo; });
  return out;
}

std::vector<ShardDescriptor> ClusterMeta::AllShards() const {
  std::lock_guard lock(mu_);
  std::vector<ShardDescriptor> out;
  for (const auto& [id, s] : shards_) out.push_back(s);
  return out;
}

uint64_t ClusterMeta::ReserveSegmentId(uint32_t shard, const std::map<std::string, uint64_t>& end_offsets) {
  std::lock_guard lock(mu_);
  if (!shards_.contains(shard)) throw Error(ErrorCode::kNotFound, "unknown shard " + std::to_string(shard));
  auto it = pending_.find(shard);
  if (it != pending_.end() && it->second.end_offsets == end_offsets) return it->second.segment_id;
  const uint64_t id = next_segment_id_++;
  pending_[shard] = Reservation{id, end_offsets};
  return id;
}

void ClusterMeta::CompleteSegment(uint32_t shard, uint64_t segment_id) {
  std::lock_guard lock(mu_);
  auto s = shards_.find(shard);
  if (s == shards_.end()) throw Error(ErrorCode::kNotFound, "unknown shard " + std::to_string(shard));
  auto it = pending_.find(shard);
  if (it != pending_.end() && it->second.segment_id == segment_id) pending_.erase(it);
  auto& last = s->second.last_sealed_segment;
  last = std::max(last.value_or(0), segment_id);
}

void ClusterMeta::ReportFootprint(uint32_t shard, uint64_t bytes) {
  std::lock_guard lock(mu_);
  auto s = shards_.find(shard);
  if (s == shards_.end()) throw Error(ErrorCode::kNotFound, "unknown shard " + std::to_string(shard));
  s->second.footprint_bytes = bytes;
}

void ClusterMeta::CheckPartition() const {
  std::lock_guard lock(mu_);
  CheckPartitionLocked();
}

void ClusterMeta::CheckPartitionLocked() const {
  std::vector<const ShardDescriptor*> active;
  for (const auto& [id, s] : shards_) {
    if (!s.retired) active.push_back(&s);
  }
  std::sort(active.begin(), active.end(), [](auto* a, auto* b) { return a->range.lo < b->range.lo; });
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kConstraintViolation, "shard table: " + why); };
  if (active.empty()) fail("no active shards");
  if (!active.front()->range.lo.empty()) fail("keyspace start not covered");
  for (size_t i = 0; i < active.size(); ++i) {
    const KeyRange& r = active[i]->range;
    if (r.hi && *r.hi <= r.lo) fail("empty range on shard " + std::to_string(active[i]->shard_id));
    if (i + 1 < active.size()) {
      if (!r.hi || *r.hi != active[i + 1]->range.lo) {
        fail("gap or overlap after shard " + std::to_string(active[i]->shard_id));
      }
    } else if (r.hi) {
      fail("keyspace end not covered");
    }
  }
}

std::optional<std::string> ClusterMeta::PickNode(NodeRole role) const {
  std::lock_guard lock(mu_);
  std::optional<std::string> best;
  size_t best_load = 0;
  for (const auto& [id, n] : nodes_) {
    if (!n.alive || n.role != role) continue;
    size_t load = 0;
    for (const auto& [sid, s] : shards_) {
      if (s.retired) continue;
      if (s.write_node == id) ++load;
      load += std::count(s.search_nodes.begin(), s.search_nodes.end(), id);
    }
    if (!best || load < best_load) {
      best = id;
      best_load = load;
    }
  }
  return best;
}

std::pair<uint32_t, uint32_t> ClusterMeta::ExecuteSplit(const SplitPlan& plan) {
  std::lock_guard lock(mu_);
  auto p = shards_.find(plan.parent);
  if (p == shards_.end() || p->second.retired) {
    throw Error(ErrorCode::kInvalidArgument, "shard " + std::to_string(plan.parent) + " is not active");
  }
  const KeyRange& parent = p->second.range;
  if (plan.left.lo != parent.lo || plan.right.hi != parent.hi || plan.left.hi != plan.split_key ||
      plan.right.lo != plan.split_key || !parent.Contains(plan.split_key) || plan.split_key <= parent.lo) {
    throw Error(ErrorCode::kInvalidArgument, "split plan does not partition the parent range");
  }
  auto check = [&](const std::string& id, NodeRole role) {
    const NodeInfo* n = FindNode(id);
    if (n == nullptr || !n->alive || n->role != role) {
      throw Error(ErrorCode::kAssignmentFailure,
                  "node \"" + id + "\" is not an alive " + std::string(NodeRoleName(role)) + " node");
    }
  };
  check(plan.left_write_node, NodeRole::kWrite);
  check(plan.right_write_node, NodeRole::kWrite);
  check(plan.left_search_node, NodeRole::kSearch);
  check(plan.right_search_node, NodeRole::kSearch);

  std::vector<uint32_t> ancestors = p->second.ancestors;
  ancestors.push_back(plan.parent);
  auto make = [&](const KeyRange& range, const std::string& w, const std::string& s, uint64_t footprint) {
    ShardDescriptor d;
    d.shard_id = next_shard_id_++;
    d.range = range;
    d.write_node = w;
    d.search_nodes = {s};
    d.footprint_bytes = footprint;
    d.ancestors = ancestors;
    const uint32_t id = d.shard_id;
    shards_.emplace(id, std::move(d));
    return id;
  };
  p->second.retired = true;
  pending_.erase(plan.parent);
  const uint32_t left = make(plan.left, plan.left_write_node, plan.left_search_node, plan.left_footprint_estimate);
  const uint32_t right =
      make(plan.right, plan.right_write_node, plan.right_search_node, plan.right_footprint_estimate);
  CheckPartitionLocked();
  return {left, right};
}

std::optional<SplitPlan> MaybeSplit(const ClusterMeta& meta, uint32_t shard, uint64_t threshold_bytes,
                                    std::vector<std::string> live_keys) {
  const std::optional<ShardDescriptor> d = meta.Shard(shard);
  if (!d || d->retired) throw Error(ErrorCode::kInvalidArgument, "shard " + std::to_string(shard) + " is not active");
  if (d->footprint_bytes <= threshold_bytes) return std::nullopt;
  std::sort(live_keys.begin(), live_keys.end());
  live_keys.erase(std::unique(live_keys.begin(), live_keys.end()), live_keys.end());
  std::erase_if(live_keys, [&](const std::string& k) { return !d->range.Contains(k); });
  if (live_keys.size() < 2) {
    throw Error(ErrorCode::kUnsplittable,
                "shard " + std::to_string(shard) + " has fewer than two distinct keys and cannot split");
  }
  const size_t mid = live_keys.size() / 2;
  SplitPlan plan;
  plan.parent = shard;
  plan.split_key = live_keys[mid];
  plan.left = KeyRange{d->range.lo, plan.split_key};
  plan.right = KeyRange{plan.split_key, d->range.hi};
  plan.left_footprint_estimate = d->footprint_bytes * mid / live_keys.size();
  plan.right_footprint_estimate = d->footprint_bytes - plan.left_footprint_estimate;
  const std::string w = meta.PickNode(NodeRole::kWrite).value_or("");
  const std::string s = meta.PickNode(NodeRole::kSearch).value_or("");
  plan.left_write_node = plan.right_write_node = w;
  plan.left_search_node = plan.right_search_node = s;
  return plan;
}

nlohmann::json ClusterMeta::ToJson() const {
  std::lock_guard lock(mu_);
  nlohmann::json shards = nlohmann::json::array();
  for (const auto& [id, s] : shards_) {
    nlohmann::json j = {{"shard_id", s.shard_id},
                        {"lo", s.range.lo},
                        {"hi", s.range.hi ? nlohmann::json(*s.range.hi) : nlohmann::json(nullptr)},
                        {"write_node", s.write_node},
                        {"search_nodes", s.search_nodes},
                        {"last_sealed_segment", s.last_sealed_segment ? nlohmann::json(*s.last_sealed_segment)
                                                                      : nlohmann::json(nullptr)},
                        {"footprint_bytes", s.footprint_bytes},
                        {"retired", s.retired},
                        {"ancestors", s.ancestors}};
    shards.push_back(std::move(j));
  }
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& [id, n] : nodes_) {
    nodes.push_back({{"id", n.id},
                     {"role", std::string(NodeRoleName(n.role))},
                     {"alive", n.alive},
                     {"last_heartbeat_ms", n.last_heartbeat_ms}});
  }
  nlohmann::json pending = nlohmann::json::array();
  for (const auto& [shard, r] : pending_) {
    pending.push_back({{"shard", shard}, {"segment_id", r.segment_id}, {"end_offsets", r.end_offsets}});
  }
  return {{"shards", shards},
          {"nodes", nodes},
          {"pending", pending},
          {"next_segment_id", next_segment_id_},
          {"next_shard_id", next_shard_id_}};
}

std::unique_ptr<ClusterMeta> ClusterMeta::FromJson(const nlohmann::json& j) {
  auto meta = std::make_unique<ClusterMeta>();
  try {
    for (const auto& s : j.at("shards")) {
      ShardDescriptor d;
      d.shard_id = s.at("shard_id").get<uint32_t>();
      d.range.lo = s.at("lo").get<std::string>();
      if (!s.at("hi").is_null()) d.range.hi = s.at("hi").get<std::string>();
      d.write_node = s.at("write_node").get<std::string>();
      d.search_nodes = s.at("search_nodes").get<std::vector<std::string>>();
      if (!s.at("last_sealed_segment").is_null()) d.last_sealed_segment = s.at("last_sealed_segment").get<uint64_t>();
      d.footprint_bytes = s.at("footprint_bytes").get<uint64_t>();
      d.retired = s.at("retired").get<bool>();
      d.ancestors = s.at("ancestors").get<std::vector<uint32_t>>();
      meta->shards_.emplace(d.shard_id, std::move(d));
    }
    for (const auto& n : j.at("nodes")) {
      NodeInfo info;
      info.id = n.at("id").get<std::string>();
      info.role = n.at("role").get<std::string>() == "write" ? NodeRole::kWrite : NodeRole::kSearch;
      info.alive = n.at("alive").get<bool>();
      info.last_heartbeat_ms = n.at("last_heartbeat_ms").get<int64_t>();
      meta->nodes_.emplace(info.id, std::move(info));
    }
    for (const auto& p : j.at("pending")) {
      meta->pending_[p.at("shard").get<uint32_t>()] =
          Reservation{p.at("segment_id").get<uint64_t>(), p.at("end_offsets").get<std::map<std::string, uint64_t>>()};
    }
    meta->next_segment_id_ = j.at("next_segment_id").get<uint64_t>();
    meta->next_shard_id_ = j.at("next_shard_id").get<uint32_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptPayload, std::string("metadata snapshot: ") + e.what());
  }
  meta->CheckPartition();
  return meta;
}

void ClusterMeta::Save(const fs::path& path) const {
  const std::string text = ToJson().dump(2);
  const fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << text;
    if (!out) throw Error(ErrorCode::kIOError, "cannot write " + tmp.string());
  }
  RecordFileWrite(text.size());
  fs::rename(tmp, path);
}

std::unique_ptr<ClusterMeta> ClusterMeta::Load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "no metadata snapshot at " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kCorruptPayload, "metadata snapshot is not valid JSON");
  return FromJson(j);
}

// ---------------------------------------------------------------------------
// WriteNode

std::string WriteGroupName(uint32_t shard) { return "write." + std::to_string(shard); }

std::string SearchGroupName(uint32_t shard, std::string_view node) {
  return "search." + std::to_string(shard) + "." + std::string(node);
}

namespace {

void ApplyToCache(const IndexSchema& schema, std::unordered_map<std::string, Document>& cache,
                  const UpdateRecord& r) {
  if (r.doc) {
    cache[r.key] = *r.doc;
    return;
  }
  auto [it, inserted] = cache.try_emplace(r.key);
  if (inserted) it->second.fields.emplace(schema.primary_key_field(), r.key);
  it->second.fields[r.field] = r.value;
}

}  // namespace

WriteNode::WriteNode(std::string node_id, uint32_t shard, ClusterContext ctx, NodeCounters* counters)
    : node_id_(std::move(node_id)),
      shard_(shard),
      ctx_(std::move(ctx)),
      counters_(counters),
      group_(WriteGroupName(shard)),
      topics_(ctx_.schema->TopicsOnPath(UpdatePath::kSegment)) {
  const std::optional<ShardDescriptor> d = ctx_.meta->Shard(shard_);
  if (!d) throw Error(ErrorCode::kNotFound, "unknown shard " + std::to_string(shard_));
  range_ = d->range;
  ctx_.log->RegisterGroup(group_);
  ctx_.log->Rewind(group_);
  for (const std::string& topic : topics_) {
    const uint64_t committed = ctx_.log->Committed(group_, topic);
    consumed_[topic] = committed;
    for (uint64_t from = 0; from < committed;) {
      auto batch = ctx_.log->Read(topic, from, std::min<uint64_t>(committed - from, 65536));
      if (batch.empty()) break;
      for (const PolledRecord& p : batch) {
        if (range_.Contains(p.record.key)) ApplyToCache(*ctx_.schema, doc_cache_, p.record);
      }
      from = batch.back().offset + 1;
    }
  }
}

void WriteNode::Reset() {
  buffer_.reset();
  first_buffered_ms_.reset();
  for (auto& [topic, next] : consumed_) next = ctx_.log->Committed(group_, topic);
}

void WriteNode::Crash() {
  Reset();
  ctx_.log->Rewind(group_);
}

void WriteNode::AddDocument(const Document& doc, int64_t now_ms) {
  if (!buffer_) buffer_ = std::make_unique<SegmentBuffer>(ctx_.schema);
  if (!first_buffered_ms_) first_buffered_ms_ = now_ms;
  buffer_->Add(doc);
}

std::string WriteNode::SealAndUpload() {
  const uint64_t id = ctx_.meta->ReserveSegmentId(shard_, consumed_);
  const std::string bytes = buffer_->Seal(id);
  const std::string key = SegmentObjectKey(shard_, id);
  try {
    ctx_.store->Put(key, bytes);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kAlreadyExists) {
      Crash();
      throw;
    }
  }
  for (const auto& [topic, next] : consumed_) {
    if (next > ctx_.log->Committed(group_, topic)) ctx_.log->Commit(group_, topic, next);
  }
  ctx_.meta->CompleteSegment(shard_, id);
  buffer_.reset();
  first_buffered_ms_.reset();
  ++segments_uploaded_;
  return key;
}

std::vector<std::string> WriteNode::Tick(int64_t now_ms, bool force_flush) {
  NodeScope scope(counters_);
  std::vector<std::string> uploaded;
  const auto& cfg = ctx_.config;
  for (const std::string& topic : topics_) {
    for (const PolledRecord& p : ctx_.log->Poll(topic, group_, cfg.poll_batch)) {
      consumed_[topic] = p.offset + 1;
      if (!range_.Contains(p.record.key)) continue;
      ApplyToCache(*ctx_.schema, doc_cache_, p.record);
      AddDocument(doc_cache_.at(p.record.key), now_ms);
      if (buffer_->doc_count() >= cfg.refresh_max_docs || buffer_->footprint() >= cfg.refresh_max_bytes) {
        uploaded.push_back(SealAndUpload());
      }
    }
  }
  if (buffer_ && buffer_->doc_count() > 0 &&
      (force_flush || now_ms - *first_buffered_ms_ >= cfg.refresh_max_age_ms)) {
    uploaded.push_back(SealAndUpload());
  }
  if (!buffer_) {
    // Everything polled was either sealed or belongs to another shard.
    for (const auto& [topic, next] : consumed_) {
      if (next > ctx_.log->Committed(group_, topic)) ctx_.log->Commit(group_, topic, next);
    }
  }
  return uploaded;
}

// ---------------------------------------------------------------------------
// SearchNode

SearchNode::SearchNode(std::string node_id, uint32_t shard, ClusterContext ctx, NodeCounters* counters)
    : node_id_(std::move(node_id)),
      shard_(shard),
      ctx_(std::move(ctx)),
      counters_(counters),
      group_(SearchGroupName(shard, node_id_)),
      realtime_topics_(ctx_.schema->TopicsOnPath(UpdatePath::kInPlace)),
      index_(ctx_.schema, [&] {
        const std::optional<ShardDescriptor> d = ctx_.meta->Shard(shard);
        if (!d) throw Error(ErrorCode::kNotFound, "unknown shard " + std::to_string(shard));
        MemIndexOptions o;
        o.policy = ctx_.config.merge_policy;
        o.unit_docs = ctx_.config.merge_unit_docs;
        o.key_range = d->range;
        return o;
      }()) {
  const ShardDescriptor d = *ctx_.meta->Shard(shard_);
  range_ = d.range;
  sources_ = d.ancestors;
  sources_.push_back(shard_);
  ctx_.log->RegisterGroup(group_, /*persistent=*/false);
  ctx_.log->Reset(group_);
}

SearchTickReport SearchNode::Tick(int64_t now_ms, bool force_segments) {
  NodeScope scope(counters_);
  SearchTickReport report;
  if (force_segments || !next_segment_poll_ms_ || now_ms >= *next_segment_poll_ms_) {
    PollSegments(report);
    next_segment_poll_ms_ = now_ms + ctx_.config.poll_interval_ms;
  }
  PollRealtime(report);
  if (report.inplace > 0 || report.applied_buffered > 0) index_.Publish();
  report.published = report.segments > 0 || report.inplace > 0 || report.applied_buffered > 0;
  report.dropped = dropped_;
  report.snapshot_sequence = index_.snapshot()->sequence();
  ctx_.meta->ReportFootprint(shard_, index_.Footprint().total());
  return report;
}

void SearchNode::PollSegments(SearchTickReport& report) {
  struct Found {
    uint64_t id;
    uint32_t source;
    std::string key;
  };
  std::vector<Found> found;
  for (uint32_t src : sources_) {
    for (std::string& key : ctx_.store->List(SegmentPrefix(src), last_seen_[src])) {
      if (auto id = SegmentIdFromKey(key)) found.push_back({*id, src, std::move(key)});
    }
  }
  std::sort(found.begin(), found.end(), [](const Found& a, const Found& b) { return a.id < b.id; });
  for (const Found& f : found) {
    const std::optional<uint64_t> last = index_.last_segment_id();
    if (!last || f.id > *last) {
      std::optional<SegmentView> view;
      try {
        view.emplace(SegmentView::Open(ctx_.store->Get(f.key), ctx_.schema, f.source));
      } catch (const Error&) {
        // Left unseen so the next poll retries it; later segments wait too.
        ++checksum_alarms_;
        ++report.checksum_alarms;
        break;
      }
      const uint64_t writes_before = ThreadFileWrites();
      index_.Incorporate(*view);
      counters_->incorporate_file_writes += ThreadFileWrites() - writes_before;
      ++report.segments;
      report.docs += view->doc_count();
    }
    last_seen_[f.source] = f.key;
  }
  if (report.segments > 0) ApplyPending(report);
}

bool SearchNode::Apply(const UpdateRecord& record, SearchTickReport& report) {
  const std::optional<Ordinal> ordinal = index_.OrdinalOf(record.key);
  if (!ordinal) return false;
  index_.forward().SetValue(record.field, *ordinal, record.value);
  ++report.inplace;
  report.newest_applied_ts_ms = std::max(report.newest_applied_ts_ms, record.ts_ms);
  return true;
}

void SearchNode::ApplyPending(SearchTickReport& report) {
  if (pending_.empty()) return;
  std::deque<UpdateRecord> keep;
  for (UpdateRecord& r : pending_) {
    if (Apply(r, report)) {
      ++report.applied_buffered;
      --report.inplace;
    } else {
      keep.push_back(std::move(r));
    }
  }
  pending_ = std::move(keep);
  pending_count_ = pending_.size();
}

void SearchNode::PollRealtime(SearchTickReport& report) {
  for (const std::string& topic : realtime_topics_) {
    std::vector<PolledRecord> batch = ctx_.log->Poll(topic, group_, ctx_.config.poll_batch);
    for (PolledRecord& p : batch) {
      if (!range_.Contains(p.record.key)) continue;
      if (Apply(p.record, report)) continue;
      pending_.push_back(std::move(p.record));
      ++report.buffered;
      if (pending_.size() > ctx_.config.unknown_key_buffer) {
        pending_.pop_front();
        ++dropped_;
      }
    }
    if (!batch.empty()) ctx_.log->Commit(group_, topic, batch.back().offset + 1);
  }
  pending_count_ = pending_.size();
}

}  // namespace scalesearch
