#include "scalesearch/local_cluster.h"

#include "scalesearch/error.h"

namespace scalesearch {

namespace fs = std::filesystem;

namespace {

fs::path MetaPath(const fs::path& dir) { return dir / "meta.json"; }

}  // namespace

LocalCluster::LocalCluster(std::shared_ptr<const IndexSchema> schema, LocalClusterOptions options)
    : data_dir_(std::move(options.data_dir)) {
  ctx_.schema = std::move(schema);
  ctx_.config = options.config;
  std::shared_ptr<ObjectStore> backend = std::move(options.store);
  std::optional<fs::path> log_root;
  if (data_dir_) {
    fs::create_directories(*data_dir_);
    const fs::path store_root = ctx_.config.store_root.empty() ? *data_dir_ / "store" : fs::path(ctx_.config.store_root);
    log_root = ctx_.config.log_root.empty() ? *data_dir_ / "log" : fs::path(ctx_.config.log_root);
    if (!backend) backend = std::make_shared<FileObjectStore>(store_root);
  }
  if (!backend) backend = std::make_shared<MemoryObjectStore>();
  ctx_.store = std::make_shared<InstrumentedStore>(std::move(backend));
  ctx_.log = std::make_shared<MessageLog>(ctx_.schema, log_root);

  if (data_dir_ && fs::exists(MetaPath(*data_dir_))) {
    ctx_.meta = std::shared_ptr<ClusterMeta>(ClusterMeta::Load(MetaPath(*data_dir_)));
  } else {
    ctx_.meta = std::make_shared<ClusterMeta>();
    const size_t n = options.boundaries.size() + 1;
    std::vector<std::string> writers, searchers;
    for (size_t i = 0; i < n; ++i) {
      writers.push_back("write-" + std::to_string(i));
      searchers.push_back("search-" + std::to_string(i));
      ctx_.meta->RegisterNode(writers.back(), NodeRole::kWrite);
      ctx_.meta->RegisterNode(searchers.back(), NodeRole::kSearch);
    }
    ctx_.meta->Bootstrap(options.boundaries, writers, searchers);
    SaveMeta();
  }
  for (const ShardDescriptor& d : ctx_.meta->ActiveShards()) StartNodes(d.shard_id);
}

LocalCluster::~LocalCluster() = default;

void LocalCluster::SaveMeta() const {
  if (data_dir_) ctx_.meta->Save(MetaPath(*data_dir_));
}

void LocalCluster::StartNodes(uint32_t shard) {
  const ShardDescriptor d = *ctx_.meta->Shard(shard);
  writers_[shard] = std::make_unique<WriteNode>(d.write_node, shard, ctx_, &counters(d.write_node));
  const std::string& s = d.search_nodes.front();
  searchers_[shard] = std::make_unique<SearchNode>(s, shard, ctx_, &counters(s));
}

NodeCounters& LocalCluster::counters(const std::string& node_id) {
  std::lock_guard lock(counters_mu_);
  auto& slot = counters_[node_id];
  if (!slot) slot = std::make_unique<NodeCounters>(node_id);
  return *slot;
}

std::vector<const NodeCounters*> LocalCluster::CountersFor(NodeRole role) const {
  std::vector<const NodeCounters*> out;
  std::lock_guard lock(counters_mu_);
  for (const NodeInfo& n : ctx_.meta->nodes()) {
    if (n.role != role) continue;
    auto it = counters_.find(n.id);
    if (it != counters_.end()) out.push_back(it->second.get());
  }
  return out;
}

uint64_t LocalCluster::Ingest(const Document& doc, int64_t ts_ms) {
  NodeScope scope(&client());
  const std::string topic = ctx_.schema->TopicFor(ctx_.schema->primary_key_field());
  return ctx_.log->Append(topic, UpdateRecord::FullDocument(*ctx_.schema, doc, ts_ms));
}

uint64_t LocalCluster::Update(std::string key, std::string field, Value value, int64_t ts_ms) {
  NodeScope scope(&client());
  const std::string topic = ctx_.schema->TopicFor(field);
  return ctx_.log->Append(topic, UpdateRecord::FieldUpdate(std::move(key), std::move(field), std::move(value), ts_ms));
}

std::vector<std::string> LocalCluster::TickWriters(int64_t now_ms, bool force_flush) {
  std::vector<std::string> uploaded;
  for (auto& [shard, w] : writers_) {
    try {
      for (std::string& key : w->Tick(now_ms, force_flush)) uploaded.push_back(std::move(key));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kIOError) throw;
      ++write_failures_;
    }
  }
  return uploaded;
}

std::vector<SearchTickReport> LocalCluster::TickSearchers(int64_t now_ms, bool force_segments) {
  std::vector<SearchTickReport> reports;
  for (auto& [shard, s] : searchers_) reports.push_back(s->Tick(now_ms, force_segments));
  return reports;
}

void LocalCluster::Quiesce(int64_t now_ms, int max_rounds) {
  const auto segment_topics = ctx_.schema->TopicsOnPath(UpdatePath::kSegment);
  const auto realtime_topics = ctx_.schema->TopicsOnPath(UpdatePath::kInPlace);
  for (int round = 0; round < max_rounds; ++round) {
    const uint64_t failures = write_failures_;
    const size_t uploaded = TickWriters(now_ms, true).size();
    bool changed = uploaded > 0 || write_failures_ != failures;
    for (const SearchTickReport& r : TickSearchers(now_ms, true)) {
      changed = changed || r.segments > 0 || r.inplace > 0 || r.applied_buffered > 0 || r.checksum_alarms > 0;
    }
    if (changed) continue;
    bool drained = true;
    for (auto& [shard, w] : writers_) {
      for (const std::string& t : segment_topics) drained = drained && ctx_.log->Lag(t, WriteGroupName(shard)) == 0;
      drained = drained && w->buffered_docs() == 0;
    }
    for (auto& [shard, s] : searchers_) {
      for (const std::string& t : realtime_topics) {
        drained = drained && ctx_.log->Lag(t, SearchGroupName(shard, s->node_id())) == 0;
      }
    }
    if (drained) return;
  }
  throw Error(ErrorCode::kIOError, "cluster did not quiesce within " + std::to_string(max_rounds) + " rounds");
}

std::vector<Hit> LocalCluster::Query(std::string_view text, size_t k) {
  return Query(ParseQuery(text, *ctx_.schema), k);
}

std::vector<Hit> LocalCluster::Query(const QueryNode& query, size_t k) {
  std::vector<std::vector<Hit>> per_shard;
  for (auto& [shard, s] : searchers_) {
    NodeScope scope(&s->counters());
    per_shard.push_back(Execute(*s->snapshot(), query, k, shard));
  }
  return MergeHits(per_shard, k);
}

std::vector<uint32_t> LocalCluster::ActiveShards() const {
  std::vector<uint32_t> ids;
  for (const ShardDescriptor& d : ctx_.meta->ActiveShards()) ids.push_back(d.shard_id);
  return ids;
}

WriteNode& LocalCluster::writer(uint32_t shard) {
  auto it = writers_.find(shard);
  if (it == writers_.end()) throw Error(ErrorCode::kNotFound, "no write node for shard " + std::to_string(shard));
  return *it->second;
}

SearchNode& LocalCluster::searcher(uint32_t shard) {
  auto it = searchers_.find(shard);
  if (it == searchers_.end()) throw Error(ErrorCode::kNotFound, "no search node for shard " + std::to_string(shard));
  return *it->second;
}

std::optional<SplitPlan> LocalCluster::PlanSplit(uint32_t shard, uint64_t threshold_bytes) {
  // Spare nodes for the children; the planner picks the least loaded.
  const size_t n = ctx_.meta->nodes().size();
  ctx_.meta->RegisterNode("write-" + std::to_string(n), NodeRole::kWrite);
  ctx_.meta->RegisterNode("search-" + std::to_string(n + 1), NodeRole::kSearch);
  return MaybeSplit(*ctx_.meta, shard, threshold_bytes, searcher(shard).index().LiveKeys());
}

std::pair<uint32_t, uint32_t> LocalCluster::ExecuteSplit(const SplitPlan& plan) {
  const auto children = ctx_.meta->ExecuteSplit(plan);
  for (uint32_t child : {children.first, children.second}) {
    ctx_.log->CopyGroup(WriteGroupName(plan.parent), WriteGroupName(child));
    StartNodes(child);
  }
  writers_.erase(plan.parent);
  searchers_.erase(plan.parent);
  SaveMeta();
  return children;
}

void LocalCluster::CrashWriter(uint32_t shard) { writer(shard).Crash(); }

void LocalCluster::RestartSearchers() {
  for (auto& [shard, s] : searchers_) {
    const std::string id = s->node_id();
    s.reset();
    s = std::make_unique<SearchNode>(id, shard, ctx_, &counters(id));
  }
}

}  // namespace scalesearch
