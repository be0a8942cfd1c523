#pragma once

// The whole topology in one process: object store, per-field log, master
// metadata, and one write node plus one search node per active shard. Nodes
// are driven explicitly through Tick calls so tests control interleaving;
// the benches run the same node objects from their own threads.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scalesearch/cluster.h"
#include "scalesearch/query.h"

namespace scalesearch {

struct LocalClusterOptions {
  ClusterConfig config;
  // Initial shard boundaries; empty means a single shard.
  std::vector<std::string> boundaries;
  // File-backed store, log and metadata under this directory; in-memory
  // when unset. An existing metadata snapshot is reopened.
  std::optional<std::filesystem::path> data_dir;
  // Replaces the store backend (e.g. to inject faults); still instrumented.
  std::shared_ptr<ObjectStore> store;
};

class LocalCluster {
 public:
  LocalCluster(std::shared_ptr<const IndexSchema> schema, LocalClusterOptions options);
  ~LocalCluster();
  LocalCluster(const LocalCluster&) = delete;
  LocalCluster& operator=(const LocalCluster&) = delete;

  const IndexSchema& schema() const { return *ctx_.schema; }
  const ClusterContext& context() const { return ctx_; }
  ClusterMeta& meta() { return *ctx_.meta; }
  MessageLog& log() { return *ctx_.log; }
  ObjectStore& store() { return *ctx_.store; }

  // Producer side. Full documents go to the primary key's topic; field
  // updates to the field's own topic.
  uint64_t Ingest(const Document& doc, int64_t ts_ms);
  uint64_t Update(std::string key, std::string field, Value value, int64_t ts_ms);

  // Ticks every write node. Store failures are swallowed and counted; the
  // failed node retries on its next tick.
  std::vector<std::string> TickWriters(int64_t now_ms, bool force_flush = false);
  std::vector<SearchTickReport> TickSearchers(int64_t now_ms, bool force_segments = false);

  // Flushes writers and ticks searchers until every topic is consumed and
  // every segment incorporated. Throws kIOError after max_rounds.
  void Quiesce(int64_t now_ms, int max_rounds = 10000);

  std::vector<Hit> Query(std::string_view text, size_t k);
  std::vector<Hit> Query(const QueryNode& query, size_t k);

  std::vector<uint32_t> ActiveShards() const;
  WriteNode& writer(uint32_t shard);
  SearchNode& searcher(uint32_t shard);

  // Per node id; created on first use. "client" counts producer appends.
  NodeCounters& counters(const std::string& node_id);
  std::vector<const NodeCounters*> CountersFor(NodeRole role) const;
  NodeCounters& client() { return counters("client"); }

  std::optional<SplitPlan> PlanSplit(uint32_t shard, uint64_t threshold_bytes);
  // Registers the children, hands them the parent's committed log offsets
  // and starts their nodes; the parent's nodes are dropped.
  std::pair<uint32_t, uint32_t> ExecuteSplit(const SplitPlan& plan);

  void CrashWriter(uint32_t shard);
  // Replaces every search node with a fresh one (stateless restart).
  void RestartSearchers();

  uint64_t write_failures() const { return write_failures_; }
  void SaveMeta() const;

 private:
  void StartNodes(uint32_t shard);

  ClusterContext ctx_;
  std::optional<std::filesystem::path> data_dir_;
  mutable std::mutex counters_mu_;
  std::map<std::string, std::unique_ptr<NodeCounters>> counters_;
  std::map<uint32_t, std::unique_ptr<WriteNode>> writers_;
  std::map<uint32_t, std::unique_ptr<SearchNode>> searchers_;
  uint64_t write_failures_ = 0;
};

}  // namespace scalesearch
