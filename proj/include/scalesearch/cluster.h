#pragma once

// Node roles and coordination. Write nodes consume segment-path topics,
// buffer documents, seal segments and upload them; search nodes discover
// segments in the store, load them into a MemIndex and apply in-place
// updates from the realtime topics. The two roles share no mutable state:
// the object store and the log are the only channels between them.
// ClusterMeta is the master's view: shard table, node registry and global
// segment-id reservations.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "scalesearch/instrument.h"
#include "scalesearch/log.h"
#include "scalesearch/memindex.h"
#include "scalesearch/schema.h"
#include "scalesearch/segment.h"
#include "scalesearch/store.h"

namespace scalesearch {

struct ClusterConfig {
  uint32_t refresh_max_docs = 4096;
  uint64_t refresh_max_bytes = uint64_t{64} << 20;
  int64_t refresh_max_age_ms = 5000;
  int64_t poll_interval_ms = 15000;
  int64_t realtime_poll_interval_ms = 50;
  uint64_t split_threshold_bytes = uint64_t{256} << 20;
  size_t unknown_key_buffer = 100000;
  size_t poll_batch = 4096;
  MergePolicy merge_policy = MergePolicy::kLogarithmic;
  uint64_t merge_unit_docs = 1024;
  std::string store_root;
  std::string log_root;

  // Accepts both flat dotted keys ("refresh.max_docs") and nested objects.
  static ClusterConfig FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
};

enum class NodeRole { kWrite, kSearch };
std::string_view NodeRoleName(NodeRole role);

struct NodeInfo {
  std::string id;
  NodeRole role = NodeRole::kWrite;
  bool alive = true;
  int64_t last_heartbeat_ms = 0;
};

struct ShardDescriptor {
  uint32_t shard_id = 0;
  KeyRange range;
  std::string write_node;
  std::vector<std::string> search_nodes;
  std::optional<uint64_t> last_sealed_segment;
  uint64_t footprint_bytes = 0;
  bool retired = false;
  // Retired shards whose segments this shard still serves, oldest first.
  std::vector<uint32_t> ancestors;

  friend bool operator==(const ShardDescriptor&, const ShardDescriptor&) = default;
};

struct SplitPlan {
  uint32_t parent = 0;
  std::string split_key;
  KeyRange left;
  KeyRange right;
  uint64_t left_footprint_estimate = 0;
  uint64_t right_footprint_estimate = 0;
  std::string left_write_node, right_write_node;
  std::string left_search_node, right_search_node;
};

class ClusterMeta {
 public:
  ClusterMeta() = default;

  void RegisterNode(std::string id, NodeRole role, int64_t now_ms = 0);
  void Heartbeat(std::string_view id, int64_t now_ms);
  void MarkDead(std::string_view id);
  std::vector<NodeInfo> nodes() const;

  // Builds the initial shard table: one shard per gap between boundaries,
  // ["", b0), [b0, b1), ... [bn, inf). Throws kConstraintViolation unless
  // the boundaries are non-empty and strictly increasing.
  void Bootstrap(const std::vector<std::string>& boundaries, const std::vector<std::string>& write_nodes,
                 const std::vector<std::string>& search_nodes);

  // The active shard whose range contains key. Throws kInvalidArgument for
  // an empty key.
  uint32_t Route(std::string_view key) const;

  std::optional<ShardDescriptor> Shard(uint32_t id) const;
  std::vector<ShardDescriptor> ActiveShards() const;
  std::vector<ShardDescriptor> AllShards() const;

  // Returns the id reserved for a seal covering the given end offsets.
  // Repeating the call with the same offsets before CompleteSegment hands
  // back the same id, so a retried upload lands on the same object key.
  uint64_t ReserveSegmentId(uint32_t shard, const std::map<std::string, uint64_t>& end_offsets);
  void CompleteSegment(uint32_t shard, uint64_t segment_id);
  void ReportFootprint(uint32_t shard, uint64_t bytes);

  // Throws kConstraintViolation unless active ranges are disjoint and cover
  // the keyspace.
  void CheckPartition() const;

  // Throws kAssignmentFailure (nothing changes) when a planned node is not
  // registered and alive in the right role. Returns the child shard ids.
  std::pair<uint32_t, uint32_t> ExecuteSplit(const SplitPlan& plan);

  // Least-loaded alive node of a role; nullopt when none.
  std::optional<std::string> PickNode(NodeRole role) const;

  nlohmann::json ToJson() const;
  static std::unique_ptr<ClusterMeta> FromJson(const nlohmann::json& j);
  void Save(const std::filesystem::path& path) const;
  static std::unique_ptr<ClusterMeta> Load(const std::filesystem::path& path);

 private:
  struct Reservation {
    uint64_t segment_id;
    std::map<std::string, uint64_t> end_offsets;
  };

  const NodeInfo* FindNode(std::string_view id) const;
  void CheckPartitionLocked() const;

  mutable std::mutex mu_;
  std::map<uint32_t, ShardDescriptor> shards_;
  std::map<std::string, NodeInfo, std::less<>> nodes_;
  std::map<uint32_t, Reservation> pending_;
  uint64_t next_segment_id_ = 1;
  uint32_t next_shard_id_ = 0;
};

// Linear scan over the active shards (the routing oracle is the same rule).
uint32_t RouteDocument(const ClusterMeta& meta, std::string_view key);

// Plan to split `shard` at the median of `live_keys` when its reported
// footprint exceeds the threshold; nullopt otherwise. Throws kUnsplittable
// when fewer than two distinct keys exist.
std::optional<SplitPlan> MaybeSplit(const ClusterMeta& meta, uint32_t shard, uint64_t threshold_bytes,
                                    std::vector<std::string> live_keys);

// Shared handles every node works with.
struct ClusterContext {
  std::shared_ptr<const IndexSchema> schema;
  std::shared_ptr<ObjectStore> store;
  std::shared_ptr<MessageLog> log;
  std::shared_ptr<ClusterMeta> meta;
  ClusterConfig config;
};

std::string WriteGroupName(uint32_t shard);
std::string SearchGroupName(uint32_t shard, std::string_view node);

class WriteNode {
 public:
  // Resumes from the group's committed offsets and rebuilds the document
  // cache used for partial segment-path updates from the log prefix.
  WriteNode(std::string node_id, uint32_t shard, ClusterContext ctx, NodeCounters* counters);

  // Polls, buffers and seals when a threshold is crossed (or always with
  // force_flush and a non-empty buffer). Returns uploaded keys. A failed
  // upload discards the buffer and rewinds the group; the error propagates.
  std::vector<std::string> Tick(int64_t now_ms, bool force_flush = false);

  // Loses the buffer and every uncommitted poll.
  void Crash();

  uint32_t shard() const { return shard_; }
  const std::string& node_id() const { return node_id_; }
  uint32_t buffered_docs() const { return buffer_ ? buffer_->doc_count() : 0; }
  uint64_t segments_uploaded() const { return segments_uploaded_; }
  NodeCounters& counters() { return *counters_; }

 private:
  void AddDocument(const Document& doc, int64_t now_ms);
  std::string SealAndUpload();
  void Reset();

  std::string node_id_;
  uint32_t shard_;
  ClusterContext ctx_;
  NodeCounters* counters_;
  KeyRange range_;
  std::string group_;
  std::vector<std::string> topics_;
  std::unique_ptr<SegmentBuffer> buffer_;
  std::optional<int64_t> first_buffered_ms_;
  std::map<std::string, uint64_t> consumed_;  // next offset per topic
  std::unordered_map<std::string, Document> doc_cache_;
  uint64_t segments_uploaded_ = 0;
};

struct SearchTickReport {
  size_t segments = 0;
  size_t docs = 0;
  size_t inplace = 0;
  size_t buffered = 0;        // updates parked for unknown keys this tick
  size_t applied_buffered = 0;
  size_t dropped = 0;         // cumulative oldest-dropped updates
  size_t checksum_alarms = 0;
  bool published = false;
  uint64_t snapshot_sequence = 0;
  int64_t newest_applied_ts_ms = 0;
};

class SearchNode {
 public:
  // Starts empty and replays the realtime topics from offset 0.
  SearchNode(std::string node_id, uint32_t shard, ClusterContext ctx, NodeCounters* counters);

  // Segment discovery runs when `now_ms` reached the next poll time (or
  // force_segments); realtime topics are consumed on every call.
  SearchTickReport Tick(int64_t now_ms, bool force_segments = false);

  std::shared_ptr<const ReadSnapshot> snapshot() const { return index_.snapshot(); }
  const MemIndex& index() const { return index_; }
  uint32_t shard() const { return shard_; }
  const std::string& node_id() const { return node_id_; }
  NodeCounters& counters() { return *counters_; }
  size_t pending_updates() const { return pending_count_; }
  uint64_t checksum_alarms() const { return checksum_alarms_; }

 private:
  void PollSegments(SearchTickReport& report);
  void PollRealtime(SearchTickReport& report);
  void ApplyPending(SearchTickReport& report);
  bool Apply(const UpdateRecord& record, SearchTickReport& report);

  std::string node_id_;
  uint32_t shard_;
  ClusterContext ctx_;
  NodeCounters* counters_;
  KeyRange range_;
  std::vector<uint32_t> sources_;  // ancestors then own shard
  std::map<uint32_t, std::string> last_seen_;
  std::string group_;
  std::vector<std::string> realtime_topics_;
  MemIndex index_;
  std::optional<int64_t> next_segment_poll_ms_;
  std::deque<UpdateRecord> pending_;
  size_t pending_count_ = 0;
  size_t dropped_ = 0;
  uint64_t checksum_alarms_ = 0;
};

}  // namespace scalesearch
