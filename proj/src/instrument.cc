#include "scalesearch/instrument.h"

namespace scalesearch {

namespace {
thread_local NodeCounters* current_node = nullptr;
std::atomic<uint64_t> process_file_writes{0};
thread_local uint64_t thread_file_writes = 0;
}  // namespace

nlohmann::json NodeCounters::ToJson() const {
  return {{"node", node_id},
          {"store_puts", store_puts.load()},
          {"store_put_bytes", store_put_bytes.load()},
          {"store_gets", store_gets.load()},
          {"store_get_bytes", store_get_bytes.load()},
          {"store_lists", store_lists.load()},
          {"log_appends", log_appends.load()},
          {"log_append_bytes", log_append_bytes.load()},
          {"file_writes", file_writes.load()},
          {"file_write_bytes", file_write_bytes.load()},
          {"segment_writer_invocations", segment_writer_invocations.load()},
          {"query_executions", query_executions.load()},
          {"incorporate_file_writes", incorporate_file_writes.load()}};
}

NodeScope::NodeScope(NodeCounters* node) : previous_(current_node) { current_node = node; }

NodeScope::~NodeScope() { current_node = previous_; }

NodeCounters* CurrentNode() { return current_node; }

void RecordFileWrite(uint64_t bytes) {
  process_file_writes.fetch_add(1, std::memory_order_relaxed);
  ++thread_file_writes;
  if (NodeCounters* node = current_node) {
    node->file_writes.fetch_add(1, std::memory_order_relaxed);
    node->file_write_bytes.fetch_add(bytes, std::memory_order_relaxed);
  }
}

uint64_t ProcessFileWrites() { return process_file_writes.load(std::memory_order_relaxed); }

uint64_t ThreadFileWrites() { return thread_file_writes; }

}  // namespace scalesearch
