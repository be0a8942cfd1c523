#pragma once

// I/O and work counters used to check that write and read paths stay apart.
// Each node owns a NodeCounters; code running inside a node loop attributes
// its work to that node through NodeScope.

#include <atomic>
#include <cstdint>
#include <string>

#include "json.hpp"

namespace scalesearch {

struct NodeCounters {
  explicit NodeCounters(std::string id = {}) : node_id(std::move(id)) {}

  std::string node_id;
  std::atomic<uint64_t> store_puts{0};
  std::atomic<uint64_t> store_put_bytes{0};
  std::atomic<uint64_t> store_gets{0};
  std::atomic<uint64_t> store_get_bytes{0};
  std::atomic<uint64_t> store_lists{0};
  std::atomic<uint64_t> log_appends{0};
  std::atomic<uint64_t> log_append_bytes{0};
  std::atomic<uint64_t> file_writes{0};
  std::atomic<uint64_t> file_write_bytes{0};
  std::atomic<uint64_t> segment_writer_invocations{0};
  std::atomic<uint64_t> query_executions{0};
  std::atomic<uint64_t> incorporate_file_writes{0};

  nlohmann::json ToJson() const;
};

// Sets the calling thread's current node for the lifetime of the scope.
class NodeScope {
 public:
  explicit NodeScope(NodeCounters* node);
  ~NodeScope();
  NodeScope(const NodeScope&) = delete;
  NodeScope& operator=(const NodeScope&) = delete;

 private:
  NodeCounters* previous_;
};

// nullptr outside any NodeScope.
NodeCounters* CurrentNode();

// Every filesystem write made by the library is reported here.
void RecordFileWrite(uint64_t bytes);
uint64_t ProcessFileWrites();
// File writes made by the calling thread.
uint64_t ThreadFileWrites();

}  // namespace scalesearch
