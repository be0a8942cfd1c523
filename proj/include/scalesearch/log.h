#pragma once

// Per-field update log. Every field owns a single-partition topic named
// "<index>.<field>"; full-document creates and replaces travel on a
// segment-path topic, scalar updates on the field's own topic. Consumer
// groups track a committed offset per topic plus an uncommitted read
// position, so a consumer can poll ahead and commit once its work is
// durable; Rewind (or a restart) drops back to the committed offset.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "scalesearch/schema.h"

namespace scalesearch {

struct UpdateRecord {
  std::string key;
  std::string field;  // empty for a full document
  Value value;
  std::optional<Document> doc;
  int64_t ts_ms = 0;

  static UpdateRecord FieldUpdate(std::string key, std::string field, Value value, int64_t ts_ms);
  static UpdateRecord FullDocument(const IndexSchema& schema, Document doc, int64_t ts_ms);

  bool is_document() const { return doc.has_value(); }
  friend bool operator==(const UpdateRecord&, const UpdateRecord&) = default;
};

nlohmann::json RecordToJson(const UpdateRecord& record);
UpdateRecord RecordFromJson(const IndexSchema& schema, const nlohmann::json& j);

struct PolledRecord {
  uint64_t offset;
  UpdateRecord record;
};

int64_t WallClockMs();

class MessageLog {
 public:
  // Creates one topic per schema field. With a root directory, records
  // persist under <root>/<topic>/00000.jsonl and committed offsets under
  // <root>/groups/<group>.json; existing files are replayed on open.
  explicit MessageLog(std::shared_ptr<const IndexSchema> schema,
                      std::optional<std::filesystem::path> root = std::nullopt);
  ~MessageLog();
  MessageLog(const MessageLog&) = delete;
  MessageLog& operator=(const MessageLog&) = delete;

  // Throws kUnknownTopic, kRoutingMismatch, kTypeMismatch.
  uint64_t Append(std::string_view topic, UpdateRecord record);
  // One fsync for the whole batch in file mode; validated before any write.
  std::vector<uint64_t> AppendBatch(std::string_view topic, std::vector<UpdateRecord> records);

  // Idempotent. A new group starts at offset 0 on every topic. Offsets of
  // a non-persistent group live in memory only, even in file mode.
  void RegisterGroup(std::string_view group, bool persistent = true);
  // Records from the group's read position, at most max_records; advances
  // the position but never the committed offset.
  std::vector<PolledRecord> Poll(std::string_view topic, std::string_view group, size_t max_records);
  // Throws kOffsetRegression when offset < committed, kInvalidArgument when
  // offset > next.
  void Commit(std::string_view group, std::string_view topic, uint64_t offset);
  // Read position back to the committed offset on every topic.
  void Rewind(std::string_view group);
  // Committed offsets back to 0 on every topic (full replay).
  void Reset(std::string_view group);
  // Registers `to` with the committed offsets of `from`.
  void CopyGroup(std::string_view from, std::string_view to);
  // Records [from, from + max_records) without touching any group.
  std::vector<PolledRecord> Read(std::string_view topic, uint64_t from, size_t max_records) const;

  uint64_t Lag(std::string_view topic, std::string_view group) const;
  uint64_t NextOffset(std::string_view topic) const;
  uint64_t Committed(std::string_view group, std::string_view topic) const;
  uint64_t Position(std::string_view group, std::string_view topic) const;
  std::vector<std::string> topics() const;
  const IndexSchema& schema() const { return *schema_; }
  const std::optional<std::filesystem::path>& root() const { return root_; }

 private:
  struct Topic;
  struct Cursor {
    uint64_t committed = 0;
    uint64_t position = 0;
  };

  Topic& FindTopic(std::string_view name);
  const Topic& FindTopic(std::string_view name) const;
  void ValidateRouting(const Topic& topic, const UpdateRecord& record) const;
  Cursor& FindCursor(std::string_view group, std::string_view topic);
  const Cursor& FindCursor(std::string_view group, std::string_view topic) const;
  void PersistGroup(std::string_view group);
  void LoadGroups();

  std::shared_ptr<const IndexSchema> schema_;
  std::optional<std::filesystem::path> root_;
  std::map<std::string, std::unique_ptr<Topic>, std::less<>> topics_;
  mutable std::mutex groups_mu_;
  std::map<std::string, std::map<std::string, Cursor, std::less<>>, std::less<>> groups_;
  std::set<std::string, std::less<>> ephemeral_;
};

}  // namespace scalesearch
