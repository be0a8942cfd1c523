#include "scalesearch/log.h"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <sstream>

#include "scalesearch/error.h"
#include "scalesearch/instrument.h"

namespace scalesearch {

namespace fs = std::filesystem;

UpdateRecord UpdateRecord::FieldUpdate(std::string key, std::string field, Value value, int64_t ts_ms) {
  UpdateRecord r;
  r.key = std::move(key);
  r.field = std::move(field);
  r.value = std::move(value);
  r.ts_ms = ts_ms;
  return r;
}

UpdateRecord UpdateRecord::FullDocument(const IndexSchema& schema, Document doc, int64_t ts_ms) {
  UpdateRecord r;
  r.key = PrimaryKeyOf(schema, doc);
  r.doc = std::move(doc);
  r.ts_ms = ts_ms;
  return r;
}

nlohmann::json RecordToJson(const UpdateRecord& record) {
  nlohmann::json j = {{"key", record.key}};
  if (record.doc) {
    j["doc"] = DocumentToJson(*record.doc);
  } else {
    j["field"] = record.field;
    j["value"] = ValueToJson(record.value);
  }
  j["ts_ms"] = record.ts_ms;
  return j;
}

UpdateRecord RecordFromJson(const IndexSchema& schema, const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("key") || !j["key"].is_string()) {
    throw Error(ErrorCode::kCorruptPayload, "log record lacks a string \"key\"");
  }
  UpdateRecord r;
  r.key = j["key"].get<std::string>();
  if (j.contains("ts_ms") && j["ts_ms"].is_number_integer()) r.ts_ms = j["ts_ms"].get<int64_t>();
  if (j.contains("doc")) {
    r.doc = DocumentFromJson(schema, j["doc"]);
  } else {
    if (!j.contains("field") || !j["field"].is_string() || !j.contains("value")) {
      throw Error(ErrorCode::kCorruptPayload, "log record needs \"doc\" or \"field\" and \"value\"");
    }
    r.field = j["field"].get<std::string>();
    r.value = ValueFromJson(schema.Field(r.field), j["value"]);
  }
  return r;
}

int64_t WallClockMs() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct MessageLog::Topic {
  std::string name;
  const FieldSpec* spec = nullptr;
  mutable std::mutex mu;
  std::vector<UpdateRecord> records;
  int fd = -1;
};

namespace {

void WriteAll(int fd, std::string_view data, const fs::path& path) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) throw Error(ErrorCode::kIOError, "write to " + path.string() + " failed");
    data.remove_prefix(static_cast<size_t>(n));
  }
}

fs::path TopicFile(const fs::path& root, std::string_view topic) {
  return root / std::string(topic) / "00000.jsonl";
}

}  // namespace

MessageLog::MessageLog(std::shared_ptr<const IndexSchema> schema, std::optional<fs::path> root)
    : schema_(std::move(schema)), root_(std::move(root)) {
  for (const FieldSpec& f : schema_->fields()) {
    auto t = std::make_unique<Topic>();
    t->name = schema_->TopicFor(f.name);
    t->spec = &f;
    if (root_) {
      const fs::path file = TopicFile(*root_, t->name);
      fs::create_directories(file.parent_path());
      if (fs::exists(file)) {
        std::ifstream in(file, std::ios::binary);
        std::string line;
        uint64_t good = 0;  // end of the last complete record line
        while (std::getline(in, line)) {
          if (in.eof()) break;  // no newline: torn tail of an interrupted append
          if (!line.empty()) {
            nlohmann::json j;
            try {
              j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error&) {
              break;
            }
            t->records.push_back(RecordFromJson(*schema_, j));
          }
          good += line.size() + 1;
        }
        in.close();
        // Appends must start on a fresh line after the last good record.
        if (fs::file_size(file) != good) fs::resize_file(file, good);
      }
      t->fd = ::open(file.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
      if (t->fd < 0) throw Error(ErrorCode::kIOError, "cannot open " + file.string());
    }
    topics_.emplace(t->name, std::move(t));
  }
  if (root_) LoadGroups();
}

MessageLog::~MessageLog() {
  for (auto& [name, t] : topics_) {
    if (t->fd >= 0) ::close(t->fd);
  }
}

MessageLog::Topic& MessageLog::FindTopic(std::string_view name) {
  auto it = topics_.find(name);
  if (it == topics_.end()) throw Error(ErrorCode::kUnknownTopic, "unknown topic \"" + std::string(name) + "\"");
  return *it->second;
}

const MessageLog::Topic& MessageLog::FindTopic(std::string_view name) const {
  return const_cast<MessageLog*>(this)->FindTopic(name);
}

void MessageLog::ValidateRouting(const Topic& topic, const UpdateRecord& record) const {
  if (record.key.empty()) throw Error(ErrorCode::kInvalidArgument, "record key must be non-empty");
  if (record.doc) {
    if (topic.spec->path != UpdatePath::kSegment) {
      throw Error(ErrorCode::kRoutingMismatch,
                  "full documents cannot be appended to in-place topic \"" + topic.name + "\"");
    }
    if (PrimaryKeyOf(*schema_, *record.doc) != record.key) {
      throw Error(ErrorCode::kInvalidArgument, "record key does not match the document's primary key");
    }
    return;
  }
  if (record.field != topic.spec->name) {
    throw Error(ErrorCode::kRoutingMismatch,
                "update for \"" + record.field + "\" appended to topic \"" + topic.name + "\"");
  }
  schema_->ValidateUpdate(record.field, record.value);
}

uint64_t MessageLog::Append(std::string_view topic, UpdateRecord record) {
  std::vector<UpdateRecord> one;
  one.push_back(std::move(record));
  return AppendBatch(topic, std::move(one)).front();
}

std::vector<uint64_t> MessageLog::AppendBatch(std::string_view topic_name, std::vector<UpdateRecord> records) {
  Topic& topic = FindTopic(topic_name);
  for (const UpdateRecord& r : records) ValidateRouting(topic, r);
  std::string lines;
  for (const UpdateRecord& r : records) {
    lines += RecordToJson(r).dump();
    lines += '\n';
  }
  std::vector<uint64_t> offsets;
  offsets.reserve(records.size());
  std::lock_guard lock(topic.mu);
  if (topic.fd >= 0) {
    const fs::path file = TopicFile(*root_, topic.name);
    WriteAll(topic.fd, lines, file);
    if (::fsync(topic.fd) != 0) throw Error(ErrorCode::kIOError, "fsync of " + file.string() + " failed");
    RecordFileWrite(lines.size());
  }
  if (NodeCounters* node = CurrentNode()) {
    node->log_appends.fetch_add(records.size(), std::memory_order_relaxed);
    node->log_append_bytes.fetch_add(lines.size(), std::memory_order_relaxed);
  }
  for (UpdateRecord& r : records) {
    offsets.push_back(topic.records.size());
    topic.records.push_back(std::move(r));
  }
  return offsets;
}

void MessageLog::RegisterGroup(std::string_view group, bool persistent) {
  std::lock_guard lock(groups_mu_);
  if (!persistent) ephemeral_.emplace(group);
  auto& cursors = groups_[std::string(group)];
  for (const auto& [name, t] : topics_) cursors.try_emplace(name);
}

MessageLog::Cursor& MessageLog::FindCursor(std::string_view group, std::string_view topic) {
  auto g = groups_.find(group);
  if (g == groups_.end()) throw Error(ErrorCode::kUnknownGroup, "unknown consumer group \"" + std::string(group) + "\"");
  auto c = g->second.find(topic);
  if (c == g->second.end()) throw Error(ErrorCode::kUnknownTopic, "unknown topic \"" + std::string(topic) + "\"");
  return c->second;
}

const MessageLog::Cursor& MessageLog::FindCursor(std::string_view group, std::string_view topic) const {
  return const_cast<MessageLog*>(this)->FindCursor(group, topic);
}

std::vector<PolledRecord> MessageLog::Poll(std::string_view topic_name, std::string_view group, size_t max_records) {
  const Topic& topic = FindTopic(topic_name);
  std::lock_guard glock(groups_mu_);
  Cursor& cursor = FindCursor(group, topic_name);
  std::vector<PolledRecord> out;
  std::lock_guard tlock(topic.mu);
  const uint64_t end = std::min<uint64_t>(topic.records.size(), cursor.position + max_records);
  for (uint64_t o = cursor.position; o < end; ++o) out.push_back({o, topic.records[o]});
  cursor.position = std::max(cursor.position, end);
  return out;
}

void MessageLog::Commit(std::string_view group, std::string_view topic_name, uint64_t offset) {
  const uint64_t next = NextOffset(topic_name);
  {
    std::lock_guard lock(groups_mu_);
    Cursor& cursor = FindCursor(group, topic_name);
    if (offset < cursor.committed) {
      throw Error(ErrorCode::kOffsetRegression, "commit " + std::to_string(offset) + " below committed " +
                                                    std::to_string(cursor.committed) + " on " +
                                                    std::string(topic_name));
    }
    if (offset > next) {
      throw Error(ErrorCode::kInvalidArgument,
                  "commit " + std::to_string(offset) + " beyond next offset " + std::to_string(next));
    }
    if (offset == cursor.committed) return;
    cursor.committed = offset;
    cursor.position = std::max(cursor.position, offset);
  }
  PersistGroup(group);
}

void MessageLog::Rewind(std::string_view group) {
  std::lock_guard lock(groups_mu_);
  auto g = groups_.find(group);
  if (g == groups_.end()) throw Error(ErrorCode::kUnknownGroup, "unknown consumer group \"" + std::string(group) + "\"");
  for (auto& [name, c] : g->second) c.position = c.committed;
}

void MessageLog::Reset(std::string_view group) {
  {
    std::lock_guard lock(groups_mu_);
    auto g = groups_.find(group);
    if (g == groups_.end()) {
      throw Error(ErrorCode::kUnknownGroup, "unknown consumer group \"" + std::string(group) + "\"");
    }
    for (auto& [name, c] : g->second) c = Cursor{};
  }
  PersistGroup(group);
}

void MessageLog::CopyGroup(std::string_view from, std::string_view to) {
  {
    std::lock_guard lock(groups_mu_);
    auto g = groups_.find(from);
    if (g == groups_.end()) throw Error(ErrorCode::kUnknownGroup, "unknown consumer group \"" + std::string(from) + "\"");
    auto cursors = g->second;
    for (auto& [name, c] : cursors) c.position = c.committed;
    groups_[std::string(to)] = std::move(cursors);
  }
  PersistGroup(to);
}

std::vector<PolledRecord> MessageLog::Read(std::string_view topic_name, uint64_t from, size_t max_records) const {
  const Topic& topic = FindTopic(topic_name);
  std::lock_guard lock(topic.mu);
  std::vector<PolledRecord> out;
  const uint64_t end = std::min<uint64_t>(topic.records.size(), from + max_records);
  for (uint64_t o = from; o < end; ++o) out.push_back({o, topic.records[o]});
  return out;
}

uint64_t MessageLog::Lag(std::string_view topic, std::string_view group) const {
  const uint64_t next = NextOffset(topic);
  std::lock_guard lock(groups_mu_);
  return next - FindCursor(group, topic).committed;
}

uint64_t MessageLog::NextOffset(std::string_view topic_name) const {
  const Topic& topic = FindTopic(topic_name);
  std::lock_guard lock(topic.mu);
  return topic.records.size();
}

uint64_t MessageLog::Committed(std::string_view group, std::string_view topic) const {
  std::lock_guard lock(groups_mu_);
  return FindCursor(group, topic).committed;
}

uint64_t MessageLog::Position(std::string_view group, std::string_view topic) const {
  std::lock_guard lock(groups_mu_);
  return FindCursor(group, topic).position;
}

std::vector<std::string> MessageLog::topics() const {
  std::vector<std::string> names;
  for (const auto& [name, t] : topics_) names.push_back(name);
  return names;
}

void MessageLog::PersistGroup(std::string_view group) {
  if (!root_) return;
  nlohmann::json j = nlohmann::json::object();
  {
    std::lock_guard lock(groups_mu_);
    if (ephemeral_.contains(group)) return;
    for (const auto& [name, c] : groups_.at(std::string(group))) j[name] = c.committed;
  }
  const fs::path dir = *root_ / "groups";
  fs::create_directories(dir);
  const fs::path file = dir / (std::string(group) + ".json");
  const fs::path tmp = dir / ("." + std::string(group) + ".tmp");
  const std::string text = j.dump();
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << text;
    if (!out) throw Error(ErrorCode::kIOError, "cannot write " + tmp.string());
  }
  RecordFileWrite(text.size());
  fs::rename(tmp, file);
}

void MessageLog::LoadGroups() {
  const fs::path dir = *root_ / "groups";
  if (!fs::is_directory(dir)) return;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.starts_with('.') || entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    auto& cursors = groups_[entry.path().stem().string()];
    for (const auto& [topic, t] : topics_) {
      Cursor c;
      if (j.contains(topic) && j[topic].is_number_unsigned()) {
        c.committed = std::min<uint64_t>(j[topic].get<uint64_t>(), t->records.size());
      }
      c.position = c.committed;
      cursors[topic] = c;
    }
  }
}

}  // namespace scalesearch
