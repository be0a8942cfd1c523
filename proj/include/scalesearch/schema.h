#pragma once

// Index schema: field kinds, column families and the per-field update path
// fixed at index-creation time.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace scalesearch {

enum class FieldKind { kText, kKeyword, kInt64, kFloat64 };
enum class UpdatePath { kSegment, kInPlace };

std::string_view FieldKindName(FieldKind kind);
std::string_view UpdatePathName(UpdatePath path);

// A typed field value. Text and keyword values are strings.
using Value = std::variant<std::string, int64_t, double>;

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::kKeyword;
  UpdatePath path = UpdatePath::kSegment;
  std::string column_family;
  bool fast_search = false;

  bool indexed() const {
    return path == UpdatePath::kSegment && (kind == FieldKind::kText || kind == FieldKind::kKeyword);
  }
  bool scalar() const { return kind != FieldKind::kText; }
};

struct ColumnFamily {
  std::string name;
  int64_t freshness_sla_ms = 0;
  UpdatePath path = UpdatePath::kSegment;
};

struct Route {
  UpdatePath path;
  std::string topic;
};

using FieldId = uint16_t;

class IndexSchema {
 public:
  // Parses and validates the JSON schema document. Throws Error with
  // kSyntax (byte position included) or kConstraintViolation.
  static IndexSchema Parse(std::string_view text);
  static IndexSchema FromJson(const nlohmann::json& doc);

  nlohmann::json ToJson() const;

  const std::string& index_name() const { return index_name_; }
  const std::string& primary_key_field() const { return primary_key_; }
  const std::vector<FieldSpec>& fields() const { return fields_; }
  const std::vector<ColumnFamily>& families() const { return families_; }

  const FieldSpec* FindField(std::string_view name) const;
  // Throws kUnknownField.
  const FieldSpec& Field(std::string_view name) const;
  FieldId IdOf(std::string_view name) const;
  const FieldSpec& FieldAt(FieldId id) const { return fields_.at(id); }
  const ColumnFamily& Family(std::string_view name) const;

  Route RouteOf(std::string_view field) const;
  std::string TopicFor(std::string_view field) const;
  std::vector<std::string> TopicsOnPath(UpdatePath path) const;
  // Field owning a topic name, or nullptr.
  const FieldSpec* FieldForTopic(std::string_view topic) const;

  // Throws kUnknownField or kTypeMismatch. Integers are accepted for
  // float64 fields.
  void ValidateUpdate(std::string_view field, const Value& value) const;

  friend bool operator==(const IndexSchema& a, const IndexSchema& b);

 private:
  void Validate() const;

  std::string index_name_;
  std::string primary_key_;
  std::vector<FieldSpec> fields_;
  std::vector<ColumnFamily> families_;
};

bool operator==(const FieldSpec& a, const FieldSpec& b);
bool operator==(const ColumnFamily& a, const ColumnFamily& b);

// Full document as ingested on the segment path. Field order is by name.
struct Document {
  std::map<std::string, Value, std::less<>> fields;

  const Value* Find(std::string_view field) const;
  friend bool operator==(const Document&, const Document&) = default;
};

// Converts one JSON value for `spec`; throws kTypeMismatch.
Value ValueFromJson(const FieldSpec& spec, const nlohmann::json& v);
nlohmann::json ValueToJson(const Value& v);
std::string ValueToString(const Value& v);

// Builds a document from a JSON object, checking every field against the
// schema. The primary key must be present and non-empty.
Document DocumentFromJson(const IndexSchema& schema, const nlohmann::json& obj);
nlohmann::json DocumentToJson(const Document& doc);
const std::string& PrimaryKeyOf(const IndexSchema& schema, const Document& doc);

}  // namespace scalesearch
