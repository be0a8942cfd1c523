#include "scalesearch/schema.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "scalesearch/error.h"

namespace scalesearch {

using nlohmann::json;

std::string_view FieldKindName(FieldKind kind) {
  switch (kind) {
    case FieldKind::kText: return "text";
    case FieldKind::kKeyword: return "keyword";
    case FieldKind::kInt64: return "int64";
    case FieldKind::kFloat64: return "float64";
  }
  return "?";
}

std::string_view UpdatePathName(UpdatePath path) {
  return path == UpdatePath::kSegment ? "segment" : "in-place";
}

namespace {

[[noreturn]] void Violation(const std::string& msg) {
  throw Error(ErrorCode::kConstraintViolation, msg);
}

[[noreturn]] void Shape(const std::string& msg) { throw Error(ErrorCode::kSyntax, msg); }

bool IsIdentifier(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-';
  });
}

const json& Member(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) Shape(where + ": missing \"" + key + "\"");
  return *it;
}

std::string StringMember(const json& obj, const char* key, const std::string& where) {
  const json& v = Member(obj, key, where);
  if (!v.is_string()) Shape(where + ": \"" + key + "\" must be a string");
  return v.get<std::string>();
}

UpdatePath ParsePath(const std::string& s, const std::string& where) {
  if (s == "segment") return UpdatePath::kSegment;
  if (s == "in-place") return UpdatePath::kInPlace;
  Shape(where + ": path must be \"segment\" or \"in-place\", got \"" + s + "\"");
}

FieldKind ParseKind(const std::string& s, const std::string& where) {
  if (s == "text") return FieldKind::kText;
  if (s == "keyword") return FieldKind::kKeyword;
  if (s == "int64") return FieldKind::kInt64;
  if (s == "float64") return FieldKind::kFloat64;
  Shape(where + ": unknown kind \"" + s + "\"");
}

}  // namespace

IndexSchema IndexSchema::Parse(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSyntax, "schema is not valid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return FromJson(doc);
}

IndexSchema IndexSchema::FromJson(const json& doc) {
  if (!doc.is_object()) Shape("schema root must be an object");
  IndexSchema s;
  s.index_name_ = StringMember(doc, "index", "schema");
  s.primary_key_ = StringMember(doc, "primary_key", "schema");

  const json& families = Member(doc, "families", "schema");
  if (!families.is_array()) Shape("schema: \"families\" must be an array");
  for (size_t i = 0; i < families.size(); ++i) {
    const std::string where = "families[" + std::to_string(i) + "]";
    const json& f = families[i];
    if (!f.is_object()) Shape(where + " must be an object");
    ColumnFamily cf;
    cf.name = StringMember(f, "name", where);
    const json& sla = Member(f, "freshness_sla_ms", where);
    if (!sla.is_number_integer()) Shape(where + ": freshness_sla_ms must be an integer");
    cf.freshness_sla_ms = sla.get<int64_t>();
    cf.path = ParsePath(StringMember(f, "path", where), where);
    s.families_.push_back(std::move(cf));
  }

  const json& fields = Member(doc, "fields", "schema");
  if (!fields.is_array()) Shape("schema: \"fields\" must be an array");
  for (size_t i = 0; i < fields.size(); ++i) {
    const std::string where = "fields[" + std::to_string(i) + "]";
    const json& f = fields[i];
    if (!f.is_object()) Shape(where + " must be an object");
    FieldSpec spec;
    spec.name = StringMember(f, "name", where);
    spec.kind = ParseKind(StringMember(f, "kind", where), where);
    spec.column_family = StringMember(f, "family", where);
    if (auto it = f.find("fast_search"); it != f.end()) {
      if (!it->is_boolean()) Shape(where + ": fast_search must be a boolean");
      spec.fast_search = it->get<bool>();
    }
    auto family = std::find_if(s.families_.begin(), s.families_.end(),
                               [&](const ColumnFamily& cf) { return cf.name == spec.column_family; });
    if (family == s.families_.end()) {
      Violation("field \"" + spec.name + "\" names unknown family \"" + spec.column_family + "\"");
    }
    spec.path = family->path;
    // An explicit per-field path is allowed but must agree with the family.
    if (auto it = f.find("path"); it != f.end()) {
      if (!it->is_string()) Shape(where + ": path must be a string");
      const UpdatePath declared = ParsePath(it->get<std::string>(), where);
      if (declared == UpdatePath::kInPlace && spec.kind == FieldKind::kText) {
        Violation("text field \"" + spec.name + "\" cannot be routed in-place");
      }
      if (declared != family->path) {
        Violation("field \"" + spec.name + "\" declares path " + std::string(UpdatePathName(declared)) +
                  " but family \"" + family->name + "\" is " + std::string(UpdatePathName(family->path)));
      }
    }
    s.fields_.push_back(std::move(spec));
  }
  s.Validate();
  return s;
}

void IndexSchema::Validate() const {
  if (!IsIdentifier(index_name_)) Violation("index name \"" + index_name_ + "\" is not an identifier");
  if (fields_.size() > 0xFFFF) Violation("too many fields");

  std::set<std::string, std::less<>> family_names;
  for (const ColumnFamily& cf : families_) {
    if (!IsIdentifier(cf.name)) Violation("family name \"" + cf.name + "\" is not an identifier");
    if (!family_names.insert(cf.name).second) Violation("duplicate family \"" + cf.name + "\"");
    if (cf.freshness_sla_ms <= 0) Violation("family \"" + cf.name + "\" needs a positive freshness_sla_ms");
  }

  std::set<std::string, std::less<>> field_names;
  for (const FieldSpec& f : fields_) {
    if (!IsIdentifier(f.name)) Violation("field name \"" + f.name + "\" is not an identifier");
    if (!field_names.insert(f.name).second) Violation("duplicate field \"" + f.name + "\"");
    if (!family_names.contains(f.column_family)) {
      Violation("field \"" + f.name + "\" names unknown family \"" + f.column_family + "\"");
    }
    if (Family(f.column_family).path != f.path) Violation("field \"" + f.name + "\" disagrees with its family path");
    if (f.kind == FieldKind::kText && f.path != UpdatePath::kSegment) {
      Violation("text field \"" + f.name + "\" cannot be routed in-place");
    }
    if (f.fast_search && f.path != UpdatePath::kInPlace) {
      Violation("fast_search on \"" + f.name + "\" requires the in-place path");
    }
  }

  const FieldSpec* pk = FindField(primary_key_);
  if (pk == nullptr) Violation("primary key \"" + primary_key_ + "\" is not a declared field");
  if (pk->kind != FieldKind::kKeyword || pk->path != UpdatePath::kSegment) {
    Violation("primary key \"" + primary_key_ + "\" must be a keyword field on the segment path");
  }
}

json IndexSchema::ToJson() const {
  json families = json::array();
  for (const ColumnFamily& cf : families_) {
    families.push_back({{"name", cf.name},
                        {"freshness_sla_ms", cf.freshness_sla_ms},
                        {"path", std::string(UpdatePathName(cf.path))}});
  }
  json fields = json::array();
  for (const FieldSpec& f : fields_) {
    fields.push_back({{"name", f.name},
                      {"kind", std::string(FieldKindName(f.kind))},
                      {"family", f.column_family},
                      {"fast_search", f.fast_search}});
  }
  return {{"index", index_name_}, {"primary_key", primary_key_}, {"families", families}, {"fields", fields}};
}

const FieldSpec* IndexSchema::FindField(std::string_view name) const {
  for (const FieldSpec& f : fields_) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

const FieldSpec& IndexSchema::Field(std::string_view name) const {
  const FieldSpec* f = FindField(name);
  if (f == nullptr) throw Error(ErrorCode::kUnknownField, "\"" + std::string(name) + "\"");
  return *f;
}

FieldId IndexSchema::IdOf(std::string_view name) const {
  return static_cast<FieldId>(&Field(name) - fields_.data());
}

const ColumnFamily& IndexSchema::Family(std::string_view name) const {
  for (const ColumnFamily& cf : families_) {
    if (cf.name == name) return cf;
  }
  throw Error(ErrorCode::kConstraintViolation, "unknown family \"" + std::string(name) + "\"");
}

Route IndexSchema::RouteOf(std::string_view field) const {
  const FieldSpec& f = Field(field);
  return Route{f.path, TopicFor(field)};
}

std::string IndexSchema::TopicFor(std::string_view field) const {
  return index_name_ + "." + std::string(field);
}

std::vector<std::string> IndexSchema::TopicsOnPath(UpdatePath path) const {
  std::vector<std::string> topics;
  for (const FieldSpec& f : fields_) {
    if (f.path == path) topics.push_back(TopicFor(f.name));
  }
  return topics;
}

const FieldSpec* IndexSchema::FieldForTopic(std::string_view topic) const {
  if (topic.size() <= index_name_.size() + 1 || topic.substr(0, index_name_.size()) != index_name_ ||
      topic[index_name_.size()] != '.') {
    return nullptr;
  }
  return FindField(topic.substr(index_name_.size() + 1));
}

void IndexSchema::ValidateUpdate(std::string_view field, const Value& value) const {
  const FieldSpec& f = Field(field);
  bool ok = false;
  switch (f.kind) {
    case FieldKind::kText:
    case FieldKind::kKeyword: ok = std::holds_alternative<std::string>(value); break;
    case FieldKind::kInt64: ok = std::holds_alternative<int64_t>(value); break;
    case FieldKind::kFloat64:
      ok = std::holds_alternative<double>(value) || std::holds_alternative<int64_t>(value);
      break;
  }
  if (!ok) {
    throw Error(ErrorCode::kTypeMismatch, "field \"" + f.name + "\" expects " + std::string(FieldKindName(f.kind)) +
                                              ", got " + ValueToString(value));
  }
}

bool operator==(const FieldSpec& a, const FieldSpec& b) {
  return a.name == b.name && a.kind == b.kind && a.path == b.path && a.column_family == b.column_family &&
         a.fast_search == b.fast_search;
}

bool operator==(const ColumnFamily& a, const ColumnFamily& b) {
  return a.name == b.name && a.freshness_sla_ms == b.freshness_sla_ms && a.path == b.path;
}

bool operator==(const IndexSchema& a, const IndexSchema& b) {
  return a.index_name_ == b.index_name_ && a.primary_key_ == b.primary_key_ && a.fields_ == b.fields_ &&
         a.families_ == b.families_;
}

// ---------------------------------------------------------------------------
// Documents

const Value* Document::Find(std::string_view field) const {
  auto it = fields.find(field);
  return it == fields.end() ? nullptr : &it->second;
}

Value ValueFromJson(const FieldSpec& spec, const json& v) {
  switch (spec.kind) {
    case FieldKind::kText:
    case FieldKind::kKeyword:
      if (v.is_string()) return v.get<std::string>();
      break;
    case FieldKind::kInt64:
      if (v.is_number_integer()) return v.get<int64_t>();
      break;
    case FieldKind::kFloat64:
      if (v.is_number_integer()) return static_cast<double>(v.get<int64_t>());
      if (v.is_number_float()) return v.get<double>();
      break;
  }
  throw Error(ErrorCode::kTypeMismatch,
              "field \"" + spec.name + "\" expects " + std::string(FieldKindName(spec.kind)) + ", got " + v.dump());
}

json ValueToJson(const Value& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

std::string ValueToString(const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return "\"" + *s + "\"";
  return ValueToJson(v).dump();
}

Document DocumentFromJson(const IndexSchema& schema, const json& obj) {
  if (!obj.is_object()) throw Error(ErrorCode::kTypeMismatch, "document must be a JSON object");
  Document doc;
  for (const auto& [name, value] : obj.items()) {
    const FieldSpec& spec = schema.Field(name);
    if (value.is_null()) continue;
    doc.fields.emplace(name, ValueFromJson(spec, value));
  }
  const Value* key = doc.Find(schema.primary_key_field());
  if (key == nullptr || std::get<std::string>(*key).empty()) {
    throw Error(ErrorCode::kConstraintViolation, "document lacks primary key \"" + schema.primary_key_field() + "\"");
  }
  return doc;
}

json DocumentToJson(const Document& doc) {
  json out = json::object();
  for (const auto& [name, value] : doc.fields) out[name] = ValueToJson(value);
  return out;
}

const std::string& PrimaryKeyOf(const IndexSchema& schema, const Document& doc) {
  const Value* key = doc.Find(schema.primary_key_field());
  if (key == nullptr) {
    throw Error(ErrorCode::kConstraintViolation, "document lacks primary key \"" + schema.primary_key_field() + "\"");
  }
  return std::get<std::string>(*key);
}

}  // namespace scalesearch
