#include "scalesearch/store.h"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <system_error>

#include "scalesearch/error.h"

namespace scalesearch {

namespace fs = std::filesystem;

void ValidateObjectKey(std::string_view key) {
  if (key.empty() || key.front() == '/') {
    throw Error(ErrorCode::kInvalidArgument, "invalid object key \"" + std::string(key) + "\"");
  }
  size_t start = 0;
  while (start <= key.size()) {
    const size_t end = std::min(key.find('/', start), key.size());
    const std::string_view part = key.substr(start, end - start);
    if (part.empty() || part.front() == '.') {
      throw Error(ErrorCode::kInvalidArgument, "invalid object key \"" + std::string(key) + "\"");
    }
    start = end + 1;
  }
}

// ---------------------------------------------------------------------------
// MemoryObjectStore

void MemoryObjectStore::Put(std::string_view key, std::string_view bytes) {
  ValidateObjectKey(key);
  std::lock_guard lock(mu_);
  if (!objects_.emplace(std::string(key), std::string(bytes)).second) {
    throw Error(ErrorCode::kAlreadyExists, "object \"" + std::string(key) + "\" already exists");
  }
}

std::string MemoryObjectStore::Get(std::string_view key) const {
  std::lock_guard lock(mu_);
  auto it = objects_.find(key);
  if (it == objects_.end()) throw Error(ErrorCode::kNotFound, "object \"" + std::string(key) + "\" not found");
  return it->second;
}

std::vector<std::string> MemoryObjectStore::List(std::string_view prefix, std::string_view after) const {
  std::lock_guard lock(mu_);
  std::vector<std::string> keys;
  auto it = after >= prefix ? objects_.upper_bound(after) : objects_.lower_bound(prefix);
  for (; it != objects_.end(); ++it) {
    if (!it->first.starts_with(prefix)) {
      if (it->first > prefix) break;
      continue;
    }
    keys.push_back(it->first);
  }
  return keys;
}

bool MemoryObjectStore::Exists(std::string_view key) const {
  std::lock_guard lock(mu_);
  return objects_.find(key) != objects_.end();
}

// ---------------------------------------------------------------------------
// FileObjectStore

FileObjectStore::FileObjectStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw Error(ErrorCode::kIOError, "cannot create store root " + root_.string() + ": " + ec.message());
}

fs::path FileObjectStore::PathOf(std::string_view key) const {
  ValidateObjectKey(key);
  return root_ / fs::path(std::string(key));
}

void FileObjectStore::Put(std::string_view key, std::string_view bytes) {
  const fs::path path = PathOf(key);
  std::lock_guard lock(mu_);
  if (fs::exists(path)) throw Error(ErrorCode::kAlreadyExists, "object \"" + std::string(key) + "\" already exists");
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::kIOError, "cannot create " + path.parent_path().string() + ": " + ec.message());

  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::ostringstream tmp_name;
  tmp_name << ".tmp-" << std::hex << rng();
  const fs::path tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw Error(ErrorCode::kIOError, "cannot write " + tmp.string());
    }
  }
  RecordFileWrite(bytes.size());
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::kIOError, "cannot publish " + path.string());
  }
}

std::string FileObjectStore::Get(std::string_view key) const {
  const fs::path path = PathOf(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "object \"" + std::string(key) + "\" not found");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIOError, "cannot read " + path.string());
  return std::move(buf).str();
}

std::vector<std::string> FileObjectStore::List(std::string_view prefix, std::string_view after) const {
  const size_t slash = prefix.rfind('/');
  const fs::path dir = slash == std::string_view::npos ? root_ : root_ / std::string(prefix.substr(0, slash));
  std::vector<std::string> keys;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return keys;
  for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    if (it->path().filename().string().starts_with('.')) continue;
    std::string key = fs::relative(it->path(), root_).generic_string();
    if (key.starts_with(prefix) && key > after) keys.push_back(std::move(key));
  }
  if (ec) throw Error(ErrorCode::kIOError, "cannot list " + dir.string() + ": " + ec.message());
  std::sort(keys.begin(), keys.end());
  return keys;
}

bool FileObjectStore::Exists(std::string_view key) const { return fs::exists(PathOf(key)); }

// ---------------------------------------------------------------------------
// InstrumentedStore

InstrumentedStore::InstrumentedStore(std::shared_ptr<ObjectStore> inner, NodeCounters* owner)
    : inner_(std::move(inner)), owner_(owner) {}

NodeCounters* InstrumentedStore::Target() const {
  NodeCounters* node = CurrentNode();
  return node ? node : owner_;
}

void InstrumentedStore::Put(std::string_view key, std::string_view bytes) {
  if (NodeCounters* n = Target()) {
    n->store_puts.fetch_add(1, std::memory_order_relaxed);
    n->store_put_bytes.fetch_add(bytes.size(), std::memory_order_relaxed);
  }
  inner_->Put(key, bytes);
}

std::string InstrumentedStore::Get(std::string_view key) const {
  std::string bytes = inner_->Get(key);
  if (NodeCounters* n = Target()) {
    n->store_gets.fetch_add(1, std::memory_order_relaxed);
    n->store_get_bytes.fetch_add(bytes.size(), std::memory_order_relaxed);
  }
  return bytes;
}

std::vector<std::string> InstrumentedStore::List(std::string_view prefix, std::string_view after) const {
  if (NodeCounters* n = Target()) n->store_lists.fetch_add(1, std::memory_order_relaxed);
  return inner_->List(prefix, after);
}

bool InstrumentedStore::Exists(std::string_view key) const { return inner_->Exists(key); }

}  // namespace scalesearch
