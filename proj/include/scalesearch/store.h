#pragma once

// Shared object storage: immutable put/get/list over slash-separated keys.
// Write nodes upload sealed segments here and search nodes poll it; nothing
// else connects the two paths.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "scalesearch/instrument.h"

namespace scalesearch {

class ObjectStore {
 public:
  virtual ~ObjectStore() = default;

  // Throws kAlreadyExists when the key is present, kIOError on failure.
  virtual void Put(std::string_view key, std::string_view bytes) = 0;
  // Throws kNotFound.
  virtual std::string Get(std::string_view key) const = 0;
  // Keys with `prefix` that sort strictly after `after`, ascending.
  virtual std::vector<std::string> List(std::string_view prefix, std::string_view after = {}) const = 0;
  virtual bool Exists(std::string_view key) const = 0;
};

class MemoryObjectStore : public ObjectStore {
 public:
  void Put(std::string_view key, std::string_view bytes) override;
  std::string Get(std::string_view key) const override;
  std::vector<std::string> List(std::string_view prefix, std::string_view after = {}) const override;
  bool Exists(std::string_view key) const override;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string, std::less<>> objects_;
};

// One file per key under `root`. Objects appear atomically through
// write-to-temp and rename; temp files are invisible to List.
class FileObjectStore : public ObjectStore {
 public:
  explicit FileObjectStore(std::filesystem::path root);

  void Put(std::string_view key, std::string_view bytes) override;
  std::string Get(std::string_view key) const override;
  std::vector<std::string> List(std::string_view prefix, std::string_view after = {}) const override;
  bool Exists(std::string_view key) const override;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path PathOf(std::string_view key) const;

  std::filesystem::path root_;
  mutable std::mutex mu_;  // serializes the exists-check and rename of Put
};

// Counts every call into the calling thread's current node (NodeScope),
// falling back to `owner` when set.
class InstrumentedStore : public ObjectStore {
 public:
  explicit InstrumentedStore(std::shared_ptr<ObjectStore> inner, NodeCounters* owner = nullptr);

  void Put(std::string_view key, std::string_view bytes) override;
  std::string Get(std::string_view key) const override;
  std::vector<std::string> List(std::string_view prefix, std::string_view after = {}) const override;
  bool Exists(std::string_view key) const override;

  ObjectStore& inner() { return *inner_; }

 private:
  NodeCounters* Target() const;

  std::shared_ptr<ObjectStore> inner_;
  NodeCounters* owner_;
};

// Rejects keys that are empty, absolute, or have an empty component or one
// starting with ".".
void ValidateObjectKey(std::string_view key);

}  // namespace scalesearch
