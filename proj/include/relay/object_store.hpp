#pragma once

#include <atomic>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "relay/core/model.hpp"
#include "relay/core/seed.hpp"

namespace relay {

/// Threshold value that disables offloading.
inline constexpr std::uint64_t kOffloadDisabled = std::numeric_limits<std::uint64_t>::max();

struct StoreStats {
  std::uint64_t live_objects = 0;
  std::uint64_t live_bytes = 0;
  std::uint64_t total_puts = 0;
  std::uint64_t total_gets = 0;
  std::uint64_t total_deletes = 0;
  std::uint64_t ignored_deletes = 0;  // unknown or already-deleted ids
};

/// In-process store of immutable blobs. Safe for concurrent use.
class ObjectStore {
 public:
  explicit ObjectStore(std::uint64_t byte_budget = std::numeric_limits<std::uint64_t>::max(),
                       std::uint64_t salt = 0)
      : byte_budget_(byte_budget), id_hi_(splitmix64(salt)) {}

  ObjectStore(const ObjectStore&) = delete;
  ObjectStore& operator=(const ObjectStore&) = delete;

  /// Stores `content` under a fresh id. `owner` tags the object for per-task
  /// audits; it has no effect on retrieval.
  ObjectId put(Bytes content, std::string owner = {}) {
    if (content.empty()) throw std::invalid_argument("ObjectStore::put: empty content");
    const auto size = content.size();
    std::unique_lock lock(mu_);
    if (live_bytes_ + size > byte_budget_ || live_bytes_ + size < live_bytes_)
      throw Error(Errc::store_full, "budget of " + std::to_string(byte_budget_) + " bytes exceeded");
    ObjectId id{id_hi_, ++next_lo_};
    objects_.emplace(id, Entry{std::make_shared<const Bytes>(std::move(content)), std::move(owner)});
    live_bytes_ += size;
    ++puts_;
    return id;
  }

  std::shared_ptr<const Bytes> get(const ObjectId& id) const {
    std::shared_lock lock(mu_);
    auto it = objects_.find(id);
    if (it == objects_.end()) throw Error(Errc::not_found, "object " + id.hex());
    gets_.fetch_add(1, std::memory_order_relaxed);
    return it->second.data;
  }

  /// Idempotent. Unknown ids are ignored and counted.
  void erase(std::span<const ObjectId> ids) {
    std::unique_lock lock(mu_);
    for (const auto& id : ids) {
      auto it = objects_.find(id);
      if (it == objects_.end()) {
        ++ignored_deletes_;
        continue;
      }
      live_bytes_ -= it->second.data->size();
      objects_.erase(it);
      ++deletes_;
    }
  }

  StoreStats stats() const {
    std::shared_lock lock(mu_);
    return {objects_.size(), live_bytes_, puts_, gets_.load(std::memory_order_relaxed), deletes_, ignored_deletes_};
  }

  std::uint64_t live_objects_owned_by(const std::string& owner) const {
    std::shared_lock lock(mu_);
    std::uint64_t n = 0;
    for (const auto& [id, e] : objects_) n += (e.owner == owner);
    return n;
  }

 private:
  struct Entry {
    std::shared_ptr<const Bytes> data;
    std::string owner;
  };

  mutable std::shared_mutex mu_;
  std::unordered_map<ObjectId, Entry, ObjectIdHash> objects_;
  std::uint64_t byte_budget_;
  std::uint64_t id_hi_;
  std::uint64_t next_lo_ = 0;
  std::uint64_t live_bytes_ = 0;
  std::uint64_t puts_ = 0;
  std::uint64_t deletes_ = 0;
  std::uint64_t ignored_deletes_ = 0;
  mutable std::atomic<std::uint64_t> gets_{0};
};

/// Moves inline content strictly larger than `threshold_bytes` into the
/// store. Declared size is unchanged either way.
inline HistoryEntry offload_history(HistoryEntry entry, std::uint64_t threshold_bytes, ObjectStore& store,
                                    const std::string& owner = {}) {
  if (!entry.content.is_inline()) throw Error(Errc::invalid_state, "entry already offloaded");
  if (threshold_bytes == kOffloadDisabled) return entry;
  const auto size = entry.content.size();
  if (size <= threshold_bytes) return entry;
  Bytes data = entry.content.bytes();
  auto id = store.put(std::move(data), owner);
  entry.content = ContentSlot::offloaded(id, size);
  return entry;
}

/// Materializes every entry's content in history order.
inline std::vector<Bytes> resolve_history(std::span<const HistoryEntry> entries, const ObjectStore& store) {
  std::vector<Bytes> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.content.is_inline())
      out.push_back(e.content.bytes());
    else
      out.push_back(*store.get(e.content.ref().object_id));
  }
  return out;
}

inline std::vector<ObjectId> offloaded_ids(const Orchestrator& orch) {
  std::vector<ObjectId> ids;
  for (const auto& e : orch.history)
    if (!e.content.is_inline()) ids.push_back(e.content.ref().object_id);
  return ids;
}

}  // namespace relay
