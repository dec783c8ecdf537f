#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "relay/core/model.hpp"
#include "relay/core/seed.hpp"

namespace relay {

/// A stateful environment instance: an in-process key-value machine driven by
/// text commands. Commands run one at a time per container.
///
///   set <key> <value>   -> "ok"
///   get <key>           -> value, or "null"
///   del <key>           -> "ok" | "missing"
///   reset               -> "ok"   (back to the seeded initial state)
///   hash                -> state hash as 16 hex digits
class Container {
 public:
  Container(std::string container_id, std::uint64_t instance_no, std::uint64_t seed)
      : id_(std::move(container_id)), instance_no_(instance_no), seed_(seed) {
    reset_locked();
  }

  const std::string& id() const { return id_; }
  std::uint64_t instance_no() const { return instance_no_; }

  Bytes execute(std::string_view command) {
    std::lock_guard lock(mu_);
    if (released_) throw Error(Errc::dead_container, id_);
    commands_.emplace_back(command);
    return apply(command);
  }

  std::uint64_t state_hash() const {
    std::lock_guard lock(mu_);
    return hash_locked();
  }

  std::map<std::string, std::string> state() const {
    std::lock_guard lock(mu_);
    return state_;
  }

  /// Commands executed since acquisition, in order.
  std::vector<std::string> command_log() const {
    std::lock_guard lock(mu_);
    return commands_;
  }

  bool released() const {
    std::lock_guard lock(mu_);
    return released_;
  }

 private:
  friend class ContainerPool;

  void release() {
    std::lock_guard lock(mu_);
    released_ = true;
  }

  void reset_locked() {
    state_.clear();
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(mix_seed(seed_, id_)));
    state_["session"] = buf;
  }

  std::uint64_t hash_locked() const {
    std::uint64_t h = fnv1a(id_);
    for (const auto& [k, v] : state_) h = mix_seed(mix_seed(h, k), v);
    return h;
  }

  Bytes apply(std::string_view command) {
    std::istringstream in{std::string(command)};
    std::string op, key, value;
    in >> op;
    if (op == "set") {
      in >> key;
      std::getline(in >> std::ws, value);
      if (key.empty()) return "error missing key";
      state_[key] = value;
      return "ok";
    }
    if (op == "get") {
      in >> key;
      auto it = state_.find(key);
      return it == state_.end() ? "null" : it->second;
    }
    if (op == "del") {
      in >> key;
      return state_.erase(key) ? "ok" : "missing";
    }
    if (op == "reset") {
      reset_locked();
      return "ok";
    }
    if (op == "hash") {
      char buf[17];
      std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash_locked()));
      return buf;
    }
    return "error unknown command '" + op + "'";
  }

  const std::string id_;
  const std::uint64_t instance_no_;
  const std::uint64_t seed_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> state_;
  std::vector<std::string> commands_;
  bool released_ = false;
};

struct ContainerHandle {
  std::string container_id;
  std::string owner_task;
  std::shared_ptr<Container> instance;
};

/// Bounded pool of containers addressed by id. Acquiring a live id returns
/// the instance already mapped to it, so successive commands for one task
/// reach the same state.
class ContainerPool {
 public:
  ContainerPool(std::size_t capacity, std::uint64_t seed = 0) : capacity_(capacity), seed_(seed) {}

  ContainerHandle acquire(const std::string& container_id, const std::string& owner) {
    std::lock_guard lock(mu_);
    auto it = live_.find(container_id);
    if (it != live_.end()) {
      if (it->second.owner != owner)
        throw Error(Errc::container_conflict, container_id + " is owned by " + it->second.owner);
      return {container_id, owner, it->second.instance};
    }
    if (live_.size() >= capacity_)
      throw Error(Errc::pool_exhausted, "all " + std::to_string(capacity_) + " containers in use");
    auto inst = std::make_shared<Container>(container_id, ++instances_created_, seed_);
    live_.emplace(container_id, Slot{owner, inst});
    return {container_id, owner, inst};
  }

  Bytes execute(const ContainerHandle& handle, std::string_view command) {
    if (!handle.instance) throw Error(Errc::dead_container, handle.container_id);
    return handle.instance->execute(command);
  }

  /// Idempotent. Waits for a command in progress on the container to finish.
  void release(const std::string& container_id) {
    std::shared_ptr<Container> inst;
    {
      std::lock_guard lock(mu_);
      auto it = live_.find(container_id);
      if (it == live_.end()) return;
      inst = it->second.instance;
      live_.erase(it);
    }
    inst->release();
  }

  void release(const ContainerHandle& handle) { release(handle.container_id); }

  std::size_t live() const {
    std::lock_guard lock(mu_);
    return live_.size();
  }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t instances_created() const {
    std::lock_guard lock(mu_);
    return instances_created_;
  }

 private:
  struct Slot {
    std::string owner;
    std::shared_ptr<Container> instance;
  };

  const std::size_t capacity_;
  const std::uint64_t seed_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, Slot> live_;
  std::uint64_t instances_created_ = 0;
};

}  // namespace relay
