#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "relay/runtime/executor.hpp"
#include "relay/services/types.hpp"

namespace relay {

using ReplicaList = std::shared_ptr<const std::vector<ServiceReplica>>;

/// Authoritative replica table plus the client-side cache of live replicas.
///
/// Readers get the cached list, which may lag the authoritative liveness by
/// up to the refresh interval. A refresh replaces the cache atomically.
class ReplicaRegistry {
 public:
  explicit ReplicaRegistry(const Executor& clock) : clock_(clock) {}

  void register_service(const std::string& name, std::vector<ServiceReplica> replicas,
                        double refresh_interval_seconds = 5.0) {
    std::lock_guard lock(mu_);
    auto& s = services_[name];
    s.replicas = std::move(replicas);
    s.refresh_interval = refresh_interval_seconds;
    s.cache = live_set(s);
    s.refreshed_at = clock_.now();
  }

  bool has_service(const std::string& name) const {
    std::lock_guard lock(mu_);
    return services_.count(name) > 0;
  }

  /// Cached replica set; refreshed first if the cache is older than the
  /// refresh interval.
  ReplicaList list(const std::string& name) {
    std::lock_guard lock(mu_);
    auto& s = find(name);
    if (clock_.now() - s.refreshed_at >= s.refresh_interval) {
      s.cache = live_set(s);
      s.refreshed_at = clock_.now();
    }
    return s.cache;
  }

  ReplicaList refresh(const std::string& name) {
    std::lock_guard lock(mu_);
    auto& s = find(name);
    s.cache = live_set(s);
    s.refreshed_at = clock_.now();
    return s.cache;
  }

  void set_alive(const std::string& name, const std::string& replica_id, bool alive) {
    std::lock_guard lock(mu_);
    auto& s = find(name);
    for (auto& r : s.replicas) {
      if (r.replica_id == replica_id) {
        r.alive = alive;
        return;
      }
    }
    throw Error(Errc::unknown_replica, name + "/" + replica_id);
  }

  /// Authoritative table, dead replicas included.
  std::vector<ServiceReplica> all(const std::string& name) const {
    std::lock_guard lock(mu_);
    auto it = services_.find(name);
    if (it == services_.end()) throw Error(Errc::unknown_service, name);
    return it->second.replicas;
  }

  std::vector<std::string> services() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> names;
    for (const auto& [k, v] : services_) names.push_back(k);
    return names;
  }

 private:
  struct Service {
    std::vector<ServiceReplica> replicas;
    ReplicaList cache;
    double refresh_interval = 5.0;
    double refreshed_at = 0.0;
  };

  static ReplicaList live_set(const Service& s) {
    auto live = std::make_shared<std::vector<ServiceReplica>>();
    for (const auto& r : s.replicas)
      if (r.alive) live->push_back(r);
    return live;
  }

  Service& find(const std::string& name) {
    auto it = services_.find(name);
    if (it == services_.end()) throw Error(Errc::unknown_service, name);
    return it->second;
  }

  const Executor& clock_;
  mutable std::mutex mu_;
  std::map<std::string, Service> services_;
};

}  // namespace relay
