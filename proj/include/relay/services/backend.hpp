#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "relay/runtime/executor.hpp"
#include "relay/services/types.hpp"

namespace relay {

struct ReplicaLoad {
  std::string replica_id;
  std::uint32_t capacity = 0;
  std::uint32_t in_service = 0;
  std::uint32_t peak_in_service = 0;
  std::size_t queued = 0;
  double busy_slot_seconds = 0;
  std::uint64_t served = 0;
};

/// A generation service reachable through a set of replicas.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;

  /// Completion is always delivered through the executor, never inline.
  virtual void submit(const ServiceReplica& replica, GenerationRequest req, GenerateCallback done) = 0;

  /// Marks a replica dead (in-flight and queued requests fail with
  /// ReplicaUnavailable) or alive again.
  virtual void set_alive(const std::string& replica_id, bool alive) = 0;

  virtual std::vector<ReplicaLoad> loads() const = 0;

  /// Requests in service plus queued on one replica.
  virtual std::uint64_t load(const std::string& replica_id) const = 0;
};

/// Per-replica capacity accounting shared by the simulated and HTTP
/// backends: at most `capacity` requests in service per replica, the rest
/// wait in a FIFO queue on that replica.
class SlotBackend : public LlmBackend {
 public:
  explicit SlotBackend(Executor& executor) : executor_(executor) {}

  void add_replica(const std::string& replica_id, std::uint32_t capacity) {
    std::lock_guard lock(mu_);
    auto& r = replicas_[replica_id];
    r.capacity = std::max<std::uint32_t>(capacity, 1);
  }

  void submit(const ServiceReplica& replica, GenerationRequest req, GenerateCallback done) override {
    std::unique_lock lock(mu_);
    auto it = replicas_.find(replica.replica_id);
    if (it == replicas_.end() || !it->second.alive) {
      lock.unlock();
      fail_later(std::move(done), replica.replica_id);
      return;
    }
    Job job{next_job_++, std::move(req), std::move(done), 0.0};
    auto& r = it->second;
    if (r.in_service < r.capacity) {
      auto launch_req = job.req;
      auto id = job.id;
      activate(r, std::move(job));
      lock.unlock();
      launch(replica.replica_id, id, launch_req);
    } else {
      r.queue.push_back(std::move(job));
    }
  }

  void set_alive(const std::string& replica_id, bool alive) override {
    std::vector<GenerateCallback> failed;
    {
      std::lock_guard lock(mu_);
      auto it = replicas_.find(replica_id);
      if (it == replicas_.end()) throw Error(Errc::unknown_replica, replica_id);
      auto& r = it->second;
      r.alive = alive;
      if (!alive) {
        const double now = executor_.now();
        for (auto& [id, job] : r.active) {
          r.busy_slot_seconds += now - job.started;
          failed.push_back(std::move(job.done));
        }
        r.active.clear();
        r.in_service = 0;
        for (auto& job : r.queue) failed.push_back(std::move(job.done));
        r.queue.clear();
      }
    }
    for (auto& cb : failed) fail_later(std::move(cb), replica_id);
  }

  std::vector<ReplicaLoad> loads() const override {
    std::lock_guard lock(mu_);
    std::vector<ReplicaLoad> out;
    const double now = executor_.now();
    for (const auto& [id, r] : replicas_) {
      double busy = r.busy_slot_seconds;
      for (const auto& [jid, job] : r.active) busy += now - job.started;
      out.push_back({id, r.capacity, r.in_service, r.peak, r.queue.size(), busy, r.served});
    }
    return out;
  }

  std::uint64_t load(const std::string& replica_id) const override {
    std::lock_guard lock(mu_);
    auto it = replicas_.find(replica_id);
    return it == replicas_.end() ? 0 : it->second.in_service + it->second.queue.size();
  }

 protected:
  /// Starts serving a request that already holds a slot. Implementations call
  /// `complete` exactly once, from an executor task.
  virtual void launch(const std::string& replica_id, std::uint64_t job_id, const GenerationRequest& req) = 0;

  /// Frees the slot and hands the next queued request to `launch`. A no-op if
  /// the replica was killed while the request was in service.
  void complete(const std::string& replica_id, std::uint64_t job_id, Result<GenerationResponse> result) {
    GenerateCallback done;
    std::optional<std::pair<std::uint64_t, GenerationRequest>> next;
    {
      std::lock_guard lock(mu_);
      auto& r = replicas_.at(replica_id);
      auto it = r.active.find(job_id);
      if (it == r.active.end()) return;
      done = std::move(it->second.done);
      r.busy_slot_seconds += executor_.now() - it->second.started;
      r.active.erase(it);
      --r.in_service;
      ++r.served;
      if (!r.queue.empty() && r.alive) {
        Job job = std::move(r.queue.front());
        r.queue.pop_front();
        next.emplace(job.id, job.req);
        activate(r, std::move(job));
      }
    }
    if (next) launch(replica_id, next->first, next->second);
    done(std::move(result));
  }

  Executor& executor() { return executor_; }

 private:
  struct Job {
    std::uint64_t id;
    GenerationRequest req;
    GenerateCallback done;
    double started;
  };
  struct Replica {
    std::uint32_t capacity = 1;
    bool alive = true;
    std::uint32_t in_service = 0;
    std::uint32_t peak = 0;
    std::deque<Job> queue;
    std::unordered_map<std::uint64_t, Job> active;
    double busy_slot_seconds = 0;
    std::uint64_t served = 0;
  };

  void activate(Replica& r, Job job) {
    job.started = executor_.now();
    ++r.in_service;
    r.peak = std::max(r.peak, r.in_service);
    r.active.emplace(job.id, std::move(job));
  }

  void fail_later(GenerateCallback done, const std::string& replica_id) {
    executor_.post([done = std::move(done), replica_id] {
      done(Error(Errc::replica_unavailable, "replica " + replica_id + " unavailable"));
    });
  }

  Executor& executor_;
  mutable std::mutex mu_;
  std::map<std::string, Replica> replicas_;
  std::uint64_t next_job_ = 0;
};

}  // namespace relay
