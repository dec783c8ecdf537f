#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "relay/metrics.hpp"
#include "relay/services/backend.hpp"
#include "relay/services/registry.hpp"

namespace relay {

enum class Routing { random, least_loaded };
enum class FaultMode { kill, revive };

struct ServiceOptions {
  Routing routing = Routing::random;
  double refresh_interval_seconds = 5.0;
};

/// Client-side entry point to every generation service: picks a replica from
/// the cached registry, dispatches directly to it, and on ReplicaUnavailable
/// refreshes the cache and reroutes, up to `retry_limit` retries per request.
class ServiceHub {
 public:
  ServiceHub(Executor& executor, MetricsRegistry& metrics, std::uint32_t retry_limit = 3)
      : executor_(executor),
        metrics_(metrics),
        registry_(executor),
        retry_limit_(retry_limit),
        requests_(metrics.counter("service_requests_total")),
        retries_(metrics.counter("service_retries_total")),
        failures_(metrics.counter("service_failures_total")) {
    collector_ = metrics_.add_collector([this](RunMetrics& m) { collect(m); });
  }

  ~ServiceHub() { metrics_.remove_collector(collector_); }

  ServiceHub(const ServiceHub&) = delete;
  ServiceHub& operator=(const ServiceHub&) = delete;

  void add_service(const std::string& name, std::vector<ServiceReplica> replicas,
                   std::shared_ptr<LlmBackend> backend, ServiceOptions options = {}) {
    registry_.register_service(name, std::move(replicas), options.refresh_interval_seconds);
    std::lock_guard lock(mu_);
    services_[name] = Service{std::move(backend), options};
  }

  bool has_service(const std::string& name) const {
    std::lock_guard lock(mu_);
    return services_.count(name) > 0;
  }

  ReplicaRegistry& registry() { return registry_; }
  LlmBackend& backend(const std::string& name) const { return *find(name).backend; }
  std::uint32_t retry_limit() const { return retry_limit_; }

  /// Completion is delivered on the executor. Fails with NoReplicas when the
  /// live set is empty even after a forced refresh, or with the last
  /// ReplicaUnavailable once retries are exhausted.
  void generate(const std::string& service, GenerationRequest req, GenerateCallback done) {
    requests_.fetch_add(1, std::memory_order_relaxed);
    auto call = std::make_shared<Call>(Call{service, std::move(req), std::move(done), 0});
    attempt(std::move(call));
  }

  void inject_fault(const std::string& service, const std::string& replica_id, FaultMode mode) {
    const bool alive = mode == FaultMode::revive;
    registry_.set_alive(service, replica_id, alive);
    find(service).backend->set_alive(replica_id, alive);
    metrics_.add(alive ? "faults_revived_total" : "faults_killed_total");
  }

  std::uint64_t pending_requests() const {
    std::uint64_t n = 0;
    std::lock_guard lock(mu_);
    for (const auto& [name, s] : services_)
      for (const auto& l : s.backend->loads()) n += l.in_service + l.queued;
    return n;
  }

  /// Busy slot-seconds over all replicas of all services.
  double busy_slot_seconds() const {
    double busy = 0;
    std::lock_guard lock(mu_);
    for (const auto& [name, s] : services_)
      for (const auto& l : s.backend->loads()) busy += l.busy_slot_seconds;
    return busy;
  }

  std::uint64_t total_slots() const {
    std::uint64_t slots = 0;
    for (const auto& name : registry_.services())
      for (const auto& r : registry_.all(name)) slots += r.capacity;
    return slots;
  }

 private:
  struct Service {
    std::shared_ptr<LlmBackend> backend;
    ServiceOptions options;
  };
  struct Call {
    std::string service;
    GenerationRequest req;
    GenerateCallback done;
    std::uint32_t attempt;
  };

  const Service& find(const std::string& name) const {
    std::lock_guard lock(mu_);
    auto it = services_.find(name);
    if (it == services_.end()) throw Error(Errc::unknown_service, name);
    return it->second;
  }

  void finish(const std::shared_ptr<Call>& call, Result<GenerationResponse> result) {
    if (!result.ok()) failures_.fetch_add(1, std::memory_order_relaxed);
    auto done = std::move(call->done);
    done(std::move(result));
  }

  void attempt(std::shared_ptr<Call> call) {
    const Service* service = nullptr;
    ReplicaList replicas;
    try {
      service = &find(call->service);
      replicas = registry_.list(call->service);
      if (replicas->empty()) replicas = registry_.refresh(call->service);
    } catch (const Error& e) {
      executor_.post([this, call, e] { finish(call, e); });
      return;
    }
    if (replicas->empty()) {
      executor_.post([this, call] { finish(call, Error(Errc::no_replicas, "no live replicas for " + call->service)); });
      return;
    }

    std::size_t pick = 0;
    if (service->options.routing == Routing::least_loaded) {
      std::uint64_t best = UINT64_MAX;
      for (std::size_t i = 0; i < replicas->size(); ++i) {
        auto load = service->backend->load((*replicas)[i].replica_id);
        if (load < best) {
          best = load;
          pick = i;
        }
      }
    } else {
      pick = bounded(mix_seed(call->req.seed, call->attempt), replicas->size());
    }

    const ServiceReplica replica = (*replicas)[pick];
    auto backend = service->backend;
    backend->submit(replica, call->req, [this, call](Result<GenerationResponse> r) {
      if (r.ok() || r.error().code() != Errc::replica_unavailable) {
        finish(call, std::move(r));
        return;
      }
      registry_.refresh(call->service);
      if (call->attempt >= retry_limit_) {
        finish(call, std::move(r));
        return;
      }
      ++call->attempt;
      retries_.fetch_add(1, std::memory_order_relaxed);
      attempt(call);
    });
  }

  void collect(RunMetrics& m) const {
    std::lock_guard lock(mu_);
    double pending = 0;
    for (const auto& [name, s] : services_) {
      for (const auto& l : s.backend->loads()) {
        const auto key = name + "/" + l.replica_id;
        m.gauges[metric_key("replica_in_service", "replica", key)] = l.in_service;
        m.gauges[metric_key("replica_peak_in_service", "replica", key)] = l.peak_in_service;
        m.gauges[metric_key("replica_queued", "replica", key)] = static_cast<double>(l.queued);
        pending += l.in_service + static_cast<double>(l.queued);
      }
    }
    m.gauges["pending_service_requests"] = pending;
  }

  Executor& executor_;
  MetricsRegistry& metrics_;
  ReplicaRegistry registry_;
  std::uint32_t retry_limit_;
  std::uint64_t collector_ = 0;
  MetricsRegistry::Counter& requests_;
  MetricsRegistry::Counter& retries_;
  MetricsRegistry::Counter& failures_;
  mutable std::mutex mu_;
  std::map<std::string, Service> services_;
};

}  // namespace relay
