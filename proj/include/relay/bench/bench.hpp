#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "relay/bench/oracle.hpp"
#include "relay/runtime/runtime.hpp"
#include "relay/services/sim_llm.hpp"
#include "relay/workloads/synthetic.hpp"

namespace relay {

struct Fleet {
  std::uint32_t replicas = 1;
  std::uint32_t capacity = 1;
};

struct BenchResult {
  double makespan_seconds = 0;
  double throughput_tasks_per_second = 0;
  double tokens_per_second = 0;
  double replica_utilization = 0;
  std::uint64_t peak_in_flight = 0;
  std::uint64_t completed = 0;
  std::uint64_t tokens = 0;

  Json to_json() const {
    return Json{{"makespan_seconds", makespan_seconds},
                {"throughput_tasks_per_second", throughput_tasks_per_second},
                {"tokens_per_second", tokens_per_second},
                {"replica_utilization", replica_utilization},
                {"peak_in_flight", peak_in_flight},
                {"completed", completed},
                {"tokens", tokens}};
  }
};

inline BenchResult make_bench_result(double makespan, std::uint64_t completed, std::uint64_t tokens,
                                     double busy_slot_seconds, std::uint64_t slots, std::uint64_t peak) {
  BenchResult r;
  r.makespan_seconds = makespan;
  r.completed = completed;
  r.tokens = tokens;
  r.peak_in_flight = peak;
  if (makespan > 0) {
    r.throughput_tasks_per_second = static_cast<double>(completed) / makespan;
    r.tokens_per_second = static_cast<double>(tokens) / makespan;
    r.replica_utilization = std::min(1.0, busy_slot_seconds / (static_cast<double>(slots) * makespan));
  }
  return r;
}

/// Ratio of row-level to batch-level token throughput.
inline double compare_throughput(const BenchResult& row, const BenchResult& batch) {
  return batch.tokens_per_second > 0 ? row.tokens_per_second / batch.tokens_per_second : 0.0;
}

/// Simulated services for a synthetic workload on a virtual clock, routed to
/// the least-loaded replica.
struct BenchEnvironment {
  VirtualExecutor executor;
  MetricsRegistry metrics;
  ObjectStore store;
  ServiceHub hub;

  BenchEnvironment(const SyntheticWorkload& w, Fleet fleet) : store(UINT64_MAX, w.seed), hub(executor, metrics) {
    for (const auto& [name, latency] : w.services()) {
      auto backend = std::make_shared<SimulatedLlm>(executor, latency);
      std::vector<ServiceReplica> replicas;
      for (std::uint32_t i = 0; i < fleet.replicas; ++i) {
        ServiceReplica r;
        r.replica_id = name + "-" + std::to_string(i);
        r.endpoint = "sim://" + r.replica_id;
        r.capacity = fleet.capacity;
        backend->add_replica(r.replica_id, r.capacity);
        replicas.push_back(r);
      }
      hub.add_service(name, replicas, backend, ServiceOptions{Routing::least_loaded, 5.0});
    }
  }
};

/// Every task becomes an orchestrator run through the agent runtime; a task
/// is admitted the moment another one finishes.
inline BenchResult run_row_level(const SyntheticWorkload& w, Fleet fleet, std::uint64_t max_concurrency,
                                 std::uint32_t instances = 1) {
  BenchEnvironment env(w, fleet);
  RuntimeOptions opts;
  opts.mailbox_capacity = std::max<std::uint64_t>(2 * max_concurrency, 1);
  opts.offload_threshold_bytes = kOffloadDisabled;
  Runtime rt(env.executor, env.hub, env.store, env.metrics, nullptr, opts);
  auto wl = make_synthetic(w, instances);
  rt.create_team(wl.roles, wl.routes);
  NullOutput out;
  auto report = rt.run_dataset({PartitionSpec{std::make_shared<VectorSource>(synthetic_tasks(w)), max_concurrency}},
                               wl.factory, out);
  return make_bench_result(report.makespan(), report.completed, report.metrics.counter("tokens_generated_total"),
                           env.hub.busy_slot_seconds(), env.hub.total_slots(), report.peak_in_flight);
}

/// Batch-level baseline. Workers pull fixed-size batches; the rows of a batch
/// run concurrently with orchestration inlined in the worker (no mailboxes,
/// no serialization), and a worker starts its next batch only after every row
/// of the current one finished.
class BatchRunner {
 public:
  BatchRunner(Executor& executor, ServiceHub& hub, ObjectStore& store, MetricsRegistry& metrics, Workload workload)
      : executor_(executor), workload_(std::move(workload)) {
    for (const auto& r : workload_.roles)
      contexts_[r.name] = StepContext{&executor_, &hub, &store, nullptr, &metrics, AgentId{r.name, 0}, r.service};
  }

  struct Report {
    std::uint64_t completed = 0;
    std::uint64_t tokens = 0;
    std::uint64_t failed = 0;
    std::uint64_t peak_in_flight = 0;
    double makespan = 0;
  };

  Report run(std::vector<TaskInput> tasks, std::uint64_t batch_size, std::uint64_t workers) {
    if (batch_size < 1 || workers < 1) throw Error(Errc::config_error, "batch_size and workers must be >= 1");
    tasks_ = std::move(tasks);
    next_ = 0;
    report_ = {};
    in_flight_ = 0;
    const double start = executor_.now();
    batch_size_ = batch_size;
    left_.assign(workers, 0);
    for (std::uint64_t wk = 0; wk < workers; ++wk) start_batch(wk);
    executor_.drive([this] { return report_.completed == tasks_.size(); });
    report_.makespan = executor_.now() - start;
    return report_;
  }

 private:
  void start_batch(std::uint64_t worker) {
    const std::size_t end = std::min<std::size_t>(tasks_.size(), next_ + batch_size_);
    if (next_ >= end) return;
    left_[worker] = end - next_;
    std::vector<std::shared_ptr<Orchestrator>> rows;
    for (; next_ < end; ++next_) rows.push_back(std::make_shared<Orchestrator>(workload_.factory(tasks_[next_])));
    in_flight_ += rows.size();
    report_.peak_in_flight = std::max(report_.peak_in_flight, in_flight_);
    for (auto& row : rows) step(worker, std::move(row));
  }

  void step(std::uint64_t worker, std::shared_ptr<Orchestrator> orch) {
    const std::string role(current_agent(*orch));
    if (role == kSinkRole) return row_done(worker, *orch);
    auto& ctx = contexts_.at(role);
    auto behavior = workload_.behavior(role);
    behavior->process(orch, ctx, [this, worker, orch](Result<StepResult> r) {
      if (!r.ok()) {
        mark_done(*orch, TaskOutcome::failed(to_string(r.error().code())));
      } else {
        try {
          update(*orch, std::move(r).value(), workload_.routes);
        } catch (const Error& e) {
          if (!orch->outcome) mark_done(*orch, TaskOutcome::failed(to_string(e.code())));
        }
      }
      step(worker, orch);
    });
  }

  void row_done(std::uint64_t worker, const Orchestrator& orch) {
    ++report_.completed;
    --in_flight_;
    report_.tokens += history_total_tokens(orch);
    if (orch.outcome && orch.outcome->status == OutcomeStatus::failed) ++report_.failed;
    if (--left_[worker] == 0) start_batch(worker);
  }

  Executor& executor_;
  Workload workload_;
  std::map<std::string, StepContext> contexts_;
  std::vector<TaskInput> tasks_;
  std::size_t next_ = 0;
  std::uint64_t batch_size_ = 1;
  std::vector<std::size_t> left_;
  std::uint64_t in_flight_ = 0;
  Report report_;
};

inline BenchResult run_batch_level(const SyntheticWorkload& w, Fleet fleet, std::uint64_t batch_size,
                                   std::uint64_t data_parallelism) {
  BenchEnvironment env(w, fleet);
  BatchRunner runner(env.executor, env.hub, env.store, env.metrics, make_synthetic(w));
  auto rep = runner.run(synthetic_tasks(w), batch_size, data_parallelism);
  return make_bench_result(rep.makespan, rep.completed, rep.tokens, env.hub.busy_slot_seconds(),
                           env.hub.total_slots(), rep.peak_in_flight);
}

}  // namespace relay
