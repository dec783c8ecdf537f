#pragma once

#include <atomic>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "relay/core/codec.hpp"
#include "relay/metrics.hpp"
#include "relay/object_store.hpp"
#include "relay/orchestration.hpp"
#include "relay/runtime/admission_gate.hpp"
#include "relay/runtime/executor.hpp"
#include "relay/runtime/io.hpp"
#include "relay/runtime/mailbox.hpp"
#include "relay/services/containers.hpp"
#include "relay/services/hub.hpp"

namespace relay {

/// Everything a behavior may touch while processing a step. One context per
/// agent instance, alive as long as the runtime.
struct StepContext {
  Executor* executor = nullptr;
  ServiceHub* services = nullptr;
  ObjectStore* store = nullptr;
  ContainerPool* containers = nullptr;
  MetricsRegistry* metrics = nullptr;
  AgentId agent;
  std::string service;  // the role's service binding, may be empty

  /// Materialized history contents, fetching offloaded entries.
  std::vector<Bytes> contents(const Orchestrator& orch) const { return resolve_history(orch.history, *store); }
};

using StepCallback = std::function<void(Result<StepResult>)>;

/// Stateless processing logic for one role. `process` reports exactly once
/// through `done`, possibly later from another executor task; it must not
/// mutate the orchestrator.
class Behavior {
 public:
  virtual ~Behavior() = default;
  virtual void process(std::shared_ptr<const Orchestrator> orch, const StepContext& ctx, StepCallback done) = 0;
};

/// Adapts a lambda to Behavior.
class FunctionBehavior final : public Behavior {
 public:
  using Fn = std::function<void(std::shared_ptr<const Orchestrator>, const StepContext&, StepCallback)>;
  explicit FunctionBehavior(Fn fn) : fn_(std::move(fn)) {}
  void process(std::shared_ptr<const Orchestrator> orch, const StepContext& ctx, StepCallback done) override {
    fn_(std::move(orch), ctx, std::move(done));
  }

 private:
  Fn fn_;
};

struct RoleConfig {
  std::string name;
  std::uint32_t num_instances = 1;
  std::shared_ptr<Behavior> behavior;
  std::string service;
  NodeLabel placement = NodeLabel::permanent;
};

/// Called by the sink once per finished task, after persistence and before
/// the admission slot is released. Receives the materialized contents.
using SinkHook = std::function<void(const Orchestrator&, const std::vector<Bytes>&, const StepContext&)>;

using OrchestratorFactory = std::function<Orchestrator(const TaskInput&)>;

struct RuntimeOptions {
  std::size_t mailbox_capacity = 1024;
  std::uint64_t offload_threshold_bytes = 512;
};

struct PartitionSpec {
  std::shared_ptr<TaskSource> source;
  std::uint64_t max_concurrency = 1;
};

struct RunOptions {
  std::uint64_t global_max_concurrency = 0;  // 0: no global cap
  bool record_trace = false;
  /// Invoked by the sink with the number of completed tasks.
  std::function<void(std::uint64_t)> on_progress;
};

struct RunReport {
  RunMetrics metrics;
  double started = 0;
  double finished = 0;
  std::uint64_t dispatched = 0;
  std::uint64_t completed = 0;
  std::uint64_t peak_in_flight = 0;
  std::vector<std::uint64_t> partition_peaks;
  std::vector<GateSample> trace;  // global in-flight trace when recorded

  double makespan() const { return finished - started; }
};

/// One JSON line per finished task.
inline std::string output_line(const Orchestrator& orch, const std::vector<Bytes>& contents) {
  nlohmann::ordered_json line;
  const TaskOutcome outcome = orch.outcome.value_or(TaskOutcome::failed("no_outcome"));
  line["task_id"] = orch.task.task_id;
  line["status"] = to_string(outcome.status);
  if (!outcome.reason.empty()) line["reason"] = outcome.reason;
  if (outcome.score) line["score"] = *outcome.score;
  line["tokens_generated"] = outcome.tokens_generated;
  line["turns"] = orch.history.size();
  auto history = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < orch.history.size() && i < contents.size(); ++i)
    history.push_back({{"role", orch.history[i].author_role},
                       {"content", contents[i]},
                       {"tokens", orch.history[i].token_count}});
  line["history"] = std::move(history);
  return line.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

/// Peer-to-peer agent runtime. Each agent instance owns a bounded mailbox of
/// serialized orchestrators and takes messages from it one at a time; after a
/// step the orchestrator is forwarded straight to a random instance of the
/// next role. The driver only injects new tasks, the sink only retires them.
///
/// A full mailbox never drops or blocks the sender: the message waits in the
/// instance's overflow queue and moves into the mailbox as space frees.
class Runtime {
 public:
  Runtime(Executor& executor, ServiceHub& services, ObjectStore& store, MetricsRegistry& metrics,
          ContainerPool* containers = nullptr, RuntimeOptions options = {})
      : executor_(executor),
        services_(services),
        store_(store),
        metrics_(metrics),
        containers_(containers),
        options_(options),
        driver_sends_(metrics.counter("driver_sends_total")),
        dispatched_ctr_(metrics.counter("tasks_dispatched_total")),
        completed_ctr_(metrics.counter("tasks_completed_total")),
        success_(metrics.counter("tasks_success_total")),
        filtered_(metrics.counter("tasks_filtered_total")),
        failed_(metrics.counter("tasks_failed_total")),
        tokens_(metrics.counter("tokens_generated_total")),
        mailbox_bytes_(metrics.counter("mailbox_bytes_total")),
        mailbox_messages_(metrics.counter("mailbox_messages_total")),
        deferred_(metrics.counter("mailbox_deferred_total")),
        steps_(metrics.counter("steps_total")),
        step_failures_(metrics.counter("step_failures_total")),
        sink_errors_(metrics.counter("sink_errors_total")),
        output_failures_(metrics.counter("output_failures_total")) {
    if (options_.mailbox_capacity == 0) throw Error(Errc::config_error, "mailbox_capacity must be >= 1");
    collector_ = metrics_.add_collector([this](RunMetrics& m) { collect(m); });
  }

  ~Runtime() {
    {
      std::unique_lock lock(life_->mu);
      life_->alive = false;
    }
    metrics_.remove_collector(collector_);
  }

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  // --------------------------------------------------------------------------
  // Team
  // --------------------------------------------------------------------------

  /// Builds the agent instances. `_sink` is added when absent. `routes` is
  /// the branching route space; its role set defaults to every team role.
  void create_team(std::vector<RoleConfig> roles, RouteTable routes = {}, SinkHook sink_hook = {}) {
    if (!roles_.empty()) throw Error(Errc::config_error, "team already created");
    std::set<std::string> seen;
    bool has_sink = false;
    for (const auto& r : roles) {
      if (r.name.empty()) throw Error(Errc::config_error, "role name must not be empty");
      if (!seen.insert(r.name).second) throw Error(Errc::config_error, "duplicate role '" + r.name + "'");
      if (r.num_instances < 1) throw Error(Errc::config_error, "role '" + r.name + "': num_instances must be >= 1");
      if (r.placement != NodeLabel::permanent)
        throw Error(Errc::config_error, "role '" + r.name + "': agents must be placed on permanent nodes");
      if (r.name == kSinkRole)
        has_sink = true;
      else if (!r.behavior)
        throw Error(Errc::config_error, "role '" + r.name + "' has no behavior");
      if (!r.service.empty() && !services_.has_service(r.service))
        throw Error(Errc::config_error, "role '" + r.name + "': unknown service '" + r.service + "'");
    }
    if (!has_sink) roles.push_back(RoleConfig{std::string(kSinkRole), 1, nullptr, {}, NodeLabel::permanent});

    for (auto& r : roles) {
      auto& slot = roles_[r.name];
      slot.config = r;
      slot.pending = std::make_unique<std::atomic<std::uint64_t>>(0);
      for (std::uint32_t i = 0; i < r.num_instances; ++i) {
        auto inst = std::make_unique<Instance>(options_.mailbox_capacity);
        inst->ctx = StepContext{&executor_, &services_, &store_, containers_, &metrics_, AgentId{r.name, i}, r.service};
        inst->behavior = r.behavior;
        inst->pending = slot.pending.get();
        slot.instances.push_back(std::move(inst));
      }
    }
    if (routes.roles.empty())
      for (const auto& [name, r] : roles_)
        if (name != kSinkRole) routes.roles.insert(name);
    routes_ = std::move(routes);
    sink_hook_ = std::move(sink_hook);
  }

  std::vector<AgentId> instances() const {
    std::vector<AgentId> out;
    for (const auto& [name, r] : roles_)
      for (const auto& i : r.instances) out.push_back(i->ctx.agent);
    return out;
  }

  bool has_role(const std::string& role) const { return roles_.count(role) > 0; }
  const RouteTable& routes() const { return routes_; }
  const RuntimeOptions& options() const { return options_; }

  /// Uniform instance of `role`, drawn from the orchestrator's own stream.
  /// Always consumes one draw, even for single-instance roles.
  AgentId route_next(const std::string& role, Orchestrator& orch) const {
    auto it = roles_.find(role);
    if (it == roles_.end()) throw Error(Errc::unknown_role, "no role '" + role + "' in team");
    const auto n = it->second.instances.size();
    return AgentId{role, static_cast<std::uint32_t>(bounded(next_draw(orch), n))};
  }

  /// Serializes and enqueues. Mailbox bytes are counted by encoding length.
  void send(const AgentId& target, const Orchestrator& orch) { deliver(instance(target), serialize_orchestrator(orch)); }

  /// Stops an instance. Later sends to it fail with DeadAgent.
  void stop_instance(const AgentId& id) {
    auto& inst = instance(id);
    std::lock_guard lock(inst.mu);
    inst.stopped = true;
  }

  std::size_t mailbox_depth(const AgentId& id) const {
    auto& inst = const_cast<Runtime*>(this)->instance(id);
    return inst.mailbox.depth();
  }
  std::size_t mailbox_peak_depth(const AgentId& id) const {
    auto& inst = const_cast<Runtime*>(this)->instance(id);
    return inst.mailbox.peak_depth();
  }

  // --------------------------------------------------------------------------
  // Driver
  // --------------------------------------------------------------------------

  RunReport run_dataset(std::vector<PartitionSpec> partitions, OrchestratorFactory factory, OutputSink& output,
                        RunOptions run = {}) {
    if (roles_.empty()) throw Error(Errc::config_error, "create_team must run before run_dataset");
    for (const auto& p : partitions)
      if (p.max_concurrency < 1) throw Error(Errc::config_error, "max_concurrency must be >= 1");
    {
      std::lock_guard lock(driver_mu_);
      parts_.clear();
      for (auto& p : partitions) {
        Partition part;
        part.source = std::move(p.source);
        part.gate = std::make_unique<AdmissionGate>(p.max_concurrency);
        parts_.push_back(std::move(part));
      }
      global_ = std::make_unique<AdmissionGate>(run.global_max_concurrency ? run.global_max_concurrency : UINT64_MAX,
                                                run.record_trace);
      factory_ = std::move(factory);
      output_ = &output;
      on_progress_ = std::move(run.on_progress);
      exhausted_ = 0;
      source_error_.reset();
      fatal_.reset();
    }
    dispatched_.store(0);
    completed_.store(0);
    sources_done_.store(parts_.empty());
    aborted_.store(false);

    RunReport report;
    report.started = executor_.now();
    pump();
    const bool finished = executor_.drive([this] {
      return aborted_.load() || (sources_done_.load() && completed_.load() == dispatched_.load());
    });
    output.flush();

    std::string fatal;
    std::string source_error;
    {
      std::lock_guard lock(driver_mu_);
      if (fatal_) fatal = *fatal_;
      if (source_error_) source_error = *source_error_;
    }
    if (!fatal.empty()) throw Error(Errc::invalid_state, "run aborted: " + fatal);
    if (!finished)
      throw Error(Errc::invalid_state, "run stalled with " + std::to_string(dispatched_.load() - completed_.load()) +
                                           " tasks in flight");
    if (!source_error.empty()) throw Error(Errc::io_error, "dataset read failed: " + source_error);

    report.finished = executor_.now();
    report.dispatched = dispatched_.load();
    report.completed = completed_.load();
    report.peak_in_flight = global_->peak();
    for (const auto& p : parts_) report.partition_peaks.push_back(p.gate->peak());
    report.trace = global_->trace();
    report.metrics = metrics_.snapshot(report.finished);
    return report;
  }

  std::uint64_t in_flight() const { return dispatched_.load() - completed_.load(); }
  std::uint64_t completed() const { return completed_.load(); }

 private:
  struct Instance {
    explicit Instance(std::size_t capacity) : mailbox(capacity) {}
    BoundedMailbox<Bytes> mailbox;
    std::deque<Bytes> overflow;
    std::mutex mu;
    bool scheduled = false;
    bool stopped = false;
    std::shared_ptr<Behavior> behavior;
    StepContext ctx;
    std::atomic<std::uint64_t>* pending = nullptr;
  };
  struct Lifetime {
    std::shared_mutex mu;
    bool alive = true;
  };
  struct Role {
    RoleConfig config;
    std::vector<std::unique_ptr<Instance>> instances;
    std::unique_ptr<std::atomic<std::uint64_t>> pending;
  };
  struct Partition {
    std::shared_ptr<TaskSource> source;
    std::unique_ptr<AdmissionGate> gate;
    std::optional<TaskInput> lookahead;
    bool exhausted = false;
  };

  Instance& instance(const AgentId& id) {
    auto it = roles_.find(id.role);
    if (it == roles_.end()) throw Error(Errc::unknown_role, "no role '" + id.role + "' in team");
    if (id.instance >= it->second.instances.size()) throw Error(Errc::dead_agent, "no instance " + id.str());
    return *it->second.instances[id.instance];
  }

  void deliver(Instance& inst, Bytes msg) {
    const auto size = msg.size();
    bool post = false;
    {
      std::lock_guard lock(inst.mu);
      if (inst.stopped) throw Error(Errc::dead_agent, inst.ctx.agent.str() + " has stopped");
      if (!inst.overflow.empty() || !inst.mailbox.try_push(msg)) {
        inst.overflow.push_back(std::move(msg));
        deferred_.fetch_add(1, std::memory_order_relaxed);
      }
      if (!inst.scheduled) inst.scheduled = post = true;
    }
    mailbox_bytes_.fetch_add(size, std::memory_order_relaxed);
    mailbox_messages_.fetch_add(1, std::memory_order_relaxed);
    if (post) schedule(inst);
  }

  /// Takes one message, handles it, and reschedules itself while messages
  /// remain, so instances interleave fairly on the executor.
  void drain(Instance& inst) {
    std::optional<Bytes> msg;
    {
      std::lock_guard lock(inst.mu);
      msg = inst.mailbox.try_pop();
      if (!msg) {
        inst.scheduled = false;
        return;
      }
      if (!inst.overflow.empty() && inst.mailbox.try_push(inst.overflow.front())) inst.overflow.pop_front();
    }
    try {
      handle(inst, *msg);
    } catch (const std::exception& e) {
      abort_run(inst.ctx.agent.str() + ": " + e.what());
    }
    {
      std::lock_guard lock(inst.mu);
      if (inst.mailbox.depth() == 0) {
        inst.scheduled = false;
        return;
      }
    }
    schedule(inst);
  }

  void schedule(Instance& inst) {
    executor_.post([this, &inst, life = life_] {
      std::shared_lock lock(life->mu);
      if (life->alive) drain(inst);
    });
  }

  void handle(Instance& inst, const Bytes& msg) {
    auto orch = std::make_shared<Orchestrator>(deserialize_orchestrator(msg));
    const auto& role = inst.ctx.agent.role;
    if (role == kSinkRole) {
      sink_handle(inst, *orch);
      return;
    }
    if (orch->control.is_done) {
      forward(*orch);
      return;
    }
    std::string expected;
    try {
      expected = std::string(current_agent(*orch));
    } catch (const Error& e) {
      fail(*orch, to_string(e.code()));
      forward(*orch);
      return;
    }
    if (expected != role) {
      fail(*orch, "misrouted");
      forward(*orch);
      return;
    }

    inst.pending->fetch_add(1, std::memory_order_relaxed);
    steps_.fetch_add(1, std::memory_order_relaxed);
    auto reported = std::make_shared<std::atomic<bool>>(false);
    StepCallback done = [this, orch, reported, pending = inst.pending](Result<StepResult> r) mutable {
      if (reported->exchange(true)) return;
      pending->fetch_sub(1, std::memory_order_relaxed);
      try {
        finish_step(*orch, std::move(r));
      } catch (const std::exception& e) {
        abort_run(e.what());
      }
    };
    try {
      inst.behavior->process(orch, inst.ctx, done);
    } catch (const Error& e) {
      done(e);
    } catch (const std::exception& e) {
      done(Error(Errc::invalid_state, e.what()));
    }
  }

  void fail(Orchestrator& orch, const std::string& reason) {
    if (!orch.outcome) {
      mark_done(orch, TaskOutcome::failed(reason));
    } else {
      orch.control.is_done = true;
    }
  }

  void finish_step(Orchestrator& orch, Result<StepResult> r) {
    if (!r.ok()) {
      step_failures_.fetch_add(1, std::memory_order_relaxed);
      fail(orch, to_string(r.error().code()));
      forward(orch);
      return;
    }
    StepResult& res = r.value();
    if (res.score && !std::isfinite(*res.score)) {
      step_failures_.fetch_add(1, std::memory_order_relaxed);
      fail(orch, "invalid_score");
      forward(orch);
      return;
    }
    const auto before = orch.history.size();
    try {
      update(orch, std::move(res), routes_);
    } catch (const Error& e) {
      step_failures_.fetch_add(1, std::memory_order_relaxed);
      fail(orch, to_string(e.code()));
    }
    if (orch.history.size() > before) {
      auto& last = orch.history.back();
      tokens_.fetch_add(last.token_count, std::memory_order_relaxed);
      try {
        last = offload_history(std::move(last), options_.offload_threshold_bytes, store_, orch.task.task_id);
      } catch (const Error& e) {
        fail(orch, to_string(e.code()));
      }
    }
    forward(orch);
  }

  /// Sends to a random instance of the orchestrator's current role.
  void forward(Orchestrator& orch) {
    std::string role;
    try {
      role = std::string(current_agent(orch));
    } catch (const Error& e) {
      fail(orch, to_string(e.code()));
      role = std::string(kSinkRole);
    }
    AgentId target;
    try {
      target = route_next(role, orch);
    } catch (const Error& e) {
      fail(orch, to_string(e.code()));
      target = route_next(std::string(kSinkRole), orch);
    }
    Bytes msg;
    try {
      msg = serialize_orchestrator(orch);
    } catch (const Error& e) {
      msg = serialize_orchestrator(unencodable(orch, e));
      target = AgentId{std::string(kSinkRole), 0};
    }
    deliver(instance(target), std::move(msg));
  }

  /// A stand-in for an orchestrator that cannot be encoded: same task id,
  /// no payload or history, Failed. Its offloaded objects are freed here
  /// because the stand-in no longer references them.
  Orchestrator unencodable(const Orchestrator& orch, const Error& e) {
    auto ids = offloaded_ids(orch);
    store_.erase(ids);
    Orchestrator o;
    o.task.task_id = orch.task.task_id;
    o.task.partition_id = orch.task.partition_id;
    o.task.payload = nullptr;
    o.control.order = {std::string(kSinkRole)};
    o.control.is_done = true;
    o.outcome = TaskOutcome::failed(to_string(e.code()));
    return o;
  }

  // --------------------------------------------------------------------------
  // Sink
  // --------------------------------------------------------------------------

  void sink_handle(Instance& inst, Orchestrator& orch) {
    if (!orch.outcome) fail(orch, "no_outcome");
    std::vector<Bytes> contents;
    bool resolved = true;
    try {
      contents = resolve_history(orch.history, store_);
    } catch (const Error& e) {
      resolved = false;
      sink_errors_.fetch_add(1, std::memory_order_relaxed);
      orch.outcome->status = OutcomeStatus::failed;
      orch.outcome->reason = to_string(e.code());
      orch.outcome->score.reset();
    }
    if (!resolved) orch.history.clear();
    try {
      output_->write(output_line(orch, contents));
    } catch (const std::exception&) {
      output_failures_.fetch_add(1, std::memory_order_relaxed);
    }
    if (sink_hook_) {
      try {
        sink_hook_(orch, contents, inst.ctx);
      } catch (const std::exception&) {
        sink_errors_.fetch_add(1, std::memory_order_relaxed);
      }
    }
    auto ids = offloaded_ids(orch);
    if (!ids.empty()) store_.erase(ids);

    const auto& o = *orch.outcome;
    switch (o.status) {
      case OutcomeStatus::success: success_.fetch_add(1, std::memory_order_relaxed); break;
      case OutcomeStatus::filtered: filtered_.fetch_add(1, std::memory_order_relaxed); break;
      case OutcomeStatus::failed: failed_.fetch_add(1, std::memory_order_relaxed); break;
    }
    if (!o.reason.empty()) metrics_.add(metric_key("task_reasons_total", "reason", o.reason));
    completed_ctr_.fetch_add(1, std::memory_order_relaxed);

    const double now = executor_.now();
    const auto part = orch.task.partition_id;
    if (part < parts_.size()) parts_[part].gate->release(now);
    global_->release(now);
    const auto n = completed_.fetch_add(1, std::memory_order_acq_rel) + 1;
    if (on_progress_) on_progress_(n);
    pump();
    executor_.notify();
  }

  // --------------------------------------------------------------------------
  // Dispatch
  // --------------------------------------------------------------------------

  /// Admits as many tasks as the gates allow, one partition at a time in
  /// rotation.
  void pump() {
    bool notify = false;
    {
      std::lock_guard lock(driver_mu_);
      if (aborted_.load() || source_error_) return;
      bool progress = true;
      while (progress) {
        progress = false;
        for (std::uint32_t i = 0; i < parts_.size(); ++i) {
          auto& p = parts_[i];
          if (p.exhausted) continue;
          if (!p.lookahead) {
            try {
              p.lookahead = p.source->next();
            } catch (const std::exception& e) {
              source_error_ = e.what();
              stop_sources();
              notify = true;
              break;
            }
            if (!p.lookahead) {
              p.exhausted = true;
              if (++exhausted_ == parts_.size()) {
                sources_done_.store(true);
                notify = true;
              }
              continue;
            }
          }
          if (global_->in_flight() >= global_->max_concurrency()) break;
          const double now = executor_.now();
          if (!p.gate->try_acquire(now)) continue;
          global_->try_acquire(now);
          TaskInput task = std::move(*p.lookahead);
          p.lookahead.reset();
          task.partition_id = i;
          dispatch(std::move(task));
          progress = true;
        }
        if (source_error_) break;
      }
    }
    if (notify) executor_.notify();
  }

  void stop_sources() {
    for (auto& p : parts_) {
      if (!p.exhausted) {
        p.exhausted = true;
        ++exhausted_;
      }
    }
    sources_done_.store(true);
  }

  void dispatch(TaskInput task) {
    Orchestrator orch;
    try {
      orch = factory_(task);
      orch.task.partition_id = task.partition_id;
    } catch (const std::exception& e) {
      orch = Orchestrator{};
      orch.task = std::move(task);
      orch.control.order = {std::string(kSinkRole)};
      mark_done(orch, TaskOutcome::failed("invalid_input"));
    }
    dispatched_.fetch_add(1, std::memory_order_acq_rel);
    dispatched_ctr_.fetch_add(1, std::memory_order_relaxed);
    driver_sends_.fetch_add(1, std::memory_order_relaxed);
    forward(orch);
  }

  void abort_run(const std::string& what) {
    {
      std::lock_guard lock(driver_mu_);
      if (!fatal_) fatal_ = what;
    }
    aborted_.store(true);
    executor_.notify();
  }

  void collect(RunMetrics& m) const {
    double queued_total = 0;
    double pending_total = 0;
    for (const auto& [name, r] : roles_) {
      double depth = 0;
      for (const auto& inst : r.instances) {
        std::lock_guard lock(inst->mu);
        depth += static_cast<double>(inst->mailbox.depth() + inst->overflow.size());
      }
      const double pending = static_cast<double>(r.pending->load(std::memory_order_relaxed));
      m.gauges[metric_key("queue_depth", "role", name)] = depth;
      m.gauges[metric_key("pending_steps", "role", name)] = pending;
      queued_total += depth;
      pending_total += pending;
    }
    m.gauges["queue_depth_total"] = queued_total;
    m.gauges["pending_steps_total"] = pending_total;
    m.gauges["in_flight"] = static_cast<double>(dispatched_.load() - completed_.load());
    if (global_) m.gauges["peak_in_flight"] = static_cast<double>(global_->peak());
    const auto s = store_.stats();
    m.counters["store_puts_total"] = s.total_puts;
    m.counters["store_gets_total"] = s.total_gets;
    m.counters["store_deletes_total"] = s.total_deletes;
    m.counters["store_ignored_deletes_total"] = s.ignored_deletes;
    m.gauges["store_live_objects"] = static_cast<double>(s.live_objects);
    m.gauges["store_live_bytes"] = static_cast<double>(s.live_bytes);
  }

  Executor& executor_;
  ServiceHub& services_;
  ObjectStore& store_;
  MetricsRegistry& metrics_;
  ContainerPool* containers_;
  RuntimeOptions options_;

  std::map<std::string, Role> roles_;
  RouteTable routes_;
  SinkHook sink_hook_;

  std::mutex driver_mu_;
  std::vector<Partition> parts_;
  std::unique_ptr<AdmissionGate> global_;
  OrchestratorFactory factory_;
  OutputSink* output_ = nullptr;
  std::function<void(std::uint64_t)> on_progress_;
  std::size_t exhausted_ = 0;
  std::optional<std::string> source_error_;
  std::optional<std::string> fatal_;

  std::atomic<std::uint64_t> dispatched_{0};
  std::atomic<std::uint64_t> completed_{0};
  std::atomic<bool> sources_done_{false};
  std::atomic<bool> aborted_{false};

  MetricsRegistry::Counter& driver_sends_;
  MetricsRegistry::Counter& dispatched_ctr_;
  MetricsRegistry::Counter& completed_ctr_;
  MetricsRegistry::Counter& success_;
  MetricsRegistry::Counter& filtered_;
  MetricsRegistry::Counter& failed_;
  MetricsRegistry::Counter& tokens_;
  MetricsRegistry::Counter& mailbox_bytes_;
  MetricsRegistry::Counter& mailbox_messages_;
  MetricsRegistry::Counter& deferred_;
  MetricsRegistry::Counter& steps_;
  MetricsRegistry::Counter& step_failures_;
  MetricsRegistry::Counter& sink_errors_;
  MetricsRegistry::Counter& output_failures_;
  std::uint64_t collector_ = 0;
  std::shared_ptr<Lifetime> life_ = std::make_shared<Lifetime>();
};

}  // namespace relay
