#pragma once

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "relay/config.hpp"
#include "relay/services/containers.hpp"
#include "relay/services/http_llm.hpp"
#include "relay/services/sim_llm.hpp"

namespace relay {

/// Everything one run owns. The executor is shut down before any component
/// it might still call into is destroyed.
class Environment {
 public:
  explicit Environment(const RunConfig& c)
      : config_(c),
        executor_(c.virtual_clock ? std::unique_ptr<Executor>(new VirtualExecutor())
                                  : std::unique_ptr<Executor>(new ThreadExecutor(c.threads))),
        store_(c.store_budget_bytes, c.seed),
        containers_(c.container_capacity, c.seed),
        hub_(*executor_, metrics_, c.retry_limit),
        workload_(build_workload(c)) {
    for (const auto& s : c.services) add_service(s);
    RuntimeOptions opts;
    opts.mailbox_capacity = c.effective_mailbox_capacity();
    opts.offload_threshold_bytes = c.offload_threshold_bytes;
    runtime_ = std::make_unique<Runtime>(*executor_, hub_, store_, metrics_, &containers_, opts);
    runtime_->create_team(workload_.roles, workload_.routes, workload_.sink_hook);
  }

  ~Environment() {
    if (auto* t = dynamic_cast<ThreadExecutor*>(executor_.get())) t->shutdown();
  }

  Environment(const Environment&) = delete;
  Environment& operator=(const Environment&) = delete;

  Executor& executor() { return *executor_; }
  MetricsRegistry& metrics() { return metrics_; }
  ObjectStore& store() { return store_; }
  ContainerPool& containers() { return containers_; }
  ServiceHub& hub() { return hub_; }
  Runtime& runtime() { return *runtime_; }
  const Workload& workload() const { return workload_; }
  const RunConfig& config() const { return config_; }

 private:
  void add_service(const ServiceConfig& s) {
    std::vector<ServiceReplica> replicas;
    std::shared_ptr<LlmBackend> backend;
    if (s.simulated) {
      auto sim = std::make_shared<SimulatedLlm>(*executor_, s.latency);
      for (std::uint32_t i = 0; i < s.replicas; ++i) {
        replicas.push_back(ServiceReplica{s.replica_id(i), "sim://" + s.replica_id(i), s.node_label, s.capacity, true});
        sim->add_replica(s.replica_id(i), s.capacity);
      }
      backend = sim;
    } else {
      HttpLlmOptions o;
      o.model = s.model;
      o.auth_token = s.auth_token;
      o.timeout_seconds = s.timeout_seconds;
      auto http = std::make_shared<HttpLlm>(*executor_, o);
      for (std::uint32_t i = 0; i < s.replicas; ++i) {
        replicas.push_back(ServiceReplica{s.replica_id(i), s.endpoints[i], s.node_label, s.capacity, true});
        http->add_endpoint(s.replica_id(i), s.endpoints[i], s.capacity);
      }
      backend = http;
    }
    hub_.add_service(s.name, std::move(replicas), std::move(backend),
                     ServiceOptions{s.routing, s.refresh_interval_seconds});
  }

  RunConfig config_;
  std::unique_ptr<Executor> executor_;
  MetricsRegistry metrics_;
  ObjectStore store_;
  ContainerPool containers_;
  ServiceHub hub_;
  Workload workload_;
  std::unique_ptr<Runtime> runtime_;
};

// ----------------------------------------------------------------------------
// Input partitioning
// ----------------------------------------------------------------------------

/// Reads several sources back to back.
class ChainSource final : public TaskSource {
 public:
  explicit ChainSource(std::vector<std::shared_ptr<TaskSource>> parts) : parts_(std::move(parts)) {}

  std::optional<TaskInput> next() override {
    while (at_ < parts_.size()) {
      if (auto t = parts_[at_]->next()) return t;
      ++at_;
    }
    return std::nullopt;
  }

 private:
  std::vector<std::shared_ptr<TaskSource>> parts_;
  std::size_t at_ = 0;
};

struct InputPlan {
  std::vector<PartitionSpec> partitions;
  std::uint64_t total_rows = 0;
};

/// A file is split into `data_parallelism` contiguous line ranges. A
/// directory contributes its `*.jsonl` files in name order, dealt round-robin
/// onto at most `data_parallelism` partitions.
inline InputPlan plan_input(const std::filesystem::path& input, std::uint32_t data_parallelism,
                            std::uint64_t max_concurrency) {
  namespace fs = std::filesystem;
  if (data_parallelism < 1) throw Error(Errc::config_error, "data_parallelism must be >= 1");
  InputPlan plan;
  if (fs::is_directory(input)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(input))
      if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) return plan;
    const auto parts = std::min<std::size_t>(data_parallelism, files.size());
    std::vector<std::vector<std::shared_ptr<TaskSource>>> groups(parts);
    for (std::size_t i = 0; i < files.size(); ++i) {
      plan.total_rows += count_rows(files[i]);
      groups[i % parts].push_back(
          std::make_shared<JsonlFileSource>(files[i], static_cast<std::uint32_t>(i % parts)));
    }
    for (auto& g : groups) plan.partitions.push_back({std::make_shared<ChainSource>(std::move(g)), max_concurrency});
    return plan;
  }
  if (!fs::exists(input)) throw Error(Errc::io_error, "input " + input.string() + " does not exist");
  plan.total_rows = count_rows(input);
  const std::uint64_t parts = std::max<std::uint64_t>(1, std::min<std::uint64_t>(data_parallelism, plan.total_rows));
  for (std::uint64_t p = 0; p < parts; ++p) {
    const auto first = plan.total_rows * p / parts;
    const auto last = plan.total_rows * (p + 1) / parts;
    plan.partitions.push_back(
        {std::make_shared<JsonlFileSource>(input, static_cast<std::uint32_t>(p), first, last), max_concurrency});
  }
  return plan;
}

/// In-flight cap across all partitions: the sum of per-partition caps,
/// clipped by the global cap when one is set.
inline std::uint64_t effective_concurrency(const std::vector<PartitionSpec>& partitions, std::uint64_t global_cap) {
  std::uint64_t sum = 0;
  for (const auto& p : partitions) sum += p.max_concurrency;
  return global_cap ? std::min(sum, global_cap) : sum;
}

// ----------------------------------------------------------------------------
// Metrics export
// ----------------------------------------------------------------------------

/// Serves GET /metrics in Prometheus text format. A port that cannot be bound
/// leaves the exporter disabled with a warning.
class PrometheusExporter {
 public:
  PrometheusExporter(MetricsRegistry& metrics, Executor& executor, int port, const std::string& host = "0.0.0.0") {
    server_.Get("/metrics", [&metrics, &executor](const httplib::Request&, httplib::Response& res) {
      res.set_content(to_prometheus(metrics.snapshot(executor.now())), "text/plain; version=0.0.4");
    });
    if (!server_.bind_to_port(host.c_str(), port)) {
      std::cerr << "warning: metrics port " << port << " unavailable, exporter disabled\n";
      return;
    }
    port_ = port;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
  }

  ~PrometheusExporter() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

  bool active() const { return port_ != 0; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

/// Appends a metrics snapshot as one JSON line every `interval` seconds of
/// run time. On a virtual clock sampling rides the event queue and stops once
/// nothing else is scheduled.
class JsonlSampler {
 public:
  JsonlSampler(const std::filesystem::path& path, MetricsRegistry& metrics, Executor& executor, double interval)
      : out_(path, std::ios::out | std::ios::trunc), metrics_(metrics), executor_(executor), interval_(interval) {
    if (!out_) throw Error(Errc::io_error, "cannot open " + path.string());
    if (!(interval_ > 0)) throw Error(Errc::config_error, "metrics interval must be > 0");
    if (auto* v = dynamic_cast<VirtualExecutor*>(&executor_)) {
      schedule_virtual(*v);
    } else {
      thread_ = std::thread([this] {
        std::unique_lock lock(mu_);
        while (!cv_.wait_for(lock, std::chrono::duration<double>(interval_), [this] { return stop_; })) sample();
      });
    }
  }

  ~JsonlSampler() { stop(); }

  /// Writes a final sample and stops.
  void stop() {
    {
      std::lock_guard lock(mu_);
      if (stop_) return;
      stop_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
    std::lock_guard lock(mu_);
    sample();
    out_.flush();
  }

  std::uint64_t samples() const { return samples_; }

 private:
  void schedule_virtual(VirtualExecutor& v) {
    v.post_after(interval_, [this, &v] {
      {
        std::lock_guard lock(mu_);
        if (stop_) return;
        sample();
      }
      if (v.pending() > 0) schedule_virtual(v);
    });
  }

  void sample() {
    out_ << metrics_.snapshot(executor_.now()).to_json().dump() << '\n';
    ++samples_;
  }

  std::ofstream out_;
  MetricsRegistry& metrics_;
  Executor& executor_;
  double interval_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stop_ = false;
  std::thread thread_;
  std::uint64_t samples_ = 0;
};

// ----------------------------------------------------------------------------
// Commands
// ----------------------------------------------------------------------------

struct RunCommandOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  std::optional<std::filesystem::path> metrics_jsonl;
  double metrics_interval_seconds = 1.0;
  int metrics_port = 0;  // 0: no HTTP exporter
  bool allow_failures = false;
};

struct RunSummary {
  RunReport report;
  std::uint64_t total_rows = 0;
  bool fault_injected = false;
  int exit_code = 0;

  Json to_json() const {
    const auto& m = report.metrics;
    return Json{{"tasks", report.completed},
                {"success", m.counter("tasks_success_total")},
                {"filtered", m.counter("tasks_filtered_total")},
                {"failed", m.counter("tasks_failed_total")},
                {"tokens_generated", m.counter("tokens_generated_total")},
                {"makespan_seconds", report.makespan()},
                {"peak_in_flight", report.peak_in_flight},
                {"fault_injected", fault_injected},
                {"exit_code", exit_code},
                {"metrics", m.to_json()}};
  }
};

/// Runs a dataset end to end. The exit code is 0 iff no task failed, or
/// failures are allowed.
inline RunSummary run_command(const RunConfig& config, const RunCommandOptions& opts) {
  Environment env(config);
  auto plan = plan_input(opts.input, config.data_parallelism, config.max_concurrency);
  FileOutput output(opts.output);

  std::optional<PrometheusExporter> exporter;
  if (opts.metrics_port > 0) exporter.emplace(env.metrics(), env.executor(), opts.metrics_port);
  std::optional<JsonlSampler> sampler;
  if (opts.metrics_jsonl)
    sampler.emplace(*opts.metrics_jsonl, env.metrics(), env.executor(), opts.metrics_interval_seconds);

  RunSummary summary;
  summary.total_rows = plan.total_rows;
  RunOptions run;
  run.global_max_concurrency = config.global_max_concurrency;
  std::atomic<bool> fired{false};
  std::uint64_t fault_at = 0;
  if (config.fault) {
    const auto& f = *config.fault;
    fault_at = static_cast<std::uint64_t>(std::ceil(f.at_progress * static_cast<double>(plan.total_rows)));
    auto inject = [&env, f, &fired] {
      if (!fired.exchange(true)) env.hub().inject_fault(f.service, f.replica, f.mode);
    };
    if (fault_at == 0) inject();
    run.on_progress = [inject, fault_at](std::uint64_t done) {
      if (done >= fault_at) inject();
    };
  }

  summary.report = env.runtime().run_dataset(std::move(plan.partitions), env.workload().factory, output, run);
  if (sampler) sampler->stop();
  summary.fault_injected = fired.load();
  const auto failed = summary.report.metrics.counter("tasks_failed_total");
  summary.exit_code = failed == 0 || opts.allow_failures ? 0 : 1;
  return summary;
}

struct BenchReport {
  BenchResult row;
  BenchResult batch;
  double ratio = 0;
  double oracle_row_makespan = 0;
  double oracle_batch_makespan = 0;

  static double delta(double measured, double oracle) {
    return oracle > 0 ? std::abs(measured - oracle) / oracle : std::abs(measured);
  }

  Json to_json() const {
    return Json{{"row_level", row.to_json()},
                {"batch_level", batch.to_json()},
                {"throughput_ratio", ratio},
                {"oracle",
                 {{"row_makespan_seconds", oracle_row_makespan},
                  {"batch_makespan_seconds", oracle_batch_makespan},
                  {"row_relative_delta", delta(row.makespan_seconds, oracle_row_makespan)},
                  {"batch_relative_delta", delta(batch.makespan_seconds, oracle_batch_makespan)}}}};
  }
};

inline BenchReport bench_command(const BenchConfig& b) {
  BenchReport r;
  r.row = run_row_level(b.workload, b.fleet, b.max_concurrency);
  r.batch = run_batch_level(b.workload, b.fleet, b.batch_size, b.data_parallelism);
  r.ratio = compare_throughput(r.row, r.batch);
  const auto durations = sample_stage_durations(b.workload);
  r.oracle_row_makespan = makespan_oracle(durations, b.fleet.replicas, b.fleet.capacity, RowMode{b.max_concurrency});
  r.oracle_batch_makespan =
      makespan_oracle(durations, b.fleet.replicas, b.fleet.capacity, BatchMode{b.batch_size, b.data_parallelism});
  return r;
}

}  // namespace relay
