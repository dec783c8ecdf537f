#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "relay/runtime/runtime.hpp"
#include "relay/services/containers.hpp"
#include "relay/services/sim_llm.hpp"

namespace relay::testing {

inline LatencyModel constant_latency(double base, std::uint64_t tokens = 10, double per_token = 0.01) {
  LatencyModel m;
  m.base_seconds = base;
  m.seconds_per_token = per_token;
  m.tokens.kind = TokenDistribution::Kind::constant;
  m.tokens.constant = static_cast<double>(tokens);
  return m;
}

/// Virtual clock, metrics, store, containers and a hub with one simulated
/// service per entry of `services`.
struct SimEnv {
  VirtualExecutor executor;
  MetricsRegistry metrics;
  ObjectStore store;
  ContainerPool containers{64, 1};
  ServiceHub hub;

  explicit SimEnv(std::uint32_t retry_limit = 3) : hub(executor, metrics, retry_limit) {}

  std::shared_ptr<SimulatedLlm> add_llm(const std::string& name, std::uint32_t replicas, std::uint32_t capacity,
                                        LatencyModel latency, Routing routing = Routing::random,
                                        double refresh = 5.0) {
    auto backend = std::make_shared<SimulatedLlm>(executor, latency);
    std::vector<ServiceReplica> rs;
    for (std::uint32_t i = 0; i < replicas; ++i) {
      const auto id = name + "-" + std::to_string(i);
      rs.push_back(ServiceReplica{id, "sim://" + id, NodeLabel::opportunistic, capacity, true});
      backend->add_replica(id, capacity);
    }
    hub.add_service(name, rs, backend, ServiceOptions{routing, refresh});
    return backend;
  }
};

inline std::vector<TaskInput> numbered_tasks(std::size_t n, const std::string& prefix = "t") {
  std::vector<TaskInput> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(TaskInput{prefix + std::to_string(i), Json::object(), 0});
  return out;
}

inline PartitionSpec vector_partition(std::vector<TaskInput> tasks, std::uint64_t max_concurrency) {
  return PartitionSpec{std::make_shared<VectorSource>(std::move(tasks)), max_concurrency};
}

/// One generation call on the role's service; done after `turns` steps.
inline std::shared_ptr<Behavior> llm_step(std::uint32_t turns_to_done = 1) {
  return std::make_shared<FunctionBehavior>([turns_to_done](std::shared_ptr<const Orchestrator> orch,
                                                            const StepContext& ctx, StepCallback done) {
    GenerationRequest req;
    req.seed = mix_seed(orch->rng_seed, orch->history.size());
    ctx.services->generate(ctx.service, req, [orch, done, turns_to_done, role = ctx.agent.role](
                                                 Result<GenerationResponse> r) {
      if (!r.ok()) return done(r.error());
      StepResult s;
      s.author_role = role;
      s.content = r.value().content;
      s.token_count = r.value().output_token_count;
      s.done_signal = orch->history.size() + 1 >= turns_to_done;
      done(std::move(s));
    });
  });
}

inline std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

inline Json parse_line(const std::string& line) { return Json::parse(line); }

}  // namespace relay::testing
