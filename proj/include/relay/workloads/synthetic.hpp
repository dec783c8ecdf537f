#pragma once

#include <map>
#include <string>
#include <vector>

#include "relay/services/types.hpp"
#include "relay/workloads/common.hpp"

namespace relay {

// Benchmark pipeline: a fixed chain of generation stages, each able to drop
// the task. Stage i is role "stage_<i>"; a drop ends the task as Filtered.

struct SyntheticStage {
  std::string service = "llm";
  LatencyModel latency;
  double drop_probability = 0;
};

struct SyntheticWorkload {
  std::uint64_t num_tasks = 1000;
  std::vector<SyntheticStage> stages{SyntheticStage{}};
  std::uint64_t seed = 0;

  /// The latency model of every service, checking that stages sharing a
  /// service agree on it.
  std::map<std::string, LatencyModel> services() const {
    std::map<std::string, LatencyModel> out;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      auto [it, fresh] = out.emplace(stages[i].service, stages[i].latency);
      if (!fresh && !(it->second == stages[i].latency))
        throw Error(Errc::config_error, "stages[" + std::to_string(i) + "]: service '" + stages[i].service +
                                            "' already has a different latency model");
    }
    return out;
  }

  void validate() const {
    if (stages.empty()) throw Error(Errc::config_error, "stages: must not be empty");
    for (std::size_t i = 0; i < stages.size(); ++i)
      require_probability(stages[i].drop_probability, "stages[" + std::to_string(i) + "].drop_probability");
    services();
  }
};

inline std::string synthetic_stage_role(std::size_t i) { return "stage_" + std::to_string(i); }

inline std::string synthetic_task_id(std::uint64_t i) { return "t" + std::to_string(i); }

/// Request seed of stage `i` for a task. Matches `request_seed` at history
/// length `i`.
inline std::uint64_t synthetic_stage_seed(std::uint64_t task_seed_value, std::size_t i) {
  return mix_seed(mix_seed(task_seed_value, synthetic_stage_role(i)), i);
}

inline bool synthetic_dropped(std::uint64_t stage_seed, double p) {
  return unit_interval(mix_seed(stage_seed, "drop")) < p;
}

/// Service time of every stage each task actually executes, in order.
inline std::vector<std::vector<double>> sample_stage_durations(const SyntheticWorkload& w) {
  std::vector<std::vector<double>> out(w.num_tasks);
  for (std::uint64_t t = 0; t < w.num_tasks; ++t) {
    const auto seed = task_seed(w.seed, synthetic_task_id(t));
    for (std::size_t i = 0; i < w.stages.size(); ++i) {
      const auto s = synthetic_stage_seed(seed, i);
      const auto& lat = w.stages[i].latency;
      out[t].push_back(lat.duration(lat.sample_tokens(s)));
      if (synthetic_dropped(s, w.stages[i].drop_probability)) break;
    }
  }
  return out;
}

inline std::vector<TaskInput> synthetic_tasks(const SyntheticWorkload& w) {
  std::vector<TaskInput> tasks;
  tasks.reserve(w.num_tasks);
  for (std::uint64_t t = 0; t < w.num_tasks; ++t) tasks.push_back(TaskInput{synthetic_task_id(t), Json::object(), 0});
  return tasks;
}

class SyntheticStageBehavior final : public Behavior {
 public:
  SyntheticStageBehavior(std::size_t index, std::size_t count, double drop)
      : index_(index), count_(count), drop_(drop) {}

  void process(std::shared_ptr<const Orchestrator> orch, const StepContext& ctx, StepCallback done) override {
    GenerationRequest req;
    req.seed = synthetic_stage_seed(orch->rng_seed, index_);
    req.prompt = synthetic_stage_role(index_);
    const bool dropped = synthetic_dropped(req.seed, drop_);
    ctx.services->generate(ctx.service, std::move(req), [this, done, dropped](Result<GenerationResponse> r) {
      if (!r.ok()) return done(r.error());
      auto& resp = r.value();
      StepResult step;
      step.author_role = synthetic_stage_role(index_);
      step.token_count = resp.output_token_count;
      step.content = std::move(resp.content);
      if (dropped)
        step.route_hint = FilterRoute{"dropped_at_" + synthetic_stage_role(index_)};
      else if (index_ + 1 == count_)
        step.done_signal = true;
      else
        step.route_hint = synthetic_stage_role(index_ + 1);
      done(std::move(step));
    });
  }

 private:
  std::size_t index_;
  std::size_t count_;
  double drop_;
};

inline Workload make_synthetic(const SyntheticWorkload& sw, std::uint32_t instances = 1) {
  sw.validate();
  Workload w;
  w.name = "synthetic";
  const auto n = sw.stages.size();
  for (std::size_t i = 0; i < n; ++i) {
    w.roles.push_back(RoleConfig{synthetic_stage_role(i), instances,
                                 std::make_shared<SyntheticStageBehavior>(i, n, sw.stages[i].drop_probability),
                                 sw.stages[i].service});
    w.routes.roles.insert(synthetic_stage_role(i));
  }
  Budget budget;
  budget.max_turns = static_cast<std::uint32_t>(n + 1);
  budget.max_tokens = UINT64_MAX;
  w.factory = [seed = sw.seed, budget](const TaskInput& t) {
    return make_branching(t, synthetic_stage_role(0), budget, task_seed(seed, t.task_id));
  };
  return w;
}

}  // namespace relay
