#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "relay/services/containers.hpp"
#include "relay/workloads/common.hpp"

namespace relay {

// Customer-support style tool-use loop:
//
//   user_simulator -> assistant -> [tool_executor -> issuer]* -> user_simulator ...
//   user_simulator (stop) -> reward_calculator -> sink
//
// Tool calls are lines of the form "TOOL_CALL: <command>" and run in the
// task's container (container id == task id). The reward calculator resets
// that container, replays every recorded call, and scores the final state
// against the scenario's assertions.

inline constexpr const char* kToolCallPrefix = "TOOL_CALL:";
inline constexpr const char* kStopMarker = "###STOP###";

struct Tau2Params {
  std::string service = "llm";
  std::string scenario_field = "scenario";
  std::uint64_t max_tokens = 2048;
  std::uint32_t instances = 1;
  double tool_seconds = 0.05;
  Budget budget;
  // simulated scenario shape
  std::uint32_t rounds_min = 1;
  std::uint32_t rounds_max = 3;
  std::uint32_t tool_calls_min = 1;
  std::uint32_t tool_calls_max = 4;
  double tool_error_rate = 0.0;

  static Tau2Params from_json(const Json& j, const std::string& path = "workload") {
    Tau2Params p;
    read_field(j, "service", p.service, path);
    read_field(j, "scenario_field", p.scenario_field, path);
    read_field(j, "max_tokens", p.max_tokens, path);
    read_field(j, "instances", p.instances, path);
    read_field(j, "tool_seconds", p.tool_seconds, path);
    read_field(j, "rounds_min", p.rounds_min, path);
    read_field(j, "rounds_max", p.rounds_max, path);
    read_field(j, "tool_calls_min", p.tool_calls_min, path);
    read_field(j, "tool_calls_max", p.tool_calls_max, path);
    read_field(j, "tool_error_rate", p.tool_error_rate, path);
    if (p.rounds_min < 1 || p.rounds_max < p.rounds_min)
      throw Error(Errc::config_error, path + ".rounds_min/max: need 1 <= min <= max");
    if (p.tool_calls_max < p.tool_calls_min)
      throw Error(Errc::config_error, path + ".tool_calls_min/max: need min <= max");
    if (!(p.tool_seconds >= 0)) throw Error(Errc::config_error, path + ".tool_seconds: must be >= 0");
    require_probability(p.tool_error_rate, path + ".tool_error_rate");
    return p;
  }
};

struct Tau2Scenario {
  std::uint32_t rounds = 1;
  std::vector<std::pair<std::string, std::string>> assertions;  // key must equal value at the end
};

/// Scenario for a task: taken from the payload ("assertions" object, optional
/// "rounds") when present, otherwise drawn from the task seed.
inline Tau2Scenario tau2_scenario(const Tau2Params& p, const Orchestrator& orch) {
  Tau2Scenario s;
  const auto& payload = orch.task.payload;
  const std::uint64_t seed = mix_seed(orch.rng_seed, "scenario");
  s.rounds = p.rounds_min + static_cast<std::uint32_t>(bounded(mix_seed(seed, "rounds"), p.rounds_max - p.rounds_min + 1));
  if (payload.is_object() && payload.contains("rounds") && payload["rounds"].is_number_unsigned())
    s.rounds = std::max<std::uint32_t>(1, payload["rounds"].get<std::uint32_t>());
  if (payload.is_object() && payload.contains("assertions") && payload["assertions"].is_object()) {
    for (const auto& [k, v] : payload["assertions"].items())
      s.assertions.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
    return s;
  }
  const auto k = p.tool_calls_min + bounded(mix_seed(seed, "calls"), p.tool_calls_max - p.tool_calls_min + 1);
  for (std::uint64_t i = 0; i < k; ++i) {
    char value[9];
    std::snprintf(value, sizeof(value), "%08llx", static_cast<unsigned long long>(mix_seed(seed, i) >> 32));
    s.assertions.emplace_back("slot" + std::to_string(i), value);
  }
  return s;
}

/// Commands from "TOOL_CALL: ..." lines, in order.
inline std::vector<std::string> parse_tool_calls(const std::string& content) {
  std::vector<std::string> calls;
  std::size_t pos = 0;
  const std::size_t plen = std::char_traits<char>::length(kToolCallPrefix);
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    if (content.compare(pos, plen, kToolCallPrefix) == 0) {
      auto b = content.find_first_not_of(" \t", pos + plen);
      if (b != std::string::npos && b < end) {
        auto e = content.find_last_not_of(" \t\r", end - 1);
        calls.push_back(content.substr(b, e - b + 1));
      }
    }
    pos = end + 1;
  }
  return calls;
}

/// Value after "<label>: " on its own line, or empty.
inline std::string tagged_value(const std::string& content, const std::string& label) {
  const std::string tag = label + ": ";
  std::size_t at = content.rfind(tag);
  if (at == std::string::npos) return {};
  at += tag.size();
  return content.substr(at, content.find('\n', at) - at);
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class Tau2User final : public Behavior {
 public:
  Tau2User(Tau2Params p, bool simulated) : p_(std::move(p)), simulated_(simulated) {}

  void process(std::shared_ptr<const Orchestrator> orch, const StepContext& ctx, StepCallback done) override {
    const auto contents = ctx.contents(*orch);
    const auto scenario = tau2_scenario(p_, *orch);
    std::uint32_t user_turns = 0;
    for (const auto& e : orch->history) user_turns += (e.author_role == "user_simulator");
    std::string prompt = "You are a customer contacting support about: " + payload_string(*orch, p_.scenario_field) +
                         ". Continue the conversation. When your issue is resolved, reply with " + kStopMarker +
                         ".\n\n" + transcript(*orch, contents);
    call_llm(ctx, *orch, std::move(prompt), p_.max_tokens,
             [this, done, stop = user_turns >= scenario.rounds](Result<GenerationResponse> r) {
               if (!r.ok()) return done(r.error());
               auto& resp = r.value();
               StepResult step;
               step.author_role = "user_simulator";
               step.token_count = resp.output_token_count;
               step.content = std::move(resp.content);
               if (simulated_ && stop) step.content += std::string("\n") + kStopMarker;
               if (step.content.find(kStopMarker) != std::string::npos)
                 step.route_hint = std::string("reward_calculator");
               else if (!parse_tool_calls(step.content).empty())
                 step.route_hint = std::string("tool_executor");
               else
                 step.route_hint = std::string("assistant");
               done(std::move(step));
             });
  }

 private:
  Tau2Params p_;
  bool simulated_;
};

class Tau2Assistant final : public Behavior {
 public:
  Tau2Assistant(Tau2Params p, bool simulated) : p_(std::move(p)), simulated_(simulated) {}

  void process(std::shared_ptr<const Orchestrator> orch, const StepContext& ctx, StepCallback done) override {
    const auto contents = ctx.contents(*orch);
    std::string prompt =
        "You are a support assistant with tools. To change the account database, emit lines of the form '" +
        std::string(kToolCallPrefix) + " set <key> <value>' (also get/del). Otherwise reply to the customer.\n\n" +
        transcript(*orch, contents);

    std::string planned;
    if (simulated_) {
      const auto scenario = tau2_scenario(p_, *orch);
      std::size_t calls_done = 0;
      std::uint32_t user_turns = 0;
      for (std::size_t i = 0; i < orch->history.size(); ++i) {
        if (orch->history[i].author_role == "assistant") calls_done += parse_tool_calls(contents[i]).size();
        if (orch->history[i].author_role == "user_simulator") ++user_turns;
      }
      const std::size_t k = scenario.assertions.size();
      const std::size_t due = std::min<std::size_t>(k, (k * user_turns + scenario.rounds - 1) / scenario.rounds);
      if (calls_done < due) {
        const auto& [key, value] = scenario.assertions[calls_done];
        const bool wrong = decision_draw(*orch, "assistant", "tool_error") < p_.tool_error_rate;
        planned = std::string(kToolCallPrefix) + " set " + key + " " + value + (wrong ? "x" : "") + "\n";
      }
    }

    call_llm(ctx, *orch, std::move(prompt), p_.max_tokens, [done, planned](Result<GenerationResponse> r) {
      if (!r.ok()) return done(r.error());
      auto& resp = r.value();
      StepResult step;
      step.author_role = "assistant";
      step.token_count = resp.output_token_count;
      step.content = planned + resp.content;
      step.route_hint = parse_tool_calls(step.content).empty() ? std::string("user_simulator")
                                                               : std::string("tool_executor");
      done(std::move(step));
    });
  }

 private:
  Tau2Params p_;
  bool simulated_;
};

class Tau2ToolExecutor final : public Behavior {
 public:
  explicit Tau2ToolExecutor(Tau2Params p) : p_(std::move(p)) {}

  void process(std::shared_ptr<const Orchestrator> orch, const StepContext& ctx, StepCallback done) override {
    if (!ctx.containers) throw Error(Errc::config_error, "tool_executor needs a container pool");
    if (orch->history.empty()) throw Error(Errc::invalid_state, "tool_executor reached with empty history");
    const auto& issuer = orch->history.back().author_role;
    const auto contents = resolve_history(std::span(orch->history).last(1), *ctx.store);
    const auto calls = parse_tool_calls(contents.front());

    const auto& id = orch->task.task_id;
    auto handle = ctx.containers->acquire(id, id);
    std::string out;
    for (const auto& call : calls) {
      const auto result = ctx.containers->execute(handle, call);
      out += "RESULT: " + result + "\n";
    }
    out += "STATE: " + hex64(handle.instance->state_hash()) + "\n";
    out += "INSTANCE: " + std::to_string(handle.instance->instance_no());

    StepResult step{"tool_executor", std::move(out), 0, false, RouteHint{issuer}, std::nullopt};
    ctx.executor->post_after(p_.tool_seconds * static_cast<double>(std::max<std::size_t>(calls.size(), 1)),
                             [done, step = std::move(step)]() mutable { done(std::move(step)); });
  }

 private:
  Tau2Params p_;
};

/// Reward for a finished conversation: reset the task container, replay every
/// recorded tool call, and return the fraction of assertions that hold. A
/// replayed state that differs from the last state the tool executor reported
/// scores 0.
inline double tau2_replay_reward(ContainerPool& pool, const std::string& task_id, const Orchestrator& orch,
                                 const std::vector<Bytes>& contents, const Tau2Scenario& scenario) {
  std::vector<std::string> calls;
  std::string last_state;
  for (std::size_t i = 0; i < orch.history.size(); ++i) {
    const auto& role = orch.history[i].author_role;
    if (role == "tool_executor") {
      last_state = tagged_value(contents[i], "STATE");
    } else if (role == "assistant" || role == "user_simulator") {
      for (auto& c : parse_tool_calls(contents[i])) calls.push_back(std::move(c));
    }
  }
  auto handle = pool.acquire(task_id, task_id);
  pool.execute(handle, "reset");
  for (const auto& c : calls) pool.execute(handle, c);
  if (!last_state.empty() && last_state != hex64(handle.instance->state_hash())) return 0.0;
  if (scenario.assertions.empty()) return 1.0;
  std::size_t ok = 0;
  for (const auto& [k, v] : scenario.assertions) ok += (pool.execute(handle, "get " + k) == v);
  return static_cast<double>(ok) / static_cast<double>(scenario.assertions.size());
}

class Tau2Reward final : public Behavior {
 public:
  explicit Tau2Reward(Tau2Params p) : p_(std::move(p)) {}

  void process(std::shared_ptr<const Orchestrator> orch, const StepContext& ctx, StepCallback done) override {
    if (!ctx.containers) throw Error(Errc::config_error, "reward_calculator needs a container pool");
    const auto contents = ctx.contents(*orch);
    const double reward =
        tau2_replay_reward(*ctx.containers, orch->task.task_id, *orch, contents, tau2_scenario(p_, *orch));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "REWARD: %.6f", reward);
    StepResult step{"reward_calculator", buf, 0, true, std::nullopt, reward};
    ctx.executor->post_after(p_.tool_seconds, [done, step = std::move(step)]() mutable { done(std::move(step)); });
  }

 private:
  Tau2Params p_;
};

inline Workload make_tau2(const Tau2Params& p, bool simulated, std::uint64_t run_seed) {
  Workload w;
  w.name = "tau2_like";
  w.roles = {RoleConfig{"user_simulator", p.instances, std::make_shared<Tau2User>(p, simulated), p.service},
             RoleConfig{"assistant", p.instances, std::make_shared<Tau2Assistant>(p, simulated), p.service},
             RoleConfig{"tool_executor", p.instances, std::make_shared<Tau2ToolExecutor>(p), {}},
             RoleConfig{"reward_calculator", p.instances, std::make_shared<Tau2Reward>(p), {}}};
  w.routes.roles = {"user_simulator", "assistant", "tool_executor", "reward_calculator"};
  w.factory = [run_seed, budget = p.budget](const TaskInput& t) {
    return make_branching(t, "user_simulator", budget, task_seed(run_seed, t.task_id));
  };
  w.sink_hook = [](const Orchestrator& orch, const std::vector<Bytes>&, const StepContext& ctx) {
    if (ctx.containers) ctx.containers->release(orch.task.task_id);
    if (orch.outcome && orch.outcome->score)
      ctx.metrics->add("reward_micro_total", static_cast<std::uint64_t>(*orch.outcome->score * 1e6 + 0.5));
  };
  return w;
}

}  // namespace relay
