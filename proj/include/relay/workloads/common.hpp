#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "relay/orchestration.hpp"
#include "relay/runtime/runtime.hpp"

namespace relay {

/// A runnable workflow: roles, routing space, task wrapping, and the sink's
/// per-task hook.
struct Workload {
  std::string name;
  std::vector<RoleConfig> roles;
  RouteTable routes;
  OrchestratorFactory factory;
  SinkHook sink_hook;

  std::shared_ptr<Behavior> behavior(const std::string& role) const {
    for (const auto& r : roles)
      if (r.name == role) return r.behavior;
    throw Error(Errc::unknown_role, role);
  }
  const RoleConfig& role(const std::string& name) const {
    for (const auto& r : roles)
      if (r.name == name) return r;
    throw Error(Errc::unknown_role, name);
  }
};

/// Seed for the request a role makes at the current turn. Depends only on
/// the task and the turn, never on scheduling.
inline std::uint64_t request_seed(const Orchestrator& orch, std::string_view role) {
  return mix_seed(mix_seed(orch.rng_seed, role), orch.history.size());
}

/// Uniform [0,1) draw for a named decision at the current turn.
inline double decision_draw(const Orchestrator& orch, std::string_view role, std::string_view tag) {
  return unit_interval(mix_seed(request_seed(orch, role), tag));
}

/// Issues one generation request on the role's bound service.
inline void call_llm(const StepContext& ctx, const Orchestrator& orch, std::string prompt, std::uint64_t max_tokens,
                     GenerateCallback done) {
  if (ctx.service.empty()) throw Error(Errc::config_error, "role " + ctx.agent.role + " has no service binding");
  GenerationRequest req;
  req.prompt = std::move(prompt);
  req.max_tokens = max_tokens;
  req.seed = request_seed(orch, ctx.agent.role);
  ctx.services->generate(ctx.service, std::move(req), std::move(done));
}

/// The last `n` history contents joined as a transcript, for prompts.
inline std::string transcript(const Orchestrator& orch, const std::vector<Bytes>& contents, std::size_t n = 8) {
  std::string out;
  const std::size_t from = contents.size() > n ? contents.size() - n : 0;
  for (std::size_t i = from; i < contents.size(); ++i) {
    out += orch.history[i].author_role;
    out += ": ";
    out += contents[i];
    out += '\n';
  }
  return out;
}

inline std::string payload_string(const Orchestrator& orch, const std::string& field) {
  const auto& p = orch.task.payload;
  if (p.is_object() && p.contains(field)) {
    const auto& v = p[field];
    return v.is_string() ? v.get<std::string>() : v.dump();
  }
  return {};
}

/// Reads an optional field of a params object, naming the path on a type
/// mismatch.
template <class T>
void read_field(const Json& j, const char* key, T& out, const std::string& path) {
  if (!j.is_object() || !j.contains(key) || j[key].is_null()) return;
  try {
    out = j[key].get<T>();
  } catch (const Json::exception&) {
    throw Error(Errc::config_error, path + "." + key + ": wrong type");
  }
}

inline void require_probability(double p, const std::string& path) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::config_error, path + ": probability must be in [0, 1]");
}

}  // namespace relay
