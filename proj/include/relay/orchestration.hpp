#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "relay/core/model.hpp"
#include "relay/core/seed.hpp"

namespace relay {

/// Terminal routing decision: the task is dropped at the named filter stage.
struct FilterRoute {
  std::string reason;
  bool operator==(const FilterRoute&) const = default;
};

using RouteHint = std::variant<std::string, FilterRoute>;

/// What an agent's processing step produced.
struct StepResult {
  std::string author_role;
  Bytes content;
  std::uint64_t token_count = 0;
  bool done_signal = false;
  std::optional<RouteHint> route_hint;  // honored by branching orchestrators only
  std::optional<double> score;          // copied into the outcome on success
};

/// Roles and filter reasons an orchestrator may route to. An empty
/// `filter_reasons` set accepts any non-empty reason.
struct RouteTable {
  std::set<std::string, std::less<>> roles;
  std::set<std::string, std::less<>> filter_reasons;

  bool has_role(std::string_view r) const { return roles.find(r) != roles.end(); }
  bool accepts_reason(std::string_view r) const {
    return !r.empty() && (filter_reasons.empty() || filter_reasons.find(r) != filter_reasons.end());
  }
};

// ----------------------------------------------------------------------------
// Construction
// ----------------------------------------------------------------------------

inline Orchestrator make_sequential(TaskInput task, std::vector<std::string> order, Budget budget,
                                    std::uint64_t seed) {
  if (order.empty()) throw Error(Errc::invalid_state, "sequential order must not be empty");
  Orchestrator o;
  o.task = std::move(task);
  o.control.kind = ControlKind::sequential;
  o.control.order = std::move(order);
  o.budget = budget;
  o.rng_seed = seed;
  return o;
}

inline Orchestrator make_branching(TaskInput task, std::string start_role, Budget budget, std::uint64_t seed) {
  Orchestrator o;
  o.task = std::move(task);
  o.control.kind = ControlKind::branching;
  o.control.next_role_override = std::move(start_role);
  o.budget = budget;
  o.rng_seed = seed;
  return o;
}

// ----------------------------------------------------------------------------
// Protocol
// ----------------------------------------------------------------------------

/// "_sink" iff done; otherwise the next role. Pure function of the control state.
inline std::string_view current_agent(const Orchestrator& orch) {
  const auto& c = orch.control;
  if (c.is_done) return kSinkRole;
  if (c.kind == ControlKind::sequential) {
    if (c.order.empty() || c.index >= c.order.size())
      throw Error(Errc::invalid_state, "sequential index out of range");
    return c.order[c.index];
  }
  if (!c.next_role_override) throw Error(Errc::invalid_state, "branching orchestrator has no next role");
  return *c.next_role_override;
}

/// Next draw from the orchestrator's own random stream. Advances the stream.
inline std::uint64_t next_draw(Orchestrator& orch) noexcept {
  return mix_seed(orch.rng_seed, ++orch.rng_counter);
}

inline void mark_done(Orchestrator& orch, TaskOutcome outcome) {
  if (orch.outcome) throw Error(Errc::already_done, "task " + orch.task.task_id + " already has an outcome");
  outcome.tokens_generated = history_total_tokens(orch);
  orch.outcome = std::move(outcome);
  orch.control.is_done = true;
}

namespace orchestration_detail {

inline void require_running(const Orchestrator& orch) {
  if (orch.control.is_done || orch.outcome)
    throw Error(Errc::invalid_state, "update on finished task " + orch.task.task_id);
}

inline void append(Orchestrator& orch, StepResult& result) {
  HistoryEntry e;
  e.author_role = std::move(result.author_role);
  e.turn_index = orch.history.empty() ? 0 : orch.history.back().turn_index + 1;
  e.declared_size_bytes = result.content.size();
  e.content = ContentSlot::inline_bytes(std::move(result.content));
  e.token_count = result.token_count;
  orch.history.push_back(std::move(e));
}

inline bool budget_reached(const Orchestrator& orch) {
  return orch.history.size() >= orch.budget.max_turns || history_total_tokens(orch) >= orch.budget.max_tokens;
}

}  // namespace orchestration_detail

/// Appends the result and advances round-robin. A done signal wins over a
/// budget ceiling reached on the same turn.
inline void sequential_update(Orchestrator& orch, StepResult result) {
  using namespace orchestration_detail;
  if (orch.control.kind != ControlKind::sequential) throw Error(Errc::invalid_state, "not a sequential orchestrator");
  require_running(orch);
  if (orch.control.order.empty()) throw Error(Errc::invalid_state, "sequential order must not be empty");

  auto score = result.score;
  bool done = result.done_signal;
  append(orch, result);
  orch.control.index = static_cast<std::uint32_t>((orch.control.index + 1) % orch.control.order.size());

  if (done)
    mark_done(orch, TaskOutcome::success(score));
  else if (budget_reached(orch))
    mark_done(orch, TaskOutcome::failed("budget"));
}

/// Appends the result and applies its routing: a filter ends the task, a done
/// signal succeeds it, a role name selects the next agent. A result that does
/// none of these leaves no next role, which `current_agent` reports as
/// InvalidState.
inline void branching_update(Orchestrator& orch, StepResult result, const RouteTable& routes) {
  using namespace orchestration_detail;
  if (orch.control.kind != ControlKind::branching) throw Error(Errc::invalid_state, "not a branching orchestrator");
  require_running(orch);

  // Validate before mutating so a rejected result leaves the task untouched.
  if (result.route_hint) {
    if (const auto* role = std::get_if<std::string>(&*result.route_hint)) {
      if (*role == kSinkRole || !routes.has_role(*role))
        throw Error(Errc::unknown_role, "route to unknown role '" + *role + "'");
    } else {
      const auto& reason = std::get<FilterRoute>(*result.route_hint).reason;
      if (!routes.accepts_reason(reason))
        throw Error(Errc::invalid_state, "undeclared filter reason '" + reason + "'");
    }
  }

  auto hint = std::move(result.route_hint);
  auto score = result.score;
  bool done = result.done_signal;
  append(orch, result);
  orch.control.next_role_override.reset();

  if (hint && std::holds_alternative<FilterRoute>(*hint)) {
    mark_done(orch, TaskOutcome::filtered(std::get<FilterRoute>(*hint).reason));
  } else if (done) {
    mark_done(orch, TaskOutcome::success(score));
  } else {
    if (hint) orch.control.next_role_override = std::get<std::string>(std::move(*hint));
    if (budget_reached(orch)) mark_done(orch, TaskOutcome::failed("budget"));
  }
}

inline void update(Orchestrator& orch, StepResult result, const RouteTable& routes) {
  if (orch.control.kind == ControlKind::sequential)
    sequential_update(orch, std::move(result));
  else
    branching_update(orch, std::move(result), routes);
}

}  // namespace relay
