#pragma once

#include <compare>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "relay/error.hpp"

namespace relay {

using Json = nlohmann::json;

/// Raw message/content bytes. Not required to be valid UTF-8.
using Bytes = std::string;

inline constexpr std::string_view kSinkRole = "_sink";

/// Placement class of an execution context. Agents run only on permanent
/// capacity; service replicas may also use preemptible (opportunistic) capacity.
enum class NodeLabel : std::uint8_t { permanent, opportunistic };

inline const char* to_string(NodeLabel l) noexcept {
  return l == NodeLabel::permanent ? "permanent" : "opportunistic";
}

// ----------------------------------------------------------------------------
// Identities
// ----------------------------------------------------------------------------

struct ObjectId {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  auto operator<=>(const ObjectId&) const = default;

  std::string hex() const {
    char buf[33];
    std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(hi),
                  static_cast<unsigned long long>(lo));
    return buf;
  }
};

struct ObjectIdHash {
  std::size_t operator()(const ObjectId& id) const noexcept {
    return static_cast<std::size_t>(id.hi * 0x9e3779b97f4a7c15ULL ^ id.lo);
  }
};

struct AgentId {
  std::string role;
  std::uint32_t instance = 0;

  auto operator<=>(const AgentId&) const = default;

  std::string str() const { return role + "/" + std::to_string(instance); }
};

// ----------------------------------------------------------------------------
// Task data
// ----------------------------------------------------------------------------

/// One dataset row.
struct TaskInput {
  std::string task_id;
  Json payload = Json::object();
  std::uint32_t partition_id = 0;

  bool operator==(const TaskInput&) const = default;
};

struct OffloadedRef {
  ObjectId object_id;
  std::uint64_t size_bytes = 0;

  bool operator==(const OffloadedRef&) const = default;
};

/// Conversation content: either carried inline or referenced in the object
/// store.
class ContentSlot {
 public:
  ContentSlot() = default;
  static ContentSlot inline_bytes(Bytes b) {
    ContentSlot s;
    s.v_ = std::move(b);
    return s;
  }
  static ContentSlot offloaded(ObjectId id, std::uint64_t size) {
    ContentSlot s;
    s.v_ = OffloadedRef{id, size};
    return s;
  }

  bool is_inline() const noexcept { return v_.index() == 0; }
  const Bytes& bytes() const { return std::get<0>(v_); }
  const OffloadedRef& ref() const { return std::get<1>(v_); }

  std::uint64_t size() const noexcept {
    return is_inline() ? std::get<0>(v_).size() : std::get<1>(v_).size_bytes;
  }

  bool operator==(const ContentSlot&) const = default;

 private:
  std::variant<Bytes, OffloadedRef> v_;
};

struct HistoryEntry {
  std::string author_role;
  std::uint32_t turn_index = 0;
  ContentSlot content;
  std::uint64_t declared_size_bytes = 0;
  std::uint64_t token_count = 0;

  bool operator==(const HistoryEntry&) const = default;
};

// ----------------------------------------------------------------------------
// Control and outcome
// ----------------------------------------------------------------------------

enum class ControlKind : std::uint8_t { sequential, branching };

struct ControlState {
  ControlKind kind = ControlKind::sequential;
  std::vector<std::string> order;  // sequential only
  std::uint32_t index = 0;
  bool is_done = false;
  std::optional<std::string> next_role_override;  // branching only

  bool operator==(const ControlState&) const = default;
};

enum class OutcomeStatus : std::uint8_t { success, filtered, failed };

inline const char* to_string(OutcomeStatus s) noexcept {
  switch (s) {
    case OutcomeStatus::success: return "success";
    case OutcomeStatus::filtered: return "filtered";
    case OutcomeStatus::failed: return "failed";
  }
  return "unknown";
}

struct TaskOutcome {
  OutcomeStatus status = OutcomeStatus::success;
  std::string reason;  // filter stage (Filtered) or error (Failed); empty on Success
  std::optional<double> score;
  std::uint64_t tokens_generated = 0;

  static TaskOutcome success(std::optional<double> score = std::nullopt) {
    return {OutcomeStatus::success, {}, score, 0};
  }
  static TaskOutcome filtered(std::string reason) {
    return {OutcomeStatus::filtered, std::move(reason), std::nullopt, 0};
  }
  static TaskOutcome failed(std::string error) {
    return {OutcomeStatus::failed, std::move(error), std::nullopt, 0};
  }

  bool operator==(const TaskOutcome&) const = default;
};

struct Budget {
  std::uint32_t max_turns = 64;
  std::uint64_t max_tokens = std::uint64_t{1} << 20;

  bool operator==(const Budget&) const = default;
};

/// The per-task envelope passed between agents. Owned by exactly one agent at
/// a time.
struct Orchestrator {
  TaskInput task;
  std::vector<HistoryEntry> history;
  ControlState control;
  std::optional<TaskOutcome> outcome;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_counter = 0;  // draws taken from the per-task stream
  Budget budget;

  bool operator==(const Orchestrator&) const = default;
};

/// Sum of declared sizes; independent of where the content currently lives.
inline std::uint64_t history_total_bytes(const Orchestrator& orch) noexcept {
  std::uint64_t total = 0;
  for (const auto& e : orch.history) total += e.declared_size_bytes;
  return total;
}

inline std::uint64_t history_total_tokens(const Orchestrator& orch) noexcept {
  std::uint64_t total = 0;
  for (const auto& e : orch.history) total += e.token_count;
  return total;
}

}  // namespace relay
