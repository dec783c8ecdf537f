#pragma once

#include <string>
#include <vector>

#include "relay/workloads/common.hpp"

namespace relay {

// Two-persona self-collaboration: persona_a and persona_b alternate turns on
// one question until a turn carries the consensus marker.

struct CoralParams {
  std::string service = "llm";
  std::string question_field = "question";
  std::string answer_field = "answer";
  std::string consensus_marker = "<agree/>";
  std::vector<std::string> order{"persona_a", "persona_b"};
  std::uint64_t max_tokens = 512;
  std::uint32_t instances = 1;
  Budget budget;
  // simulated personas
  std::uint32_t consensus_turn_min = 6;
  std::uint32_t consensus_turn_max = 6;
  double agreement_rate = 0.5;

  static CoralParams from_json(const Json& j, const std::string& path = "workload") {
    CoralParams p;
    read_field(j, "service", p.service, path);
    read_field(j, "question_field", p.question_field, path);
    read_field(j, "answer_field", p.answer_field, path);
    read_field(j, "consensus_marker", p.consensus_marker, path);
    read_field(j, "order", p.order, path);
    read_field(j, "max_tokens", p.max_tokens, path);
    read_field(j, "instances", p.instances, path);
    read_field(j, "consensus_turn_min", p.consensus_turn_min, path);
    read_field(j, "consensus_turn_max", p.consensus_turn_max, path);
    read_field(j, "agreement_rate", p.agreement_rate, path);
    if (p.consensus_marker.empty()) throw Error(Errc::config_error, path + ".consensus_marker: must not be empty");
    if (p.consensus_turn_min < 1 || p.consensus_turn_max < p.consensus_turn_min)
      throw Error(Errc::config_error, path + ".consensus_turn_min/max: need 1 <= min <= max");
    require_probability(p.agreement_rate, path + ".agreement_rate");
    if (p.order.empty()) throw Error(Errc::config_error, path + ".order: must not be empty");
    for (const auto& r : p.order)
      if (r != "persona_a" && r != "persona_b")
        throw Error(Errc::config_error, path + ".order: unknown role '" + r + "'");
    return p;
  }
};

inline constexpr const char* kCoralFinalAnswer = "FINAL ANSWER:";

/// Text after the last "FINAL ANSWER:" up to the end of that line, trimmed.
inline std::string coral_final_answer(const std::string& content) {
  const auto at = content.rfind(kCoralFinalAnswer);
  if (at == std::string::npos) return {};
  auto begin = at + std::char_traits<char>::length(kCoralFinalAnswer);
  auto end = content.find('\n', begin);
  std::string s = content.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

/// The turn (1-based) at which simulated personas agree for this task.
inline std::uint32_t coral_consensus_turn(const CoralParams& p, const Orchestrator& orch) {
  const auto span = p.consensus_turn_max - p.consensus_turn_min + 1;
  return p.consensus_turn_min + static_cast<std::uint32_t>(bounded(mix_seed(orch.rng_seed, "consensus"), span));
}

class CoralPersona final : public Behavior {
 public:
  CoralPersona(CoralParams params, bool simulated) : p_(std::move(params)), simulated_(simulated) {}

  void process(std::shared_ptr<const Orchestrator> orch, const StepContext& ctx, StepCallback done) override {
    const auto contents = ctx.contents(*orch);
    const std::string question = payload_string(*orch, p_.question_field);
    std::string prompt = "You are " + ctx.agent.role +
                         ", one of two collaborators solving the question below. Discuss, challenge the other "
                         "collaborator where you disagree, and when both of you agree write '" +
                         std::string(kCoralFinalAnswer) + " <answer>' followed by " + p_.consensus_marker +
                         ".\n\nQuestion: " + question + "\n\n" + transcript(*orch, contents);

    call_llm(ctx, *orch, std::move(prompt), p_.max_tokens,
             [this, orch, done, role = ctx.agent.role](Result<GenerationResponse> r) {
               if (!r.ok()) return done(r.error());
               auto& resp = r.value();
               StepResult step;
               step.author_role = role;
               step.token_count = resp.output_token_count;
               step.content = std::move(resp.content);
               const auto turn = static_cast<std::uint32_t>(orch->history.size()) + 1;
               if (simulated_ && turn == coral_consensus_turn(p_, *orch)) {
                 const bool correct = decision_draw(*orch, role, "agree") < p_.agreement_rate;
                 const std::string truth = payload_string(*orch, p_.answer_field);
                 step.content += std::string("\n") + kCoralFinalAnswer + " " + (correct ? truth : "unknown") + "\n" +
                                 p_.consensus_marker;
               }
               step.done_signal = step.content.find(p_.consensus_marker) != std::string::npos;
               if (step.done_signal) {
                 const std::string truth = payload_string(*orch, p_.answer_field);
                 step.score = !truth.empty() && coral_final_answer(step.content) == truth ? 1.0 : 0.0;
               }
               done(std::move(step));
             });
  }

 private:
  CoralParams p_;
  bool simulated_;
};

inline Workload make_coral(const CoralParams& p, bool simulated, std::uint64_t run_seed) {
  Workload w;
  w.name = "coral";
  auto persona = std::make_shared<CoralPersona>(p, simulated);
  w.roles = {RoleConfig{"persona_a", p.instances, persona, p.service},
             RoleConfig{"persona_b", p.instances, persona, p.service}};
  w.routes.roles = {"persona_a", "persona_b"};
  w.factory = [run_seed, budget = p.budget, order = p.order](const TaskInput& t) {
    return make_sequential(t, order, budget, task_seed(run_seed, t.task_id));
  };
  w.sink_hook = [](const Orchestrator& orch, const std::vector<Bytes>&, const StepContext& ctx) {
    if (!orch.outcome || orch.outcome->status != OutcomeStatus::success) return;
    ctx.metrics->add("coral_consensus_total");
    if (orch.outcome->score.value_or(0.0) >= 1.0) ctx.metrics->add("coral_agreement_correct_total");
  };
  return w;
}

}  // namespace relay
