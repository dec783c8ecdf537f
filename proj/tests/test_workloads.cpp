#include <gtest/gtest.h>

#include "relay/workloads/coral.hpp"
#include "relay/workloads/natural_reasoning.hpp"
#include "relay/workloads/tau2.hpp"
#include "support.hpp"

using namespace relay;
using namespace relay::testing;

namespace {

struct Outcome {
  RunReport report;
  std::vector<Json> lines;
};

Outcome run_workload(SimEnv& env, const Workload& w, std::vector<TaskInput> tasks, std::uint64_t mc,
                     RuntimeOptions opts = {}) {
  Runtime rt(env.executor, env.hub, env.store, env.metrics, &env.containers, opts);
  rt.create_team(w.roles, w.routes, w.sink_hook);
  MemoryOutput out;
  Outcome o;
  o.report = rt.run_dataset({vector_partition(std::move(tasks), mc)}, w.factory, out);
  for (const auto& l : out.lines()) o.lines.push_back(Json::parse(l));
  return o;
}

std::vector<TaskInput> qa_tasks(std::size_t n) {
  std::vector<TaskInput> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(TaskInput{"q" + std::to_string(i), Json{{"question", "what is " + std::to_string(i)}, {"answer", "42"}}, static_cast<std::uint32_t>(i)});
  return out;
}

}  // namespace

TEST(Coral, ConsensusAtTurnSixEndsTheTask) {
  SimEnv env;
  env.add_llm("llm", 2, 8, constant_latency(0.1, 20));
  CoralParams p;
  p.agreement_rate = 1.0;
  auto o = run_workload(env, make_coral(p, true, 1), qa_tasks(20), 10);
  ASSERT_EQ(o.lines.size(), 20u);
  for (const auto& j : o.lines) {
    EXPECT_EQ(j["status"], "success");
    EXPECT_EQ(j["turns"], 6);
    EXPECT_EQ(j["score"], 1.0);
    ASSERT_EQ(j["history"].size(), 6u);
    EXPECT_EQ(j["history"][0]["role"], "persona_a");
    EXPECT_EQ(j["history"][5]["role"], "persona_b");
    EXPECT_NE(j["history"][5]["content"].get<std::string>().find("FINAL ANSWER: 42"), std::string::npos);
  }
  EXPECT_EQ(o.report.metrics.counter("coral_consensus_total"), 20u);
  EXPECT_EQ(o.report.metrics.counter("coral_agreement_correct_total"), 20u);
}

TEST(Coral, BudgetBelowConsensusFails) {
  SimEnv env;
  env.add_llm("llm", 1, 8, constant_latency(0.1, 20));
  CoralParams p;
  p.budget.max_turns = 4;
  auto o = run_workload(env, make_coral(p, true, 1), qa_tasks(5), 5);
  for (const auto& j : o.lines) {
    EXPECT_EQ(j["status"], "failed");
    EXPECT_EQ(j["reason"], "budget");
    EXPECT_EQ(j["turns"], 4);
  }
}

TEST(Coral, CustomOrderStartsWithPersonaB) {
  SimEnv env;
  env.add_llm("llm", 1, 8, constant_latency(0.1, 20));
  CoralParams p;
  p.order = {"persona_b", "persona_a"};
  auto o = run_workload(env, make_coral(p, true, 1), qa_tasks(2), 2);
  EXPECT_EQ(o.lines[0]["history"][0]["role"], "persona_b");
}

TEST(Coral, OrderValidation) {
  try {
    CoralParams::from_json(Json{{"order", {"persona_a", "judge"}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config_error);
    EXPECT_NE(std::string(e.what()).find("judge"), std::string::npos);
  }
}

TEST(Coral, FinalAnswerExtraction) {
  EXPECT_EQ(coral_final_answer("blah\nFINAL ANSWER:  7 \n<agree/>"), "7");
  EXPECT_EQ(coral_final_answer("FINAL ANSWER: 1\nFINAL ANSWER: 2"), "2");
  EXPECT_EQ(coral_final_answer("nothing"), "");
}

TEST(Coral, EightReplicasSustainFourHundredInFlight) {
  SimEnv env;
  auto backend = env.add_llm("llm", 8, 50, constant_latency(1.0, 50), Routing::least_loaded);
  CoralParams p;
  auto o = run_workload(env, make_coral(p, true, 3), qa_tasks(2000), 400);
  EXPECT_EQ(o.report.peak_in_flight, 400u);
  EXPECT_EQ(o.report.completed, 2000u);
  for (const auto& l : backend->loads()) EXPECT_EQ(l.peak_in_service, 50u);
}

TEST(NaturalReasoning, ZeroDropRatesAllSucceed) {
  SimEnv env;
  env.add_llm("classifier", 1, 16, constant_latency(0.01, 2));
  env.add_llm("llm", 2, 16, constant_latency(0.1, 30));
  NrParams p;
  std::vector<TaskInput> tasks;
  for (int i = 0; i < 200; ++i) tasks.push_back(TaskInput{"d" + std::to_string(i), Json{{"text", "doc"}}, 0});
  auto o = run_workload(env, make_natural_reasoning(p, true, 1), tasks, 32);
  for (const auto& j : o.lines) {
    EXPECT_EQ(j["status"], "success");
    EXPECT_EQ(j["turns"], 3);
  }
  EXPECT_EQ(o.report.metrics.counter("tasks_success_total"), 200u);
}

TEST(NaturalReasoning, FromFractionsIsConditional) {
  auto r = NrDropRates::from_fractions(0.5, 0.25, 0.125, 0.0625);
  EXPECT_DOUBLE_EQ(r.en, 0.5);
  EXPECT_DOUBLE_EQ(r.classifier, 0.5);
  EXPECT_DOUBLE_EQ(r.score, 0.5);
  EXPECT_DOUBLE_EQ(r.no_boxed, 0.5);
  EXPECT_THROW(NrParams::from_json(Json{{"drop_fractions", {{"filter_by_en", 0.7}, {"filter_by_score", 0.4}}}}), Error);
}

TEST(NaturalReasoning, FractionsMatchAtTenThousand) {
  SimEnv env;
  env.add_llm("classifier", 2, 64, constant_latency(0.01, 2));
  env.add_llm("llm", 4, 64, constant_latency(0.1, 30));
  NrParams p;
  p.rates = NrDropRates::from_fractions(0.2, 0.3, 0.1, 0.05);
  std::vector<TaskInput> tasks;
  for (int i = 0; i < 10000; ++i) tasks.push_back(TaskInput{"d" + std::to_string(i), Json{{"text", "doc"}}, 0});
  auto o = run_workload(env, make_natural_reasoning(p, true, 11), tasks, 256);
  std::map<std::string, double> share;
  for (const auto& j : o.lines) share[j.value("reason", std::string("success"))] += 1.0 / 10000;
  // binomial sd at n = 10000 is at most 0.005; allow 4 sd
  EXPECT_NEAR(share["filter_by_en"], 0.2, 0.02);
  EXPECT_NEAR(share["filter_by_classifier"], 0.3, 0.02);
  EXPECT_NEAR(share["filter_by_score"], 0.1, 0.02);
  EXPECT_NEAR(share["filter_by_no_boxed_answer"], 0.05, 0.02);
  EXPECT_NEAR(share["success"], 0.35, 0.02);
}

TEST(NaturalReasoning, ParseHelpers) {
  EXPECT_EQ(parse_quality_score("Quality SCORE: 4.5/5"), 4.5);
  EXPECT_EQ(parse_quality_score("no number"), -1);
  EXPECT_TRUE(starts_with_yes("  Yes, it is"));
  EXPECT_FALSE(starts_with_yes("no"));
  EXPECT_GT(ascii_ratio("plain english"), 0.99);
}

TEST(Tau2, ScriptedToolCallsEarnFullReward) {
  SimEnv env;
  env.add_llm("llm", 2, 8, constant_latency(0.1, 20));
  Tau2Params p;
  std::vector<TaskInput> tasks{TaskInput{"s0", Json{{"rounds", 1}, {"assertions", {{"a", "1"}, {"b", "2"}, {"c", "3"}}}}, 0}};
  auto o = run_workload(env, make_tau2(p, true, 1), tasks, 1);
  ASSERT_EQ(o.lines.size(), 1u);
  const auto& j = o.lines[0];
  EXPECT_EQ(j["status"], "success");
  EXPECT_EQ(j["score"], 1.0);
  int tool_turns = 0;
  for (const auto& h : j["history"]) tool_turns += h["role"] == "tool_executor";
  EXPECT_EQ(tool_turns, 3);
  EXPECT_EQ(j["history"].back()["role"], "reward_calculator");
  EXPECT_EQ(env.containers.live(), 0u);
}

TEST(Tau2, ToolErrorsLowerTheReward) {
  SimEnv env;
  env.add_llm("llm", 2, 8, constant_latency(0.1, 20));
  Tau2Params p;
  p.tool_error_rate = 1.0;
  std::vector<TaskInput> tasks{TaskInput{"s0", Json{{"assertions", {{"a", "1"}, {"b", "2"}}}}, 0}};
  auto o = run_workload(env, make_tau2(p, true, 1), tasks, 1);
  EXPECT_EQ(o.lines[0]["score"], 0.0);
}

TEST(Tau2, ReplayRewardDetectsTamperedState) {
  ContainerPool pool(1);
  Orchestrator orch = make_branching(TaskInput{"t", Json::object(), 0}, "user_simulator", {}, 1);
  orch.history = {HistoryEntry{"assistant", 0, ContentSlot::inline_bytes("x"), 1, 1},
                  HistoryEntry{"tool_executor", 1, ContentSlot::inline_bytes("y"), 1, 0}};
  Tau2Scenario s;
  s.assertions = {{"k", "v"}};
  EXPECT_EQ(tau2_replay_reward(pool, "t", orch, {"TOOL_CALL: set k v", "STATE: 0000000000000000"}, s), 0.0);
  pool.release("t");
  EXPECT_EQ(tau2_replay_reward(pool, "t", orch, {"TOOL_CALL: set k v", "RESULT: ok"}, s), 1.0);
}

TEST(Tau2, OffloadDoesNotChangeOutput) {
  auto run = [](std::uint64_t threshold) {
    SimEnv env;
    LatencyModel lat;
    lat.tokens.mu = 4.0;
    lat.tokens.sigma = 1.2;
    env.add_llm("llm", 3, 8, lat);
    Tau2Params p;
    std::vector<TaskInput> tasks;
    for (int i = 0; i < 60; ++i) tasks.push_back(TaskInput{"s" + std::to_string(i), Json::object(), 0});
    auto o = run_workload(env, make_tau2(p, true, 5), tasks, 12, RuntimeOptions{1024, threshold});
    std::vector<std::string> lines;
    for (const auto& j : o.lines) lines.push_back(j.dump());
    return std::make_pair(sorted(lines), o.report.metrics.counter("store_puts_total"));
  };
  const auto on = run(512);
  const auto off = run(kOffloadDisabled);
  EXPECT_EQ(on.first, off.first);
  EXPECT_GT(on.second, 0u);
  EXPECT_EQ(off.second, 0u);
}

TEST(Tau2, ManyTasksOnSmallPool) {
  SimEnv env;
  env.add_llm("llm", 6, 8, constant_latency(0.2, 30));
  ContainerPool pool(15, 2);
  Tau2Params p;
  auto w = make_tau2(p, true, 9);
  Runtime rt(env.executor, env.hub, env.store, env.metrics, &pool);
  rt.create_team(w.roles, w.routes, w.sink_hook);
  std::vector<TaskInput> tasks;
  for (int i = 0; i < 150; ++i) tasks.push_back(TaskInput{"s" + std::to_string(i), Json::object(), 0});
  MemoryOutput out;
  auto rep = rt.run_dataset({vector_partition(tasks, 15)}, w.factory, out);
  EXPECT_EQ(rep.completed, 150u);
  EXPECT_EQ(rep.metrics.counter("tasks_success_total"), 150u);
  for (const auto& l : out.lines()) EXPECT_EQ(Json::parse(l)["score"], 1.0);
  EXPECT_EQ(pool.live(), 0u);
  EXPECT_EQ(pool.instances_created(), 150u);  // the replay reuses the task container
}
