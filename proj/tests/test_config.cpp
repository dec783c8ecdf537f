#include <gtest/gtest.h>

#include <httplib.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fstream>
#include <random>

#include "relay/app.hpp"

using namespace relay;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("relay-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

void write_questions(const fs::path& p, int n) {
  std::ofstream out(p);
  for (int i = 0; i < n; ++i)
    out << Json{{"id", "q" + std::to_string(i)}, {"question", "q?"}, {"answer", "a"}}.dump() << '\n';
}

Json coral_doc() {
  return Json::parse(R"({
    "workload": {"name": "coral", "consensus_turn_min": 2, "consensus_turn_max": 2, "agreement_rate": 1},
    "services": {"llm": {"replicas": 2, "capacity": 4,
                         "latency": {"base_seconds": 0.1, "tokens": {"kind": "constant", "value": 10}}}}
  })");
}

Errc config_code(const Json& doc) {
  try {
    validate_config(parse_config(doc));
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::protocol_error;
}

std::string config_message(const Json& doc) {
  try {
    validate_config(parse_config(doc));
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

int free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  socklen_t len = sizeof(addr);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), len);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

}  // namespace

TEST(Config, Defaults) {
  auto c = parse_config(coral_doc());
  EXPECT_EQ(c.offload_threshold_bytes, 512u);
  EXPECT_EQ(c.retry_limit, 3u);
  EXPECT_EQ(c.max_concurrency, 64u);
  EXPECT_EQ(c.effective_mailbox_capacity(), 128u);
  EXPECT_EQ(c.data_parallelism, 1u);
  EXPECT_TRUE(c.virtual_clock);
  EXPECT_FALSE(c.fault);
  ASSERT_NE(c.service("llm"), nullptr);
  EXPECT_EQ(c.service("llm")->replica_id(1), "llm-1");
}

TEST(Config, OffloadThresholdForms) {
  auto doc = coral_doc();
  doc["offload_threshold_bytes"] = nullptr;
  EXPECT_EQ(parse_config(doc).offload_threshold_bytes, kOffloadDisabled);
  doc["offload_threshold_bytes"] = "inf";
  EXPECT_EQ(parse_config(doc).offload_threshold_bytes, kOffloadDisabled);
  doc["offload_threshold_bytes"] = 0;
  EXPECT_EQ(parse_config(doc).offload_threshold_bytes, 0u);
  doc["offload_threshold_bytes"] = -1;
  EXPECT_THROW(parse_config(doc), Error);
}

TEST(Config, OverridesUseDottedPaths) {
  auto doc = coral_doc();
  apply_override(doc, "max_concurrency=12400");
  apply_override(doc, "services.llm.replicas=8");
  apply_override(doc, "workload.order=[\"persona_b\",\"persona_a\"]");
  apply_override(doc, "workload.order.1=persona_b");
  apply_override(doc, "clock=wall");
  auto c = parse_config(doc);
  EXPECT_EQ(c.max_concurrency, 12400u);
  EXPECT_EQ(c.service("llm")->replicas, 8u);
  EXPECT_FALSE(c.virtual_clock);
  EXPECT_EQ(c.workload_params["order"], Json({"persona_b", "persona_b"}));
  EXPECT_THROW(apply_override(doc, "novalue"), Error);
  EXPECT_THROW(apply_override(doc, "max_concurrency.x=1"), Error);
}

TEST(Config, UnknownOrderRoleIsNamed) {
  auto doc = coral_doc();
  doc["workload"]["order"] = {"persona_a", "critic"};
  EXPECT_EQ(config_code(doc), Errc::config_error);
  EXPECT_NE(config_message(doc).find("critic"), std::string::npos);
}

TEST(Config, RejectsBadDocuments) {
  auto doc = coral_doc();
  doc["workload"]["name"] = "nope";
  EXPECT_EQ(config_code(doc), Errc::config_error);

  doc = coral_doc();
  doc["max_concurrency"] = 0;
  EXPECT_EQ(config_code(doc), Errc::config_error);

  doc = coral_doc();
  doc["roles"] = {{"judge", {{"num_instances", 2}}}};
  EXPECT_NE(config_message(doc).find("judge"), std::string::npos);

  doc = coral_doc();
  doc["roles"] = {{"persona_a", {{"placement", "opportunistic"}}}};
  EXPECT_EQ(config_code(doc), Errc::config_error);

  doc = coral_doc();
  doc["services"]["llm"]["node_label"] = "permanent";
  doc["fault"] = {{"service", "llm"}, {"at_progress", 0.5}};
  EXPECT_EQ(config_code(doc), Errc::config_error);

  doc = coral_doc();
  doc["fault"] = {{"service", "other"}, {"at_progress", 0.5}};
  EXPECT_EQ(config_code(doc), Errc::config_error);

  doc = coral_doc();
  doc["services"].erase("llm");
  EXPECT_EQ(config_code(doc), Errc::config_error);
}

TEST(Config, RoleSettingsApply) {
  auto doc = coral_doc();
  doc["roles"] = {{"persona_b", {{"num_instances", 3}}}};
  auto w = build_workload(parse_config(doc));
  EXPECT_EQ(w.role("persona_b").num_instances, 3u);
  EXPECT_EQ(w.role("persona_a").num_instances, 1u);
}

TEST(Config, FaultDefaultsToLastReplica) {
  auto doc = coral_doc();
  doc["fault"] = {{"service", "llm"}, {"at_progress", 0.25}};
  auto c = parse_config(doc);
  ASSERT_TRUE(c.fault);
  EXPECT_EQ(c.fault->replica, "llm-1");
}

TEST(Config, ShippedWorkloadsValidate) {
  ::setenv("RELAY_LLM_URL", "http://127.0.0.1:9,http://127.0.0.1:10", 0);
  for (const auto& e : fs::directory_iterator(fs::path(RELAY_SOURCE_DIR) / "workloads")) {
    if (e.path().extension() != ".json") continue;
    SCOPED_TRACE(e.path().string());
    EXPECT_NO_THROW(validate_config(load_config(e.path())));
  }
}

TEST(Config, MissingAndMalformedFiles) {
  TempDir dir;
  EXPECT_THROW(load_config(dir / "absent.json"), Error);
  write_file(dir / "bad.json", "{ nope");
  EXPECT_THROW(load_config(dir / "bad.json"), Error);
}

TEST(Input, TwentyPartitionsOfSevenHundred) {
  TempDir dir;
  for (int i = 0; i < 40; ++i) write_questions(dir / ("part-" + std::to_string(100 + i) + ".jsonl"), 3);
  write_file(dir / "notes.txt", "ignored");
  auto plan = plan_input(dir.path(), 20, 700);
  EXPECT_EQ(plan.partitions.size(), 20u);
  EXPECT_EQ(plan.total_rows, 120u);
  EXPECT_EQ(effective_concurrency(plan.partitions, 0), 14000u);
  EXPECT_EQ(effective_concurrency(plan.partitions, 5000), 5000u);
  std::size_t rows = 0;
  for (auto& p : plan.partitions)
    while (p.source->next()) ++rows;
  EXPECT_EQ(rows, 120u);
}

TEST(Input, SingleFileSplitsContiguously) {
  TempDir dir;
  write_questions(dir / "q.jsonl", 10);
  auto plan = plan_input(dir / "q.jsonl", 3, 5);
  ASSERT_EQ(plan.partitions.size(), 3u);
  std::vector<std::string> ids;
  for (auto& p : plan.partitions)
    while (auto t = p.source->next()) ids.push_back(t->task_id);
  ASSERT_EQ(ids.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(ids[i], "q" + std::to_string(i));
  EXPECT_THROW(plan_input(dir / "missing.jsonl", 1, 1), Error);
}

TEST(RunCommand, EmptyInputDirectory) {
  TempDir dir;
  fs::create_directories(dir / "in");
  RunCommandOptions o;
  o.input = dir / "in";
  o.output = dir / "out.jsonl";
  auto s = run_command(parse_config(coral_doc()), o);
  EXPECT_EQ(s.exit_code, 0);
  EXPECT_EQ(s.report.completed, 0u);
  EXPECT_TRUE(fs::exists(o.output));
  EXPECT_TRUE(read_lines(o.output).empty());
}

TEST(RunCommand, CountsMetricsAndSamples) {
  TempDir dir;
  write_questions(dir / "q.jsonl", 10);
  RunCommandOptions o;
  o.input = dir / "q.jsonl";
  o.output = dir / "out.jsonl";
  o.metrics_jsonl = dir / "metrics.jsonl";
  o.metrics_interval_seconds = 0.1;
  auto s = run_command(parse_config(coral_doc()), o);
  EXPECT_EQ(s.exit_code, 0);
  EXPECT_EQ(s.report.metrics.counter("tasks_completed_total"), 10u);
  EXPECT_EQ(read_lines(o.output).size(), 10u);
  const auto samples = read_lines(*o.metrics_jsonl);
  ASSERT_GE(samples.size(), 2u);
  const auto last = Json::parse(samples.back());
  EXPECT_EQ(last["counters"]["tasks_completed_total"], 10);
  const auto text = to_prometheus(s.report.metrics);
  EXPECT_NE(text.find("# TYPE relay_tasks_completed_total counter\nrelay_tasks_completed_total 10\n"), std::string::npos);
  EXPECT_EQ(s.to_json()["success"], 10);
}

TEST(RunCommand, FailuresSetExitCodeUnlessAllowed) {
  TempDir dir;
  write_questions(dir / "q.jsonl", 4);
  auto doc = coral_doc();
  doc["budget"] = {{"max_turns", 1}};
  RunCommandOptions o;
  o.input = dir / "q.jsonl";
  o.output = dir / "out.jsonl";
  EXPECT_EQ(run_command(parse_config(doc), o).exit_code, 1);
  o.allow_failures = true;
  EXPECT_EQ(run_command(parse_config(doc), o).exit_code, 0);
  for (const auto& l : read_lines(o.output)) EXPECT_EQ(Json::parse(l)["reason"], "budget");
}

TEST(RunCommand, FaultInjectionAtProgress) {
  TempDir dir;
  write_questions(dir / "q.jsonl", 40);
  auto doc = coral_doc();
  doc["services"]["llm"]["replicas"] = 3;
  doc["fault"] = {{"service", "llm"}, {"at_progress", 0.25}};
  RunCommandOptions o;
  o.input = dir / "q.jsonl";
  o.output = dir / "out.jsonl";
  auto s = run_command(parse_config(doc), o);
  EXPECT_TRUE(s.fault_injected);
  EXPECT_EQ(s.exit_code, 0);
  EXPECT_EQ(s.report.metrics.counter("faults_killed_total"), 1u);
  EXPECT_EQ(s.report.metrics.counter("tasks_success_total"), 40u);
}

TEST(Metrics, PrometheusEndpointServesText) {
  VirtualExecutor ex;
  MetricsRegistry metrics;
  metrics.add("tasks_completed_total", 3);
  const int port = free_port();
  PrometheusExporter exporter(metrics, ex, port, "127.0.0.1");
  ASSERT_TRUE(exporter.active());
  httplib::Client client("127.0.0.1", port);
  httplib::Result res;
  for (int i = 0; i < 50 && !(res = client.Get("/metrics")); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_NE(res->body.find("relay_tasks_completed_total 3"), std::string::npos);
  auto other = httplib::Client("127.0.0.1", port).Get("/other");
  ASSERT_TRUE(other) << httplib::to_string(other.error());
  EXPECT_EQ(other->status, 404);
}

TEST(Metrics, PrometheusFamiliesAreTypedOnce) {
  RunMetrics m;
  m.counters[metric_key("task_reasons_total", "reason", "a")] = 1;
  m.counters[metric_key("task_reasons_total", "reason", "b")] = 2;
  m.gauges["in_flight"] = 4;
  const auto text = to_prometheus(m);
  EXPECT_EQ(text,
            "# TYPE relay_task_reasons_total counter\n"
            "relay_task_reasons_total{reason=\"a\"} 1\n"
            "relay_task_reasons_total{reason=\"b\"} 2\n"
            "# TYPE relay_in_flight gauge\n"
            "relay_in_flight 4\n");
}

TEST(Bench, CommandReportsOracleDeltas) {
  auto doc = Json::parse(R"({
    "workload": "synthetic",
    "bench": {"num_tasks": 500, "replicas": 2, "capacity": 4, "max_concurrency": 8, "batch_size": 4,
              "data_parallelism": 2,
              "stages": [{"latency": {"base_seconds": 0, "seconds_per_token": 0.01,
                                      "tokens": {"kind": "lognormal", "mu": 4.6, "sigma": 1}}}]}
  })");
  auto c = parse_config(doc);
  ASSERT_TRUE(c.bench);
  auto r = bench_command(*c.bench);
  EXPECT_GT(r.ratio, 1.0);
  EXPECT_LT(std::abs(BenchReport::delta(r.row.makespan_seconds, r.oracle_row_makespan)), 1e-9);
  EXPECT_LT(std::abs(BenchReport::delta(r.batch.makespan_seconds, r.oracle_batch_makespan)), 1e-9);
  const auto j = r.to_json();
  EXPECT_TRUE(j.contains("row_level"));
  EXPECT_TRUE(j.contains("batch_level"));
  EXPECT_EQ(j["throughput_ratio"], r.ratio);
}
