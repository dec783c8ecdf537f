#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "relay/bench/bench.hpp"
#include "relay/object_store.hpp"
#include "relay/services/hub.hpp"
#include "relay/workloads/coral.hpp"
#include "relay/workloads/natural_reasoning.hpp"
#include "relay/workloads/synthetic.hpp"
#include "relay/workloads/tau2.hpp"

// Run configuration. A config file is one JSON object; `key=value` overrides
// use dotted paths (`services.llm.replicas=8`, `workload.drop_rates.filter_by_en=0`)
// and parse the value as JSON, falling back to a plain string. Overrides are
// applied to the parsed document before defaults and validation.
//
//   {
//     "workload": {"name": "coral" | "natural_reasoning" | "tau2_like" | "synthetic", ...params},
//     "seed": 0,
//     "clock": "virtual" | "wall",
//     "max_concurrency": 64,              per input partition
//     "data_parallelism": 1,              input partitions
//     "global_max_concurrency": null,     null: max_concurrency * partitions
//     "mailbox_capacity": null,           null: 2 * max_concurrency
//     "offload_threshold_bytes": 512,     0 offloads everything; null or "inf" disables
//     "retry_limit": 3,
//     "budget": {"max_turns": 64, "max_tokens": 1048576},
//     "roles": {"<role>": {"num_instances": 1, "placement": "permanent"}},
//     "store_budget_bytes": null,
//     "containers": {"capacity": 1024},
//     "threads": 4,                       wall clock only
//     "services": {"<name>": {
//         "kind": "sim" | "http", "replicas": 1, "capacity": 1,
//         "node_label": "opportunistic", "routing": "random" | "least_loaded",
//         "refresh_interval_seconds": 5,
//         "latency": {"base_seconds": 0.05, "seconds_per_token": 0.01, "bytes_per_token": 4,
//                     "tokens": {"kind": "lognormal", "mu": 4.6, "sigma": 1, "min": 1, "max": 8192}},
//         "endpoints": [...], "url_env": "RELAY_LLM_URL", "token_env": "RELAY_LLM_TOKEN",
//         "model": "default", "timeout_seconds": 300}},
//     "fault": {"service": "llm", "replica": "llm-3", "at_progress": 0.25, "mode": "kill"},
//     "bench": {"num_tasks": 10000, "replicas": 8, "capacity": 15, "max_concurrency": 100,
//               "batch_size": 50, "data_parallelism": 2,
//               "stages": [{"service": "llm", "drop_probability": 0, "latency": {...}}]}
//   }

namespace relay {

struct ServiceConfig {
  std::string name;
  bool simulated = true;
  std::uint32_t replicas = 1;
  std::uint32_t capacity = 1;
  NodeLabel node_label = NodeLabel::opportunistic;
  Routing routing = Routing::random;
  double refresh_interval_seconds = 5.0;
  LatencyModel latency;
  std::vector<std::string> endpoints;
  std::string model = "default";
  std::string auth_token;
  double timeout_seconds = 300;

  std::string replica_id(std::uint32_t i) const { return name + "-" + std::to_string(i); }
};

struct FaultConfig {
  std::string service;
  std::string replica;
  double at_progress = 0.25;
  FaultMode mode = FaultMode::kill;
};

struct BenchConfig {
  SyntheticWorkload workload;
  Fleet fleet{8, 15};
  std::uint64_t max_concurrency = 100;
  std::uint64_t batch_size = 50;
  std::uint64_t data_parallelism = 2;
};

struct RoleSetting {
  std::uint32_t num_instances = 1;
  NodeLabel placement = NodeLabel::permanent;
};

struct RunConfig {
  Json document;  // after overrides
  std::string workload;
  Json workload_params = Json::object();
  std::uint64_t seed = 0;
  bool virtual_clock = true;
  std::uint64_t max_concurrency = 64;
  std::uint32_t data_parallelism = 1;
  std::uint64_t global_max_concurrency = 0;  // 0: partitions * max_concurrency
  std::size_t mailbox_capacity = 0;          // 0: 2 * max_concurrency
  std::uint64_t offload_threshold_bytes = 512;
  std::uint32_t retry_limit = 3;
  Budget budget;
  std::map<std::string, RoleSetting> roles;
  std::uint64_t store_budget_bytes = UINT64_MAX;
  std::size_t container_capacity = 1024;
  std::size_t threads = 4;
  std::vector<ServiceConfig> services;
  std::optional<FaultConfig> fault;
  std::optional<BenchConfig> bench;

  std::size_t effective_mailbox_capacity() const {
    return mailbox_capacity ? mailbox_capacity : static_cast<std::size_t>(std::max<std::uint64_t>(2 * max_concurrency, 1));
  }

  const ServiceConfig* service(const std::string& name) const {
    for (const auto& s : services)
      if (s.name == name) return &s;
    return nullptr;
  }
};

namespace config_detail {

inline Error bad(const std::string& path, const std::string& what) { return Error(Errc::config_error, path + ": " + what); }

template <class T>
T get_or(const Json& j, const char* key, T fallback, const std::string& path) {
  if (!j.is_object() || !j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const Json::exception&) {
    throw bad(path + "." + key, "wrong type");
  }
}

inline std::uint64_t positive(const Json& j, const char* key, std::uint64_t fallback, const std::string& path) {
  const auto& v = j.is_object() && j.contains(key) ? j[key] : Json();
  if (v.is_null()) return fallback;
  if (!v.is_number_integer() || v.get<long long>() < 1) throw bad(path + "." + key, "must be an integer >= 1");
  return v.get<std::uint64_t>();
}

inline LatencyModel parse_latency(const Json& j, const std::string& path) {
  LatencyModel m;
  if (j.is_null()) return m;
  if (!j.is_object()) throw bad(path, "must be an object");
  m.base_seconds = get_or(j, "base_seconds", m.base_seconds, path);
  m.seconds_per_token = get_or(j, "seconds_per_token", m.seconds_per_token, path);
  m.bytes_per_token = get_or(j, "bytes_per_token", m.bytes_per_token, path);
  if (!(m.base_seconds >= 0)) throw bad(path + ".base_seconds", "must be >= 0");
  if (!(m.seconds_per_token > 0)) throw bad(path + ".seconds_per_token", "must be > 0");
  if (m.bytes_per_token < 1) throw bad(path + ".bytes_per_token", "must be >= 1");
  if (j.contains("tokens")) {
    const auto& t = j["tokens"];
    const std::string tp = path + ".tokens";
    auto& d = m.tokens;
    const auto kind = get_or<std::string>(t, "kind", "lognormal", tp);
    if (kind == "lognormal")
      d.kind = TokenDistribution::Kind::lognormal;
    else if (kind == "constant")
      d.kind = TokenDistribution::Kind::constant;
    else if (kind == "uniform")
      d.kind = TokenDistribution::Kind::uniform;
    else
      throw bad(tp + ".kind", "unknown distribution '" + kind + "'");
    d.mu = get_or(t, "mu", d.mu, tp);
    d.sigma = get_or(t, "sigma", d.sigma, tp);
    d.constant = get_or(t, "value", d.constant, tp);
    d.low = get_or(t, "low", d.low, tp);
    d.high = get_or(t, "high", d.high, tp);
    d.min_tokens = get_or(t, "min", d.min_tokens, tp);
    d.max_tokens = get_or(t, "max", d.max_tokens, tp);
    if (!(d.sigma >= 0)) throw bad(tp + ".sigma", "must be >= 0");
    if (d.max_tokens < std::max<std::uint64_t>(d.min_tokens, 1)) throw bad(tp + ".max", "must be >= min");
    if (d.kind == TokenDistribution::Kind::uniform && !(d.high >= d.low)) throw bad(tp + ".high", "must be >= low");
  }
  return m;
}

inline NodeLabel parse_label(const std::string& s, const std::string& path) {
  if (s == "permanent") return NodeLabel::permanent;
  if (s == "opportunistic") return NodeLabel::opportunistic;
  throw bad(path, "expected 'permanent' or 'opportunistic', got '" + s + "'");
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

inline ServiceConfig parse_service(const std::string& name, const Json& j, const std::string& path) {
  if (!j.is_object()) throw bad(path, "must be an object");
  ServiceConfig s;
  s.name = name;
  const auto kind = get_or<std::string>(j, "kind", "sim", path);
  if (kind != "sim" && kind != "http") throw bad(path + ".kind", "expected 'sim' or 'http'");
  s.simulated = kind == "sim";
  s.capacity = static_cast<std::uint32_t>(positive(j, "capacity", 1, path));
  s.node_label = parse_label(get_or<std::string>(j, "node_label", "opportunistic", path), path + ".node_label");
  const auto routing = get_or<std::string>(j, "routing", "random", path);
  if (routing == "random")
    s.routing = Routing::random;
  else if (routing == "least_loaded")
    s.routing = Routing::least_loaded;
  else
    throw bad(path + ".routing", "expected 'random' or 'least_loaded'");
  s.refresh_interval_seconds = get_or(j, "refresh_interval_seconds", s.refresh_interval_seconds, path);
  if (!(s.refresh_interval_seconds >= 0)) throw bad(path + ".refresh_interval_seconds", "must be >= 0");
  if (s.simulated) {
    s.replicas = static_cast<std::uint32_t>(positive(j, "replicas", 1, path));
    s.latency = parse_latency(j.contains("latency") ? j["latency"] : Json(), path + ".latency");
  } else {
    s.endpoints = get_or<std::vector<std::string>>(j, "endpoints", {}, path);
    const auto url_env = get_or<std::string>(j, "url_env", "RELAY_LLM_URL", path);
    const auto token_env = get_or<std::string>(j, "token_env", "RELAY_LLM_TOKEN", path);
    if (s.endpoints.empty())
      if (const char* url = std::getenv(url_env.c_str())) s.endpoints = split_list(url);
    if (s.endpoints.empty()) throw bad(path + ".endpoints", "no endpoints given and $" + url_env + " is unset");
    if (const char* tok = std::getenv(token_env.c_str())) s.auth_token = tok;
    s.model = get_or(j, "model", s.model, path);
    s.timeout_seconds = get_or(j, "timeout_seconds", s.timeout_seconds, path);
    s.replicas = static_cast<std::uint32_t>(s.endpoints.size());
  }
  return s;
}

inline BenchConfig parse_bench(const Json& j, std::uint64_t seed, const std::string& path) {
  BenchConfig b;
  b.workload.seed = get_or(j, "seed", seed, path);
  b.workload.num_tasks = get_or(j, "num_tasks", b.workload.num_tasks, path);
  b.fleet.replicas = static_cast<std::uint32_t>(positive(j, "replicas", b.fleet.replicas, path));
  b.fleet.capacity = static_cast<std::uint32_t>(positive(j, "capacity", b.fleet.capacity, path));
  b.max_concurrency = positive(j, "max_concurrency", b.max_concurrency, path);
  b.batch_size = positive(j, "batch_size", b.batch_size, path);
  b.data_parallelism = positive(j, "data_parallelism", b.data_parallelism, path);
  if (j.contains("stages")) {
    if (!j["stages"].is_array() || j["stages"].empty()) throw bad(path + ".stages", "must be a non-empty array");
    b.workload.stages.clear();
    for (std::size_t i = 0; i < j["stages"].size(); ++i) {
      const auto& s = j["stages"][i];
      const std::string sp = path + ".stages[" + std::to_string(i) + "]";
      SyntheticStage st;
      st.service = get_or(s, "service", st.service, sp);
      st.drop_probability = get_or(s, "drop_probability", st.drop_probability, sp);
      st.latency = parse_latency(s.contains("latency") ? s["latency"] : Json(), sp + ".latency");
      b.workload.stages.push_back(st);
    }
  }
  b.workload.validate();
  return b;
}

/// Splits `a.b.2.c` into segments.
inline std::vector<std::string> split_path(const std::string& key) {
  std::vector<std::string> out;
  std::stringstream in(key);
  std::string seg;
  while (std::getline(in, seg, '.')) {
    if (seg.empty()) throw bad(key, "empty path segment");
    out.push_back(seg);
  }
  if (out.empty()) throw bad(key, "empty key");
  return out;
}

}  // namespace config_detail

/// Applies one `key=value` override to a config document.
inline void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error(Errc::config_error, "override '" + assignment + "' is not of the form key=value");
  const auto path = config_detail::split_path(assignment.substr(0, eq));
  const std::string raw = assignment.substr(eq + 1);
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  Json* node = &doc;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto& seg = path[i];
    const bool last = i + 1 == path.size();
    if (node->is_array()) {
      char* end = nullptr;
      const auto idx = std::strtoull(seg.c_str(), &end, 10);
      if (*end != '\0' || idx >= node->size())
        throw Error(Errc::config_error, "override '" + assignment + "': bad array index '" + seg + "'");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = Json::object();
      if (!node->is_object())
        throw Error(Errc::config_error, "override '" + assignment + "': '" + seg + "' is inside a non-object");
      node = &(*node)[seg];
    }
    if (last) *node = value;
  }
}

/// Builds a validated RunConfig from a config document.
inline RunConfig parse_config(Json doc) {
  using namespace config_detail;
  if (!doc.is_object()) throw bad("config", "must be a JSON object");
  RunConfig c;
  c.seed = get_or(doc, "seed", c.seed, "config");

  const Json& w = doc.contains("workload") ? doc["workload"] : Json();
  if (w.is_string()) {
    c.workload = w.get<std::string>();
  } else if (w.is_object()) {
    c.workload = get_or<std::string>(w, "name", "", "workload");
    c.workload_params = w;
  }
  if (c.workload.empty()) throw bad("workload.name", "required");
  static const std::set<std::string> known = {"coral", "natural_reasoning", "tau2_like", "synthetic"};
  if (!known.count(c.workload)) throw bad("workload.name", "unknown workload '" + c.workload + "'");

  const auto clock = get_or<std::string>(doc, "clock", "virtual", "config");
  if (clock != "virtual" && clock != "wall") throw bad("clock", "expected 'virtual' or 'wall'");
  c.virtual_clock = clock == "virtual";
  c.max_concurrency = positive(doc, "max_concurrency", c.max_concurrency, "config");
  c.data_parallelism = static_cast<std::uint32_t>(positive(doc, "data_parallelism", 1, "config"));
  c.global_max_concurrency = positive(doc, "global_max_concurrency", 0, "config");
  c.mailbox_capacity = positive(doc, "mailbox_capacity", 0, "config");
  c.retry_limit = get_or(doc, "retry_limit", c.retry_limit, "config");
  c.threads = positive(doc, "threads", c.threads, "config");
  c.store_budget_bytes = positive(doc, "store_budget_bytes", UINT64_MAX, "config");

  if (!doc.contains("offload_threshold_bytes")) {
    c.offload_threshold_bytes = 512;
  } else {
    const auto& t = doc["offload_threshold_bytes"];
    if (t.is_null() || (t.is_string() && (t == "inf" || t == "infinity" || t == "disabled")))
      c.offload_threshold_bytes = kOffloadDisabled;
    else if (t.is_number_integer() && t.get<long long>() >= 0)
      c.offload_threshold_bytes = t.get<std::uint64_t>();
    else
      throw bad("offload_threshold_bytes", "must be an integer >= 0, null or \"inf\"");
  }

  if (doc.contains("budget")) {
    const auto& b = doc["budget"];
    c.budget.max_turns = static_cast<std::uint32_t>(positive(b, "max_turns", c.budget.max_turns, "budget"));
    c.budget.max_tokens = positive(b, "max_tokens", c.budget.max_tokens, "budget");
  }

  if (doc.contains("roles")) {
    if (!doc["roles"].is_object()) throw bad("roles", "must be an object keyed by role name");
    for (const auto& [name, r] : doc["roles"].items()) {
      const std::string rp = "roles." + name;
      RoleSetting s;
      if (r.is_number_integer()) {
        if (r.get<long long>() < 1) throw bad(rp, "num_instances must be >= 1");
        s.num_instances = r.get<std::uint32_t>();
      } else {
        s.num_instances = static_cast<std::uint32_t>(positive(r, "num_instances", 1, rp));
        s.placement = parse_label(get_or<std::string>(r, "placement", "permanent", rp), rp + ".placement");
      }
      if (s.placement != NodeLabel::permanent) throw bad(rp + ".placement", "agent roles must be permanent");
      c.roles[name] = s;
    }
  }

  if (doc.contains("containers")) c.container_capacity = positive(doc["containers"], "capacity", c.container_capacity, "containers");

  if (doc.contains("services")) {
    if (!doc["services"].is_object()) throw bad("services", "must be an object keyed by service name");
    for (const auto& [name, s] : doc["services"].items()) c.services.push_back(parse_service(name, s, "services." + name));
  }

  if (doc.contains("fault") && !doc["fault"].is_null()) {
    const auto& f = doc["fault"];
    FaultConfig fc;
    fc.service = get_or<std::string>(f, "service", "", "fault");
    fc.replica = get_or<std::string>(f, "replica", "", "fault");
    fc.at_progress = get_or(f, "at_progress", fc.at_progress, "fault");
    const auto mode = get_or<std::string>(f, "mode", "kill", "fault");
    if (mode != "kill" && mode != "revive") throw bad("fault.mode", "expected 'kill' or 'revive'");
    fc.mode = mode == "kill" ? FaultMode::kill : FaultMode::revive;
    if (!(fc.at_progress >= 0 && fc.at_progress <= 1)) throw bad("fault.at_progress", "must be in [0, 1]");
    const auto* svc = c.service(fc.service);
    if (!svc) throw bad("fault.service", "unknown service '" + fc.service + "'");
    if (fc.replica.empty()) fc.replica = svc->replica_id(svc->replicas - 1);
    bool found = false;
    for (std::uint32_t i = 0; i < svc->replicas; ++i) found |= svc->replica_id(i) == fc.replica;
    if (!found) throw bad("fault.replica", "unknown replica '" + fc.replica + "'");
    if (svc->node_label != NodeLabel::opportunistic)
      throw bad("fault.service", "faults target opportunistic replicas only");
    c.fault = fc;
  }

  if (doc.contains("bench") && !doc["bench"].is_null()) c.bench = parse_bench(doc["bench"], c.seed, "bench");
  c.document = std::move(doc);
  return c;
}

inline Json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config_error, "cannot read config " + path.string());
  Json doc = Json::parse(in, nullptr, false, true);
  if (doc.is_discarded()) throw Error(Errc::config_error, path.string() + ": not valid JSON");
  return doc;
}

inline RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  Json doc = read_config_file(path);
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_config(std::move(doc));
}

/// The workload named by the config, with budget and role settings applied.
/// Checks every role's service binding and every role setting against it.
inline Workload build_workload(const RunConfig& c) {
  const Json& p = c.workload_params;
  const bool simulated_default = true;
  auto simulated = [&](const std::string& service) {
    const auto* s = c.service(service);
    return s ? s->simulated : simulated_default;
  };
  Workload w;
  if (c.workload == "coral") {
    auto params = CoralParams::from_json(p);
    params.budget = c.budget;
    w = make_coral(params, simulated(params.service), c.seed);
  } else if (c.workload == "natural_reasoning") {
    auto params = NrParams::from_json(p);
    params.budget = c.budget;
    w = make_natural_reasoning(params, simulated(params.llm_service) && simulated(params.classifier_service), c.seed);
  } else if (c.workload == "tau2_like") {
    auto params = Tau2Params::from_json(p);
    params.budget = c.budget;
    w = make_tau2(params, simulated(params.service), c.seed);
  } else if (c.workload == "synthetic") {
    if (!c.bench) throw Error(Errc::config_error, "bench: required for the synthetic workload");
    w = make_synthetic(c.bench->workload);
  }
  for (const auto& [name, setting] : c.roles) {
    bool found = false;
    for (auto& r : w.roles) {
      if (r.name == name) {
        r.num_instances = setting.num_instances;
        r.placement = setting.placement;
        found = true;
      }
    }
    if (!found && name != kSinkRole)
      throw Error(Errc::config_error, "roles." + name + ": workload " + c.workload + " has no role '" + name + "'");
  }
  for (const auto& r : w.roles)
    if (!r.service.empty() && !c.service(r.service))
      throw Error(Errc::config_error, "services: role '" + r.name + "' is bound to undefined service '" + r.service + "'");
  return w;
}

/// Full validation without running anything.
inline void validate_config(const RunConfig& c) { build_workload(c); }

}  // namespace relay
