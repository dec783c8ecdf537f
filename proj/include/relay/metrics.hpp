#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "relay/core/model.hpp"

namespace relay {

/// `name{label="value"}`, the key form used for labeled series throughout.
inline std::string metric_key(const std::string& name, const std::string& label, const std::string& value) {
  return name + "{" + label + "=\"" + value + "\"}";
}

/// Point-in-time copy of all counters and gauges.
struct RunMetrics {
  double timestamp = 0.0;
  std::map<std::string, std::uint64_t> counters;
  std::map<std::string, double> gauges;

  std::uint64_t counter(const std::string& key) const {
    auto it = counters.find(key);
    return it == counters.end() ? 0 : it->second;
  }
  double gauge(const std::string& key) const {
    auto it = gauges.find(key);
    return it == gauges.end() ? 0.0 : it->second;
  }

  Json to_json() const { return Json{{"timestamp", timestamp}, {"counters", counters}, {"gauges", gauges}}; }
};

/// Registry of monotone counters plus pull-style gauge collectors.
///
/// Counter references are stable for the registry's lifetime, so hot paths
/// resolve a key once and increment the atomic directly. Snapshots read
/// atomics without blocking writers.
class MetricsRegistry {
 public:
  using Counter = std::atomic<std::uint64_t>;
  using Collector = std::function<void(RunMetrics&)>;

  Counter& counter(const std::string& key) {
    {
      std::shared_lock lock(mu_);
      auto it = counters_.find(key);
      if (it != counters_.end()) return *it->second;
    }
    std::unique_lock lock(mu_);
    auto& slot = counters_[key];
    if (!slot) slot = std::make_unique<Counter>(0);
    return *slot;
  }

  void add(const std::string& key, std::uint64_t n = 1) { counter(key).fetch_add(n, std::memory_order_relaxed); }

  /// Returns a handle for `remove_collector`.
  std::uint64_t add_collector(Collector c) {
    std::unique_lock lock(mu_);
    collectors_.emplace(++next_collector_, std::move(c));
    return next_collector_;
  }

  void remove_collector(std::uint64_t handle) {
    std::unique_lock lock(mu_);
    collectors_.erase(handle);
  }

  RunMetrics snapshot(double now = 0.0) const {
    RunMetrics m;
    m.timestamp = now;
    std::shared_lock lock(mu_);
    for (const auto& [k, v] : counters_) m.counters[k] = v->load(std::memory_order_relaxed);
    for (const auto& [h, c] : collectors_) c(m);
    return m;
  }

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::unique_ptr<Counter>> counters_;
  std::map<std::uint64_t, Collector> collectors_;
  std::uint64_t next_collector_ = 0;
};

/// Prometheus text exposition format (version 0.0.4).
inline std::string to_prometheus(const RunMetrics& m, const std::string& prefix = "relay_") {
  std::ostringstream out;
  auto family = [](const std::string& key) { return key.substr(0, key.find('{')); };
  std::string last;
  for (const auto& [k, v] : m.counters) {
    if (family(k) != last) {
      last = family(k);
      out << "# TYPE " << prefix << last << " counter\n";
    }
    out << prefix << k << ' ' << v << '\n';
  }
  last.clear();
  for (const auto& [k, v] : m.gauges) {
    if (family(k) != last) {
      last = family(k);
      out << "# TYPE " << prefix << last << " gauge\n";
    }
    out << prefix << k << ' ' << v << '\n';
  }
  return out.str();
}

}  // namespace relay
