#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <queue>
#include <stdexcept>
#include <variant>
#include <vector>

namespace relay {

/// Tasks are admitted independently as soon as fewer than `max_concurrency`
/// are in flight.
struct RowMode {
  std::uint64_t max_concurrency = std::numeric_limits<std::uint64_t>::max();
};

/// `workers` concurrent workers each take the next `batch_size` tasks and
/// start their next batch only when every task of the current one finished.
struct BatchMode {
  std::uint64_t batch_size = 1;
  std::uint64_t workers = 1;
};

using ScheduleMode = std::variant<RowMode, BatchMode>;

/// Makespan of a workload on `replicas * capacity` service slots, computed by
/// a standalone discrete-event simulation. durations[t] lists the service
/// time of each stage of task t; stages of one task run in order, each
/// holding one slot. Requests that find no free slot wait in one FIFO queue.
/// Tasks enter in index order.
inline double makespan_oracle(const std::vector<std::vector<double>>& durations, std::uint32_t replicas,
                              std::uint32_t capacity, ScheduleMode mode) {
  if (replicas < 1 || capacity < 1) throw std::invalid_argument("makespan_oracle: need replicas, capacity >= 1");
  if (const auto* b = std::get_if<BatchMode>(&mode); b && (b->batch_size < 1 || b->workers < 1))
    throw std::invalid_argument("makespan_oracle: need batch_size, workers >= 1");
  if (const auto* r = std::get_if<RowMode>(&mode); r && r->max_concurrency < 1)
    throw std::invalid_argument("makespan_oracle: need max_concurrency >= 1");

  struct Event {
    double time;
    std::uint64_t seq;
    std::size_t task;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  const std::size_t n = durations.size();
  std::priority_queue<Event, std::vector<Event>, Later> events;  // stage completions
  std::deque<std::size_t> waiting;                                 // tasks queued for a slot
  std::vector<std::size_t> stage(n, 0);
  std::vector<std::size_t> batch_of(n, 0);
  std::uint64_t free_slots = static_cast<std::uint64_t>(replicas) * capacity;
  std::uint64_t seq = 0;
  double now = 0;
  double makespan = 0;

  std::size_t next_task = 0;
  std::uint64_t in_flight = 0;
  std::vector<std::uint64_t> batch_left;  // per batch, tasks not yet finished

  auto request = [&](std::size_t t) {
    if (free_slots > 0) {
      --free_slots;
      events.push({now + durations[t][stage[t]], seq++, t});
    } else {
      waiting.push_back(t);
    }
  };

  std::vector<std::size_t> finished_now;
  auto start_task = [&](std::size_t t) {
    if (durations[t].empty())
      finished_now.push_back(t);
    else
      request(t);
  };

  auto start_batch = [&]() {
    const auto& b = std::get<BatchMode>(mode);
    if (next_task >= n) return;
    const std::size_t end = std::min<std::size_t>(n, next_task + b.batch_size);
    const std::size_t id = batch_left.size();
    batch_left.push_back(end - next_task);
    for (; next_task < end; ++next_task) {
      batch_of[next_task] = id;
      start_task(next_task);
    }
  };

  auto admit_rows = [&]() {
    const auto& r = std::get<RowMode>(mode);
    while (next_task < n && in_flight < r.max_concurrency) {
      ++in_flight;
      start_task(next_task++);
    }
  };

  auto finish = [&](std::size_t t) {
    makespan = std::max(makespan, now);
    if (std::holds_alternative<RowMode>(mode)) {
      --in_flight;
      admit_rows();
    } else if (--batch_left[batch_of[t]] == 0) {
      start_batch();
    }
  };

  auto settle = [&]() {
    while (!finished_now.empty()) {
      const auto t = finished_now.back();
      finished_now.pop_back();
      finish(t);
    }
  };

  if (std::holds_alternative<RowMode>(mode)) {
    admit_rows();
  } else {
    for (std::uint64_t w = 0; w < std::get<BatchMode>(mode).workers; ++w) start_batch();
  }
  settle();

  while (!events.empty()) {
    const Event ev = events.top();
    events.pop();
    now = ev.time;
    ++free_slots;
    if (!waiting.empty()) {
      const auto next = waiting.front();
      waiting.pop_front();
      request(next);
    }
    const auto t = ev.task;
    if (++stage[t] < durations[t].size())
      request(t);
    else
      finished_now.push_back(t);
    settle();
  }
  return makespan;
}

}  // namespace relay
