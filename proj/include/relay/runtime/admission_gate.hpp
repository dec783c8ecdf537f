#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace relay {

struct GateSample {
  double time;
  std::uint64_t in_flight;
};

/// Counting semaphore bounding the number of in-flight orchestrators.
/// Acquired by the driver on dispatch, released by the sink on completion.
class AdmissionGate {
 public:
  explicit AdmissionGate(std::uint64_t max_concurrency, bool record_trace = false)
      : max_(max_concurrency), record_trace_(record_trace) {
    if (max_concurrency < 1) throw std::invalid_argument("max_concurrency must be >= 1");
  }

  AdmissionGate(const AdmissionGate&) = delete;
  AdmissionGate& operator=(const AdmissionGate&) = delete;

  bool try_acquire(double now = 0.0) {
    std::uint64_t cur = in_flight_.load(std::memory_order_relaxed);
    do {
      if (cur >= max_) return false;
    } while (!in_flight_.compare_exchange_weak(cur, cur + 1, std::memory_order_acq_rel));
    note(cur + 1, now);
    return true;
  }

  void release(double now = 0.0) {
    std::uint64_t prev = in_flight_.fetch_sub(1, std::memory_order_acq_rel);
    if (prev == 0) {
      in_flight_.fetch_add(1);
      throw std::logic_error("AdmissionGate::release without acquire");
    }
    if (record_trace_) {
      std::lock_guard lock(trace_mu_);
      trace_.push_back({now, prev - 1});
    }
  }

  std::uint64_t in_flight() const noexcept { return in_flight_.load(std::memory_order_acquire); }
  std::uint64_t peak() const noexcept { return peak_.load(std::memory_order_acquire); }
  std::uint64_t max_concurrency() const noexcept { return max_; }

  /// Every observed (time, in_flight) value after each change, when tracing.
  std::vector<GateSample> trace() const {
    std::lock_guard lock(trace_mu_);
    return trace_;
  }

 private:
  void note(std::uint64_t value, double now) {
    std::uint64_t p = peak_.load(std::memory_order_relaxed);
    while (value > p && !peak_.compare_exchange_weak(p, value, std::memory_order_acq_rel)) {
    }
    if (record_trace_) {
      std::lock_guard lock(trace_mu_);
      trace_.push_back({now, value});
    }
  }

  const std::uint64_t max_;
  const bool record_trace_;
  std::atomic<std::uint64_t> in_flight_{0};
  std::atomic<std::uint64_t> peak_{0};
  mutable std::mutex trace_mu_;
  std::vector<GateSample> trace_;
};

}  // namespace relay
