#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <queue>
#include <vector>

#include <boost/asio/post.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/thread_pool.hpp>

namespace relay {

/// Where runtime work runs and what time it is. Two implementations share the
/// same contract: a deterministic discrete-event loop (virtual seconds) and a
/// thread pool (wall-clock seconds since construction).
class Executor {
 public:
  using Task = std::function<void()>;

  virtual ~Executor() = default;

  virtual double now() const = 0;
  virtual void post(Task task) = 0;
  virtual void post_after(double delay_seconds, Task task) = 0;

  /// Work that may block a thread (network I/O). Completion must be reported
  /// back through `post`.
  virtual void post_blocking(Task task) { post(std::move(task)); }

  /// Runs until `done()` holds. Returns false when no further progress is
  /// possible (virtual clock drained) before `done()` became true.
  virtual bool drive(const std::function<bool()>& done) = 0;

  /// Wakes a thread blocked in `drive` to re-check its predicate.
  virtual void notify() {}

  virtual bool is_virtual() const = 0;
};

// ----------------------------------------------------------------------------
// VirtualExecutor
// ----------------------------------------------------------------------------

/// Single-threaded discrete-event loop. Events at equal times run in posting
/// order, which makes every run with the same inputs bit-for-bit repeatable.
class VirtualExecutor final : public Executor {
 public:
  double now() const override { return now_; }

  void post(Task task) override { push(now_, std::move(task)); }

  void post_after(double delay_seconds, Task task) override {
    push(now_ + (delay_seconds > 0 ? delay_seconds : 0.0), std::move(task));
  }

  bool drive(const std::function<bool()>& done) override {
    while (!done()) {
      if (events_.empty()) return false;
      Event ev = std::move(const_cast<Event&>(events_.top()));
      events_.pop();
      now_ = ev.time;
      ++processed_;
      ev.task();
    }
    return true;
  }

  /// Drains every pending event.
  void run() {
    drive([] { return false; });
  }

  bool is_virtual() const override { return true; }

  std::size_t pending() const { return events_.size(); }
  std::uint64_t processed() const { return processed_; }

 private:
  struct Event {
    double time;
    std::uint64_t seq;
    Task task;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void push(double t, Task task) { events_.push(Event{t, next_seq_++, std::move(task)}); }

  std::priority_queue<Event, std::vector<Event>, Later> events_;
  double now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
};

// ----------------------------------------------------------------------------
// ThreadExecutor
// ----------------------------------------------------------------------------

/// Wall-clock executor on an asio thread pool. Timers never occupy a thread,
/// so thousands of awaited service calls can be outstanding at once.
class ThreadExecutor final : public Executor {
 public:
  explicit ThreadExecutor(std::size_t threads = 4, std::size_t blocking_threads = 16)
      : pool_(threads), blocking_(blocking_threads), start_(std::chrono::steady_clock::now()) {}

  ~ThreadExecutor() override { shutdown(); }

  double now() const override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  void post(Task task) override { boost::asio::post(pool_, std::move(task)); }

  void post_after(double delay_seconds, Task task) override {
    auto timer = std::make_shared<boost::asio::steady_timer>(
        pool_.get_executor(), std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                  std::chrono::duration<double>(delay_seconds > 0 ? delay_seconds : 0.0)));
    timer->async_wait([timer, task = std::move(task)](const boost::system::error_code& ec) {
      if (!ec) task();
    });
  }

  void post_blocking(Task task) override { boost::asio::post(blocking_, std::move(task)); }

  bool drive(const std::function<bool()>& done) override {
    std::unique_lock lock(mu_);
    cv_.wait(lock, done);
    return true;
  }

  void notify() override {
    std::lock_guard lock(mu_);
    cv_.notify_all();
  }

  bool is_virtual() const override { return false; }

  /// Stops accepting work and joins all threads. Pending timers are abandoned.
  void shutdown() {
    blocking_.stop();
    blocking_.join();
    pool_.stop();
    pool_.join();
  }

 private:
  boost::asio::thread_pool pool_;
  boost::asio::thread_pool blocking_;
  std::chrono::steady_clock::time_point start_;
  std::mutex mu_;
  std::condition_variable cv_;
};

}  // namespace relay
