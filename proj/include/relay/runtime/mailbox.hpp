#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <stdexcept>

#include "relay/error.hpp"

namespace relay {

/// Bounded multi-producer single-consumer FIFO.
///
/// `push` blocks while the queue is full (backpressure on the sender);
/// `try_push` is the non-blocking form used from executor threads, where the
/// caller parks the message instead. Depth never exceeds capacity.
template <class T>
class BoundedMailbox {
 public:
  explicit BoundedMailbox(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("mailbox capacity must be >= 1");
  }

  BoundedMailbox(const BoundedMailbox&) = delete;
  BoundedMailbox& operator=(const BoundedMailbox&) = delete;

  void push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) throw Error(Errc::dead_agent, "mailbox closed");
    enqueue(std::move(item));
    lock.unlock();
    not_empty_.notify_one();
  }

  /// On failure `item` is left untouched.
  bool try_push(T& item) {
    std::unique_lock lock(mu_);
    if (closed_) throw Error(Errc::dead_agent, "mailbox closed");
    if (items_.size() >= capacity_) return false;
    enqueue(std::move(item));
    lock.unlock();
    not_empty_.notify_one();
    return true;
  }

  /// Blocks until an item arrives; nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    return dequeue(lock);
  }

  std::optional<T> try_pop() {
    std::unique_lock lock(mu_);
    if (items_.empty()) return std::nullopt;
    return dequeue(lock);
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }
  std::size_t depth() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }
  std::size_t peak_depth() const {
    std::lock_guard lock(mu_);
    return peak_;
  }
  std::size_t capacity() const noexcept { return capacity_; }

 private:
  void enqueue(T&& item) {
    items_.push_back(std::move(item));
    if (items_.size() > peak_) peak_ = items_.size();
  }

  T dequeue(std::unique_lock<std::mutex>& lock) {
    T item = std::move(items_.front());
    items_.pop_front();
    lock.unlock();
    not_full_.notify_one();
    return item;
  }

  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  std::size_t peak_ = 0;
  bool closed_ = false;
};

}  // namespace relay
