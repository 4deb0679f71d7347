#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>

#include "fedcoh/sim.hpp"

namespace fedcoh::sync {

// Reliable FIFO notification channel between two nodes. Simulated in-process:
// the queue is host-side state, not simulated memory. Each delivered message
// orders the receiver's next memory operation after the sender's last one.
class Channel {
 public:
  static constexpr std::size_t kMaxMessage = 64;

  Channel(NodeId from, NodeId to, double latency_ns) : from_(from), to_(to), latency_ns_(latency_ns) {}

  NodeId from() const { return from_; }
  NodeId to() const { return to_; }
  double latency_ns() const { return latency_ns_; }

  void send(const Proc& sender, std::string msg) {
    if (sender.node() != from_) throw UsageError(to_string(sender.id()) + " is not on the channel's sending node");
    if (msg.size() > kMaxMessage) throw UsageError("notification larger than 64 bytes");
    {
      std::lock_guard lock(mu_);
      queue_.push_back({std::move(msg), sender.mem().last_seq(sender.id())});
      ++sent_;
    }
    cv_.notify_all();
  }

  std::optional<std::string> try_recv(const Proc& receiver) {
    if (receiver.node() != to_) throw UsageError(to_string(receiver.id()) + " is not on the channel's receiving node");
    std::unique_lock lock(mu_);
    return pop_locked(receiver);
  }

  // Waits up to `timeout` for a message. Under a Scheduler the wait is counted
  // in scheduling steps of the receiver (one step per nanosecond of timeout).
  Task<std::optional<std::string>> recv(Proc& receiver, std::chrono::nanoseconds timeout) {
    if (receiver.node() != to_) throw UsageError(to_string(receiver.id()) + " is not on the channel's receiving node");
    if (auto m = try_recv(receiver)) co_return m;
    if (receiver.scheduler() == nullptr) {
      std::unique_lock lock(mu_);
      cv_.wait_for(lock, timeout, [&] { return !queue_.empty(); });
      co_return pop_locked(receiver);
    }
    for (std::int64_t waited = 0; waited < timeout.count(); ++waited) {
      co_await receiver.yield();
      if (auto m = try_recv(receiver)) co_return m;
    }
    co_return std::nullopt;
  }

  std::uint64_t sent() const {
    std::lock_guard lock(mu_);
    return sent_;
  }

 private:
  struct Envelope {
    std::string msg;
    std::optional<Seq> sent_after;
  };

  std::optional<std::string> pop_locked(const Proc& receiver) {
    if (queue_.empty()) return std::nullopt;
    Envelope e = std::move(queue_.front());
    queue_.pop_front();
    if (e.sent_after) receiver.mem().add_edge(*e.sent_after, receiver.id());
    return std::move(e.msg);
  }

  NodeId from_;
  NodeId to_;
  double latency_ns_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Envelope> queue_;
  std::uint64_t sent_ = 0;
};

inline void notify_send(Channel& ch, const Proc& from, std::string msg) { ch.send(from, std::move(msg)); }

inline Task<std::optional<std::string>> notify_recv(Channel& ch, Proc& to, std::chrono::nanoseconds timeout) {
  return ch.recv(to, timeout);
}

}  // namespace fedcoh::sync
