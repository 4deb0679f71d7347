#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fedcoh/memcore.hpp"
#include "fedcoh/sim.hpp"
#include "fedcoh/synclib/queue.hpp"

namespace fedcoh::sync {

// Source side of a handoff: write back the item so the next stage's node can
// see it, then pass its reference through the queue.
inline Task<bool> handoff_send(Proc& src, MpmcQueue& q, std::span<const LocId> lines, std::uint64_t item) {
  for (LocId l : lines) co_await src.flush_line(l);
  Payload payload{};
  for (std::size_t b = 0; b < 8; ++b) payload[b] = static_cast<std::uint8_t>(item >> (8 * b));
  co_return (co_await q.enqueue(src, payload)).has_value();
}

// Destination side: drop any cached copy before the first read.
inline Task<void> handoff_receive(Proc& dst, std::span<const LocId> lines) {
  for (LocId l : lines) co_await dst.flush_line(l);
}

inline std::uint64_t item_of(const Payload& payload) {
  std::uint64_t v = 0;
  for (std::size_t b = 0; b < 8; ++b) v |= std::uint64_t{payload[b]} << (8 * b);
  return v;
}

// A chain of stages, one node each, joined by MPMC queues. Every stage adds 1
// to the item's field, so after S stages each field should read S.
class Pipeline {
 public:
  struct Options {
    std::size_t capacity = 16;
    bool invalidate_on_receive = true;  // false: negative control
    bool warm_caches = false;           // preload every stage node's cache with the items
  };

  Pipeline(MemorySystem& mem, std::vector<NodeId> stage_nodes, std::size_t items)
      : Pipeline(mem, std::move(stage_nodes), items, Options{}) {}

  Pipeline(MemorySystem& mem, std::vector<NodeId> stage_nodes, std::size_t items, Options opt)
      : mem_(mem), nodes_(std::move(stage_nodes)), opt_(opt), done_(items, 0) {
    if (nodes_.empty()) throw UsageError("pipeline needs at least one stage");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      for (std::size_t j = i + 1; j < nodes_.size(); ++j) {
        if (nodes_[i] == nodes_[j]) throw UsageError("pipeline stages must be on distinct nodes");
      }
    }
    for (std::size_t i = 0; i < items; ++i) fields_.push_back(mem.add_location("item[" + std::to_string(i) + "]", 0));
    for (std::size_t s = 0; s + 1 < nodes_.size(); ++s) {
      queues_.push_back(std::make_unique<MpmcQueue>(mem, opt.capacity, nodes_[s], nodes_[s + 1],
                                                    "stage" + std::to_string(s)));
    }
  }

  std::size_t stages() const { return nodes_.size(); }
  std::size_t items() const { return fields_.size(); }
  const MpmcQueue& queue(std::size_t i) const { return *queues_.at(i); }
  std::span<const LocId> fields() const { return fields_; }

  // Creates one Proc per core of every stage node and spawns its loop.
  void spawn(Scheduler& sched) {
    if (opt_.warm_caches) warm();
    for (std::size_t s = 0; s < nodes_.size(); ++s) {
      for (ProcId id : mem_.topology().procs_of(nodes_[s])) {
        procs_.push_back(std::make_unique<Proc>(mem_, id));
        sched.spawn(*procs_.back(), s == 0 ? source(*procs_.back()) : stage(*procs_.back(), s));
      }
    }
  }

  bool finished() const { return completed_.load() == fields_.size(); }

  // Field values in memory after the run.
  std::vector<Value> results() const {
    std::vector<Value> out;
    for (LocId l : fields_) out.push_back(mem_.memory(l));
    return out;
  }

  // Times each item reached the sink.
  const std::vector<std::uint32_t>& arrivals() const { return done_; }

 private:
  void warm() {
    for (NodeId n : nodes_) {
      Proc p(mem_, mem_.topology().procs_of(n).front());
      for (LocId l : fields_) sync_wait(read_once(p, l));
    }
  }

  static Task<void> read_once(Proc& p, LocId l) { co_await p.read(l); }

  Task<void> bump(Proc& p, std::size_t stage, std::uint64_t item) {
    const LocId field = fields_[item];
    if (stage == 0 || opt_.invalidate_on_receive) co_await handoff_receive(p, std::span(&field, 1));
    const Value v = co_await p.read(field);
    co_await p.write(field, v + 1);
    if (stage + 1 == nodes_.size()) {
      co_await p.flush_line(field);
      ++done_[item];
      completed_.fetch_add(1);
      co_return;
    }
    MpmcQueue& out = *queues_[stage];
    while (!co_await handoff_send(p, out, std::span(&field, 1), item)) co_await out.producer_poll(p);
  }

  Task<void> source(Proc& p) {
    while (true) {
      const std::size_t item = next_.fetch_add(1);
      if (item >= fields_.size()) break;
      co_await bump(p, 0, item);
    }
    while (!finished()) {
      if (!queues_.empty()) co_await queues_[0]->producer_poll(p);
      co_await p.yield();
    }
  }

  Task<void> stage(Proc& p, std::size_t s) {
    MpmcQueue& in = *queues_[s - 1];
    MpmcQueue::Idle idle;
    if (s < queues_.size()) {
      idle = [this, s](Proc& q) -> Task<void> {
        co_await queues_[s]->producer_poll(q);
        co_await q.yield();
      };
    }
    co_await in.dequeue_loop(
        p, [this, s](Proc& q, std::size_t, const Payload& payload) { return bump(q, s, item_of(payload)); },
        [this] { return finished(); }, idle);
  }

  MemorySystem& mem_;
  std::vector<NodeId> nodes_;
  Options opt_;
  std::vector<LocId> fields_;
  std::vector<std::unique_ptr<MpmcQueue>> queues_;
  std::vector<std::unique_ptr<Proc>> procs_;
  std::atomic<std::size_t> next_{0};
  std::atomic<std::size_t> completed_{0};
  std::vector<std::uint32_t> done_;
};

}  // namespace fedcoh::sync
