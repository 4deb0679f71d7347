#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <memory>
#include <vector>

#include "fedcoh/memcore.hpp"
#include "fedcoh/sim.hpp"
#include "fedcoh/synclib/bakery.hpp"
#include "fedcoh/synclib/pipeline.hpp"
#include "fedcoh/synclib/queue.hpp"

namespace fedcoh::sync {

struct QueueDemoConfig {
  std::uint32_t producers = 4;
  std::uint32_t consumers = 4;
  std::uint64_t items = 10'000;
  std::size_t capacity = 64;
  std::uint64_t seed = 1;
  double eviction_rate = 0;
  bool record = false;  // keep the trace for the slot-protocol monitor
};

struct QueueDemoResult {
  std::uint64_t enqueued = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;
  std::uint64_t duplicated = 0;
  std::uint64_t payload_mismatches = 0;
  QueueStats stats;
  std::uint64_t steps = 0;
  std::size_t protocol_violations = 0;

  bool exactly_once() const { return lost == 0 && duplicated == 0 && payload_mismatches == 0 && delivered == enqueued; }
};

// Payload i carries i in bytes 0..7 and a seeded pattern in the rest.
inline Payload demo_payload(std::uint64_t i, std::uint64_t seed) {
  Payload p{};
  std::uint64_t z = seed ^ (i * 0x9e3779b97f4a7c15ULL);
  for (std::size_t b = 0; b < kPayloadBytes; ++b) {
    if (b < 8) {
      p[b] = static_cast<std::uint8_t>(i >> (8 * b));
    } else {
      z = z * 6364136223846793005ULL + 1442695040888963407ULL;
      p[b] = static_cast<std::uint8_t>(z >> 56);
    }
  }
  return p;
}

// P producers on node 0, C consumers on node 1, N payloads through one queue
// under a seeded random schedule.
inline QueueDemoResult run_queue_demo(const QueueDemoConfig& cfg) {
  if (cfg.producers == 0 || cfg.consumers == 0) throw UsageError("need at least one producer and one consumer");
  const std::uint32_t cores = std::max(cfg.producers, cfg.consumers);
  MemorySystem mem(build_topology(2, 1, 1, cores), {},
                   cfg.eviction_rate > 0 ? EvictionConfig::random(cfg.eviction_rate, cfg.seed) : EvictionConfig::off(),
                   cfg.record);
  MpmcQueue q(mem, cfg.capacity, NodeId{0}, NodeId{1});
  std::vector<std::uint32_t> seen(cfg.items, 0);
  QueueDemoResult res;
  std::atomic<std::uint64_t> next{0};
  std::atomic<std::uint64_t> received{0};
  const std::uint64_t n = cfg.items;
  const std::uint64_t seed = cfg.seed;

  auto producer = [&](Proc& p) -> Task<void> {
    while (true) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= n) break;
      while (!co_await q.enqueue(p, demo_payload(i, seed))) co_await q.producer_poll(p);
    }
    while (received.load() < n) {
      co_await q.producer_poll(p);
      co_await p.yield();
    }
  };
  auto on_item = [&](Proc&, std::size_t, const Payload& payload) -> Task<void> {
    const std::uint64_t i = item_of(payload);
    if (i >= n || payload != demo_payload(i, seed)) {
      ++res.payload_mismatches;
    } else {
      ++seen[i];
    }
    received.fetch_add(1);
    co_return;
  };

  std::vector<std::unique_ptr<Proc>> procs;
  Scheduler sched(cfg.seed);
  const auto prod = mem.topology().procs_of(NodeId{0});
  const auto cons = mem.topology().procs_of(NodeId{1});
  for (std::uint32_t i = 0; i < cfg.producers; ++i) {
    procs.push_back(std::make_unique<Proc>(mem, prod[i]));
    sched.spawn(*procs.back(), producer(*procs.back()));
  }
  for (std::uint32_t i = 0; i < cfg.consumers; ++i) {
    procs.push_back(std::make_unique<Proc>(mem, cons[i]));
    sched.spawn(*procs.back(), q.dequeue_loop(*procs.back(), on_item, [&] { return received.load() >= n; }));
  }
  sched.run(std::max<std::uint64_t>(100'000'000, n * 20'000));

  res.stats = q.stats();
  res.enqueued = res.stats.enqueued;
  res.delivered = res.stats.delivered;
  res.steps = sched.steps();
  for (auto c : seen) {
    if (c == 0) ++res.lost;
    if (c > 1) res.duplicated += c - 1;
  }
  if (cfg.record) res.protocol_violations = slot_protocol_violations(mem.take_trace(), q).size();
  return res;
}

struct BakeryRunConfig {
  std::uint32_t nodes = 2;
  std::uint32_t procs_per_node = 2;
  std::uint32_t rounds = 2;
  std::uint64_t seed = 1;
  double eviction_rate = 0.02;
  bool read_side_flush = true;
  std::uint64_t max_steps = 5'000'000;
};

struct BakeryRunResult {
  std::uint64_t violations = 0;
  Value counter = 0;
  std::uint64_t expected = 0;
  bool completed = false;  // false when the step limit cut the run short
};

// Every participant runs `rounds` lock/unlock cycles; each critical section
// increments a shared counter non-atomically (flush, read, write, flush).
inline BakeryRunResult run_bakery(const BakeryRunConfig& cfg) {
  MemorySystem mem(build_topology(cfg.nodes, 1, 1, cfg.procs_per_node), {{"counter", 0}},
                   cfg.eviction_rate > 0 ? EvictionConfig::random(cfg.eviction_rate, cfg.seed) : EvictionConfig::off(),
                   false);
  const LocId counter = mem.loc("counter");
  std::vector<ProcId> ids;
  for (std::uint32_t i = 0; i < mem.topology().num_procs(); ++i) ids.push_back(ProcId{i});
  BakeryLock lock(mem, ids, "bakery", BakeryLock::Options{cfg.read_side_flush});
  auto body = [&](Proc& p) -> Task<void> {
    for (std::uint32_t r = 0; r < cfg.rounds; ++r) {
      co_await lock.acquire(p);
      co_await p.flush_line(counter);
      const Value c = co_await p.read(counter);
      co_await p.write(counter, c + 1);
      co_await p.flush_line(counter);
      co_await lock.release(p);
    }
  };
  std::vector<std::unique_ptr<Proc>> procs;
  Scheduler sched(cfg.seed);
  for (ProcId id : ids) {
    procs.push_back(std::make_unique<Proc>(mem, id));
    sched.spawn(*procs.back(), body(*procs.back()));
  }
  BakeryRunResult res;
  res.expected = std::uint64_t{cfg.rounds} * ids.size();
  try {
    sched.run(cfg.max_steps);
    res.completed = true;
  } catch (const StepLimitExceeded&) {
    res.completed = false;
  }
  res.violations = lock.violations();
  res.counter = mem.memory(counter);
  return res;
}

}  // namespace fedcoh::sync
