#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedcoh/memcore.hpp"
#include "fedcoh/sim.hpp"
#include "fedcoh/synclib/channel.hpp"

namespace fedcoh::sync {

// One 64-byte ring slot. Byte 0 is metadata (bit 0 used, bit 1 owner:
// 0 producer node / 1 consumer node, bits 2-7 zero); bytes 1..63 are payload.
// The line is stored as 8 little-endian words, one Location each; byte b lives
// in word b / 8 at bit offset 8 * (b % 8).
inline constexpr std::size_t kSlotWords = 8;
inline constexpr std::size_t kPayloadBytes = 63;
inline constexpr Value kUsedBit = 0x1;
inline constexpr Value kOwnerBit = 0x2;

using Payload = std::array<std::uint8_t, kPayloadBytes>;
using SlotLine = std::array<Value, kSlotWords>;

enum class SlotOwner : std::uint8_t { kProducer = 0, kConsumer = 1 };

struct SlotMeta {
  bool used = false;
  SlotOwner owner = SlotOwner::kProducer;

  std::uint8_t byte() const {
    return static_cast<std::uint8_t>((used ? kUsedBit : 0) | (owner == SlotOwner::kConsumer ? kOwnerBit : 0));
  }
  static SlotMeta from_word(Value w) {
    return {(w & kUsedBit) != 0, (w & kOwnerBit) != 0 ? SlotOwner::kConsumer : SlotOwner::kProducer};
  }
  friend bool operator==(const SlotMeta&, const SlotMeta&) = default;
};

inline SlotLine encode_slot(SlotMeta meta, const Payload& payload) {
  SlotLine line{};
  line[0] = meta.byte();
  for (std::size_t i = 0; i < kPayloadBytes; ++i) {
    const std::size_t b = i + 1;
    line[b / 8] |= Value{payload[i]} << (8 * (b % 8));
  }
  return line;
}

inline std::pair<SlotMeta, Payload> decode_slot(const SlotLine& line) {
  Payload payload{};
  for (std::size_t i = 0; i < kPayloadBytes; ++i) {
    const std::size_t b = i + 1;
    payload[i] = static_cast<std::uint8_t>(line[b / 8] >> (8 * (b % 8)));
  }
  return {SlotMeta::from_word(line[0]), payload};
}

struct QueueStats {
  std::uint64_t enqueued = 0;
  std::uint64_t delivered = 0;
  std::uint64_t notifications = 0;   // producer node -> consumer node
  std::uint64_t sleep_cycles = 1;    // times the whole consumer node went to sleep (starts asleep)
  std::uint64_t wakeups = 0;
  std::uint64_t full = 0;
};

// MPMC queue across two nodes: all producers on one node, all consumers on
// another, a ring of slots in shared memory. Slot ownership moves between the
// nodes through the metadata byte; within a node, cores arbitrate with CAS.
//
// Host-side state (not in simulated memory): the two notification channels,
// the consumer node's asleep-core registry, and per-producer scan cursors.
class MpmcQueue {
 public:
  using Handler = std::function<Task<void>(Proc&, std::size_t slot, const Payload&)>;
  using Idle = std::function<Task<void>(Proc&)>;

  MpmcQueue(MemorySystem& mem, std::size_t capacity, NodeId producer_node, NodeId consumer_node,
            const std::string& name = "q")
      : mem_(mem),
        capacity_(capacity),
        producer_node_(producer_node),
        consumer_node_(consumer_node),
        to_consumer_(producer_node, consumer_node, mem.topology().latencies().disagg),
        to_producer_(consumer_node, producer_node, mem.topology().latencies().disagg) {
    if (capacity == 0) throw UsageError("queue capacity must be >= 1");
    if (producer_node == consumer_node) throw UsageError("producer and consumer nodes must differ");
    if (index(producer_node) >= mem.topology().num_nodes() || index(consumer_node) >= mem.topology().num_nodes()) {
      throw UsageError("queue node outside the topology");
    }
    words_.reserve(capacity * kSlotWords);
    for (std::size_t s = 0; s < capacity; ++s) {
      for (std::size_t w = 0; w < kSlotWords; ++w) {
        words_.push_back(mem.add_location(name + "[" + std::to_string(s) + "]." + std::to_string(w), 0));
      }
    }
    last_reported_ = capacity - 1;
    last_processed_ = capacity - 1;
  }

  std::size_t capacity() const { return capacity_; }
  NodeId producer_node() const { return producer_node_; }
  NodeId consumer_node() const { return consumer_node_; }
  LocId word(std::size_t slot, std::size_t w) const { return words_.at(slot * kSlotWords + w); }
  LocId meta(std::size_t slot) const { return word(slot, 0); }
  bool is_meta(LocId l) const {
    for (std::size_t s = 0; s < capacity_; ++s) {
      if (meta(s) == l) return true;
    }
    return false;
  }
  Channel& to_consumer() { return to_consumer_; }
  Channel& to_producer() { return to_producer_; }

  QueueStats stats() const {
    std::lock_guard lock(mu_);
    return stats_;
  }

  // Claims a free slot, fills it, hands it to the consumer node and notifies
  // the consumer node if it is asleep. Returns the slot, or nullopt when a full
  // scan found no free slot.
  Task<std::optional<std::size_t>> enqueue(Proc& p, Payload payload) {
    require_node(p, producer_node_, "enqueue");
    std::size_t start;
    {
      std::lock_guard lock(mu_);
      auto [it, fresh] = cursors_.try_emplace(p.id(), capacity_ - 1);
      start = it->second;
    }
    for (std::size_t i = 1; i <= capacity_; ++i) {
      const std::size_t s = (start + i) % capacity_;
      co_await p.flush_line(meta(s));
      const auto claim = co_await p.cas(meta(s), 0, kUsedBit);
      if (!claim.success) continue;
      {
        std::lock_guard lock(mu_);
        cursors_[p.id()] = s;
      }
      const SlotLine line = encode_slot({true, SlotOwner::kConsumer}, payload);
      for (std::size_t w = 1; w < kSlotWords; ++w) {
        co_await p.write(word(s, w), line[w]);
        co_await p.flush_line(word(s, w));
      }
      co_await p.write(meta(s), line[0]);
      co_await p.flush_line(meta(s));
      drain_reports(p);
      bool notify = false;
      {
        std::lock_guard lock(mu_);
        ++stats_.enqueued;
        notify = std::exchange(consumer_asleep_, false);
        if (notify) ++stats_.notifications;
      }
      if (notify) to_consumer_.send(p, "slot:" + std::to_string(s));
      co_return s;
    }
    std::lock_guard lock(mu_);
    ++stats_.full;
    co_return std::nullopt;
  }

  // Producer-side housekeeping when idle: consume asleep reports and, if the
  // consumer node sleeps while a published slot is waiting, notify it.
  Task<void> producer_poll(Proc& p) {
    require_node(p, producer_node_, "producer_poll");
    drain_reports(p);
    std::size_t from;
    {
      std::lock_guard lock(mu_);
      if (!std::exchange(consumer_asleep_, false)) co_return;
      from = last_reported_;
    }
    for (std::size_t i = 1; i <= capacity_; ++i) {
      const std::size_t s = (from + i) % capacity_;
      co_await p.flush_line(meta(s));
      const auto m = SlotMeta::from_word(co_await p.read(meta(s)));
      if (m.used && m.owner == SlotOwner::kConsumer) {
        {
          std::lock_guard lock(mu_);
          ++stats_.notifications;
        }
        to_consumer_.send(p, "slot:" + std::to_string(s));
        co_return;
      }
    }
    std::lock_guard lock(mu_);
    consumer_asleep_ = true;
  }

  // Consumer core loop. Sleeps until the node is notified, then works through
  // consumer-owned slots from the notified one onward. Each payload goes to
  // exactly one core, which hands the slot back to the producer node before
  // calling on_item. Runs until stop() holds.
  Task<void> dequeue_loop(Proc& p, Handler on_item, std::function<bool()> stop, Idle idle = {}) {
    require_node(p, consumer_node_, "dequeue_loop");
    std::uint64_t my_epoch;
    {
      std::lock_guard lock(mu_);
      ++members_;
      ++asleep_;
      my_epoch = epoch_;
    }
    bool awake = false;
    std::size_t cursor = 0;
    while (!stop()) {
      if (!awake) {
        {
          std::lock_guard lock(mu_);
          if (epoch_ > my_epoch) {
            my_epoch = epoch_;
            cursor = wake_slot_;
            awake = true;
          }
        }
        if (awake) continue;
        if (auto msg = to_consumer_.try_recv(p)) {
          const std::size_t s = parse_index(*msg, "slot:");
          std::lock_guard lock(mu_);
          ++epoch_;
          wake_slot_ = s;
          asleep_ = 0;
          ++stats_.wakeups;
          continue;
        }
        if (idle) {
          co_await idle(p);
        } else {
          co_await p.yield();
        }
        continue;
      }

      const LocId m = meta(cursor);
      co_await p.flush_line(m);
      const Value w = co_await p.read(m);
      const SlotMeta sm = SlotMeta::from_word(w);
      if (sm.used && sm.owner == SlotOwner::kConsumer) {
        const auto won = co_await p.cas(m, w, w & ~kUsedBit);
        if (won.success) {
          SlotLine line{};
          line[0] = w;
          for (std::size_t k = 1; k < kSlotWords; ++k) {
            co_await p.flush_line(word(cursor, k));
            line[k] = co_await p.read(word(cursor, k));
          }
          co_await p.write(m, 0);
          co_await p.flush_line(m);
          {
            std::lock_guard lock(mu_);
            ++stats_.delivered;
            last_processed_ = cursor;
          }
          if (on_item) co_await on_item(p, cursor, decode_slot(line).second);
        }
      }

      const std::size_t next = (cursor + 1) % capacity_;
      co_await p.flush_line(meta(next));
      const SlotMeta nm = SlotMeta::from_word(co_await p.read(meta(next)));
      if (nm.owner == SlotOwner::kConsumer) {
        cursor = next;
        continue;
      }
      awake = false;
      bool report = false;
      std::size_t last = 0;
      {
        std::lock_guard lock(mu_);
        my_epoch = epoch_;
        if (++asleep_ == members_) {
          report = true;
          last = last_processed_;
          ++stats_.sleep_cycles;
        }
      }
      if (report) to_producer_.send(p, "asleep:" + std::to_string(last));
    }
    std::lock_guard lock(mu_);
    --members_;
    if (!awake) --asleep_;
  }

 private:
  void require_node(const Proc& p, NodeId n, const char* what) const {
    if (p.node() != n) throw UsageError(std::string(what) + ": " + to_string(p.id()) + " is on the wrong node");
  }

  static std::size_t parse_index(const std::string& msg, std::string_view prefix) {
    std::size_t v = 0;
    if (msg.rfind(prefix, 0) != 0) throw ProtocolError("unexpected notification " + msg);
    std::from_chars(msg.data() + prefix.size(), msg.data() + msg.size(), v);
    return v;
  }

  void drain_reports(Proc& p) {
    while (auto msg = to_producer_.try_recv(p)) {
      const std::size_t last = parse_index(*msg, "asleep:");
      std::lock_guard lock(mu_);
      consumer_asleep_ = true;
      last_reported_ = last;
    }
  }

  MemorySystem& mem_;
  std::size_t capacity_;
  NodeId producer_node_;
  NodeId consumer_node_;
  std::vector<LocId> words_;
  Channel to_consumer_;
  Channel to_producer_;

  mutable std::mutex mu_;
  // Producer node.
  bool consumer_asleep_ = true;
  std::size_t last_reported_;
  std::map<ProcId, std::size_t> cursors_;
  // Consumer node registry.
  std::uint64_t epoch_ = 0;
  std::size_t wake_slot_ = 0;
  std::size_t members_ = 0;
  std::size_t asleep_ = 0;
  std::size_t last_processed_;
  QueueStats stats_;
};

inline std::unique_ptr<MpmcQueue> queue_create(MemorySystem& mem, std::size_t capacity, NodeId producer_node,
                                               NodeId consumer_node, const std::string& name = "q") {
  return std::make_unique<MpmcQueue>(mem, capacity, producer_node, consumer_node, name);
}

// Checks the slot ownership protocol on a trace: the used bit is set only by a
// producer-node CAS and cleared only by a consumer-node CAS; the owner bit
// flips to consumer only on the producer node and back only on the consumer
// node. Returns offending seqs.
inline std::vector<Seq> slot_protocol_violations(const Trace& trace, const MpmcQueue& q) {
  std::vector<Seq> bad;
  std::map<std::pair<ProcId, LocId>, Value> view;  // last value each processor saw or wrote
  for (const auto& e : trace.events) {
    if (e.is_init() || e.op == OpKind::kEvict || !q.is_meta(e.loc)) continue;
    const auto key = std::make_pair(e.proc, e.loc);
    if (auto r = e.read_value()) view[key] = *r;
    const auto nv = e.written();
    if (!nv) continue;
    const Value before = view.count(key) ? view[key] : 0;
    const auto from = SlotMeta::from_word(before);
    const auto to = SlotMeta::from_word(*nv);
    const bool producer = e.node == q.producer_node();
    const bool consumer = e.node == q.consumer_node();
    const bool is_cas = e.op == OpKind::kRmw;
    if (!from.used && to.used && !(producer && is_cas)) bad.push_back(e.seq);
    if (from.used && !to.used && !(consumer && is_cas)) bad.push_back(e.seq);
    if (from.owner == SlotOwner::kProducer && to.owner == SlotOwner::kConsumer && !producer) bad.push_back(e.seq);
    if (from.owner == SlotOwner::kConsumer && to.owner == SlotOwner::kProducer && !consumer) bad.push_back(e.seq);
    view[key] = *nv;
  }
  return bad;
}

}  // namespace fedcoh::sync
